"""
constants.py - Constantes e configuracoes do simulador FedSiam.

Define nomes de colunas dos CSVs de saida, valores padrao dos hiperparametros
e textos da interface, para garantir consistencia em todo o projeto.
"""

# =============================================================================
# CENARIOS, CONFIGURACOES DE PARTICAO E VARIANTES
# =============================================================================
SCENARIO_LABELS_AT_CLIENT = "labels-at-client"
SCENARIO_LABELS_AT_SERVER = "labels-at-server"
SCENARIOS = [SCENARIO_LABELS_AT_CLIENT, SCENARIO_LABELS_AT_SERVER]

SETTING_IID = "IID"
SETTING_NONIID_I = "NonIID-I"
SETTING_NONIID_II = "NonIID-II"
SETTING_NONIID_III = "NonIID-III"
SETTING_LS_IID = "LS-IID"
SETTING_LS_NONIID = "LS-NonIID"

SETTINGS_CLIENT = [SETTING_IID, SETTING_NONIID_I, SETTING_NONIID_II, SETTING_NONIID_III]
SETTINGS_SERVER = [SETTING_LS_IID, SETTING_LS_NONIID]
SETTINGS = SETTINGS_CLIENT + SETTINGS_SERVER

VARIANT_PI = "Pi"
VARIANT_MT = "MT"
VARIANT_D = "D"
VARIANT_FEDAVG = "FedAvg"
VARIANTS = [VARIANT_PI, VARIANT_MT, VARIANT_D, VARIANT_FEDAVG]
SIAMESE_VARIANTS = [VARIANT_PI, VARIANT_MT, VARIANT_D]

CURVE_LINEAR = "linear"
CURVE_RECTANGLE = "rectangle"
CURVES = [CURVE_LINEAR, CURVE_RECTANGLE]

LOSS_MSE = "mse"
LOSS_KL = "kl"
CONSISTENCY_LOSSES = [LOSS_MSE, LOSS_KL]

ALPHA_RAMP = "ramp"
ALPHA_CONSTANT = "constant"
ALPHA_MODES = [ALPHA_RAMP, ALPHA_CONSTANT]

DATASET_BLOBS = "blobs"
DATASET_CSV = "csv"
DATASET_KINDS = [DATASET_BLOBS, DATASET_CSV]

ACTIVATION_RELU = "relu"
ACTIVATION_TANH = "tanh"
ACTIVATIONS = [ACTIVATION_RELU, ACTIVATION_TANH]

EVAL_NET_TARGET = "target"
EVAL_NET_ONLINE = "online"
EVAL_NETS = [EVAL_NET_TARGET, EVAL_NET_ONLINE]

# =============================================================================
# HIPERPARAMETROS COMPARTILHADOS
# =============================================================================
DEFAULT_ROUNDS = 50          # R_G
DEFAULT_CLIENTS = 100        # K
DEFAULT_ACTIVE_CLIENTS = 10  # B
DEFAULT_LOCAL_EPOCHS = 5     # R_L
DEFAULT_BATCH_TRAIN = 10     # BS_tr
DEFAULT_BATCH_TEST = 128     # BS_te
DEFAULT_LABEL_FRACTION = 0.1  # gamma
DEFAULT_LR = 0.01
DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 1e-4
DEFAULT_SEED = 1234

# =============================================================================
# HIPERPARAMETROS DO FEDSIAM
# =============================================================================
DEFAULT_ALPHA_MAX = 0.999
DEFAULT_PHI_L = 10
DEFAULT_PHI_G_LINEAR = 3
DEFAULT_PHI_G_RECTANGLE = 10
DEFAULT_VARPHI_G = 40
DEFAULT_MU = 0.5             # tau_g, lido como meta de reducao
DEFAULT_BETA_MAX = 1.0

# Rampa do beta: exp(-5 (1 - t)^2)
BETA_RAMP_SHARPNESS = 5.0

# =============================================================================
# PARTICAO
# =============================================================================
DEFAULT_CLASSES_PER_CLIENT = 2  # C'
NONIID_III_HIGH_FRACTION = 0.10  # fracao de clientes com razao alta
NONIID_III_RATIO_HIGH = 0.55
NONIID_III_RATIO_LOW = 0.05

# =============================================================================
# NUMERICA
# =============================================================================
KL_EPSILON = 1e-12
DEFAULT_SIGMA_BLOBS = 0.1
DEFAULT_SIGMA_CSV = 0.05
DEFAULT_HIDDEN = (32,)

# Finalidades dos fluxos aleatorios derivados de (seed, rodada, cliente)
STREAM_INIT = 0
STREAM_DATA = 1
STREAM_PARTITION = 2
STREAM_SAMPLING = 3
STREAM_CLIENT = 4
STREAM_SERVER = 5

ENV_THREADS = "FEDSIAM_THREADS"

# =============================================================================
# ARQUIVOS DE SAIDA
# =============================================================================
FILE_METRICS = "metrics.csv"
FILE_SNAPSHOT = "config.snapshot"
FILE_SUMMARY = "summary.txt"
FILE_FSM_LOG = "fsm_log.csv"
FILE_PARTITION_AUDIT = "partition_audit.csv"
FILE_REPLICATES = "replicates.csv"
FILE_COMPARISON_CSV = "comparison.csv"
FILE_COMPARISON_TXT = "comparison.txt"
FILE_COMPARISON_XLSX = "comparison.xlsx"

# =============================================================================
# COLUNAS DO CSV DE METRICAS
# =============================================================================
COL_ROUND = "round"
COL_VARIANT = "variant"
COL_SCENARIO = "scenario"
COL_SETTING = "setting"
COL_TEST_ACC = "test_acc"
COL_LOSS_CLS = "train_loss_cls"
COL_LOSS_CONS = "train_loss_cons"
COL_TAU = "tau"
COL_BOUNDARY = "boundary"
COL_SKIPPED_FRAC = "layers_skipped_frac"
COL_UPLOAD_CUM = "upload_scalars_cum"
COL_DOWNLOAD_CUM = "download_scalars_cum"
COL_ALPHA_MEAN = "alpha_mean"
COL_BETA = "beta"

METRICS_COLUMNS = [
    COL_ROUND,
    COL_VARIANT,
    COL_SCENARIO,
    COL_SETTING,
    COL_TEST_ACC,
    COL_LOSS_CLS,
    COL_LOSS_CONS,
    COL_TAU,
    COL_BOUNDARY,
    COL_SKIPPED_FRAC,
    COL_UPLOAD_CUM,
    COL_DOWNLOAD_CUM,
    COL_ALPHA_MEAN,
    COL_BETA,
]

# Linha de resumo ao final do metrics.csv
SUMMARY_ROUND_LABEL = "summary"

# =============================================================================
# COLUNAS DO LOG DE FSM E DA AUDITORIA DE PARTICAO
# =============================================================================
COL_CLIENT_ID = "client_id"
COL_LAYER = "layer"
COL_FSM = "fsm"
COL_SKIPPED = "skipped"

FSM_LOG_COLUMNS = [COL_ROUND, COL_CLIENT_ID, COL_LAYER, COL_FSM, COL_BOUNDARY, COL_SKIPPED]

COL_N_LABELED = "n_labeled"
COL_N_UNLABELED = "n_unlabeled"
COL_CLASSES_LABELED = "classes_labeled"
COL_CLASSES_UNLABELED = "classes_unlabeled"

PARTITION_AUDIT_COLUMNS = [
    COL_CLIENT_ID,
    COL_N_LABELED,
    COL_N_UNLABELED,
    COL_CLASSES_LABELED,
    COL_CLASSES_UNLABELED,
]

# Cliente "server" na auditoria (dados rotulados do servidor)
SERVER_CLIENT_ID = "server"

# =============================================================================
# COLUNAS DA COMPARACAO
# =============================================================================
COL_RUN = "run"
COL_SEED = "seed"
COL_BEST_ACC = "best_acc"
COL_FINAL_ACC = "final_acc"
COL_ROUNDS_TO_TARGET = "rounds_to_target"
COL_UPLOAD_TOTAL = "upload_scalars_total"
COL_DOWNLOAD_TOTAL = "download_scalars_total"
COL_COMM_TOTAL = "comm_scalars_total"
COL_COMM_RELATIVE = "comm_relative"
COL_DELTA_BEST = "delta_best_acc"
COL_WALL_CLOCK = "wall_clock_s"

COMPARISON_COLUMNS = [
    COL_RUN,
    COL_VARIANT,
    COL_SCENARIO,
    COL_SETTING,
    COL_SEED,
    COL_BEST_ACC,
    COL_FINAL_ACC,
    COL_DELTA_BEST,
    COL_ROUNDS_TO_TARGET,
    COL_UPLOAD_TOTAL,
    COL_DOWNLOAD_TOTAL,
    COL_COMM_TOTAL,
    COL_COMM_RELATIVE,
]

# Fracao do melhor resultado usada como alvo padrao em rounds_to_target
DEFAULT_TARGET_FRACTION = 0.9

# =============================================================================
# TEXTOS DA INTERFACE
# =============================================================================
APP_TITLE = "FedSiam Runs"
APP_SUBTITLE = "Acuracia e custo de comunicacao por rodada"
APP_ICON = ":chart_with_upwards_trend:"

TAB_CURVAS = "Curvas"
TAB_COMUNICACAO = "Comunicacao"
TAB_COMPARACAO = "Comparacao"
TAB_FSM = "FSM"

# =============================================================================
# FORMATACAO
# =============================================================================
FORMATO_PERCENTUAL = "{:.2f}%"
FORMATO_NUMERO = "{:,.0f}"
FORMATO_REAL = "{:.6f}"
