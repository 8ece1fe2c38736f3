"""
src - Simulador FedSiam (aprendizado federado semi-supervisionado siames).

Este pacote contem os modulos do simulador:
- constants: Constantes, padroes e nomes de colunas
- errors: Hierarquia de excecoes
- nn_core: Rede densa, perdas e SGD
- data / io: Datasets, particoes e leitura de CSV
- siamese: Treino local online/target
- fedselect: FSM, curvas de tau e selecao de camadas
- fedcore: Laco federado
- config / experiment: Configuracao e execucoes
- reports / export: Tabelas, comparacoes e exportacao
"""

from .constants import *
from .errors import (
    FedSiamError,
    ShapeError,
    ContractError,
    DataValidationError,
    PartitionError,
    ScenarioError,
    ProtocolError,
    AggregationError,
    ConfigError,
    ComparisonError,
)
from .nn_core import (
    Batch,
    Layer,
    LayeredParams,
    OptimizerState,
    init_params,
    forward,
    backward,
    cross_entropy_loss,
    mse_consistency,
    kl_consistency,
    sgd_step,
)
from .data import (
    Dataset,
    ClientShard,
    PartitionSpec,
    gen_synthetic_blobs,
    perturb,
    partition,
    split_train_test,
)
from .io import load_csv_dataset
from .siamese import (
    Schedules,
    SiameseState,
    alpha_schedule,
    beta_schedule,
    ema_update,
    local_train_labels_at_client,
    local_train_labels_at_server,
    local_train_supervised,
    server_update,
)
from .fedselect import (
    FsmVector,
    DivergenceLog,
    TauSchedule,
    fsm,
    tau,
    tau_linear,
    tau_rectangle,
    tau_budget,
    update_log,
    boundary,
    select_layers,
)
from .fedcore import (
    Variant,
    UploadPacket,
    GlobalModel,
    CommMeter,
    FederationSettings,
    World,
    sample_clients,
    build_upload,
    splice,
    aggregate,
    broadcast,
    init_world,
    run_round,
    evaluate,
)
from .config import ExperimentConfig, parse_config, serialize_config
from .experiment import (
    RunRecord,
    run_experiment,
    run_fedavg_baseline,
    run_replicates,
    write_run,
    load_run,
    partition_audit,
)
from .reports import compare_runs, partition_audit_frame, summarize_metrics
from .export import to_csv_bytes, to_excel_bytes, write_comparison
