"""
config.py - Configuracao de experimentos (arquivo INI + overrides).

Este modulo contem:
- ExperimentConfig: todos os parametros de uma execucao, com os padroes
  de constants.py
- parse_config: leitura de arquivo INI e overrides `chave=valor`
- serialize_config: texto INI que reproduz a configuracao (config.snapshot)
- Conversao para PartitionSpec, Schedules, TauSchedule e FederationSettings
"""

import configparser
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union, get_args, get_origin

from .constants import (
    ACTIVATION_RELU,
    ACTIVATIONS,
    ALPHA_RAMP,
    CONSISTENCY_LOSSES,
    CURVE_LINEAR,
    CURVE_RECTANGLE,
    DATASET_BLOBS,
    DATASET_CSV,
    DATASET_KINDS,
    DEFAULT_ACTIVE_CLIENTS,
    DEFAULT_ALPHA_MAX,
    DEFAULT_BATCH_TEST,
    DEFAULT_BATCH_TRAIN,
    DEFAULT_BETA_MAX,
    DEFAULT_CLASSES_PER_CLIENT,
    DEFAULT_CLIENTS,
    DEFAULT_HIDDEN,
    DEFAULT_LABEL_FRACTION,
    DEFAULT_LOCAL_EPOCHS,
    DEFAULT_LR,
    DEFAULT_MOMENTUM,
    DEFAULT_MU,
    DEFAULT_PHI_G_LINEAR,
    DEFAULT_PHI_G_RECTANGLE,
    DEFAULT_PHI_L,
    DEFAULT_ROUNDS,
    DEFAULT_SEED,
    DEFAULT_SIGMA_BLOBS,
    DEFAULT_SIGMA_CSV,
    DEFAULT_VARPHI_G,
    DEFAULT_WEIGHT_DECAY,
    EVAL_NET_TARGET,
    EVAL_NETS,
    NONIID_III_HIGH_FRACTION,
    NONIID_III_RATIO_HIGH,
    NONIID_III_RATIO_LOW,
    SCENARIO_LABELS_AT_CLIENT,
    SETTING_IID,
    VARIANT_D,
    VARIANTS,
)
from .data import PartitionSpec
from .errors import ConfigError
from .fedcore import FederationSettings, Variant
from .fedselect import TauSchedule
from .siamese import Schedules

logger = logging.getLogger(__name__)

SECTIONS = ["experiment", "data", "model", "federation", "optimizer", "siamese", "selection", "output"]


def _campo(secao: str, padrao: Any):
    return field(default=padrao, metadata={"section": secao})


# =============================================================================
# CONFIGURACAO
# =============================================================================
@dataclass(frozen=True)
class ExperimentConfig:
    """
    Parametros de uma execucao completa.

    phi_g e perturb_sigma aceitam None e sao resolvidos na construcao:
    phi_g = 3 (curva linear) ou 10 (retangular); sigma = 0.1 (blobs) ou 0.05 (csv).
    """

    # [experiment]
    name: str = _campo("experiment", "fedsiam")
    scenario: str = _campo("experiment", SCENARIO_LABELS_AT_CLIENT)
    setting: str = _campo("experiment", SETTING_IID)
    variant: str = _campo("experiment", VARIANT_D)
    seed: int = _campo("experiment", DEFAULT_SEED)
    seeds: Tuple[int, ...] = _campo("experiment", ())

    # [data]
    dataset: str = _campo("data", DATASET_BLOBS)
    csv_path: str = _campo("data", "")
    has_header: bool = _campo("data", False)
    normalize: bool = _campo("data", False)
    n_classes: int = _campo("data", 4)
    dim: int = _campo("data", 16)
    n_train_per_class: int = _campo("data", 250)
    n_test_per_class: int = _campo("data", 100)
    spread: float = _campo("data", 0.6)
    separation: float = _campo("data", 1.0)
    label_fraction: float = _campo("data", DEFAULT_LABEL_FRACTION)
    classes_per_client: int = _campo("data", DEFAULT_CLASSES_PER_CLIENT)
    ratio_high: float = _campo("data", NONIID_III_RATIO_HIGH)
    ratio_low: float = _campo("data", NONIID_III_RATIO_LOW)
    high_fraction: float = _campo("data", NONIID_III_HIGH_FRACTION)

    # [model]
    hidden: Tuple[int, ...] = _campo("model", DEFAULT_HIDDEN)
    activation: str = _campo("model", ACTIVATION_RELU)

    # [federation]
    n_clients: int = _campo("federation", DEFAULT_CLIENTS)
    active_clients: int = _campo("federation", DEFAULT_ACTIVE_CLIENTS)
    rounds: int = _campo("federation", DEFAULT_ROUNDS)
    local_epochs: int = _campo("federation", DEFAULT_LOCAL_EPOCHS)
    batch_train: int = _campo("federation", DEFAULT_BATCH_TRAIN)
    batch_test: int = _campo("federation", DEFAULT_BATCH_TEST)
    server_epochs: int = _campo("federation", 1)
    eval_net: str = _campo("federation", EVAL_NET_TARGET)

    # [optimizer]
    lr: float = _campo("optimizer", DEFAULT_LR)
    momentum: float = _campo("optimizer", DEFAULT_MOMENTUM)
    weight_decay: float = _campo("optimizer", DEFAULT_WEIGHT_DECAY)

    # [siamese]
    alpha_max: float = _campo("siamese", DEFAULT_ALPHA_MAX)
    alpha_mode: str = _campo("siamese", ALPHA_RAMP)
    phi_l: int = _campo("siamese", DEFAULT_PHI_L)
    beta_max: float = _campo("siamese", DEFAULT_BETA_MAX)
    consistency_loss: str = _campo("siamese", CONSISTENCY_LOSSES[0])
    perturb_sigma: Optional[float] = _campo("siamese", None)
    pi_warmup: bool = _campo("siamese", False)
    augment_labeled: bool = _campo("siamese", False)

    # [selection]
    curve: str = _campo("selection", CURVE_LINEAR)
    mu: float = _campo("selection", DEFAULT_MU)
    phi_g: Optional[int] = _campo("selection", None)
    varphi_g: int = _campo("selection", DEFAULT_VARPHI_G)

    # [output]
    output_dir: str = _campo("output", "runs")

    def __post_init__(self):
        if self.phi_g is None:
            padrao = DEFAULT_PHI_G_RECTANGLE if self.curve == CURVE_RECTANGLE else DEFAULT_PHI_G_LINEAR
            object.__setattr__(self, "phi_g", padrao)
        if self.perturb_sigma is None:
            padrao = DEFAULT_SIGMA_CSV if self.dataset == DATASET_CSV else DEFAULT_SIGMA_BLOBS
            object.__setattr__(self, "perturb_sigma", padrao)
        object.__setattr__(self, "seeds", tuple(self.seeds))
        object.__setattr__(self, "hidden", tuple(self.hidden))

    @property
    def seed_list(self) -> List[int]:
        """Seeds das replicas; sem `seeds`, apenas `seed`."""
        return list(self.seeds) if self.seeds else [self.seed]

    # -------------------------------------------------------------------------
    # Conversoes para os tipos dos modulos
    # -------------------------------------------------------------------------
    def partition_spec(self) -> PartitionSpec:
        return PartitionSpec(
            scenario=self.scenario,
            setting=self.setting,
            gamma=self.label_fraction,
            n_clients=self.n_clients,
            classes_per_client=self.classes_per_client,
            seed=self.seed,
            ratio_high=self.ratio_high,
            ratio_low=self.ratio_low,
            high_fraction=self.high_fraction,
        )

    def schedules(self) -> Schedules:
        return Schedules(self.alpha_max, self.phi_l, self.beta_max, self.alpha_mode)

    def tau_schedule(self) -> TauSchedule:
        return TauSchedule(self.curve, self.mu, self.phi_g, self.rounds, self.varphi_g)

    def federation_settings(self, threads: Optional[int] = None) -> FederationSettings:
        return FederationSettings(
            variant=Variant(self.variant),
            scenario=self.scenario,
            setting=self.setting,
            n_clients=self.n_clients,
            active_clients=self.active_clients,
            total_rounds=self.rounds,
            local_epochs=self.local_epochs,
            batch_train=self.batch_train,
            batch_test=self.batch_test,
            loss_kind=self.consistency_loss,
            sigma=self.perturb_sigma,
            seed=self.seed,
            schedules=self.schedules(),
            tau_schedule=self.tau_schedule() if self.variant == VARIANT_D else None,
            eval_net=self.eval_net,
            lr=self.lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            server_epochs=self.server_epochs,
            pi_warmup=self.pi_warmup,
            augment_labeled=self.augment_labeled,
            threads=threads,
        )

    # -------------------------------------------------------------------------
    # Validacao
    # -------------------------------------------------------------------------
    def validate(self) -> List[str]:
        """
        Valida todas as restricoes e devolve avisos nao fatais.

        Raises:
            ConfigError: Primeira restricao violada, com a chave
        """
        avisos = []
        if self.variant not in VARIANTS:
            raise ConfigError("variant", f"deve ser um de {VARIANTS}")
        self.partition_spec().validate()
        if not 1 <= self.active_clients <= self.n_clients:
            raise ConfigError(
                "active_clients", f"exige 1 <= B <= K (B={self.active_clients}, K={self.n_clients})"
            )
        for chave in ("rounds", "local_epochs", "batch_train", "batch_test", "server_epochs"):
            if getattr(self, chave) < 1:
                raise ConfigError(chave, "deve ser >= 1")
        if self.lr <= 0:
            raise ConfigError("lr", "deve ser > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum", "deve estar em [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay", "deve ser >= 0")
        if self.perturb_sigma < 0:
            raise ConfigError("perturb_sigma", "deve ser >= 0")
        if self.consistency_loss not in CONSISTENCY_LOSSES:
            raise ConfigError("consistency_loss", f"deve ser um de {CONSISTENCY_LOSSES}")
        if self.eval_net not in EVAL_NETS:
            raise ConfigError("eval_net", f"deve ser um de {EVAL_NETS}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError("activation", f"deve ser um de {ACTIVATIONS}")
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden", "larguras das camadas ocultas devem ser >= 1")
        self.schedules()
        if self.variant == VARIANT_D:
            self.tau_schedule()

        if self.dataset not in DATASET_KINDS:
            raise ConfigError("dataset", f"deve ser um de {DATASET_KINDS}")
        if self.dataset == DATASET_CSV and not self.csv_path:
            raise ConfigError("csv_path", "obrigatorio quando dataset = csv")
        if self.dataset == DATASET_BLOBS:
            if self.n_classes < 2:
                raise ConfigError("n_classes", "deve ser >= 2")
            if self.dim < self.n_classes:
                raise ConfigError("dim", f"blobs exigem dim >= n_classes ({self.dim} < {self.n_classes})")
            if self.n_train_per_class < 1:
                raise ConfigError("n_train_per_class", "deve ser >= 1")
        if self.n_test_per_class < 1:
            raise ConfigError("n_test_per_class", "deve ser >= 1")
        if len(set(self.seed_list)) != len(self.seed_list):
            raise ConfigError("seeds", "seeds repetidas")

        if self.variant != VARIANT_D and self.pi_warmup:
            avisos.append("pi_warmup so tem efeito na variante D")
        if self.variant == VARIANT_D and self.mu == 1.0:
            avisos.append("mu = 1: a variante D nunca pula camadas (equivale a MT)")
        return avisos


# =============================================================================
# CONVERSAO DE TIPOS
# =============================================================================
_CAMPOS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _to_bool(chave: str, texto: str) -> bool:
    valor = texto.strip().lower()
    if valor in ("true", "1", "yes", "sim", "on"):
        return True
    if valor in ("false", "0", "no", "nao", "off"):
        return False
    raise ConfigError(chave, f"esperado booleano (true/false), recebido '{texto}'")


def _to_int_tuple(chave: str, texto: str) -> Tuple[int, ...]:
    partes = [p.strip() for p in texto.split(",") if p.strip()]
    try:
        return tuple(int(p) for p in partes)
    except ValueError:
        raise ConfigError(chave, f"esperada lista de inteiros separados por virgula, recebido '{texto}'")


def _base_type(tipo: Any) -> Tuple[Any, bool]:
    """Tipo base do campo e se ele aceita None."""
    if get_origin(tipo) is Union:
        args = [a for a in get_args(tipo) if a is not type(None)]
        return args[0], True
    return tipo, False


def _coerce(chave: str, texto: str) -> Any:
    """Converte o texto do INI para o tipo do campo."""
    tipo, opcional = _base_type(_CAMPOS[chave].type)
    texto = texto.strip()
    if get_origin(tipo) is tuple:
        return _to_int_tuple(chave, texto)
    if opcional and texto == "":
        return None
    if tipo is bool:
        return _to_bool(chave, texto)
    if tipo in (int, float):
        try:
            return tipo(texto)
        except ValueError:
            raise ConfigError(chave, f"tipo invalido: esperado {tipo.__name__}, recebido '{texto}'")
    return texto


def _format(valor: Any) -> str:
    if isinstance(valor, bool):
        return "true" if valor else "false"
    if isinstance(valor, tuple):
        return ",".join(str(v) for v in valor)
    if isinstance(valor, float):
        return repr(valor)
    return str(valor)


# =============================================================================
# LEITURA / ESCRITA
# =============================================================================
def _ler_ini(texto: str, origem: str) -> Dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(texto, source=origem)
    except configparser.Error as e:
        raise ConfigError(origem, f"INI malformado: {str(e).splitlines()[0]}")

    valores = {}
    for secao in parser.sections():
        if secao not in SECTIONS:
            raise ConfigError(secao, f"secao desconhecida (validas: {SECTIONS})")
        for chave, bruto in parser.items(secao):
            if chave not in _CAMPOS:
                raise ConfigError(f"{secao}.{chave}", "chave desconhecida")
            esperado = _CAMPOS[chave].metadata["section"]
            if esperado != secao:
                raise ConfigError(f"{secao}.{chave}", f"pertence a secao [{esperado}]")
            valores[chave] = bruto
    return valores


def parse_overrides(overrides: Sequence[str]) -> Dict[str, str]:
    """
    Converte `chave=valor` (ou `secao.chave=valor`) em dicionario.

    Raises:
        ConfigError: Override malformado ou chave desconhecida
    """
    valores = {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(item, "override deve ter a forma chave=valor")
        chave, valor = item.split("=", 1)
        chave = chave.strip()
        if "." in chave:
            secao, chave = chave.split(".", 1)
            if chave in _CAMPOS and _CAMPOS[chave].metadata["section"] != secao:
                raise ConfigError(f"{secao}.{chave}", f"pertence a secao [{_CAMPOS[chave].metadata['section']}]")
        if chave not in _CAMPOS:
            raise ConfigError(chave, "chave desconhecida")
        valores[chave] = valor
    return valores


def parse_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Sequence[str]] = None,
    text: Optional[str] = None,
) -> Tuple[ExperimentConfig, List[str]]:
    """
    Le a configuracao de um arquivo INI (ou texto) e aplica overrides.

    Args:
        path: Caminho do arquivo INI (opcional)
        overrides: Lista de `chave=valor`, aplicada por cima do arquivo
        text: Conteudo INI ja carregado (alternativa a path)

    Returns:
        Tupla (ExperimentConfig validada, lista de avisos)

    Raises:
        ConfigError: Chave desconhecida, tipo invalido ou restricao violada
    """
    brutos: Dict[str, str] = {}
    if path is not None:
        caminho = Path(path)
        if not caminho.exists():
            raise ConfigError(str(caminho), "arquivo de configuracao nao encontrado")
        brutos.update(_ler_ini(caminho.read_text(encoding="utf-8"), str(caminho)))
    if text is not None:
        brutos.update(_ler_ini(text, "<texto>"))
    brutos.update(parse_overrides(overrides or []))

    valores = {chave: _coerce(chave, bruto) for chave, bruto in brutos.items()}
    config = ExperimentConfig(**valores)
    avisos = config.validate()
    for aviso in avisos:
        logger.warning(aviso)
    return config, avisos


def serialize_config(config: ExperimentConfig) -> str:
    """Texto INI com todas as chaves resolvidas; parse_config(text=...) o reconstroi igual."""
    linhas = []
    for secao in SECTIONS:
        linhas.append(f"[{secao}]")
        for f in dataclasses.fields(config):
            if f.metadata["section"] == secao:
                linhas.append(f"{f.name} = {_format(getattr(config, f.name))}")
        linhas.append("")
    return "\n".join(linhas)
