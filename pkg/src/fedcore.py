"""
fedcore.py - Laco federado: amostragem, upload, splice, agregacao e broadcast.

Este modulo contem:
- UploadPacket / GlobalModel / CommMeter: mensagens e contabilidade de escalares
- sample_clients, build_upload, splice, aggregate, broadcast
- run_round: uma rodada completa com treino local em paralelo
- evaluate: acuracia do modelo global no conjunto de teste

O servidor e dono do estado entre barreiras; workers recebem copias e
devolvem novos estados. Resultados sao coletados na ordem da amostragem,
entao a execucao serial e a paralela produzem os mesmos numeros.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    COL_ALPHA_MEAN,
    COL_BETA,
    COL_BOUNDARY,
    COL_CLIENT_ID,
    COL_DOWNLOAD_CUM,
    COL_FSM,
    COL_LAYER,
    COL_LOSS_CLS,
    COL_LOSS_CONS,
    COL_ROUND,
    COL_SCENARIO,
    COL_SETTING,
    COL_SKIPPED,
    COL_SKIPPED_FRAC,
    COL_TAU,
    COL_TEST_ACC,
    COL_UPLOAD_CUM,
    COL_VARIANT,
    ENV_THREADS,
    EVAL_NET_ONLINE,
    EVAL_NET_TARGET,
    EVAL_NETS,
    SCENARIO_LABELS_AT_CLIENT,
    SCENARIO_LABELS_AT_SERVER,
    STREAM_CLIENT,
    STREAM_SAMPLING,
    STREAM_SERVER,
    VARIANT_D,
    VARIANT_FEDAVG,
    VARIANT_MT,
    VARIANT_PI,
    VARIANTS,
)
from .data import ClientShard, Dataset
from .errors import AggregationError, ConfigError, ProtocolError, ScenarioError, ShapeError
from .fedselect import (
    NEG_INF,
    DivergenceLog,
    FsmVector,
    TauSchedule,
    boundary,
    fsm,
    select_layers,
    tau,
    update_log,
)
from .nn_core import Batch, Layer, LayeredParams, OptimizerState, check_congruent, forward, weighted_sum
from .siamese import (
    Schedules,
    SiameseState,
    TrainStats,
    beta_schedule,
    local_train_labels_at_client,
    local_train_labels_at_server,
    local_train_supervised,
    server_update,
)

logger = logging.getLogger(__name__)


# =============================================================================
# TIPOS
# =============================================================================
@dataclass
class Variant:
    """Variante do protocolo: Pi, MT, D (FedSiam) ou FedAvg (baseline)."""

    kind: str

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ConfigError("variant", f"deve ser um de {VARIANTS}")

    @property
    def siamese(self) -> bool:
        return self.kind != VARIANT_FEDAVG

    @property
    def uploads_online(self) -> bool:
        """Pi e FedAvg enviam uma unica rede."""
        return self.kind in (VARIANT_MT, VARIANT_D)

    @property
    def nets_downloaded(self) -> int:
        return 2 if self.siamese else 1


@dataclass
class UploadPacket:
    """
    Mensagem cliente -> servidor.

    online_layers traz (indice, camada) apenas das posicoes True da mascara;
    fsm e None quando a variante envia uma unica rede.
    """

    client_id: str
    target: LayeredParams
    online_layers: List[Tuple[int, Layer]]
    mask: np.ndarray
    fsm: Optional[FsmVector]
    n_samples: int

    def scalar_count(self) -> int:
        """Escalares serializados: target + camadas online enviadas + FSM."""
        total = self.target.scalar_count()
        total += sum(layer.size for _, layer in self.online_layers)
        if self.fsm is not None:
            total += len(self.fsm)
        return total


@dataclass
class GlobalModel:
    """Par global theta^G (online e target) e a rodada que o produziu."""

    online: LayeredParams
    target: LayeredParams
    round: int = 0

    def __post_init__(self):
        check_congruent(self.online, self.target, "GlobalModel")

    def net(self, qual: str) -> LayeredParams:
        if qual not in EVAL_NETS:
            raise ConfigError("eval_net", f"deve ser um de {EVAL_NETS}")
        return self.target if qual == EVAL_NET_TARGET else self.online


@dataclass
class CommMeter:
    """Contadores cumulativos de escalares enviados e recebidos, com detalhe por rodada."""

    uploaded_scalars: int = 0
    downloaded_scalars: int = 0
    per_round: Dict[int, Dict[str, int]] = field(default_factory=dict)

    def _rodada(self, r_g: int) -> Dict[str, int]:
        return self.per_round.setdefault(r_g, {"upload": 0, "download": 0})

    def credit_upload(self, r_g: int, n: int) -> None:
        if n < 0:
            raise ValueError("credito negativo")
        self.uploaded_scalars += n
        self._rodada(r_g)["upload"] += n

    def credit_download(self, r_g: int, n: int) -> None:
        if n < 0:
            raise ValueError("credito negativo")
        self.downloaded_scalars += n
        self._rodada(r_g)["download"] += n


@dataclass
class FederationSettings:
    """Parametros da simulacao consumidos pelo laco de rodadas."""

    variant: Variant
    scenario: str
    setting: str
    n_clients: int
    active_clients: int
    total_rounds: int
    local_epochs: int
    batch_train: int
    batch_test: int
    loss_kind: str
    sigma: float
    seed: int
    schedules: Schedules
    tau_schedule: Optional[TauSchedule] = None
    eval_net: str = EVAL_NET_TARGET
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    server_epochs: int = 1
    pi_warmup: bool = False
    augment_labeled: bool = False
    threads: Optional[int] = None


@dataclass
class World:
    """Estado completo da simulacao entre rodadas (propriedade do servidor)."""

    settings: FederationSettings
    global_model: GlobalModel
    clients: Dict[str, SiameseState]
    shards: Dict[str, ClientShard]
    test_set: Dataset
    server_shard: Optional[ClientShard] = None
    log: Optional[DivergenceLog] = None
    boundary: float = NEG_INF
    tau_applied: float = 0.0
    server_step: int = 0
    meter: CommMeter = field(default_factory=CommMeter)
    fsm_rows: List[dict] = field(default_factory=list)


@dataclass
class _ClientResult:
    client_id: str
    state: SiameseState
    stats: TrainStats
    fsm: Optional[FsmVector]
    mask: np.ndarray


# =============================================================================
# OPERACOES DO PROTOCOLO
# =============================================================================
def sample_clients(n_clients: int, active: int, r_g: int, seed: int) -> List[str]:
    """
    Sorteia `active` clientes distintos, sem reposicao, deterministico por (seed, rodada).

    Raises:
        ConfigError: Se B > K ou B < 1
    """
    if not 1 <= active <= n_clients:
        raise ConfigError("active_clients", f"exige 1 <= B <= K (B={active}, K={n_clients})")
    rng = np.random.default_rng([seed, STREAM_SAMPLING, r_g])
    return [str(int(k)) for k in rng.choice(n_clients, size=active, replace=False)]


def build_upload(
    state: SiameseState,
    mask: np.ndarray,
    meter: CommMeter,
    variant: Variant,
    client_id: str,
    n_samples: int,
    fsm_vector: Optional[FsmVector] = None,
    r_g: int = 0,
) -> UploadPacket:
    """
    Monta o pacote de upload e credita no medidor exatamente os escalares serializados.

    Pi envia so a target; FedAvg envia so a sua rede (guardada no campo target);
    MT e D enviam target, FSM e as camadas online com mascara True.

    Raises:
        ShapeError: Se o comprimento da mascara diferir do numero de camadas
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.size != state.online.n_layers:
        raise ShapeError(f"mascara com {mask.size} posicoes para {state.online.n_layers} camadas")

    if variant.uploads_online:
        online_layers = [(j, state.online.layers[j].copy()) for j in np.flatnonzero(mask)]
        pacote = UploadPacket(client_id, state.target.copy(), online_layers, mask, fsm_vector, n_samples)
    else:
        rede = state.target if variant.siamese else state.online
        sem_online = np.zeros(mask.size, dtype=bool)
        pacote = UploadPacket(client_id, rede.copy(), [], sem_online, None, n_samples)

    meter.credit_upload(r_g, pacote.scalar_count())
    return pacote


def splice(packet: UploadPacket) -> LayeredParams:
    """
    Reconstroi a online completa: camadas enviadas vem do pacote, as puladas
    sao copiadas da target do proprio pacote.

    Raises:
        ProtocolError: Indice fora do intervalo ou divergente da mascara
    """
    v = packet.target.n_layers
    if packet.mask.size != v:
        raise ProtocolError(f"cliente {packet.client_id}: mascara com {packet.mask.size} posicoes para {v} camadas")
    indices = [j for j, _ in packet.online_layers]
    if any(j < 0 or j >= v for j in indices):
        raise ProtocolError(f"cliente {packet.client_id}: indice de camada fora de 0..{v - 1}")
    if sorted(indices) != list(np.flatnonzero(packet.mask)):
        raise ProtocolError(f"cliente {packet.client_id}: camadas enviadas nao batem com a mascara")

    enviadas = dict(packet.online_layers)
    camadas = []
    for j, camada_target in enumerate(packet.target.layers):
        origem = enviadas.get(j, camada_target)
        if origem.dims != camada_target.dims:
            raise ProtocolError(f"cliente {packet.client_id}: camada {j} com forma {origem.dims}")
        camadas.append(origem.copy())
    return LayeredParams(camadas, packet.target.activation)


def aggregation_weights(packets: Sequence[UploadPacket]) -> np.ndarray:
    """w_b = n^(b) / soma_j n^(j)."""
    n = np.array([p.n_samples for p in packets], dtype=np.float64)
    total = n.sum()
    if total <= 0:
        raise AggregationError("total de amostras zero na agregacao")
    return n / total


def aggregate(packets: Sequence[UploadPacket], r_g: int = 0) -> GlobalModel:
    """
    Media ponderada: online global = soma w_b*splice(b), target global = soma w_b*target_b.

    Raises:
        AggregationError: Sem pacotes ou total de amostras zero
    """
    if not packets:
        raise AggregationError("nenhum pacote recebido")
    pesos = aggregation_weights(packets)
    online = weighted_sum([splice(p) for p in packets], pesos)
    target = weighted_sum([p.target for p in packets], pesos)
    return GlobalModel(online, target, r_g)


def broadcast(
    global_model: GlobalModel,
    clients: Dict[str, SiameseState],
    selected: Sequence[str],
    meter: CommMeter,
    r_g: int = 0,
    nets: int = 2,
) -> Dict[str, SiameseState]:
    """
    Sobrescreve online e target dos clientes selecionados com o modelo global.

    O contador q de cada cliente e mantido e os buffers de momentum sao zerados.
    Clientes fora da selecao nao sao tocados. Cada cliente custa nets*|theta|.
    """
    atualizados = dict(clients)
    custo = nets * global_model.online.scalar_count()
    for cid in selected:
        anterior = clients[cid]
        check_congruent(anterior.online, global_model.online, f"broadcast cliente {cid}")
        atualizados[cid] = SiameseState(
            global_model.online.copy(),
            global_model.target.copy(),
            anterior.step,
            anterior.opt.reset(),
        )
        meter.credit_download(r_g, custo)
    return atualizados


def evaluate(
    global_model: GlobalModel,
    test_set: Dataset,
    batch_size: int = 128,
    net: str = EVAL_NET_TARGET,
) -> float:
    """
    Fracao de acertos (argmax) no conjunto de teste, em lotes de batch_size.

    Args:
        global_model: Modelo global
        test_set: Conjunto de teste nao vazio
        batch_size: Tamanho do lote de avaliacao (nao altera o resultado)
        net: "target" (padrao) ou "online"

    Returns:
        Acuracia em [0, 1]
    """
    if len(test_set) == 0:
        raise ShapeError("conjunto de teste vazio")
    modelo = global_model.net(net)
    acertos = 0
    for inicio in range(0, len(test_set), batch_size):
        x = test_set.features[inicio:inicio + batch_size]
        y = test_set.labels[inicio:inicio + batch_size]
        probs = forward(modelo, Batch(x))
        acertos += int(np.sum(np.argmax(probs, axis=1) == y))
    return acertos / len(test_set)


# =============================================================================
# RODADA
# =============================================================================
def init_world(
    params: LayeredParams,
    shards: Sequence[ClientShard],
    test_set: Dataset,
    settings: FederationSettings,
    server_shard: Optional[ClientShard] = None,
) -> World:
    """
    Cria o mundo: todos os clientes e o modelo global partem da mesma inicializacao.
    """
    if len(shards) != settings.n_clients:
        raise ConfigError("n_clients", f"{len(shards)} shards para K={settings.n_clients}")
    if settings.scenario == SCENARIO_LABELS_AT_SERVER and settings.variant.kind == VARIANT_FEDAVG:
        raise ScenarioError("FedAvg supervisionado exige labels-at-client")
    clientes = {
        s.client_id: SiameseState.from_params(params, settings.lr, settings.momentum, settings.weight_decay)
        for s in shards
    }
    log = None
    if settings.variant.kind == VARIANT_D:
        if settings.tau_schedule is None:
            raise ConfigError("curve", "variante D exige uma curva de tau")
        log = DivergenceLog(max(settings.tau_schedule.phi_g, 1))
    return World(
        settings=settings,
        global_model=GlobalModel(params.copy(), params.copy(), 0),
        clients=clientes,
        shards={s.client_id: s for s in shards},
        test_set=test_set,
        server_shard=server_shard,
        log=log,
    )


def resolve_threads(settings: FederationSettings) -> int:
    """Numero de workers: settings.threads, senao FEDSIAM_THREADS, senao CPUs; nunca acima de B."""
    valor = settings.threads
    if valor is None:
        bruto = os.environ.get(ENV_THREADS)
        if bruto:
            try:
                valor = int(bruto)
            except ValueError:
                raise ConfigError(ENV_THREADS, f"deve ser inteiro, recebido '{bruto}'")
        else:
            valor = os.cpu_count() or 1
    if valor < 1:
        raise ConfigError(ENV_THREADS, "deve ser >= 1")
    return min(valor, settings.active_clients)


def _alpha_override(settings: FederationSettings, r_g: int) -> Optional[float]:
    if settings.variant.kind == VARIANT_PI:
        return 0.0
    if settings.pi_warmup and settings.variant.kind == VARIANT_D and settings.tau_schedule is not None:
        if r_g <= settings.tau_schedule.phi_g:
            return 0.0
    return None


def _train_client(
    settings: FederationSettings,
    client_id: str,
    state: SiameseState,
    shard: ClientShard,
    r_g: int,
    boundary_value: float,
) -> _ClientResult:
    """Trabalho de um worker: treino local, FSM e mascara. Nao toca estado compartilhado."""
    rng = np.random.default_rng([settings.seed, STREAM_CLIENT, r_g, int(client_id)])
    variante = settings.variant
    if not variante.siamese:
        sigma = settings.sigma if settings.augment_labeled else 0.0
        novo, stats = local_train_supervised(
            state, shard, settings.local_epochs, settings.batch_train, rng, sigma
        )
        return _ClientResult(client_id, novo, stats, None, np.zeros(novo.online.n_layers, dtype=bool))

    treino = (
        local_train_labels_at_client
        if settings.scenario == SCENARIO_LABELS_AT_CLIENT
        else local_train_labels_at_server
    )
    novo, stats = treino(
        state, shard, settings.schedules, r_g, settings.local_epochs, settings.batch_train,
        settings.loss_kind, rng, settings.sigma, alpha_override=_alpha_override(settings, r_g),
    )
    vetor = fsm(novo, client_id, r_g)
    if variante.kind == VARIANT_D:
        mascara = select_layers(vetor, boundary_value)
    elif variante.kind == VARIANT_MT:
        mascara = np.ones(len(vetor), dtype=bool)
    else:
        mascara = np.zeros(len(vetor), dtype=bool)
    return _ClientResult(client_id, novo, stats, vetor, mascara)


def run_round(world: World, r_g: int) -> dict:
    """
    Executa a rodada r_g e devolve a linha de metricas.

    amostra -> broadcast -> treino local paralelo -> FSM e mascara pela
    fronteira anterior -> uploads -> splice + agregacao -> server_update
    (labels-at-server) -> atualiza Lambda e a proxima fronteira -> avaliacao.
    """
    s = world.settings
    variante = s.variant
    selecionados = sample_clients(s.n_clients, s.active_clients, r_g, s.seed)
    world.clients = broadcast(
        world.global_model, world.clients, selecionados, world.meter, r_g, variante.nets_downloaded
    )

    fronteira = world.boundary
    n_workers = resolve_threads(s)
    tarefas = [
        (s, cid, world.clients[cid], world.shards[cid], r_g, fronteira) for cid in selecionados
    ]
    if n_workers == 1:
        resultados = [_train_client(*t) for t in tarefas]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            resultados = list(pool.map(lambda t: _train_client(*t), tarefas))

    pacotes = []
    for res in resultados:
        world.clients[res.client_id] = res.state
        pacotes.append(
            build_upload(
                res.state, res.mask, world.meter, variante, res.client_id,
                world.shards[res.client_id].n_samples, res.fsm, r_g,
            )
        )
        if res.fsm is not None:
            pulados = ~res.mask if variante.uploads_online else np.zeros(len(res.fsm), dtype=bool)
            for nome, valor, pulou in zip(res.state.online.names, res.fsm.values, pulados):
                world.fsm_rows.append({
                    COL_ROUND: r_g,
                    COL_CLIENT_ID: res.client_id,
                    COL_LAYER: nome,
                    COL_FSM: float(valor),
                    COL_BOUNDARY: fronteira,
                    COL_SKIPPED: bool(pulou),
                })

    novo_global = aggregate(pacotes, r_g)
    perda_servidor = None
    if s.scenario == SCENARIO_LABELS_AT_SERVER:
        rng = np.random.default_rng([s.seed, STREAM_SERVER, r_g])
        otimizador = OptimizerState.fresh(novo_global.online, s.lr, s.momentum, s.weight_decay)
        estado = SiameseState(novo_global.online, novo_global.target, world.server_step, otimizador)
        estado, stats_srv = server_update(
            estado, world.server_shard, s.server_epochs, s.batch_train, s.schedules, rng, s.scenario,
            sigma=s.sigma if s.augment_labeled else 0.0,
            alpha_override=_alpha_override(s, r_g),
        )
        world.server_step = estado.step
        novo_global = GlobalModel(estado.online, estado.target, r_g)
        perda_servidor = stats_srv.loss_cls
    world.global_model = novo_global

    tau_aplicado = world.tau_applied
    if world.log is not None:
        world.log = update_log(world.log, [r.fsm for r in resultados], r_g)
        world.tau_applied = tau(r_g, s.tau_schedule)
        world.boundary = boundary(world.log, world.tau_applied)

    mascaras = np.concatenate([r.mask for r in resultados])
    frac_pulada = float(np.mean(~mascaras)) if variante.uploads_online else 0.0
    acc = evaluate(world.global_model, world.test_set, s.batch_test, s.eval_net if variante.siamese else EVAL_NET_ONLINE)
    loss_cls = float(np.mean([r.stats.loss_cls for r in resultados]))
    if perda_servidor is not None:
        loss_cls = perda_servidor
    linha = {
        COL_ROUND: r_g,
        COL_VARIANT: variante.kind,
        COL_SCENARIO: s.scenario,
        COL_SETTING: s.setting,
        COL_TEST_ACC: acc,
        COL_LOSS_CLS: loss_cls,
        COL_LOSS_CONS: float(np.mean([r.stats.loss_cons for r in resultados])),
        COL_TAU: tau_aplicado,
        COL_BOUNDARY: fronteira,
        COL_SKIPPED_FRAC: frac_pulada,
        COL_UPLOAD_CUM: world.meter.uploaded_scalars,
        COL_DOWNLOAD_CUM: world.meter.downloaded_scalars,
        COL_ALPHA_MEAN: float(np.mean([r.stats.alpha for r in resultados])),
        COL_BETA: beta_schedule(r_g, s.schedules.phi_l, s.schedules.beta_max) if variante.siamese else 0.0,
    }
    logger.info(
        "rodada %d: acc=%.4f tau=%.4f fronteira=%.6g upload=%d",
        r_g, acc, tau_aplicado, fronteira, world.meter.uploaded_scalars,
    )
    return linha
