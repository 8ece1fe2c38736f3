"""
siamese.py - Treino local siames (rede online + rede target com EMA).

Este modulo contem:
- Rampas alpha (decaimento do EMA) e beta (peso da consistencia)
- ema_update: theta_t <- alpha*theta_t + (1-alpha)*theta_s
- Treino local nos cenarios labels-at-client (L + beta*J) e labels-at-server (beta*J)
- Atualizacao do modelo global no servidor (labels-at-server)
- Treino supervisionado simples usado pelo baseline FedAvg
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from .constants import (
    ALPHA_CONSTANT,
    ALPHA_MODES,
    ALPHA_RAMP,
    BETA_RAMP_SHARPNESS,
    CONSISTENCY_LOSSES,
    DEFAULT_ALPHA_MAX,
    DEFAULT_BETA_MAX,
    DEFAULT_PHI_L,
    SCENARIO_LABELS_AT_SERVER,
)
from .data import ClientShard, perturb
from .errors import ConfigError, ScenarioError
from .nn_core import (
    CONSISTENCY_FNS,
    Batch,
    LayeredParams,
    OptimizerState,
    axpby,
    backward,
    check_congruent,
    cross_entropy_loss,
    forward,
    sgd_step,
)

logger = logging.getLogger(__name__)


# =============================================================================
# TIPOS
# =============================================================================
@dataclass
class Schedules:
    """Parametros das rampas: alpha_max, phi_l, beta_max e modo do alpha."""

    alpha_max: float = DEFAULT_ALPHA_MAX
    phi_l: int = DEFAULT_PHI_L
    beta_max: float = DEFAULT_BETA_MAX
    alpha_mode: str = ALPHA_RAMP

    def __post_init__(self):
        if not 0.0 <= self.alpha_max < 1.0:
            raise ConfigError("alpha_max", "deve estar em [0, 1)")
        if self.phi_l < 1:
            raise ConfigError("phi_l", "deve ser inteiro positivo")
        if self.beta_max <= 0:
            raise ConfigError("beta_max", "deve ser > 0")
        if self.alpha_mode not in ALPHA_MODES:
            raise ConfigError("alpha_mode", f"deve ser um de {ALPHA_MODES}")


@dataclass
class SiameseState:
    """Par online/target de um cliente, contador de passos q e otimizador."""

    online: LayeredParams
    target: LayeredParams
    step: int
    opt: OptimizerState

    def __post_init__(self):
        check_congruent(self.online, self.target, "SiameseState")

    @classmethod
    def from_params(cls, params: LayeredParams, lr: float, momentum: float, weight_decay: float) -> "SiameseState":
        return cls(params.copy(), params.copy(), 0, OptimizerState.fresh(params, lr, momentum, weight_decay))


@dataclass
class TrainStats:
    """Medias das perdas do treino local e ultimo alpha aplicado."""

    steps: int = 0
    loss_cls: float = 0.0
    loss_cons: float = 0.0
    alpha: float = 0.0


# =============================================================================
# RAMPAS
# =============================================================================
def alpha_schedule(q: int, alpha_max: float) -> float:
    """alpha^k = min(1 - 1/(q+1), alpha_max); alpha(0) = 0."""
    if q < 0:
        raise ValueError("q deve ser >= 0")
    return min(1.0 - 1.0 / (q + 1), alpha_max)


def beta_schedule(r_g: float, phi_l: int, beta_max: float) -> float:
    """beta^k = beta_max * exp(-5 (1 - min(R_g/phi_l, 1))^2)."""
    if r_g < 0:
        raise ValueError("R_g deve ser >= 0")
    t = min(r_g / phi_l, 1.0)
    return beta_max * math.exp(-BETA_RAMP_SHARPNESS * (1.0 - t) ** 2)


def effective_alpha(q: int, schedules: Schedules, override: Optional[float] = None) -> float:
    if override is not None:
        return override
    if schedules.alpha_mode == ALPHA_CONSTANT:
        return schedules.alpha_max
    return alpha_schedule(q, schedules.alpha_max)


def ema_update(state: SiameseState, alpha: float) -> SiameseState:
    """
    theta_t,q = alpha*theta_t,q-1 + (1-alpha)*theta_s,q; a online nao muda.
    """
    if alpha == 0.0:
        novo_target = state.online.copy()
    else:
        novo_target = axpby(alpha, state.target, 1.0 - alpha, state.online)
    return SiameseState(state.online, novo_target, state.step, state.opt)


# =============================================================================
# LOTES
# =============================================================================
def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Uma passada embaralhada; o ultimo lote pode ser parcial."""
    ordem = rng.permutation(n)
    for inicio in range(0, n, batch_size):
        yield ordem[inicio:inicio + batch_size]


class _CyclingBatches:
    """Lotes de tamanho fixo min(batch_size, n), reembaralhando ao fim de cada passada."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n = n
        self.size = min(batch_size, n)
        self.rng = rng
        self.ordem = rng.permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos + self.size > self.n:
            self.ordem = self.rng.permutation(self.n)
            self.pos = 0
        idx = self.ordem[self.pos:self.pos + self.size]
        self.pos += self.size
        return idx


def _check_loss_kind(loss_kind: str) -> None:
    if loss_kind not in CONSISTENCY_LOSSES:
        raise ConfigError("consistency_loss", f"deve ser um de {CONSISTENCY_LOSSES}")


def _finish(stats: TrainStats, soma_cls: float, soma_cons: float) -> TrainStats:
    if stats.steps:
        stats.loss_cls = soma_cls / stats.steps
        stats.loss_cons = soma_cons / stats.steps
    return stats


# =============================================================================
# TREINO LOCAL
# =============================================================================
def _siamese_step(
    state: SiameseState,
    x_rot: Optional[np.ndarray],
    y_rot: Optional[np.ndarray],
    x_nao_rot: np.ndarray,
    beta: float,
    loss_kind: str,
    sigma: float,
    rng: np.random.Generator,
    schedules: Schedules,
    alpha_override: Optional[float],
) -> Tuple[SiameseState, float, float, float]:
    """Um passo: SGD na online para L + beta*J e depois EMA na target."""
    x = x_nao_rot if x_rot is None else np.concatenate([x_rot, x_nao_rot])
    x_online = perturb(x, rng, sigma)
    x_target = perturb(x, rng, sigma)
    lote_online = Batch(x_online)
    p_online = forward(state.online, lote_online)
    p_target = forward(state.target, Batch(x_target))

    perda_cons, grad = CONSISTENCY_FNS[loss_kind](p_online, p_target)
    grad = beta * grad
    perda_cls = 0.0
    if x_rot is not None:
        n_rot = x_rot.shape[0]
        perda_cls, grad_cls = cross_entropy_loss(p_online[:n_rot], y_rot)
        grad[:n_rot] += grad_cls

    grads = backward(state.online, lote_online, grad)
    online, opt = sgd_step(state.online, grads, state.opt)
    alpha = effective_alpha(state.step, schedules, alpha_override)
    # target intocada ate aqui: so o EMA a altera
    novo = ema_update(SiameseState(online, state.target, state.step + 1, opt), alpha)
    return novo, perda_cls, perda_cons, alpha


def local_train_labels_at_client(
    state: SiameseState,
    shard: ClientShard,
    schedules: Schedules,
    r_g: int,
    local_epochs: int,
    batch_size: int,
    loss_kind: str,
    rng: np.random.Generator,
    sigma: float,
    alpha_override: Optional[float] = None,
    beta_override: Optional[float] = None,
) -> Tuple[SiameseState, TrainStats]:
    """
    Treino local no cenario labels-at-client: minimiza L + beta^k * J.

    Cada passo junta um lote rotulado (ciclico) e um nao rotulado; uma epoca
    e uma passada pelos nao rotulados. J usa rotulados e nao rotulados.

    Raises:
        ScenarioError: Se o shard nao tiver rotulados ou nao rotulados
    """
    _check_loss_kind(loss_kind)
    if shard.n_labeled < 1 or shard.n_unlabeled < 1:
        raise ScenarioError(
            f"cliente {shard.client_id}: labels-at-client exige rotulados e nao rotulados "
            f"({shard.n_labeled}/{shard.n_unlabeled})"
        )
    beta = beta_schedule(r_g, schedules.phi_l, schedules.beta_max) if beta_override is None else beta_override
    rotulados = _CyclingBatches(shard.n_labeled, batch_size, rng)
    stats = TrainStats()
    soma_cls = soma_cons = 0.0
    for _ in range(local_epochs):
        for idx_u in _epoch_batches(shard.n_unlabeled, batch_size, rng):
            idx_l = rotulados.next()
            state, l_cls, l_cons, alpha = _siamese_step(
                state, shard.labeled_x[idx_l], shard.labeled_y[idx_l], shard.unlabeled_x[idx_u],
                beta, loss_kind, sigma, rng, schedules, alpha_override,
            )
            soma_cls += l_cls
            soma_cons += l_cons
            stats.steps += 1
            stats.alpha = alpha
    return state, _finish(stats, soma_cls, soma_cons)


def local_train_labels_at_server(
    state: SiameseState,
    shard: ClientShard,
    schedules: Schedules,
    r_g: int,
    local_epochs: int,
    batch_size: int,
    loss_kind: str,
    rng: np.random.Generator,
    sigma: float,
    alpha_override: Optional[float] = None,
    beta_override: Optional[float] = None,
) -> Tuple[SiameseState, TrainStats]:
    """
    Treino local no cenario labels-at-server: minimiza apenas beta^k * J.

    Nenhum rotulo e lido; rotulos eventualmente presentes no shard geram aviso.
    """
    _check_loss_kind(loss_kind)
    if shard.n_unlabeled < 1:
        raise ScenarioError(f"cliente {shard.client_id}: sem dados nao rotulados")
    if shard.n_labeled > 0:
        logger.warning("cliente %s: %d rotulados ignorados (labels-at-server)", shard.client_id, shard.n_labeled)
    beta = beta_schedule(r_g, schedules.phi_l, schedules.beta_max) if beta_override is None else beta_override
    stats = TrainStats()
    soma_cons = 0.0
    for _ in range(local_epochs):
        for idx_u in _epoch_batches(shard.n_unlabeled, batch_size, rng):
            state, _, l_cons, alpha = _siamese_step(
                state, None, None, shard.unlabeled_x[idx_u],
                beta, loss_kind, sigma, rng, schedules, alpha_override,
            )
            soma_cons += l_cons
            stats.steps += 1
            stats.alpha = alpha
    return state, _finish(stats, 0.0, soma_cons)


def _supervised_epochs(
    state: SiameseState,
    x: np.ndarray,
    y: np.ndarray,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    sigma: float,
) -> Tuple[SiameseState, float, int]:
    soma = 0.0
    passos = 0
    for _ in range(epochs):
        for idx in _epoch_batches(x.shape[0], batch_size, rng):
            lote = Batch(perturb(x[idx], rng, sigma), y[idx])
            perda, grad = cross_entropy_loss(forward(state.online, lote), lote.labels)
            online, opt = sgd_step(state.online, backward(state.online, lote, grad), state.opt)
            state = SiameseState(online, state.target, state.step, opt)
            soma += perda
            passos += 1
    return state, soma, passos


def local_train_supervised(
    state: SiameseState,
    shard: ClientShard,
    local_epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    sigma: float = 0.0,
) -> Tuple[SiameseState, TrainStats]:
    """
    SGD em entropia cruzada so com os rotulados do cliente (baseline FedAvg).

    sigma > 0 aplica a perturbacao aos rotulados (FedAvg+). A target espelha
    a online ao final.
    """
    if shard.n_labeled < 1:
        raise ScenarioError(f"cliente {shard.client_id}: FedAvg exige dados rotulados")
    state, soma, passos = _supervised_epochs(
        state, shard.labeled_x, shard.labeled_y, local_epochs, batch_size, rng, sigma
    )
    state = SiameseState(state.online, state.online.copy(), state.step + passos, state.opt)
    stats = TrainStats(steps=passos, loss_cls=soma / passos if passos else 0.0)
    return state, stats


def server_update(
    state: SiameseState,
    server_labeled: Optional[ClientShard],
    epochs: int,
    batch_size: int,
    schedules: Schedules,
    rng: np.random.Generator,
    scenario: str,
    sigma: float = 0.0,
    alpha_override: Optional[float] = None,
) -> Tuple[SiameseState, TrainStats]:
    """
    Atualiza o modelo global com os rotulados do servidor.

    SGD em entropia cruzada na online global, seguido de EMA da target global
    a cada passo, com o contador de passos global.

    Raises:
        ScenarioError: Se chamado fora do cenario labels-at-server ou sem dados
    """
    if scenario != SCENARIO_LABELS_AT_SERVER:
        raise ScenarioError("server_update so existe no cenario labels-at-server")
    if server_labeled is None or server_labeled.n_labeled < 1:
        raise ScenarioError("server_update exige dados rotulados no servidor")
    stats = TrainStats()
    soma = 0.0
    for _ in range(epochs):
        for idx in _epoch_batches(server_labeled.n_labeled, batch_size, rng):
            x = perturb(server_labeled.labeled_x[idx], rng, sigma)
            lote = Batch(x, server_labeled.labeled_y[idx])
            perda, grad = cross_entropy_loss(forward(state.online, lote), lote.labels)
            online, opt = sgd_step(state.online, backward(state.online, lote, grad), state.opt)
            alpha = effective_alpha(state.step, schedules, alpha_override)
            state = ema_update(SiameseState(online, state.target, state.step + 1, opt), alpha)
            soma += perda
            stats.steps += 1
            stats.alpha = alpha
    return state, _finish(stats, soma, 0.0)
