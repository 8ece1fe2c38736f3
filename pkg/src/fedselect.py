"""
fedselect.py - Selecao adaptativa de camadas da rede online para upload.

Este modulo contem:
- FSM: divergencia relativa por camada entre target e online
- DivergenceLog: janela das ultimas phi_g rodadas de FSM no servidor
- Curvas de tau (linear e retangular) e o orcamento total de reducao
- boundary: quantil tau do log; select_layers: mascara de upload
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Sequence, Tuple

import numpy as np

from .constants import CURVE_LINEAR, CURVE_RECTANGLE, CURVES
from .errors import ConfigError, ContractError, ShapeError
from .siamese import SiameseState

NEG_INF = float("-inf")
POS_INF = float("inf")


# =============================================================================
# TIPOS
# =============================================================================
@dataclass
class FsmVector:
    """Um valor de FSM por camada (ordem das camadas), com cliente e rodada."""

    values: np.ndarray
    client_id: str = ""
    round: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0):
            raise ContractError("FSM nao pode ser negativo")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass
class TauSchedule:
    """Curva de tau: tipo, meta de reducao mu, pontos de virada e R_G."""

    kind: str
    mu: float
    phi_g: int
    total_rounds: int
    varphi_g: int = 0

    def __post_init__(self):
        if self.kind not in CURVES:
            raise ConfigError("curve", f"deve ser um de {CURVES}")
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigError("mu", "deve estar em [0, 1]")
        if not 0 <= self.phi_g < self.total_rounds:
            raise ConfigError("phi_g", f"exige 0 <= phi_g < R_G ({self.phi_g}, {self.total_rounds})")
        if self.kind == CURVE_RECTANGLE and not self.phi_g < self.varphi_g <= self.total_rounds:
            raise ConfigError(
                "varphi_g", f"exige phi_g < varphi_g <= R_G ({self.phi_g}, {self.varphi_g}, {self.total_rounds})"
            )


@dataclass
class DivergenceLog:
    """
    Janela Lambda com os vetores de FSM das ultimas `capacity` rodadas.

    Guarda no maximo capacity*V*B escalares; a rodada mais antiga sai primeiro.
    Sentinelas +inf sao guardadas mas ficam fora do quantil.
    """

    capacity: int
    rounds: Deque[Tuple[int, List[FsmVector]]] = field(default_factory=deque)

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError("phi_g", "janela do log precisa de ao menos 1 rodada")

    def scalars(self) -> np.ndarray:
        partes = [v.values for _, vetores in self.rounds for v in vetores]
        return np.concatenate(partes) if partes else np.zeros(0)

    def __len__(self) -> int:
        return int(self.scalars().size)


# =============================================================================
# FSM
# =============================================================================
def fsm(state: SiameseState, client_id: str = "", r_g: int = 0) -> FsmVector:
    """
    FSM[j] = ||theta_t[j] - theta_s[j]||_2 / ||theta_s[j]||_2 por camada.

    Camada online com norma zero: 0 se a target tambem for zero, senao +inf
    (sentinela de "sempre enviar").
    """
    valores = []
    for online, target in zip(state.online.layers, state.target.layers):
        s = online.flat()
        t = target.flat()
        norma_s = float(np.linalg.norm(s))
        dist = float(np.linalg.norm(t - s))
        if norma_s == 0.0:
            valores.append(0.0 if float(np.linalg.norm(t)) == 0.0 else POS_INF)
        else:
            valores.append(dist / norma_s)
    return FsmVector(np.asarray(valores), client_id, r_g)


# =============================================================================
# CURVAS DE TAU
# =============================================================================
def _clamp01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def tau_linear_raw(r_g: float, sched: TauSchedule) -> float:
    """Curva linear sem clamp: 0 ate phi_g, depois decai linearmente ate 0 em R_G."""
    if r_g <= sched.phi_g:
        return 0.0
    n = sched.total_rounds - sched.phi_g
    return -2.0 * (1.0 - sched.mu) * sched.total_rounds / (n * n) * (r_g - sched.total_rounds)


def tau_rectangle_raw(r_g: float, sched: TauSchedule) -> float:
    """Curva retangular sem clamp: plato (1-mu)*R_G/(varphi_g-phi_g) entre os pontos de virada."""
    if r_g <= sched.phi_g or r_g >= sched.varphi_g:
        return 0.0
    return (1.0 - sched.mu) * sched.total_rounds / (sched.varphi_g - sched.phi_g)


def _check_round(r_g: int, sched: TauSchedule) -> None:
    if not 1 <= r_g <= sched.total_rounds:
        raise ContractError(f"rodada {r_g} fora de 1..{sched.total_rounds}")


def tau_linear(r_g: int, sched: TauSchedule) -> float:
    _check_round(r_g, sched)
    return _clamp01(tau_linear_raw(r_g, sched))


def tau_rectangle(r_g: int, sched: TauSchedule) -> float:
    _check_round(r_g, sched)
    return _clamp01(tau_rectangle_raw(r_g, sched))


def tau(r_g: int, sched: TauSchedule) -> float:
    """tau da rodada r_g conforme o tipo da curva, ja limitado a [0, 1]."""
    if sched.kind == CURVE_LINEAR:
        return tau_linear(r_g, sched)
    return tau_rectangle(r_g, sched)


def tau_raw(r_g: float, sched: TauSchedule) -> float:
    if sched.kind == CURVE_LINEAR:
        return tau_linear_raw(r_g, sched)
    return tau_rectangle_raw(r_g, sched)


def tau_budget(sched: TauSchedule) -> float:
    """
    Orcamento de reducao: soma por rodada do tau sem clamp, cada rodada R
    representada pelo ponto medio do intervalo (R-1, R].

    Vale (1 - mu) * R_G para as duas curvas.
    """
    return float(sum(tau_raw(r - 0.5, sched) for r in range(1, sched.total_rounds + 1)))


# =============================================================================
# LOG, FRONTEIRA E SELECAO
# =============================================================================
def update_log(log: DivergenceLog, fsm_vectors_of_round: Sequence[FsmVector], r_g: int) -> DivergenceLog:
    """
    Acrescenta os B vetores da rodada e descarta as rodadas mais antigas
    alem da capacidade.
    """
    if fsm_vectors_of_round:
        v = len(fsm_vectors_of_round[0])
        if any(len(f) != v for f in fsm_vectors_of_round):
            raise ShapeError("vetores de FSM com comprimentos diferentes na mesma rodada")
    rodadas = deque(log.rounds)
    rodadas.append((r_g, list(fsm_vectors_of_round)))
    while len(rodadas) > log.capacity:
        rodadas.popleft()
    return DivergenceLog(log.capacity, rodadas)


def quantile(values: np.ndarray, q: float) -> float:
    """Quantil q por interpolacao linear entre estatisticas de ordem vizinhas."""
    if not 0.0 <= q <= 1.0:
        raise ContractError("quantil deve estar em [0, 1]")
    valores = np.asarray(values, dtype=np.float64)
    if valores.size == 0:
        raise ContractError("quantil de conjunto vazio")
    return float(np.quantile(valores, q, method="linear"))


def boundary(log: DivergenceLog, tau_value: float) -> float:
    """
    Fronteira de corte: quantil tau dos valores finitos do log.

    tau = 0 ou log vazio devolve -inf, ou seja, nenhuma camada e pulada.
    """
    if not 0.0 <= tau_value <= 1.0:
        raise ContractError(f"tau fora de [0, 1]: {tau_value}")
    if tau_value == 0.0:
        return NEG_INF
    valores = log.scalars()
    valores = valores[np.isfinite(valores)]
    if valores.size == 0:
        return NEG_INF
    return quantile(valores, tau_value)


def select_layers(fsm_vector: FsmVector, boundary_value: float) -> np.ndarray:
    """
    Mascara de upload: False (pula) sse FSM[j] < fronteira; empates e +inf enviam.
    """
    return ~(fsm_vector.values < boundary_value)
