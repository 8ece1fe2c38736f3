"""
nn_core.py - Motor minimo de rede densa (forward, backward, perdas e SGD).

Este modulo contem:
- LayeredParams: camadas nomeadas (pesos + bias), unidade de FSM/selecao/agregacao
- forward/backward para redes totalmente conectadas terminando em softmax
- Perdas: entropia cruzada, consistencia MSE e consistencia KL
- SGD com momentum e weight decay

Todas as operacoes sao funcoes puras sobre arrays numpy float64; nenhuma
altera os objetos recebidos.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    ACTIVATION_RELU,
    ACTIVATION_TANH,
    ACTIVATIONS,
    KL_EPSILON,
)
from .errors import ContractError, ShapeError


# =============================================================================
# TIPOS
# =============================================================================
@dataclass
class Layer:
    """Uma camada densa: pesos [fan_in x fan_out] e bias [fan_out]."""

    name: str
    weights: np.ndarray
    bias: np.ndarray

    @property
    def dims(self) -> Tuple[int, int]:
        return int(self.weights.shape[0]), int(self.weights.shape[1])

    @property
    def size(self) -> int:
        return int(self.weights.size + self.bias.size)

    def flat(self) -> np.ndarray:
        """Pesos e bias concatenados em um unico vetor."""
        return np.concatenate([self.weights.ravel(), self.bias.ravel()])

    def copy(self) -> "Layer":
        return Layer(self.name, self.weights.copy(), self.bias.copy())


@dataclass
class LayeredParams:
    """
    Parametros de uma rede densa organizados por camada.

    Abriga a rede online (theta_s), a target (theta_t) e o modelo global.
    Gradientes e buffers de momentum usam o mesmo tipo.
    """

    layers: List[Layer]
    activation: str = ACTIVATION_RELU

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ShapeError("LayeredParams precisa de ao menos uma camada")
        nomes = [layer.name for layer in self.layers]
        if len(set(nomes)) != len(nomes):
            raise ShapeError(f"nomes de camada repetidos: {nomes}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"ativacao desconhecida: {self.activation}")

    @property
    def layer_dims(self) -> List[Tuple[int, int]]:
        return [layer.dims for layer in self.layers]

    @property
    def names(self) -> List[str]:
        return [layer.name for layer in self.layers]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].dims[0]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].dims[1]

    def scalar_count(self) -> int:
        return sum(layer.size for layer in self.layers)

    def layer_sizes(self) -> List[int]:
        return [layer.size for layer in self.layers]

    def copy(self) -> "LayeredParams":
        return LayeredParams([layer.copy() for layer in self.layers], self.activation)

    def zeros_like(self) -> "LayeredParams":
        return LayeredParams(
            [Layer(l.name, np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in self.layers],
            self.activation,
        )

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(l.weights)) and np.all(np.isfinite(l.bias)) for l in self.layers
        )


# Gradientes tem a mesma forma que os parametros
Gradients = LayeredParams


@dataclass
class Batch:
    """Lote de entradas [batch_size x input_dim] com rotulos opcionais."""

    inputs: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ShapeError(f"lote precisa ser matriz nao vazia, recebido {self.inputs.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.inputs.shape[0],):
                raise ShapeError(
                    f"rotulos {self.labels.shape} incompativeis com entradas {self.inputs.shape}"
                )

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def labeled(self) -> bool:
        return self.labels is not None


@dataclass
class OptimizerState:
    """Estado do SGD: buffers de momentum, lr, momentum M e weight decay wd."""

    momentum_buffers: LayeredParams
    lr: float
    momentum: float
    weight_decay: float

    @classmethod
    def fresh(cls, params: LayeredParams, lr: float, momentum: float, weight_decay: float) -> "OptimizerState":
        return cls(params.zeros_like(), lr, momentum, weight_decay)

    def reset(self) -> "OptimizerState":
        return OptimizerState(self.momentum_buffers.zeros_like(), self.lr, self.momentum, self.weight_decay)


# =============================================================================
# ARITMETICA SOBRE LayeredParams
# =============================================================================
def check_congruent(a: LayeredParams, b: LayeredParams, contexto: str = "") -> None:
    """Garante que dois conjuntos de parametros tem as mesmas camadas e formas."""
    if a.layer_dims != b.layer_dims or a.names != b.names:
        raise ShapeError(
            f"parametros incongruentes{' em ' + contexto if contexto else ''}: "
            f"{list(zip(a.names, a.layer_dims))} vs {list(zip(b.names, b.layer_dims))}"
        )


def _zip_map(fn: Callable[..., np.ndarray], *params: LayeredParams) -> LayeredParams:
    base = params[0]
    for other in params[1:]:
        check_congruent(base, other)
    layers = []
    for j, layer in enumerate(base.layers):
        pesos = fn(*[p.layers[j].weights for p in params])
        bias = fn(*[p.layers[j].bias for p in params])
        layers.append(Layer(layer.name, pesos, bias))
    return LayeredParams(layers, base.activation)


def scale(a: LayeredParams, c: float) -> LayeredParams:
    return _zip_map(lambda x: x * c, a)


def axpby(alpha: float, x: LayeredParams, beta: float, y: LayeredParams) -> LayeredParams:
    """alpha*x + beta*y elemento a elemento."""
    return _zip_map(lambda u, v: alpha * u + beta * v, x, y)


def weighted_sum(params: Sequence[LayeredParams], weights: Sequence[float]) -> LayeredParams:
    """Soma ponderada sum_b w_b * params_b (na ordem dada)."""
    if len(params) != len(weights) or not params:
        raise ShapeError("weighted_sum precisa de listas nao vazias de mesmo tamanho")
    total = scale(params[0], float(weights[0]))
    for p, w in zip(params[1:], weights[1:]):
        total = axpby(1.0, total, float(w), p)
    return total


# =============================================================================
# INICIALIZACAO
# =============================================================================
def init_params(
    input_dim: int,
    hidden: Sequence[int],
    n_classes: int,
    rng: np.random.Generator,
    activation: str = ACTIVATION_RELU,
) -> LayeredParams:
    """
    Inicializa uma rede densa com Glorot uniforme e bias zero.

    Args:
        input_dim: Dimensao de entrada
        hidden: Larguras das camadas ocultas (pode ser vazio)
        n_classes: Numero de classes C
        rng: Gerador semeado
        activation: Ativacao das camadas ocultas

    Returns:
        LayeredParams com V = len(hidden) + 1 camadas nomeadas fc0, fc1, ...
    """
    larguras = [int(input_dim), *[int(h) for h in hidden], int(n_classes)]
    if any(w < 1 for w in larguras):
        raise ShapeError(f"larguras invalidas: {larguras}")
    layers = []
    for j, (fan_in, fan_out) in enumerate(zip(larguras[:-1], larguras[1:])):
        limite = np.sqrt(6.0 / (fan_in + fan_out))
        pesos = rng.uniform(-limite, limite, size=(fan_in, fan_out))
        layers.append(Layer(f"fc{j}", pesos, np.zeros(fan_out)))
    return LayeredParams(layers, activation)


# =============================================================================
# FORWARD / BACKWARD
# =============================================================================
def _act(nome: str, z: np.ndarray) -> np.ndarray:
    if nome == ACTIVATION_RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_deriv(nome: str, z: np.ndarray) -> np.ndarray:
    if nome == ACTIVATION_RELU:
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax por linha com subtracao do maior logit."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(model: LayeredParams, inputs: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Retorna (ativacoes de entrada de cada camada, pre-ativacoes de cada camada)."""
    if inputs.shape[1] != model.input_dim:
        raise ShapeError(
            f"camada '{model.layers[0].name}' espera fan_in {model.input_dim}, "
            f"entrada tem dimensao {inputs.shape[1]}"
        )
    entradas = []
    pre = []
    a = inputs
    for j, layer in enumerate(model.layers):
        if a.shape[1] != layer.dims[0]:
            raise ShapeError(f"camada '{layer.name}' espera fan_in {layer.dims[0]}, recebeu {a.shape[1]}")
        entradas.append(a)
        z = a @ layer.weights + layer.bias
        pre.append(z)
        a = _act(model.activation, z) if j < model.n_layers - 1 else z
    return entradas, pre


def logits(model: LayeredParams, batch: Batch) -> np.ndarray:
    _, pre = _forward_cache(model, batch.inputs)
    return pre[-1]


def forward(model: LayeredParams, batch: Batch) -> np.ndarray:
    """
    Calcula as probabilidades por classe [batch_size x C].

    Raises:
        ShapeError: Se a dimensao de entrada nao bater com a camada
    """
    return softmax(logits(model, batch))


def backward(model: LayeredParams, batch: Batch, grad_wrt_logits: np.ndarray) -> Gradients:
    """
    Retropropaga dLoss/dlogits ate todos os parametros.

    O termo de weight decay nao entra aqui; ele fica no sgd_step.
    """
    grad = np.asarray(grad_wrt_logits, dtype=np.float64)
    if grad.shape != (batch.size, model.n_classes):
        raise ShapeError(
            f"gradiente {grad.shape} incompativel com saida {(batch.size, model.n_classes)}"
        )
    entradas, pre = _forward_cache(model, batch.inputs)
    layers: List[Optional[Layer]] = [None] * model.n_layers
    delta = grad
    for j in range(model.n_layers - 1, -1, -1):
        layer = model.layers[j]
        layers[j] = Layer(layer.name, entradas[j].T @ delta, delta.sum(axis=0))
        if j > 0:
            delta = (delta @ layer.weights.T) * _act_deriv(model.activation, pre[j - 1])
    return LayeredParams(layers, model.activation)


# =============================================================================
# PERDAS
# =============================================================================
def _check_probs_pair(p_online: np.ndarray, p_target: np.ndarray) -> None:
    if p_online.shape != p_target.shape:
        raise ShapeError(f"formas diferentes: online {p_online.shape} vs target {p_target.shape}")


def cross_entropy_loss(probs: np.ndarray, labels: Optional[np.ndarray]) -> Tuple[float, np.ndarray]:
    """
    Entropia cruzada media (NLL) e gradiente em relacao aos logits.

    Returns:
        Tupla (perda, (probs - one_hot) / batch_size)

    Raises:
        ContractError: Se os rotulos nao forem informados
    """
    if labels is None:
        raise ContractError("cross_entropy_loss exige rotulos")
    labels = np.asarray(labels, dtype=np.int64)
    n, c = probs.shape
    if labels.shape != (n,) or np.any(labels < 0) or np.any(labels >= c):
        raise ShapeError(f"rotulos invalidos para probs {probs.shape}")
    linhas = np.arange(n)
    perda = float(np.mean(-np.log(np.maximum(probs[linhas, labels], KL_EPSILON))))
    grad = probs.copy()
    grad[linhas, labels] -= 1.0
    return perda, grad / n


def mse_consistency(p_online: np.ndarray, p_target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Consistencia MSE: media da distancia euclidiana ao quadrado entre linhas.

    O gradiente vai apenas para o ramo online (target com stop-gradient).
    """
    _check_probs_pair(p_online, p_target)
    n = p_online.shape[0]
    diff = p_online - p_target
    perda = float(np.sum(diff * diff) / n)
    g_p = 2.0 * diff / n
    # jacobiano do softmax: dL/dz_i = p_i (g_i - sum_j p_j g_j)
    grad = p_online * (g_p - np.sum(p_online * g_p, axis=1, keepdims=True))
    return perda, grad


def kl_consistency(p_online: np.ndarray, p_target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Consistencia KL(p_target || p_online), media no lote.

    Probabilidades sao limitadas inferiormente por KL_EPSILON antes do log.
    """
    _check_probs_pair(p_online, p_target)
    n = p_online.shape[0]
    t = np.maximum(p_target, KL_EPSILON)
    p = np.maximum(p_online, KL_EPSILON)
    perda = float(np.sum(p_target * (np.log(t) - np.log(p))) / n)
    massa = p_target.sum(axis=1, keepdims=True)
    grad = (p_online * massa - p_target) / n
    return perda, grad


CONSISTENCY_FNS: Dict[str, Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray]]] = {
    "mse": mse_consistency,
    "kl": kl_consistency,
}


# =============================================================================
# OTIMIZADOR
# =============================================================================
def sgd_step(
    params: LayeredParams,
    grads: Gradients,
    opt: OptimizerState,
) -> Tuple[LayeredParams, OptimizerState]:
    """
    Um passo de SGD com momentum e weight decay.

    buffer <- M*buffer + (grad + wd*param); param <- param - lr*buffer

    Returns:
        Tupla (novos parametros, novo estado do otimizador)
    """
    check_congruent(params, grads, "sgd_step")
    check_congruent(params, opt.momentum_buffers, "sgd_step")
    buffers = _zip_map(
        lambda b, g, p: opt.momentum * b + (g + opt.weight_decay * p),
        opt.momentum_buffers,
        grads,
        params,
    )
    novos = axpby(1.0, params, -opt.lr, buffers)
    return novos, OptimizerState(buffers, opt.lr, opt.momentum, opt.weight_decay)
