"""
data.py - Datasets, particao entre clientes e perturbacao de entradas.

Este modulo contem:
- Dataset e geracao de blobs gaussianos sinteticos
- As seis configuracoes de particao (IID, NonIID-I/II/III, LS-IID, LS-NonIID)
- ClientShard com barreira de auditoria para os rotulos dos nao rotulados
- Operador de perturbacao (ruido gaussiano aditivo)
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    DEFAULT_CLASSES_PER_CLIENT,
    DEFAULT_SEED,
    NONIID_III_HIGH_FRACTION,
    NONIID_III_RATIO_HIGH,
    NONIID_III_RATIO_LOW,
    SCENARIO_LABELS_AT_CLIENT,
    SCENARIO_LABELS_AT_SERVER,
    SCENARIOS,
    SERVER_CLIENT_ID,
    SETTING_IID,
    SETTING_LS_IID,
    SETTING_LS_NONIID,
    SETTING_NONIID_I,
    SETTING_NONIID_II,
    SETTING_NONIID_III,
    SETTINGS_CLIENT,
    SETTINGS_SERVER,
    STREAM_DATA,
    STREAM_PARTITION,
)
from .errors import ConfigError, DataValidationError, PartitionError

logger = logging.getLogger(__name__)


# =============================================================================
# TIPOS
# =============================================================================
@dataclass
class Dataset:
    """Matriz de features [N x dim], rotulos em {0..C-1} e numero de classes C."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise DataValidationError(
                f"features {self.features.shape} e rotulos {self.labels.shape} incompativeis"
            )
        if len(self) < self.n_classes:
            raise DataValidationError(f"N={len(self)} menor que C={self.n_classes}")
        presentes = np.unique(self.labels)
        if presentes.min() < 0 or presentes.max() >= self.n_classes:
            raise DataValidationError(f"rotulos fora de 0..{self.n_classes - 1}")
        if len(presentes) != self.n_classes:
            faltando = sorted(set(range(self.n_classes)) - set(presentes.tolist()))
            raise DataValidationError(f"classes sem amostras: {faltando}")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def indices_by_class(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.n_classes)]


@dataclass
class ClientShard:
    """
    Dados locais de um cliente: parte rotulada D_L e parte nao rotulada D_U.

    Os rotulos das amostras nao rotuladas ficam apenas para auditoria
    (audit_classes); nenhum caminho de treino os le.
    """

    client_id: str
    labeled_x: np.ndarray
    labeled_y: np.ndarray
    unlabeled_x: np.ndarray
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    _audit_unlabeled_y: np.ndarray = field(repr=False, default=None)

    @property
    def n_labeled(self) -> int:
        return int(self.labeled_x.shape[0])

    @property
    def n_unlabeled(self) -> int:
        return int(self.unlabeled_x.shape[0])

    @property
    def n_samples(self) -> int:
        return self.n_labeled + self.n_unlabeled

    def audit_classes(self) -> Tuple[List[int], List[int]]:
        """Classes distintas (rotuladas, nao rotuladas) - uso exclusivo de auditoria."""
        nao_rot = [] if self._audit_unlabeled_y is None else np.unique(self._audit_unlabeled_y).tolist()
        return np.unique(self.labeled_y).tolist(), nao_rot


@dataclass
class PartitionSpec:
    """Cenario, configuracao, gamma, K, C' e seed de uma particao."""

    scenario: str
    setting: str
    gamma: float
    n_clients: int
    classes_per_client: int = DEFAULT_CLASSES_PER_CLIENT
    seed: int = DEFAULT_SEED
    ratio_high: float = NONIID_III_RATIO_HIGH
    ratio_low: float = NONIID_III_RATIO_LOW
    high_fraction: float = NONIID_III_HIGH_FRACTION

    def validate(self, dataset: Optional[Dataset] = None) -> None:
        """
        Valida a especificacao (e, se informado, contra o dataset).

        Raises:
            ConfigError: Se algum campo violar sua restricao
        """
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"deve ser um de {SCENARIOS}")
        validos = SETTINGS_CLIENT if self.scenario == SCENARIO_LABELS_AT_CLIENT else SETTINGS_SERVER
        if self.setting not in validos:
            raise ConfigError("setting", f"'{self.setting}' nao existe no cenario {self.scenario} (validos: {validos})")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma", "deve estar em (0, 1]")
        if self.n_clients < 1:
            raise ConfigError("K", "deve ser >= 1")
        if self.classes_per_client < 1:
            raise ConfigError("classes_per_client", "deve ser >= 1")
        for nome in ("ratio_high", "ratio_low", "high_fraction"):
            if not 0.0 <= getattr(self, nome) <= 1.0:
                raise ConfigError(nome, "deve estar em [0, 1]")
        if dataset is None:
            return
        if self.classes_per_client > dataset.n_classes:
            raise ConfigError("classes_per_client", f"C'={self.classes_per_client} maior que C={dataset.n_classes}")
        por_cliente = len(dataset) // self.n_clients
        if por_cliente < 1:
            raise ConfigError("K", f"K={self.n_clients} maior que |D|={len(dataset)}")
        if self.scenario == SCENARIO_LABELS_AT_CLIENT and self.setting != SETTING_NONIID_III:
            if _floor(self.gamma * por_cliente) < 1:
                raise ConfigError("gamma", f"gamma*(|D|/K) = {self.gamma * por_cliente:.3f} < 1")


# =============================================================================
# GERACAO / PERTURBACAO
# =============================================================================
def gen_synthetic_blobs(
    n_classes: int,
    dim: int,
    n_per_class: int,
    spread: float,
    seed: int,
    separation: float = 1.0,
) -> Dataset:
    """
    Gera clusters gaussianos com medias nos vertices de um simplex escalado.

    A media da classe c e separation * e_c; cada amostra soma ruido
    N(0, spread^2) por coordenada.

    Raises:
        ConfigError: Se C < 2, dim < 2, dim < C, n_per_class < 1 ou spread < 0
    """
    if n_classes < 2:
        raise ConfigError("n_classes", "deve ser >= 2")
    if dim < 2:
        raise ConfigError("dim", "deve ser >= 2")
    if dim < n_classes:
        raise ConfigError("dim", f"simplex de {n_classes} classes precisa de dim >= {n_classes}")
    if n_per_class < 1:
        raise ConfigError("n_per_class", "deve ser >= 1")
    if spread < 0:
        raise ConfigError("spread", "deve ser >= 0")

    rng = np.random.default_rng([seed, STREAM_DATA])
    medias = np.zeros((n_classes, dim))
    medias[np.arange(n_classes), np.arange(n_classes)] = separation
    labels = np.repeat(np.arange(n_classes), n_per_class)
    ruido = rng.standard_normal((labels.size, dim)) * spread
    features = medias[labels] + ruido
    ordem = rng.permutation(labels.size)
    return Dataset(features[ordem], labels[ordem], n_classes)


def perturb(features: np.ndarray, rng: np.random.Generator, strength: float) -> np.ndarray:
    """
    Perturbacao estocastica eta: x + N(0, strength^2) por elemento.

    Cada chamada sorteia um ruido novo; strength = 0 devolve uma copia da entrada.
    """
    if strength < 0:
        raise ConfigError("perturb_sigma", "deve ser >= 0")
    features = np.asarray(features, dtype=np.float64)
    if strength == 0:
        return features.copy()
    return features + rng.normal(0.0, strength, size=features.shape)


def split_train_test(dataset: Dataset, n_test_per_class: int, seed: int) -> Tuple[Dataset, Dataset]:
    """Separa n_test_per_class amostras de cada classe para teste (estratificado)."""
    rng = np.random.default_rng([seed, STREAM_DATA, 1])
    teste = []
    for idx in dataset.indices_by_class():
        if len(idx) <= n_test_per_class:
            raise PartitionError(f"classe com {len(idx)} amostras nao comporta {n_test_per_class} de teste")
        teste.append(rng.permutation(idx)[:n_test_per_class])
    teste_idx = np.sort(np.concatenate(teste))
    mask = np.ones(len(dataset), dtype=bool)
    mask[teste_idx] = False
    treino_idx = np.flatnonzero(mask)
    return (
        Dataset(dataset.features[treino_idx], dataset.labels[treino_idx], dataset.n_classes),
        Dataset(dataset.features[teste_idx], dataset.labels[teste_idx], dataset.n_classes),
    )


# =============================================================================
# AUXILIARES DE PARTICAO
# =============================================================================
def _floor(x: float) -> int:
    # arredonda antes do floor para 0.29*100 nao virar 28
    return int(np.floor(round(x, 9)))


def _labeled_counts(sizes: Sequence[int], ratio: float) -> List[int]:
    """
    Quantidade rotulada por shard: floor(ratio * size) e o resto do total
    floor(ratio * sum(sizes)) distribuido aos primeiros shards.
    """
    contagens = [_floor(ratio * s) for s in sizes]
    resto = _floor(ratio * sum(sizes)) - sum(contagens)
    for k in range(len(contagens)):
        if resto <= 0:
            break
        if contagens[k] < sizes[k]:
            contagens[k] += 1
            resto -= 1
    return contagens


def _shuffled_by_class(dataset: Dataset, rng: np.random.Generator) -> List[np.ndarray]:
    return [rng.permutation(idx) for idx in dataset.indices_by_class()]


def _deal_stratified(por_classe: Sequence[np.ndarray], n_clients: int, per_client: int) -> List[np.ndarray]:
    """Distribui indices classe a classe em round-robin: cliente k recebe fila[k::K][:s]."""
    fila = np.concatenate([np.asarray(p, dtype=np.int64) for p in por_classe])
    return [fila[k::n_clients][:per_client] for k in range(n_clients)]


def _interleave(por_classe: Sequence[np.ndarray]) -> np.ndarray:
    """Intercala as listas por classe (c0[0], c1[0], ..., c0[1], c1[1], ...)."""
    saida = []
    maior = max((len(p) for p in por_classe), default=0)
    for i in range(maior):
        for p in por_classe:
            if i < len(p):
                saida.append(int(p[i]))
    return np.asarray(saida, dtype=np.int64)


def _assign_categories(n_clients: int, n_classes: int, per_client: int, rng: np.random.Generator) -> List[List[int]]:
    """
    Round-robin semeado sobre permutacoes aleatorias das classes.

    Cada cliente recebe per_client classes distintas; toda classe e usada
    quando K * C' >= C.
    """
    pool: deque = deque()
    atribuicao = []
    for _ in range(n_clients):
        escolhidas: List[int] = []
        puladas: List[int] = []
        while len(escolhidas) < per_client:
            if not pool:
                pool.extend(int(c) for c in rng.permutation(n_classes))
            c = pool.popleft()
            if c in escolhidas:
                puladas.append(c)
            else:
                escolhidas.append(c)
        pool.extendleft(reversed(puladas))
        atribuicao.append(sorted(escolhidas))
    return atribuicao


def _class_chunks(
    por_classe: Sequence[np.ndarray],
    atribuicao: Sequence[Sequence[int]],
) -> List[Dict[int, np.ndarray]]:
    """Divide os indices de cada classe igualmente entre os clientes que a usam."""
    usuarios: Dict[int, List[int]] = {}
    for k, classes in enumerate(atribuicao):
        for c in classes:
            usuarios.setdefault(c, []).append(k)
    pedacos: List[Dict[int, np.ndarray]] = [dict() for _ in atribuicao]
    for c, clientes in usuarios.items():
        if len(por_classe[c]) < 2 * len(clientes):
            raise PartitionError(
                f"classe {c} tem {len(por_classe[c])} amostras para {len(clientes)} clientes "
                f"(minimo 2 por cliente)"
            )
        for k, parte in zip(clientes, np.array_split(por_classe[c], len(clientes))):
            pedacos[k][c] = parte
    return pedacos


def _split_chunks_labeled(
    pedacos: Dict[int, np.ndarray],
    n_rotulados: int,
    contexto: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Separa n_rotulados dentre os pedacos por classe, garantindo ao menos uma
    amostra rotulada e uma nao rotulada de cada classe.
    """
    classes = sorted(pedacos)
    tamanhos = [len(pedacos[c]) for c in classes]
    total = sum(tamanhos)
    if n_rotulados < len(classes):
        raise PartitionError(f"{contexto}: {n_rotulados} rotulados para {len(classes)} classes")
    if total - n_rotulados < len(classes):
        raise PartitionError(f"{contexto}: sobram {total - n_rotulados} nao rotulados para {len(classes)} classes")
    cotas = [max(1, min(t - 1, _floor(n_rotulados * t / total))) for t in tamanhos]
    i = 0
    while sum(cotas) != n_rotulados:
        j = i % len(classes)
        if sum(cotas) < n_rotulados and cotas[j] < tamanhos[j] - 1:
            cotas[j] += 1
        elif sum(cotas) > n_rotulados and cotas[j] > 1:
            cotas[j] -= 1
        i += 1
    rot = np.concatenate([pedacos[c][:q] for c, q in zip(classes, cotas)])
    nao_rot = np.concatenate([pedacos[c][q:] for c, q in zip(classes, cotas)])
    return rot, nao_rot


def _make_shard(dataset: Dataset, client_id: str, rot: np.ndarray, nao_rot: np.ndarray) -> ClientShard:
    rot = np.asarray(rot, dtype=np.int64)
    nao_rot = np.asarray(nao_rot, dtype=np.int64)
    return ClientShard(
        client_id=client_id,
        labeled_x=dataset.features[rot],
        labeled_y=dataset.labels[rot],
        unlabeled_x=dataset.features[nao_rot],
        labeled_idx=rot,
        unlabeled_idx=nao_rot,
        _audit_unlabeled_y=dataset.labels[nao_rot],
    )


# =============================================================================
# PARTICAO
# =============================================================================
def partition(dataset: Dataset, spec: PartitionSpec) -> Tuple[Optional[ClientShard], List[ClientShard]]:
    """
    Particiona o dataset entre K clientes (e o servidor, em labels-at-server).

    Args:
        dataset: Dataset de treino
        spec: Especificacao da particao

    Returns:
        Tupla (dados rotulados do servidor ou None, lista de ClientShard)

    Raises:
        ConfigError: Se a especificacao for invalida
        PartitionError: Se alguma classe nao comportar a cota exigida
    """
    spec.validate(dataset)
    rng = np.random.default_rng([spec.seed, STREAM_PARTITION])
    K = spec.n_clients
    ids = [str(k) for k in range(K)]
    por_classe = _shuffled_by_class(dataset, rng)
    s = len(dataset) // K

    if spec.setting == SETTING_IID:
        blocos = _deal_stratified(por_classe, K, s)
        contagens = _labeled_counts([len(b) for b in blocos], spec.gamma)
        shards = []
        for k, bloco in enumerate(blocos):
            bloco = rng.permutation(bloco)
            shards.append(_make_shard(dataset, ids[k], bloco[:contagens[k]], bloco[contagens[k]:]))
        return None, shards

    if spec.setting == SETTING_NONIID_III:
        blocos = _deal_stratified(por_classe, K, s)
        n_alto = int(round(spec.high_fraction * K))
        altos = set(rng.permutation(K)[:n_alto].tolist())
        shards = []
        for k, bloco in enumerate(blocos):
            razao = spec.ratio_high if k in altos else spec.ratio_low
            n_rot = max(1, _floor(razao * len(bloco)))
            bloco = rng.permutation(bloco)
            shards.append(_make_shard(dataset, ids[k], bloco[:n_rot], bloco[n_rot:]))
        return None, shards

    if spec.setting == SETTING_NONIID_I:
        atribuicao = _assign_categories(K, dataset.n_classes, spec.classes_per_client, rng)
        pedacos = _class_chunks(por_classe, atribuicao)
        tamanhos = [sum(len(p) for p in pc.values()) for pc in pedacos]
        contagens = _labeled_counts(tamanhos, spec.gamma)
        shards = []
        for k, pc in enumerate(pedacos):
            rot, nao_rot = _split_chunks_labeled(pc, contagens[k], f"cliente {ids[k]}")
            shards.append(_make_shard(dataset, ids[k], rot, nao_rot))
        return None, shards

    if spec.setting == SETTING_NONIID_II:
        return None, _partition_noniid_ii(dataset, spec, por_classe, rng, ids, s)

    # labels-at-server: servidor fica com gamma*|D| amostras de todas as classes
    n_servidor = _floor(spec.gamma * len(dataset))
    if n_servidor < dataset.n_classes:
        raise PartitionError(f"servidor com {n_servidor} rotulados nao cobre as {dataset.n_classes} classes")
    servidor_idx = _interleave(por_classe)[:n_servidor]
    usados = set(servidor_idx.tolist())
    restantes = [np.asarray([i for i in p if int(i) not in usados], dtype=np.int64) for p in por_classe]
    servidor = _make_shard(dataset, SERVER_CLIENT_ID, servidor_idx, np.zeros(0, dtype=np.int64))
    por_cliente = (len(dataset) - n_servidor) // K
    if por_cliente < 1:
        raise PartitionError(f"{len(dataset) - n_servidor} amostras restantes para {K} clientes")

    if spec.setting == SETTING_LS_IID:
        blocos = _deal_stratified(restantes, K, por_cliente)
        shards = [_make_shard(dataset, ids[k], np.zeros(0, dtype=np.int64), b) for k, b in enumerate(blocos)]
        return servidor, shards

    # LS-NonIID
    atribuicao = _assign_categories(K, dataset.n_classes, spec.classes_per_client, rng)
    pedacos = _class_chunks(restantes, atribuicao)
    shards = []
    for k, pc in enumerate(pedacos):
        nao_rot = np.concatenate([pc[c] for c in sorted(pc)])
        shards.append(_make_shard(dataset, ids[k], np.zeros(0, dtype=np.int64), nao_rot))
    return servidor, shards


def _partition_noniid_ii(
    dataset: Dataset,
    spec: PartitionSpec,
    por_classe: List[np.ndarray],
    rng: np.random.Generator,
    ids: List[str],
    s: int,
) -> List[ClientShard]:
    """Rotulados de C' classes por cliente; nao rotulados de todas as C classes."""
    K = spec.n_clients
    contagens = _labeled_counts([s] * K, spec.gamma)
    atribuicao = _assign_categories(K, dataset.n_classes, spec.classes_per_client, rng)

    demanda: Dict[int, int] = {}
    cotas: List[Dict[int, int]] = []
    for k, classes in enumerate(atribuicao):
        if contagens[k] < len(classes):
            raise PartitionError(f"cliente {ids[k]}: {contagens[k]} rotulados para {len(classes)} classes")
        base, resto = divmod(contagens[k], len(classes))
        cota = {c: base + (1 if i < resto else 0) for i, c in enumerate(classes)}
        cotas.append(cota)
        for c, q in cota.items():
            demanda[c] = demanda.get(c, 0) + q

    cursores = {c: 0 for c in range(dataset.n_classes)}
    for c, total in demanda.items():
        # cada classe ainda precisa de K amostras para os nao rotulados
        if total + K > len(por_classe[c]):
            raise PartitionError(
                f"classe {c} tem {len(por_classe[c])} amostras; demanda rotulada {total} + {K} nao rotuladas"
            )

    rotulados: List[np.ndarray] = []
    for cota in cotas:
        partes = []
        for c, q in cota.items():
            partes.append(por_classe[c][cursores[c]:cursores[c] + q])
            cursores[c] += q
        rotulados.append(np.concatenate(partes))

    restantes = [por_classe[c][cursores[c]:] for c in range(dataset.n_classes)]
    fila = np.concatenate(restantes)
    shards = []
    for k in range(K):
        n_nao_rot = s - contagens[k]
        nao_rot = fila[k::K][:n_nao_rot]
        shards.append(_make_shard(dataset, ids[k], rotulados[k], nao_rot))
    return shards
