"""
experiment.py - Orquestracao de execucoes e persistencia de resultados.

Este modulo contem:
- build_datasets / build_world: dataset, particao e mundo inicial
- run_experiment / run_fedavg_baseline: R_G rodadas e RunRecord
- run_replicates: varias seeds com replicates.csv
- write_run / load_run: diretorio de execucao (metrics.csv, config.snapshot,
  summary.txt, fsm_log.csv)
- partition_audit: auditoria da particao sem treino
"""

import dataclasses
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import ExperimentConfig, parse_config, serialize_config
from .constants import (
    DATASET_CSV,
    FILE_FSM_LOG,
    FILE_METRICS,
    FILE_PARTITION_AUDIT,
    FILE_REPLICATES,
    FILE_SNAPSHOT,
    FILE_SUMMARY,
    FSM_LOG_COLUMNS,
    METRICS_COLUMNS,
    SCENARIO_LABELS_AT_CLIENT,
    STREAM_INIT,
    VARIANT_FEDAVG,
)
from .data import Dataset, gen_synthetic_blobs, partition, split_train_test
from .errors import DataValidationError, ScenarioError
from .fedcore import World, init_world, run_round
from .io import load_csv_dataset
from .nn_core import init_params
from .reports import (
    format_mean_std,
    partition_audit_frame,
    replicates_frame,
    summarize_metrics,
    summary_row,
    summary_text,
)

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """Resultado de uma execucao: configuracao, metricas por rodada e tempo."""

    config: ExperimentConfig
    metrics: pd.DataFrame
    wall_clock_s: float = float("nan")
    fsm_log: Optional[pd.DataFrame] = None
    run_dir: Optional[Path] = None

    @property
    def label(self) -> str:
        """Rotulo da execucao (sem a seed), usado para agrupar replicas."""
        return f"{self.config.name}-{self.config.variant}"

    @property
    def summary(self) -> dict:
        return summarize_metrics(self.metrics)


# =============================================================================
# MONTAGEM
# =============================================================================
def build_datasets(config: ExperimentConfig) -> Tuple[Dataset, Dataset, List[str]]:
    """
    Gera (blobs) ou carrega (csv) o dataset e separa treino/teste.

    Returns:
        Tupla (treino, teste, avisos)
    """
    avisos = []
    if config.dataset == DATASET_CSV:
        completo, avisos = load_csv_dataset(config.csv_path, config.has_header, config.normalize)
    else:
        completo = gen_synthetic_blobs(
            config.n_classes,
            config.dim,
            config.n_train_per_class + config.n_test_per_class,
            config.spread,
            config.seed,
            config.separation,
        )
    treino, teste = split_train_test(completo, config.n_test_per_class, config.seed)
    return treino, teste, avisos


def build_world(config: ExperimentConfig, threads: Optional[int] = None) -> Tuple[World, List[str]]:
    """
    Monta o mundo inicial: dataset, particao e inicializacao compartilhada.

    Returns:
        Tupla (World, avisos)
    """
    treino, teste, avisos = build_datasets(config)
    servidor, shards = partition(treino, config.partition_spec())
    rng = np.random.default_rng([config.seed, STREAM_INIT])
    params = init_params(treino.dim, config.hidden, treino.n_classes, rng, config.activation)
    world = init_world(params, shards, teste, config.federation_settings(threads), servidor)
    logger.info(
        "mundo pronto: %d clientes, %d camadas, %d escalares por rede",
        len(shards), params.n_layers, params.scalar_count(),
    )
    return world, avisos


def partition_audit(config: ExperimentConfig) -> pd.DataFrame:
    """Particiona o dataset da configuracao e devolve a auditoria, sem treinar."""
    treino, _, _ = build_datasets(config)
    servidor, shards = partition(treino, config.partition_spec())
    return partition_audit_frame(servidor, shards)


# =============================================================================
# EXECUCAO
# =============================================================================
def _execute(config: ExperimentConfig, threads: Optional[int]) -> RunRecord:
    inicio = time.perf_counter()
    world, avisos = build_world(config, threads)
    for aviso in avisos:
        logger.warning(aviso)
    linhas = [run_round(world, r_g) for r_g in range(1, config.rounds + 1)]
    metricas = pd.DataFrame(linhas, columns=METRICS_COLUMNS)
    fsm_log = pd.DataFrame(world.fsm_rows, columns=FSM_LOG_COLUMNS) if world.fsm_rows else None
    return RunRecord(config, metricas, time.perf_counter() - inicio, fsm_log)


def run_fedavg_baseline(config: ExperimentConfig, threads: Optional[int] = None) -> RunRecord:
    """
    FedAvg supervisionado: cada cliente treina so com seus rotulados, uma rede.

    Raises:
        ScenarioError: Se o cenario nao for labels-at-client
    """
    if config.scenario != SCENARIO_LABELS_AT_CLIENT:
        raise ScenarioError("FedAvg supervisionado exige o cenario labels-at-client")
    if config.variant != VARIANT_FEDAVG:
        config = dataclasses.replace(config, variant=VARIANT_FEDAVG)
    logger.info("baseline FedAvg: %s seed=%d", config.setting, config.seed)
    return _execute(config, threads)


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> RunRecord:
    """
    Executa R_G rodadas da configuracao (uma seed: config.seed).

    Args:
        config: Configuracao validada
        threads: Limite de workers (padrao: FEDSIAM_THREADS); nao altera resultados

    Returns:
        RunRecord com R_G linhas de metricas
    """
    if config.variant == VARIANT_FEDAVG:
        return run_fedavg_baseline(config, threads)
    logger.info("execucao %s: %s/%s seed=%d", config.variant, config.scenario, config.setting, config.seed)
    return _execute(config, threads)


def replicate_configs(config: ExperimentConfig) -> List[ExperimentConfig]:
    """Uma configuracao por seed, cada uma autossuficiente (sem `seeds`)."""
    return [dataclasses.replace(config, seed=s, seeds=()) for s in config.seed_list]


def group_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / f"{config.name}-{config.variant}"


def run_dir_for(config: ExperimentConfig) -> Path:
    return group_dir(config) / f"seed{config.seed}"


def run_replicates(
    config: ExperimentConfig,
    threads: Optional[int] = None,
    write: bool = True,
) -> Tuple[List[RunRecord], pd.DataFrame]:
    """
    Executa uma replica por seed e resume com media e desvio.

    Com write=True cada replica vai para <output_dir>/<name>-<variant>/seed<n>/
    e o resumo para replicates.csv no diretorio do grupo.
    """
    registros = []
    for cfg in replicate_configs(config):
        registro = run_experiment(cfg, threads)
        if write:
            write_run(registro, run_dir_for(cfg))
        registros.append(registro)
    resumo = replicates_frame(registros)
    if write:
        destino = group_dir(config)
        destino.mkdir(parents=True, exist_ok=True)
        resumo.to_csv(destino / FILE_REPLICATES, index=False)
    if len(registros) > 1:
        logger.info(
            "%s: melhor acuracia %s sobre %d seeds",
            registros[0].label, format_mean_std([r.summary["best_acc"] for r in registros]), len(registros),
        )
    return registros, resumo


# =============================================================================
# PERSISTENCIA
# =============================================================================
def metrics_with_summary(metrics: pd.DataFrame) -> pd.DataFrame:
    """R_G linhas de rodada seguidas da linha de resumo."""
    # colunas vazias do resumo ficam fora do concat e voltam como NaN no reindex
    resumo = pd.DataFrame([summary_row(metrics)], columns=METRICS_COLUMNS).dropna(axis=1, how="all")
    return pd.concat([metrics, resumo], ignore_index=True).reindex(columns=METRICS_COLUMNS)


def write_run(record: RunRecord, run_dir: Union[str, Path]) -> Path:
    """
    Grava metrics.csv, config.snapshot, summary.txt e (se houver) fsm_log.csv.

    metrics.csv nao inclui tempo de execucao, entao e identico entre repeticoes.
    """
    destino = Path(run_dir)
    destino.mkdir(parents=True, exist_ok=True)
    metrics_with_summary(record.metrics).to_csv(destino / FILE_METRICS, index=False)
    snapshot = serialize_config(record.config)
    (destino / FILE_SNAPSHOT).write_text(snapshot, encoding="utf-8")
    (destino / FILE_SUMMARY).write_text(
        summary_text(record.label, record.metrics, record.wall_clock_s, snapshot), encoding="utf-8"
    )
    if record.fsm_log is not None:
        record.fsm_log.to_csv(destino / FILE_FSM_LOG, index=False)
    record.run_dir = destino
    logger.info("resultados gravados em %s", destino)
    return destino


def load_run(run_dir: Union[str, Path]) -> RunRecord:
    """
    Le um diretorio de execucao gravado por write_run.

    Raises:
        DataValidationError: Se metrics.csv ou config.snapshot faltarem
    """
    origem = Path(run_dir)
    for nome in (FILE_METRICS, FILE_SNAPSHOT):
        if not (origem / nome).exists():
            raise DataValidationError(f"{nome} ausente em {origem}")
    config, _ = parse_config(origem / FILE_SNAPSHOT)
    metricas = pd.read_csv(origem / FILE_METRICS, dtype={"round": str})
    fsm_log = pd.read_csv(origem / FILE_FSM_LOG) if (origem / FILE_FSM_LOG).exists() else None
    return RunRecord(config, metricas, fsm_log=fsm_log, run_dir=origem)


def find_run_dirs(paths: List[Union[str, Path]]) -> List[Path]:
    """Diretorios com metrics.csv dentro dos caminhos dados (busca recursiva)."""
    encontrados = set()
    for p in paths:
        p = Path(p)
        if (p / FILE_METRICS).exists():
            encontrados.add(p)
        encontrados.update(m.parent for m in p.rglob(FILE_METRICS))
    return sorted(encontrados)


def write_partition_audit(config: ExperimentConfig) -> Path:
    """Grava partition_audit.csv no diretorio do grupo da configuracao."""
    destino = group_dir(config)
    destino.mkdir(parents=True, exist_ok=True)
    caminho = destino / FILE_PARTITION_AUDIT
    partition_audit(config).to_csv(caminho, index=False)
    return caminho
