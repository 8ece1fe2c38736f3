"""
reports.py - Tabelas e resumos das execucoes.

Este modulo contem funcoes para resumir metricas por rodada, montar a
auditoria de particao, comparar execucoes (acuracia, rodadas ate o alvo e
custo de comunicacao) e formatar textos para o terminal e a interface.
"""

import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .constants import (
    COL_BEST_ACC,
    COL_CLASSES_LABELED,
    COL_CLASSES_UNLABELED,
    COL_CLIENT_ID,
    COL_COMM_RELATIVE,
    COL_COMM_TOTAL,
    COL_DELTA_BEST,
    COL_DOWNLOAD_CUM,
    COL_DOWNLOAD_TOTAL,
    COL_FINAL_ACC,
    COL_N_LABELED,
    COL_N_UNLABELED,
    COL_ROUND,
    COL_ROUNDS_TO_TARGET,
    COL_RUN,
    COL_SCENARIO,
    COL_SEED,
    COL_SETTING,
    COL_TEST_ACC,
    COL_UPLOAD_CUM,
    COL_UPLOAD_TOTAL,
    COL_VARIANT,
    COL_WALL_CLOCK,
    COMPARISON_COLUMNS,
    DEFAULT_TARGET_FRACTION,
    FORMATO_NUMERO,
    FORMATO_PERCENTUAL,
    METRICS_COLUMNS,
    PARTITION_AUDIT_COLUMNS,
    SUMMARY_ROUND_LABEL,
    VARIANT_FEDAVG,
    VARIANTS,
)
from .data import ClientShard
from .errors import ComparisonError

# Chaves da configuracao que definem o dataset; execucoes comparaveis devem coincidir nelas
DATASET_KEYS = [
    "dataset", "csv_path", "has_header", "normalize", "n_classes", "dim",
    "n_train_per_class", "n_test_per_class", "spread", "separation",
]


# =============================================================================
# METRICAS DE UMA EXECUCAO
# =============================================================================
def round_rows(metrics: pd.DataFrame) -> pd.DataFrame:
    """Apenas as linhas de rodada (sem a linha de resumo), com round inteiro."""
    linhas = metrics[metrics[COL_ROUND].astype(str) != SUMMARY_ROUND_LABEL].copy()
    linhas[COL_ROUND] = linhas[COL_ROUND].astype(int)
    for col in (COL_TEST_ACC, COL_UPLOAD_CUM, COL_DOWNLOAD_CUM):
        linhas[col] = pd.to_numeric(linhas[col])
    return linhas.reset_index(drop=True)


def summarize_metrics(metrics: pd.DataFrame) -> Dict[str, Any]:
    """
    Resume as rodadas: melhor e ultima acuracia e comunicacao total.

    Args:
        metrics: DataFrame de metricas (com ou sem linha de resumo)

    Returns:
        Dicionario com best_acc, best_round, final_acc, upload/download/comm totais
    """
    linhas = round_rows(metrics)
    if linhas.empty:
        raise ComparisonError("execucao sem rodadas")
    i_best = int(linhas[COL_TEST_ACC].to_numpy().argmax())
    upload = int(linhas[COL_UPLOAD_CUM].iloc[-1])
    download = int(linhas[COL_DOWNLOAD_CUM].iloc[-1])
    return {
        COL_BEST_ACC: float(linhas[COL_TEST_ACC].iloc[i_best]),
        "best_round": int(linhas[COL_ROUND].iloc[i_best]),
        COL_FINAL_ACC: float(linhas[COL_TEST_ACC].iloc[-1]),
        COL_UPLOAD_TOTAL: upload,
        COL_DOWNLOAD_TOTAL: download,
        COL_COMM_TOTAL: upload + download,
    }


def summary_row(metrics: pd.DataFrame) -> Dict[str, Any]:
    """Linha final do metrics.csv: melhor acuracia e totais de comunicacao."""
    resumo = summarize_metrics(metrics)
    primeira = metrics.iloc[0]
    linha = {col: None for col in METRICS_COLUMNS}
    linha.update({
        COL_ROUND: SUMMARY_ROUND_LABEL,
        COL_VARIANT: primeira[COL_VARIANT],
        COL_SCENARIO: primeira[COL_SCENARIO],
        COL_SETTING: primeira[COL_SETTING],
        COL_TEST_ACC: resumo[COL_BEST_ACC],
        COL_UPLOAD_CUM: resumo[COL_UPLOAD_TOTAL],
        COL_DOWNLOAD_CUM: resumo[COL_DOWNLOAD_TOTAL],
    })
    return linha


def rounds_to_target(metrics: pd.DataFrame, target_acc: float) -> Optional[int]:
    """Primeira rodada com acuracia >= alvo, ou None se nunca atingida."""
    linhas = round_rows(metrics)
    atingiu = linhas[linhas[COL_TEST_ACC] >= target_acc]
    return None if atingiu.empty else int(atingiu[COL_ROUND].iloc[0])


def summary_text(nome: str, metrics: pd.DataFrame, wall_clock_s: float, config_text: str = "") -> str:
    """Texto do summary.txt."""
    r = summarize_metrics(metrics)
    linhas = [
        f"execucao: {nome}",
        f"rodadas: {len(round_rows(metrics))}",
        f"melhor acuracia: {FORMATO_PERCENTUAL.format(100 * r[COL_BEST_ACC])} (rodada {r['best_round']})",
        f"acuracia final: {FORMATO_PERCENTUAL.format(100 * r[COL_FINAL_ACC])}",
        f"escalares enviados: {FORMATO_NUMERO.format(r[COL_UPLOAD_TOTAL])}",
        f"escalares recebidos: {FORMATO_NUMERO.format(r[COL_DOWNLOAD_TOTAL])}",
        f"comunicacao total: {FORMATO_NUMERO.format(r[COL_COMM_TOTAL])}",
        f"tempo: {wall_clock_s:.2f}s",
    ]
    if config_text:
        linhas += ["", config_text]
    return "\n".join(linhas) + "\n"


# =============================================================================
# AUDITORIA DE PARTICAO
# =============================================================================
def _classes(valores: Sequence[int]) -> str:
    return ";".join(str(int(v)) for v in valores)


def partition_audit_frame(server: Optional[ClientShard], shards: Sequence[ClientShard]) -> pd.DataFrame:
    """
    Uma linha por cliente (e pelo servidor, se houver): contagens e classes.

    As classes dos nao rotulados vem da barreira de auditoria do shard.
    """
    linhas = []
    for shard in ([server] if server is not None else []) + list(shards):
        rot, nao_rot = shard.audit_classes()
        linhas.append({
            COL_CLIENT_ID: shard.client_id,
            COL_N_LABELED: shard.n_labeled,
            COL_N_UNLABELED: shard.n_unlabeled,
            COL_CLASSES_LABELED: _classes(rot),
            COL_CLASSES_UNLABELED: _classes(nao_rot),
        })
    return pd.DataFrame(linhas, columns=PARTITION_AUDIT_COLUMNS)


# =============================================================================
# COMPARACAO ENTRE EXECUCOES
# =============================================================================
def _dataset_signature(config) -> tuple:
    return tuple(getattr(config, k) for k in DATASET_KEYS)


def _check_comparable(records: Sequence[Any]) -> None:
    """
    Execucoes comparaveis: mesmo dataset e, por rotulo de execucao, o mesmo conjunto de seeds.

    Raises:
        ComparisonError: Dataset ou conjunto de seeds diferente
    """
    assinaturas = {_dataset_signature(r.config) for r in records}
    if len(assinaturas) > 1:
        raise ComparisonError(f"execucoes com datasets diferentes: {sorted(map(str, assinaturas))}")
    seeds_por_grupo: Dict[str, set] = {}
    for r in records:
        seeds_por_grupo.setdefault(r.label, set()).add(r.config.seed)
    conjuntos = {frozenset(s) for s in seeds_por_grupo.values()}
    if len(conjuntos) > 1:
        raise ComparisonError(
            "execucoes com conjuntos de seeds diferentes: "
            + ", ".join(f"{k}={sorted(v)}" for k, v in sorted(seeds_por_grupo.items()))
        )


def _variant_order(variante: str) -> int:
    return VARIANTS.index(variante) if variante in VARIANTS else len(VARIANTS)


def compare_runs(records: Sequence[Any], target_acc: Optional[float] = None) -> pd.DataFrame:
    """
    Tabela comparativa: uma linha por execucao, ordenada deterministicamente.

    delta_best_acc e relativo ao FedAvg da mesma seed quando existir, senao a
    primeira linha da tabela. comm_relative divide pela maior comunicacao.

    Args:
        records: RunRecords (ou objetos com .label, .config e .metrics)
        target_acc: Alvo de rounds_to_target; padrao 0.9 x melhor acuracia geral

    Returns:
        DataFrame com COMPARISON_COLUMNS

    Raises:
        ComparisonError: Lista vazia ou execucoes incomparaveis
    """
    if not records:
        raise ComparisonError("nenhuma execucao para comparar")
    _check_comparable(records)

    linhas = []
    for r in records:
        resumo = summarize_metrics(r.metrics)
        linhas.append({
            COL_RUN: r.label,
            COL_VARIANT: r.config.variant,
            COL_SCENARIO: r.config.scenario,
            COL_SETTING: r.config.setting,
            COL_SEED: r.config.seed,
            COL_BEST_ACC: resumo[COL_BEST_ACC],
            COL_FINAL_ACC: resumo[COL_FINAL_ACC],
            COL_UPLOAD_TOTAL: resumo[COL_UPLOAD_TOTAL],
            COL_DOWNLOAD_TOTAL: resumo[COL_DOWNLOAD_TOTAL],
            COL_COMM_TOTAL: resumo[COL_COMM_TOTAL],
            "_metrics": r.metrics,
        })
    linhas.sort(key=lambda l: (l[COL_SCENARIO], l[COL_SETTING], _variant_order(l[COL_VARIANT]), l[COL_SEED], l[COL_RUN]))

    melhor_geral = max(l[COL_BEST_ACC] for l in linhas)
    alvo = DEFAULT_TARGET_FRACTION * melhor_geral if target_acc is None else target_acc
    maior_comm = max(l[COL_COMM_TOTAL] for l in linhas)
    referencia = {l[COL_SEED]: l[COL_BEST_ACC] for l in linhas if l[COL_VARIANT] == VARIANT_FEDAVG}
    for l in linhas:
        base = referencia.get(l[COL_SEED], linhas[0][COL_BEST_ACC])
        l[COL_DELTA_BEST] = l[COL_BEST_ACC] - base
        rodada = rounds_to_target(l.pop("_metrics"), alvo)
        l[COL_ROUNDS_TO_TARGET] = rodada if rodada is not None else np.nan
        l[COL_COMM_RELATIVE] = l[COL_COMM_TOTAL] / maior_comm if maior_comm > 0 else 0.0

    df = pd.DataFrame(linhas, columns=COMPARISON_COLUMNS)
    df.attrs["target_acc"] = alvo
    return df


def aggregate_by_variant(comparison: pd.DataFrame) -> pd.DataFrame:
    """Media e desvio padrao por (cenario, configuracao, variante) sobre as seeds."""
    grupos = comparison.groupby([COL_SCENARIO, COL_SETTING, COL_VARIANT], sort=False)
    agg = grupos.agg(
        n_seeds=(COL_SEED, "count"),
        best_acc_mean=(COL_BEST_ACC, "mean"),
        best_acc_std=(COL_BEST_ACC, "std"),
        final_acc_mean=(COL_FINAL_ACC, "mean"),
        final_acc_std=(COL_FINAL_ACC, "std"),
        comm_total_mean=(COL_COMM_TOTAL, "mean"),
    ).reset_index()
    return agg.fillna({"best_acc_std": 0.0, "final_acc_std": 0.0})


def comparison_text(comparison: pd.DataFrame) -> str:
    """Texto legivel da comparacao (comparison.txt)."""
    partes = []
    alvo = comparison.attrs.get("target_acc")
    if alvo is not None:
        partes.append(f"alvo de acuracia: {FORMATO_PERCENTUAL.format(100 * alvo)}")
    partes.append(comparison.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if comparison[COL_SEED].nunique() > 1:
        agg = aggregate_by_variant(comparison)
        partes.append("")
        partes.append("media +- desvio por variante:")
        for _, row in agg.iterrows():
            partes.append(
                f"  {row[COL_SCENARIO]} {row[COL_SETTING]} {row[COL_VARIANT]}: "
                f"{100 * row['best_acc_mean']:.2f} +- {100 * row['best_acc_std']:.2f} "
                f"({int(row['n_seeds'])} seeds)"
            )
    return "\n".join(partes) + "\n"


# =============================================================================
# REPLICAS
# =============================================================================
def replicates_frame(records: Sequence[Any]) -> pd.DataFrame:
    """
    Uma linha por seed e duas linhas finais com media e desvio padrao.

    Args:
        records: RunRecords das replicas de uma mesma configuracao

    Returns:
        DataFrame com seed, best_acc, final_acc, comm_scalars_total, wall_clock_s
    """
    linhas = []
    for r in records:
        resumo = summarize_metrics(r.metrics)
        linhas.append({
            COL_SEED: str(r.config.seed),
            COL_BEST_ACC: resumo[COL_BEST_ACC],
            COL_FINAL_ACC: resumo[COL_FINAL_ACC],
            COL_COMM_TOTAL: resumo[COL_COMM_TOTAL],
            COL_WALL_CLOCK: r.wall_clock_s,
        })
    df = pd.DataFrame(linhas)
    numericas = [COL_BEST_ACC, COL_FINAL_ACC, COL_COMM_TOTAL, COL_WALL_CLOCK]
    media = {COL_SEED: "mean", **{c: float(df[c].mean()) for c in numericas}}
    desvio = {COL_SEED: "std", **{c: float(df[c].std(ddof=1)) if len(df) > 1 else 0.0 for c in numericas}}
    return pd.concat([df, pd.DataFrame([media, desvio])], ignore_index=True)


def format_mean_std(valores: Sequence[float]) -> str:
    """'media +- desvio' em pontos percentuais."""
    arr = np.asarray(valores, dtype=np.float64)
    desvio = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    if math.isnan(desvio):
        desvio = 0.0
    return f"{100 * arr.mean():.2f} +- {100 * desvio:.2f}"
