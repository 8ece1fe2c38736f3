#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Testes de ponta a ponta: execucoes pequenas, persistencia, comparacao,
exportacao e linha de comando.

USO:
    python tools/test_experiment.py
    pytest tools/test_experiment.py
"""

import dataclasses
import sys
import warnings
from pathlib import Path

# Adicionar src ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pandas as pd
import pytest

from fedsiam import main
from src.config import parse_config
from src.constants import FILE_FSM_LOG, FILE_METRICS, FILE_PARTITION_AUDIT, FILE_REPLICATES, FILE_SNAPSHOT
from src.errors import ComparisonError, DataValidationError, ScenarioError
from src.experiment import (
    load_run,
    metrics_with_summary,
    partition_audit,
    run_experiment,
    run_fedavg_baseline,
    run_replicates,
    write_run,
)
from src.export import to_excel_bytes, write_comparison
from src.reports import compare_runs, summarize_metrics

PEQUENA = [
    "n_classes=3",
    "dim=4",
    "n_train_per_class=30",
    "n_test_per_class=10",
    "n_clients=6",
    "active_clients=3",
    "rounds=3",
    "local_epochs=1",
    "batch_train=5",
    "label_fraction=0.2",
    "hidden=8",
    "phi_g=1",
    "phi_l=2",
]


def _config(tmp_path, *extras):
    config, _ = parse_config(overrides=PEQUENA + [f"output_dir={tmp_path}"] + list(extras))
    return config


def test_small_run_rows_and_columns(tmp_path):
    registro = run_experiment(_config(tmp_path), threads=1)
    assert len(registro.metrics) == 3
    assert registro.metrics["round"].tolist() == [1, 2, 3]
    assert registro.fsm_log is not None
    # 3 rodadas x 3 clientes x 2 camadas
    assert len(registro.fsm_log) == 18
    assert 0.0 <= registro.summary["best_acc"] <= 1.0


def test_write_and_load_run(tmp_path):
    config = _config(tmp_path)
    registro = run_experiment(config, threads=1)
    destino = write_run(registro, tmp_path / "execucao")
    for nome in (FILE_METRICS, FILE_SNAPSHOT, FILE_FSM_LOG, "summary.txt"):
        assert (destino / nome).exists()
    csv = pd.read_csv(destino / FILE_METRICS, dtype={"round": str})
    assert len(csv) == config.rounds + 1
    assert csv["round"].iloc[-1] == "summary"

    lido = load_run(destino)
    assert lido.config == config
    assert summarize_metrics(lido.metrics) == pytest.approx(registro.summary)


def test_load_run_missing_files(tmp_path):
    with pytest.raises(DataValidationError) as exc:
        load_run(tmp_path)
    assert "metrics.csv" in str(exc.value)


def test_summary_row_concat_without_future_warning(tmp_path):
    registro = run_experiment(_config(tmp_path), threads=1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", FutureWarning)
        completo = metrics_with_summary(registro.metrics)
    assert completo.columns.tolist() == registro.metrics.columns.tolist()
    ultima = completo.iloc[-1]
    assert ultima["round"] == "summary"
    assert ultima["test_acc"] == registro.summary["best_acc"]
    assert pd.isna(ultima["tau"]) and pd.isna(ultima["beta"])


def test_acceptance_accuracy_uses_mean_of_last_rounds(tmp_path):
    from tools.run_acceptance import _acuracia_final

    registros = [run_experiment(_config(tmp_path, f"seed={s}", "rounds=12"), threads=1) for s in (1, 2)]
    esperado = np.mean([r.metrics["test_acc"].iloc[2:].mean() for r in registros])
    assert _acuracia_final(registros) == pytest.approx(esperado)


def test_metrics_identical_across_thread_counts(tmp_path):
    config = _config(tmp_path)
    a = write_run(run_experiment(config, threads=1), tmp_path / "t1")
    b = write_run(run_experiment(config, threads=3), tmp_path / "t3")
    assert (a / FILE_METRICS).read_bytes() == (b / FILE_METRICS).read_bytes()


def test_fedavg_baseline(tmp_path):
    registro = run_experiment(_config(tmp_path, "variant=FedAvg"), threads=1)
    assert registro.config.variant == "FedAvg"
    assert registro.fsm_log is None
    assert (registro.metrics["beta"] == 0.0).all()


def test_fedavg_requires_labels_at_client(tmp_path):
    config = _config(tmp_path, "scenario=labels-at-server", "setting=LS-IID")
    with pytest.raises(ScenarioError):
        run_fedavg_baseline(config)


def test_compare_identical_runs_zero_delta(tmp_path):
    registro = run_experiment(_config(tmp_path), threads=1)
    tabela = compare_runs([registro, registro])
    assert (tabela["delta_best_acc"] == 0.0).all()
    assert (tabela["comm_relative"] == 1.0).all()


def test_compare_uses_fedavg_as_reference(tmp_path):
    d = run_experiment(_config(tmp_path), threads=1)
    fedavg = run_experiment(_config(tmp_path, "variant=FedAvg"), threads=1)
    tabela = compare_runs([d, fedavg])
    assert tabela["variant"].tolist() == ["D", "FedAvg"]
    esperado = d.summary["best_acc"] - fedavg.summary["best_acc"]
    assert tabela["delta_best_acc"].iloc[0] == pytest.approx(esperado)
    assert tabela["delta_best_acc"].iloc[1] == 0.0


def test_compare_rejects_different_datasets(tmp_path):
    a = run_experiment(_config(tmp_path), threads=1)
    b = dataclasses.replace(a, config=dataclasses.replace(a.config, spread=0.9))
    with pytest.raises(ComparisonError):
        compare_runs([a, b])


def test_compare_target_never_reached(tmp_path):
    registro = run_experiment(_config(tmp_path), threads=1)
    tabela = compare_runs([registro], target_acc=1.01)
    assert np.isnan(tabela["rounds_to_target"].iloc[0])


def test_write_comparison_files(tmp_path):
    registro = run_experiment(_config(tmp_path), threads=1)
    caminhos = write_comparison(compare_runs([registro]), tmp_path / "cmp")
    assert all(p.exists() for p in caminhos.values())
    assert to_excel_bytes({"a": registro.metrics})[:2] == b"PK"


def test_replicates_write_group(tmp_path):
    config = _config(tmp_path, "seeds=11,12")
    registros, resumo = run_replicates(config, threads=1)
    assert [r.config.seed for r in registros] == [11, 12]
    assert resumo["seed"].tolist() == ["11", "12", "mean", "std"]
    grupo = tmp_path / f"{config.name}-{config.variant}"
    assert (grupo / FILE_REPLICATES).exists()
    assert (grupo / "seed11" / FILE_METRICS).exists()


def test_partition_audit_labels_at_server(tmp_path):
    audit = partition_audit(_config(tmp_path, "scenario=labels-at-server", "setting=LS-NonIID"))
    assert audit["client_id"].iloc[0] == "server"
    assert len(audit) == 7
    assert (audit["n_labeled"].iloc[1:] == 0).all()


# =============================================================================
# LINHA DE COMANDO
# =============================================================================
def _ini(tmp_path):
    caminho = tmp_path / "pequena.ini"
    linhas = ["[experiment]", "name = cli"]
    caminho.write_text("\n".join(linhas) + "\n", encoding="utf-8")
    return caminho


def _overrides(tmp_path):
    saida = []
    for item in PEQUENA + [f"output_dir={tmp_path / 'runs'}"]:
        saida += ["--override", item]
    return saida


def test_cli_run_compare_and_audit(tmp_path):
    ini = _ini(tmp_path)
    assert main(["run", "--config", str(ini), "--threads", "1"] + _overrides(tmp_path)) == 0
    execucao = tmp_path / "runs" / "cli-D" / "seed1234"
    assert (execucao / FILE_METRICS).exists()

    assert main(["compare", str(tmp_path / "runs"), "--out", str(tmp_path / "cmp")]) == 0
    assert (tmp_path / "cmp" / "comparison.csv").exists()

    assert main(["partition-audit", "--config", str(ini)] + _overrides(tmp_path)) == 0
    assert (tmp_path / "runs" / "cli-D" / FILE_PARTITION_AUDIT).exists()


def test_cli_expected_errors_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nao_existe.ini")]) == 2
    assert main(["run", "--config", str(_ini(tmp_path)), "--override", "active_clients=200"]) == 2
    (tmp_path / "vazio").mkdir()
    assert main(["compare", str(tmp_path / "vazio")]) == 2


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
