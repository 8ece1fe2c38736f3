#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Testes de geracao, perturbacao e particionamento de dados.

USO:
    python tools/test_data.py
    pytest tools/test_data.py
"""

import sys
from pathlib import Path

# Adicionar src ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from src.constants import (
    SCENARIO_LABELS_AT_CLIENT,
    SCENARIO_LABELS_AT_SERVER,
    SETTING_IID,
    SETTING_LS_IID,
    SETTING_LS_NONIID,
    SETTING_NONIID_I,
    SETTING_NONIID_II,
    SETTING_NONIID_III,
)
from src.data import Dataset, PartitionSpec, gen_synthetic_blobs, partition, perturb, split_train_test
from src.errors import ConfigError, DataValidationError, PartitionError


def _grande(n_classes=10, por_classe=6000):
    """Dataset barato com |D| = n_classes * por_classe (features constantes)."""
    labels = np.repeat(np.arange(n_classes), por_classe)
    return Dataset(np.zeros((labels.size, 2)), labels, n_classes)


def _blobs(seed=1234):
    return gen_synthetic_blobs(4, 16, 250, 0.6, seed)


def _todos_indices(servidor, shards):
    partes = [np.concatenate([s.labeled_idx, s.unlabeled_idx]) for s in shards]
    if servidor is not None:
        partes.append(servidor.labeled_idx)
    return np.concatenate(partes)


# =============================================================================
# GERACAO
# =============================================================================
def test_blobs_sizes_per_class():
    ds = _blobs()
    assert len(ds) == 1000
    assert ds.dim == 16
    assert np.bincount(ds.labels).tolist() == [250, 250, 250, 250]


def test_blobs_deterministic_per_seed():
    a, b, c = _blobs(1), _blobs(1), _blobs(2)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.features, c.features)


def test_blobs_zero_spread_sits_on_class_means():
    ds = gen_synthetic_blobs(2, 2, 10, 0.0, 7, separation=3.0)
    for x, y in zip(ds.features, ds.labels):
        esperado = np.zeros(2)
        esperado[y] = 3.0
        np.testing.assert_array_equal(x, esperado)


@pytest.mark.parametrize("kwargs", [
    dict(n_classes=1, dim=4, n_per_class=10, spread=0.1, seed=0),
    dict(n_classes=2, dim=1, n_per_class=10, spread=0.1, seed=0),
    dict(n_classes=4, dim=3, n_per_class=10, spread=0.1, seed=0),
    dict(n_classes=2, dim=4, n_per_class=0, spread=0.1, seed=0),
])
def test_blobs_invalid_sizes(kwargs):
    with pytest.raises(ConfigError):
        gen_synthetic_blobs(**kwargs)


def test_dataset_rejects_missing_class():
    with pytest.raises(DataValidationError):
        Dataset(np.zeros((4, 2)), np.array([0, 0, 1, 1]), 3)


def test_split_train_test_is_stratified_and_disjoint():
    ds = _blobs()
    treino, teste = split_train_test(ds, 100, 1234)
    assert len(treino) == 600 and len(teste) == 400
    assert np.bincount(teste.labels).tolist() == [100] * 4


# =============================================================================
# PERTURBACAO
# =============================================================================
def test_perturb_zero_strength_is_identity():
    x = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(perturb(x, np.random.default_rng(0), 0.0), x)


def test_perturb_two_draws_differ():
    x = np.zeros((3, 4))
    rng = np.random.default_rng(0)
    assert not np.array_equal(perturb(x, rng, 0.1), perturb(x, rng, 0.1))


def test_perturb_noise_statistics():
    x = np.ones((100000, 1))
    delta = perturb(x, np.random.default_rng(3), 0.2) - x
    assert abs(delta.mean()) < 0.005
    assert delta.var() == pytest.approx(0.04, rel=0.02)


def test_perturb_rejects_negative_strength():
    with pytest.raises(ConfigError):
        perturb(np.zeros((1, 1)), np.random.default_rng(0), -0.1)


# =============================================================================
# PARTICAO
# =============================================================================
def test_iid_shards_60_labeled_540_unlabeled():
    ds = _grande()
    servidor, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_IID, 0.1, 100))
    assert servidor is None
    assert len(shards) == 100
    assert all(s.n_labeled == 60 and s.n_unlabeled == 540 for s in shards)
    assert all(len(np.unique(np.concatenate([s.labeled_y, s._audit_unlabeled_y]))) == 10 for s in shards)


def test_noniid_iii_ten_high_ratio_clients():
    ds = _grande()
    _, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_III, 0.1, 100))
    rotulados = [s.n_labeled for s in shards]
    assert rotulados.count(330) == 10
    assert rotulados.count(30) == 90


def test_ls_iid_server_and_client_sizes():
    ds = _grande()
    servidor, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_SERVER, SETTING_LS_IID, 0.01, 100))
    assert servidor.n_labeled == 600
    assert len(np.unique(servidor.labeled_y)) == 10
    assert all(s.n_labeled == 0 and s.n_unlabeled == 594 for s in shards)


@pytest.mark.parametrize("scenario,setting", [
    (SCENARIO_LABELS_AT_CLIENT, SETTING_IID),
    (SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_I),
    (SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_II),
    (SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_III),
    (SCENARIO_LABELS_AT_SERVER, SETTING_LS_IID),
    (SCENARIO_LABELS_AT_SERVER, SETTING_LS_NONIID),
])
def test_partition_is_disjoint_and_deterministic(scenario, setting):
    ds = _blobs()
    spec = PartitionSpec(scenario, setting, 0.1, 10)
    servidor, shards = partition(ds, spec)
    todos = _todos_indices(servidor, shards)
    assert len(todos) == len(np.unique(todos))
    assert [s.client_id for s in shards] == [str(k) for k in range(10)]

    servidor2, shards2 = partition(ds, spec)
    for a, b in zip(shards, shards2):
        np.testing.assert_array_equal(a.labeled_idx, b.labeled_idx)
        np.testing.assert_array_equal(a.unlabeled_idx, b.unlabeled_idx)


def test_iid_covers_divisible_dataset_exactly():
    ds = _blobs()
    servidor, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_IID, 0.1, 10))
    assert sorted(_todos_indices(servidor, shards).tolist()) == list(range(len(ds)))
    assert all(s.n_labeled == 10 for s in shards)


def test_noniid_i_category_contract():
    ds = _blobs()
    _, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_I, 0.1, 10, classes_per_client=2))
    for s in shards:
        rot, nao_rot = s.audit_classes()
        assert len(rot) == 2
        assert rot == nao_rot


def test_noniid_ii_category_contract():
    ds = _blobs()
    _, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_II, 0.1, 10, classes_per_client=2))
    for s in shards:
        rot, nao_rot = s.audit_classes()
        assert len(rot) == 2
        assert nao_rot == [0, 1, 2, 3]
        assert s.n_labeled == 10


def test_ls_noniid_category_contract():
    ds = _blobs()
    servidor, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_SERVER, SETTING_LS_NONIID, 0.1, 10))
    assert servidor.n_labeled == 100
    for s in shards:
        assert s.n_labeled == 0
        assert len(s.audit_classes()[1]) == 2


def test_label_ratio_within_one_sample():
    ds = _blobs()
    _, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_IID, 0.15, 7))
    for s in shards:
        assert abs(s.n_labeled - 0.15 * s.n_samples) <= 1


def test_infeasible_noniid_names_the_class():
    ds = Dataset(np.zeros((4, 2)), np.array([0, 0, 1, 1]), 2)
    spec = PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_I, 0.5, 2, classes_per_client=2)
    with pytest.raises(PartitionError, match="classe"):
        partition(ds, spec)


def test_setting_must_match_scenario():
    with pytest.raises(ConfigError):
        PartitionSpec(SCENARIO_LABELS_AT_SERVER, SETTING_NONIID_III, 0.1, 10).validate()


def test_too_many_classes_per_client():
    with pytest.raises(ConfigError):
        partition(_blobs(), PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_NONIID_I, 0.1, 10, classes_per_client=5))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
