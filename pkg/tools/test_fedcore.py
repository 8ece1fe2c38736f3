#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Testes do laco federado: amostragem, upload, splice, agregacao, broadcast,
avaliacao e rodadas completas.

USO:
    python tools/test_fedcore.py
    pytest tools/test_fedcore.py
"""

import dataclasses
import sys
from pathlib import Path

# Adicionar src ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from src.constants import (
    CURVE_LINEAR,
    SCENARIO_LABELS_AT_CLIENT,
    SCENARIO_LABELS_AT_SERVER,
    SETTING_IID,
    SETTING_LS_IID,
    VARIANT_D,
    VARIANT_FEDAVG,
    VARIANT_MT,
    VARIANT_PI,
)
from src.data import PartitionSpec, gen_synthetic_blobs, partition, split_train_test
from src.errors import AggregationError, ConfigError, ProtocolError, ScenarioError, ShapeError
from src.fedcore import (
    CommMeter,
    FederationSettings,
    GlobalModel,
    UploadPacket,
    Variant,
    aggregate,
    aggregation_weights,
    broadcast,
    build_upload,
    evaluate,
    init_world,
    resolve_threads,
    run_round,
    sample_clients,
    splice,
)
from src.fedselect import NEG_INF, FsmVector, TauSchedule
from src.nn_core import Batch, Layer, LayeredParams, forward, init_params, sgd_step
from src.siamese import Schedules, SiameseState


def _constante(valores, shape=(2, 2)):
    """Rede com uma camada por valor, todos os elementos da camada iguais ao valor."""
    return LayeredParams([
        Layer(f"fc{j}", np.full(shape, float(v)), np.full(shape[1], float(v)))
        for j, v in enumerate(valores)
    ])


def _pacote(target_vals, n, client_id="0", online_vals=None, mask=None):
    target = _constante(target_vals)
    mask = np.zeros(len(target_vals), dtype=bool) if mask is None else np.asarray(mask)
    online = _constante(online_vals) if online_vals is not None else None
    camadas = [(j, online.layers[j]) for j in np.flatnonzero(mask)] if online is not None else []
    return UploadPacket(client_id, target, camadas, mask, None, n)


def _estado(params):
    return SiameseState.from_params(params, 0.01, 0.9, 0.0)


def _settings(variant, scenario=SCENARIO_LABELS_AT_CLIENT, setting=SETTING_IID, threads=1, rounds=6):
    return FederationSettings(
        variant=Variant(variant),
        scenario=scenario,
        setting=setting,
        n_clients=6,
        active_clients=3,
        total_rounds=rounds,
        local_epochs=1,
        batch_train=5,
        batch_test=32,
        loss_kind="mse",
        sigma=0.1,
        seed=7,
        schedules=Schedules(phi_l=3),
        tau_schedule=TauSchedule(CURVE_LINEAR, 0.5, 1, rounds),
        lr=0.05,
        threads=threads,
    )


def _mundo(variant, scenario=SCENARIO_LABELS_AT_CLIENT, setting=SETTING_IID, threads=1, rounds=6):
    ds = gen_synthetic_blobs(3, 4, 40, 0.5, 1)
    treino, teste = split_train_test(ds, 10, 1)
    servidor, shards = partition(treino, PartitionSpec(scenario, setting, 0.2, 6, seed=1))
    params = init_params(treino.dim, [6], treino.n_classes, np.random.default_rng(3))
    return init_world(params, shards, teste, _settings(variant, scenario, setting, threads, rounds), servidor)


def _executa(world):
    return [run_round(world, r) for r in range(1, world.settings.total_rounds + 1)]


# =============================================================================
# AMOSTRAGEM
# =============================================================================
def test_sample_clients_deterministic_and_distinct():
    a = sample_clients(100, 10, 3, 1234)
    assert a == sample_clients(100, 10, 3, 1234)
    assert len(set(a)) == 10
    assert all(0 <= int(c) < 100 for c in a)
    assert a != sample_clients(100, 10, 4, 1234)


def test_sample_clients_rejects_b_above_k():
    with pytest.raises(ConfigError):
        sample_clients(100, 200, 1, 1234)


# =============================================================================
# UPLOAD / SPLICE / AGREGACAO
# =============================================================================
def test_aggregate_weighted_mean():
    pacotes = [_pacote([0.0], 1, "0"), _pacote([4.0], 3, "1")]
    global_ = aggregate(pacotes, r_g=1)
    np.testing.assert_allclose(global_.target.layers[0].weights, 3.0)
    np.testing.assert_allclose(global_.online.layers[0].weights, 3.0)
    assert global_.round == 1


def test_aggregation_weights_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(50):
        pacotes = [_pacote([0.0], int(n), str(k)) for k, n in enumerate(rng.integers(1, 1000, size=8))]
        assert aggregation_weights(pacotes).sum() == pytest.approx(1.0, abs=1e-12)


def test_aggregate_rejects_empty_and_zero_total():
    with pytest.raises(AggregationError):
        aggregate([])
    with pytest.raises(AggregationError):
        aggregate([_pacote([1.0], 0)])


def test_splice_mixed_mask_oracle():
    pacote = _pacote([10.0, 11.0, 12.0], 5, online_vals=[100.0, 101.0, 102.0], mask=[True, False, True])
    online = splice(pacote)
    assert [float(l.weights[0, 0]) for l in online.layers] == [100.0, 11.0, 102.0]
    assert [float(l.bias[0]) for l in online.layers] == [100.0, 11.0, 102.0]


def test_aggregate_splice_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(100):
        b = int(rng.integers(1, 9))
        v = int(rng.integers(1, 6))
        pacotes, esperado_online, n = [], np.zeros(v), rng.integers(1, 50, size=b)
        for k in range(b):
            t_vals = rng.normal(size=v)
            o_vals = rng.normal(size=v)
            mask = rng.random(v) < 0.5
            pacotes.append(_pacote(t_vals, int(n[k]), str(k), o_vals, mask))
            esperado_online += n[k] / n.sum() * np.where(mask, o_vals, t_vals)
        global_ = aggregate(pacotes)
        for j in range(v):
            np.testing.assert_allclose(global_.online.layers[j].weights, esperado_online[j], rtol=0, atol=1e-12)


def test_splice_rejects_inconsistent_packets():
    pacote = _pacote([1.0, 2.0], 1, online_vals=[3.0, 4.0], mask=[True, False])
    with pytest.raises(ProtocolError):
        splice(UploadPacket("0", pacote.target, pacote.online_layers, np.array([True, True]), None, 1))
    with pytest.raises(ProtocolError):
        splice(UploadPacket("0", pacote.target, [(5, pacote.online_layers[0][1])], np.array([True, False]), None, 1))
    with pytest.raises(ProtocolError):
        splice(UploadPacket("0", pacote.target, pacote.online_layers, np.array([True]), None, 1))


def test_build_upload_counts_half_online():
    params = init_params(4, [4], 4, np.random.default_rng(0))
    assert params.layer_sizes() == [20, 20]
    medidor = CommMeter()
    vetor = FsmVector(np.array([0.3, 0.1]))
    pacote = build_upload(_estado(params), np.array([True, False]), medidor, Variant(VARIANT_D), "0", 10, vetor, 1)
    enviados = sum(layer.size for _, layer in pacote.online_layers)
    assert enviados == 0.5 * params.scalar_count()
    assert medidor.uploaded_scalars == 40 + 20 + 2
    assert medidor.per_round[1]["upload"] == 62


def test_build_upload_variants_scalar_counts():
    params = init_params(4, [4], 4, np.random.default_rng(0))
    estado = _estado(params)
    vetor = FsmVector(np.array([0.3, 0.1]))
    contagens = {}
    for kind in (VARIANT_PI, VARIANT_MT, VARIANT_FEDAVG):
        medidor = CommMeter()
        build_upload(estado, np.ones(2, dtype=bool), medidor, Variant(kind), "0", 10, vetor)
        contagens[kind] = medidor.uploaded_scalars
    assert contagens[VARIANT_PI] == 40
    assert contagens[VARIANT_FEDAVG] == 40
    assert contagens[VARIANT_MT] == 40 + 40 + 2


def test_build_upload_rejects_wrong_mask_length():
    params = init_params(4, [4], 4, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        build_upload(_estado(params), np.ones(3, dtype=bool), CommMeter(), Variant(VARIANT_D), "0", 1)


# =============================================================================
# BROADCAST / AVALIACAO
# =============================================================================
def test_broadcast_costs_two_nets_and_keeps_step():
    params = init_params(4, [4], 3, np.random.default_rng(0))
    global_ = GlobalModel(params, params.copy())
    estado = _estado(init_params(4, [4], 3, np.random.default_rng(1)))
    # momentum nao nulo no cliente "0"
    _, opt = sgd_step(estado.online, estado.online, estado.opt)
    clientes = {
        "0": SiameseState(estado.online, estado.target, 17, opt),
        "1": estado,
        "2": estado,
    }
    medidor = CommMeter()
    novos = broadcast(global_, clientes, ["0", "2"], medidor, r_g=1)
    assert medidor.downloaded_scalars == 2 * 2 * params.scalar_count()
    assert novos["0"].step == 17
    assert all(np.all(l.weights == 0.0) for l in novos["0"].opt.momentum_buffers.layers)
    np.testing.assert_array_equal(novos["0"].online.layers[0].weights, params.layers[0].weights)
    assert novos["1"] is clientes["1"]


def test_broadcast_single_net_for_fedavg():
    params = init_params(4, [4], 3, np.random.default_rng(0))
    medidor = CommMeter()
    broadcast(GlobalModel(params, params.copy()), {"0": _estado(params)}, ["0"], medidor, nets=1)
    assert medidor.downloaded_scalars == params.scalar_count()


def test_evaluate_matches_brute_force_count():
    ds = gen_synthetic_blobs(3, 4, 50, 1.0, 3)
    params = init_params(4, [5], 3, np.random.default_rng(2))
    global_ = GlobalModel(params, params.copy())
    acertos = sum(
        int(np.argmax(forward(params, Batch(ds.features[i:i + 1]))[0]) == ds.labels[i]) for i in range(len(ds))
    )
    assert evaluate(global_, ds, batch_size=7) == pytest.approx(acertos / len(ds))
    assert evaluate(global_, ds, batch_size=7) == evaluate(global_, ds, batch_size=1000)


# =============================================================================
# MUNDO E RODADAS
# =============================================================================
def test_init_world_scenario_and_curve_errors():
    with pytest.raises(ScenarioError):
        _mundo(VARIANT_FEDAVG, SCENARIO_LABELS_AT_SERVER, SETTING_LS_IID)
    ds = gen_synthetic_blobs(3, 4, 40, 0.5, 1)
    _, shards = partition(ds, PartitionSpec(SCENARIO_LABELS_AT_CLIENT, SETTING_IID, 0.2, 6))
    params = init_params(4, [6], 3, np.random.default_rng(3))
    settings = _settings(VARIANT_D)
    settings.tau_schedule = None
    with pytest.raises(ConfigError):
        init_world(params, shards, ds, settings)


def test_first_round_uses_no_boundary():
    world = _mundo(VARIANT_D)
    linha = run_round(world, 1)
    assert linha["tau"] == 0.0
    assert linha["boundary"] == NEG_INF
    assert linha["layers_skipped_frac"] == 0.0
    assert world.global_model.round == 1


def test_communication_conservation():
    world = _mundo(VARIANT_D)
    linhas = _executa(world)
    medidor = world.meter
    assert medidor.uploaded_scalars == sum(r["upload"] for r in medidor.per_round.values())
    por_rodada = 3 * 2 * world.global_model.online.scalar_count()
    assert all(r["download"] == por_rodada for r in medidor.per_round.values())
    assert linhas[-1]["upload_scalars_cum"] == medidor.uploaded_scalars
    uploads = [l["upload_scalars_cum"] for l in linhas]
    assert uploads == sorted(uploads)


def test_upload_ordering_pi_d_mt():
    totais = {kind: _executa(_mundo(kind))[-1]["upload_scalars_cum"] for kind in (VARIANT_PI, VARIANT_D, VARIANT_MT)}
    assert totais[VARIANT_PI] < totais[VARIANT_D] < totais[VARIANT_MT]


def test_results_independent_of_thread_count():
    serial = _executa(_mundo(VARIANT_D, threads=1))
    paralelo = _executa(_mundo(VARIANT_D, threads=4))
    assert serial == paralelo


def test_labels_at_server_round():
    world = _mundo(VARIANT_MT, SCENARIO_LABELS_AT_SERVER, SETTING_LS_IID, rounds=2)
    linhas = _executa(world)
    assert world.server_step > 0
    assert all(0.0 <= l["test_acc"] <= 1.0 for l in linhas)


def test_fedavg_round_downloads_one_net():
    world = _mundo(VARIANT_FEDAVG, rounds=2)
    linhas = _executa(world)
    assert world.meter.downloaded_scalars == 2 * 3 * world.global_model.online.scalar_count()
    assert linhas[-1]["beta"] == 0.0


def test_pi_warmup_freezes_target_until_phi_g():
    world = _mundo(VARIANT_D, rounds=3)
    world.settings = dataclasses.replace(world.settings, pi_warmup=True)
    linhas = _executa(world)
    # phi_g = 1: so a primeira rodada roda como Pi
    assert linhas[0]["alpha_mean"] == 0.0
    assert linhas[1]["alpha_mean"] > 0.0


def test_augment_labeled_changes_fedavg_training():
    simples = _executa(_mundo(VARIANT_FEDAVG, rounds=2))
    world = _mundo(VARIANT_FEDAVG, rounds=2)
    world.settings = dataclasses.replace(world.settings, augment_labeled=True)
    aumentado = _executa(world)
    assert simples[0]["train_loss_cls"] != aumentado[0]["train_loss_cls"]
    assert simples[-1]["upload_scalars_cum"] == aumentado[-1]["upload_scalars_cum"]


def test_resolve_threads_env(monkeypatch):
    settings = _settings(VARIANT_D, threads=None)
    monkeypatch.setenv("FEDSIAM_THREADS", "8")
    assert resolve_threads(settings) == 3
    monkeypatch.setenv("FEDSIAM_THREADS", "x")
    with pytest.raises(ConfigError):
        resolve_threads(settings)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
