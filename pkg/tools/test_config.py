#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Testes da configuracao INI: padroes, overrides, validacao e snapshot.

USO:
    python tools/test_config.py
    pytest tools/test_config.py
"""

import sys
from pathlib import Path

# Adicionar src ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

import pytest

from src.config import ExperimentConfig, parse_config, parse_overrides, serialize_config
from src.errors import ConfigError

CONFIGS = Path(__file__).parent.parent / "configs"


def test_defaults_follow_shared_hyperparameters():
    config, avisos = parse_config()
    assert config.n_clients == 100
    assert config.active_clients == 10
    assert config.rounds == 50
    assert config.local_epochs == 5
    assert config.batch_train == 10
    assert config.batch_test == 128
    assert config.label_fraction == 0.1
    assert config.alpha_max == 0.999
    assert config.phi_l == 10
    assert config.mu == 0.5
    assert avisos == []


def test_resolved_defaults_depend_on_curve_and_dataset():
    assert ExperimentConfig().phi_g == 3
    assert ExperimentConfig(curve="rectangle").phi_g == 10
    assert ExperimentConfig().perturb_sigma == 0.1
    assert ExperimentConfig(dataset="csv", csv_path="x.csv").perturb_sigma == 0.05


def test_text_and_overrides():
    texto = "[experiment]\nvariant = MT\nseeds = 1,2,3\n[federation]\nrounds = 7\n"
    config, _ = parse_config(text=texto, overrides=["rounds=9", "selection.mu=0.25"])
    assert config.variant == "MT"
    assert config.rounds == 9
    assert config.mu == 0.25
    assert config.seed_list == [1, 2, 3]


def test_active_clients_above_total_is_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides=["active_clients=200"])
    assert exc.value.chave == "active_clients"


def test_noniid_iii_not_valid_with_labels_at_server():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides=["scenario=labels-at-server", "setting=NonIID-III"])
    assert exc.value.chave == "setting"


def test_unknown_key_and_wrong_section():
    with pytest.raises(ConfigError):
        parse_config(text="[federation]\nlearning_rate = 0.1\n")
    with pytest.raises(ConfigError):
        parse_config(text="[federation]\nlr = 0.1\n")
    with pytest.raises(ConfigError):
        parse_config(text="[misc]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_overrides(["nada"])


def test_invalid_types():
    with pytest.raises(ConfigError):
        parse_config(overrides=["rounds=muitas"])
    with pytest.raises(ConfigError):
        parse_config(overrides=["pi_warmup=talvez"])


def test_tau_schedule_only_checked_for_d():
    with pytest.raises(ConfigError):
        parse_config(overrides=["rounds=2", "phi_g=3"])
    config, _ = parse_config(overrides=["rounds=2", "phi_g=3", "variant=MT"])
    assert config.rounds == 2


def test_duplicate_seeds():
    with pytest.raises(ConfigError):
        parse_config(overrides=["seeds=1,1"])


def test_warnings_are_returned():
    _, avisos = parse_config(overrides=["variant=MT", "pi_warmup=true"])
    assert any("pi_warmup" in a for a in avisos)


def test_serialize_round_trip():
    config, _ = parse_config(overrides=["variant=Pi", "hidden=64,32", "seeds=5,6", "curve=rectangle", "normalize=true"])
    recriada, _ = parse_config(text=serialize_config(config))
    assert recriada == config


@pytest.mark.parametrize("arquivo", sorted(p.name for p in CONFIGS.glob("*.ini")))
def test_shipped_configs_parse(arquivo):
    config, _ = parse_config(CONFIGS / arquivo)
    assert config.rounds >= 1


def test_blob_trend_configs_share_training_knobs():
    iid, _ = parse_config(CONFIGS / "blobs_iid_3seeds.ini")
    noniid, _ = parse_config(CONFIGS / "blobs_noniid1_3seeds.ini")
    assert iid.setting == "IID" and noniid.setting == "NonIID-I"
    for campo in ("lr", "momentum", "spread", "separation", "hidden", "local_epochs", "rounds", "seeds"):
        assert getattr(iid, campo) == getattr(noniid, campo), campo
    assert iid.lr == pytest.approx(0.03)


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("nao_existe.ini")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
