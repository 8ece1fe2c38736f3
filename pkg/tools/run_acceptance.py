#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Roda as verificacoes de tendencia em blobs e grava um relatorio JSON.

- tendencia IID: MT e D superam o FedAvg supervisionado em >= 2 pontos
- acuracia de cada execucao = media do test_acc nas ultimas JANELA_FINAL rodadas,
  depois media entre as seeds (o melhor valor de uma rodada isolada esconde a
  oscilacao entre rodadas do Non-IID)
- Non-IID-I: todas as variantes caem em relacao ao IID e D ainda supera o FedAvg
- comunicacao: Pi < D < MT e volume online de D perto de (1 - tau medio) x MT
- determinismo: metrics.csv identico com 1 e 8 threads

USO:
    python tools/run_acceptance.py [--config configs/blobs_iid_3seeds.ini] [--out runs/acceptance]
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Tuple

# Adicionar src ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np

from src.config import parse_config
from src.constants import (
    FILE_METRICS,
    SETTING_NONIID_I,
    VARIANT_D,
    VARIANT_FEDAVG,
    VARIANT_MT,
    VARIANT_PI,
)
from src.experiment import metrics_with_summary, replicate_configs, run_experiment
from src.nn_core import init_params

logger = logging.getLogger("acceptance")

MARGEM_ACURACIA = 0.02
JANELA_FINAL = 10
TOLERANCIA_VOLUME = 0.15


def _rodar(config, threads):
    """Executa cada seed e devolve os RunRecords."""
    return [run_experiment(cfg, threads) for cfg in replicate_configs(config)]


def _media(registros, chave):
    return float(np.mean([r.summary[chave] for r in registros]))


def _acuracia_final(registros) -> float:
    """Media entre seeds do test_acc medio nas ultimas JANELA_FINAL rodadas."""
    return float(np.mean([r.metrics["test_acc"].tail(JANELA_FINAL).mean() for r in registros]))


def _escalares_por_rede(config) -> Tuple[int, int]:
    params = init_params(config.dim, config.hidden, config.n_classes, np.random.default_rng(0), config.activation)
    return params.scalar_count(), params.n_layers


def verificar_tendencias(base, threads):
    resultados = {}
    for setting in (base.setting, SETTING_NONIID_I):
        for variante in (VARIANT_FEDAVG, VARIANT_PI, VARIANT_MT, VARIANT_D):
            cfg = dataclasses.replace(base, setting=setting, variant=variante)
            registros = _rodar(cfg, threads)
            resultados[(setting, variante)] = registros
            logger.info("%s %s: acuracia final media %.4f", setting, variante, _acuracia_final(registros))
    return resultados


def checar(base, resultados):
    iid, noniid = base.setting, SETTING_NONIID_I
    acc = {k: _acuracia_final(v) for k, v in resultados.items()}
    relatorio = {
        "acuracia_final_media": {f"{s}/{v}": a for (s, v), a in acc.items()},
        "melhor_acuracia_media": {f"{s}/{v}": _media(r, "best_acc") for (s, v), r in resultados.items()},
    }

    relatorio["tendencia_iid"] = all(
        acc[(iid, v)] - acc[(iid, VARIANT_FEDAVG)] >= MARGEM_ACURACIA for v in (VARIANT_MT, VARIANT_D)
    )
    relatorio["noniid_mais_dificil"] = all(
        acc[(noniid, v)] < acc[(iid, v)] for v in (VARIANT_FEDAVG, VARIANT_PI, VARIANT_MT, VARIANT_D)
    )
    relatorio["noniid_d_supera_fedavg"] = acc[(noniid, VARIANT_D)] - acc[(noniid, VARIANT_FEDAVG)] >= MARGEM_ACURACIA

    upload = {v: _media(resultados[(iid, v)], "upload_scalars_total") for v in (VARIANT_PI, VARIANT_D, VARIANT_MT)}
    relatorio["upload_medio"] = upload
    relatorio["ordem_comunicacao"] = upload[VARIANT_PI] < upload[VARIANT_D] < upload[VARIANT_MT]

    # volume online = total - (target + FSM) de cada pacote
    theta, n_camadas = _escalares_por_rede(base)
    pacotes = base.rounds * base.active_clients
    online_mt = upload[VARIANT_MT] - pacotes * (theta + n_camadas)
    online_d = upload[VARIANT_D] - pacotes * (theta + n_camadas)
    tau_medio = float(np.mean([r.metrics["tau"].mean() for r in resultados[(iid, VARIANT_D)]]))
    esperado = (1.0 - tau_medio) * online_mt
    desvio = abs(online_d - esperado) / esperado if esperado > 0 else float("inf")
    relatorio["volume_online_d"] = {"observado": online_d, "esperado": esperado, "desvio_relativo": desvio}
    relatorio["volume_online_dentro_tolerancia"] = desvio <= TOLERANCIA_VOLUME
    return relatorio


def checar_determinismo(base, destino: Path) -> bool:
    cfg = replicate_configs(base)[0]
    arquivos = []
    for threads in (1, 8):
        registro = run_experiment(cfg, threads)
        caminho = destino / f"determinismo_t{threads}_{FILE_METRICS}"
        metrics_with_summary(registro.metrics).to_csv(caminho, index=False)
        arquivos.append(caminho.read_bytes())
    return arquivos[0] == arquivos[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(Path(__file__).parent.parent / "configs" / "blobs_iid_3seeds.ini"))
    ap.add_argument("--out", default="runs/acceptance")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

    base, _ = parse_config(args.config)
    destino = Path(args.out)
    destino.mkdir(parents=True, exist_ok=True)

    resultados = verificar_tendencias(base, args.threads)
    relatorio = checar(base, resultados)
    relatorio["determinismo"] = checar_determinismo(base, destino)

    caminho = destino / "acceptance.json"
    caminho.write_text(json.dumps(relatorio, ensure_ascii=False, indent=2), encoding="utf-8")

    verificacoes = [k for k, v in relatorio.items() if isinstance(v, bool)]
    for k in verificacoes:
        print(f"{'OK   ' if relatorio[k] else 'FALHA'} {k}")
    print(f"Relatorio: {caminho}")
    return 0 if all(relatorio[k] for k in verificacoes) else 1


if __name__ == "__main__":
    sys.exit(main())
