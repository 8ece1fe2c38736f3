#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
fedsiam.py - Linha de comando do simulador.

Uso:
    python fedsiam.py run --config configs/quickstart.ini [--override chave=valor ...]
    python fedsiam.py compare runs/quickstart-D runs/quickstart-FedAvg [--out runs/cmp]
    python fedsiam.py partition-audit --config configs/quickstart.ini

Codigos de saida: 0 sucesso, 2 erro previsto (configuracao, dados, protocolo),
1 erro inesperado.
"""

import argparse
import logging
import sys
from typing import List, Optional

from src.config import parse_config
from src.errors import ComparisonError, FedSiamError
from src.experiment import find_run_dirs, load_run, run_replicates, write_partition_audit
from src.export import write_comparison
from src.reports import compare_runs, comparison_text

logger = logging.getLogger("fedsiam")


def _cmd_run(args: argparse.Namespace) -> int:
    config, _ = parse_config(args.config, args.override)
    registros, resumo = run_replicates(config, threads=args.threads)
    for r in registros:
        s = r.summary
        print(
            f"{r.run_dir}: melhor={100 * s['best_acc']:.2f}% final={100 * s['final_acc']:.2f}% "
            f"comunicacao={s['comm_scalars_total']:,} ({r.wall_clock_s:.1f}s)"
        )
    if len(registros) > 1:
        print(resumo.to_string(index=False))
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    dirs = find_run_dirs(args.dirs)
    if not dirs:
        raise ComparisonError(f"nenhum metrics.csv encontrado em {args.dirs}")
    registros = [load_run(d) for d in dirs]
    tabela = compare_runs(registros, target_acc=args.target_acc)
    print(comparison_text(tabela), end="")
    if args.out:
        caminhos = write_comparison(tabela, args.out)
        logger.info("comparacao gravada em %s", ", ".join(str(p) for p in caminhos.values()))
    return 0


def _cmd_partition_audit(args: argparse.Namespace) -> int:
    config, _ = parse_config(args.config, args.override)
    caminho = write_partition_audit(config)
    print(f"auditoria de particao: {caminho}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsiam", description="Simulador FedSiam (FL semi-supervisionado siames)")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Executa uma configuracao (uma ou varias seeds)")
    run.add_argument("--config", required=True, help="Arquivo INI da configuracao")
    run.add_argument("--override", action="append", default=[], metavar="CHAVE=VALOR",
                     help="Sobrescreve uma chave (pode repetir)")
    run.add_argument("--threads", type=int, default=None,
                     help="Limite de workers (padrao: FEDSIAM_THREADS ou CPUs); nao altera resultados")
    run.set_defaults(func=_cmd_run)

    compare = sub.add_parser("compare", help="Compara diretorios de execucao")
    compare.add_argument("dirs", nargs="+", help="Diretorios de execucao (busca recursiva por metrics.csv)")
    compare.add_argument("--target-acc", type=float, default=None,
                         help="Alvo de acuracia para rounds_to_target (padrao: 0.9 x melhor)")
    compare.add_argument("--out", default=None, help="Grava comparison.csv/.txt/.xlsx neste diretorio")
    compare.set_defaults(func=_cmd_compare)

    audit = sub.add_parser("partition-audit", help="Grava partition_audit.csv sem treinar")
    audit.add_argument("--config", required=True)
    audit.add_argument("--override", action="append", default=[], metavar="CHAVE=VALOR")
    audit.set_defaults(func=_cmd_partition_audit)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        return args.func(args)
    except FedSiamError as e:
        logger.error("%s", e)
        print(f"erro: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.debug("erro inesperado", exc_info=True)
        print(f"erro inesperado: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
