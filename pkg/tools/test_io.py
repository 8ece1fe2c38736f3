#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Testes de leitura de datasets CSV (label,f1,...,fdim).

USO:
    python tools/test_io.py
    pytest tools/test_io.py
"""

import sys
from pathlib import Path

# Adicionar src ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from src.errors import DataValidationError
from src.io import detect_sep, load_csv_dataset


def _grava(tmp_path, conteudo, nome="dados.csv"):
    caminho = tmp_path / nome
    caminho.write_text(conteudo, encoding="utf-8")
    return caminho


def test_three_row_file(tmp_path):
    caminho = _grava(tmp_path, "0,1.0,2.0\n1,3.0,4.0\n0,5.0,6.0\n")
    ds, avisos = load_csv_dataset(caminho)
    assert len(ds) == 3
    assert ds.dim == 2
    assert ds.n_classes == 2
    assert ds.labels.tolist() == [0, 1, 0]
    assert any("3 linhas" in a for a in avisos)


def test_header_is_skipped(tmp_path):
    caminho = _grava(tmp_path, "label,a,b\n0,1,2\n1,3,4\n")
    ds, _ = load_csv_dataset(caminho, has_header=True)
    assert len(ds) == 2
    np.testing.assert_array_equal(ds.features, [[1.0, 2.0], [3.0, 4.0]])


def test_normalize_global_min_max(tmp_path):
    caminho = _grava(tmp_path, "0,0,10\n1,5,20\n")
    ds, _ = load_csv_dataset(caminho, normalize=True)
    np.testing.assert_allclose(ds.features, [[0.0, 0.5], [0.25, 1.0]])


def test_semicolon_separator(tmp_path):
    caminho = _grava(tmp_path, "0;1;2\n1;3;4\n")
    ds, _ = load_csv_dataset(caminho)
    assert ds.dim == 2
    assert detect_sep("0;1;2") == ";"


def test_non_numeric_feature_cites_line(tmp_path):
    caminho = _grava(tmp_path, "0,1,2\n1,abc,4\n0,5,6\n")
    with pytest.raises(DataValidationError) as exc:
        load_csv_dataset(caminho)
    assert exc.value.linha == 2
    assert "linha 2" in str(exc.value)


def test_non_numeric_with_header_offsets_line(tmp_path):
    caminho = _grava(tmp_path, "label,a,b\n0,1,2\n1,2,x\n")
    with pytest.raises(DataValidationError) as exc:
        load_csv_dataset(caminho, has_header=True)
    assert exc.value.linha == 3


def test_inconsistent_dimension(tmp_path):
    caminho = _grava(tmp_path, "0,1,2\n1,3\n0,5,6\n")
    with pytest.raises(DataValidationError):
        load_csv_dataset(caminho)


def test_negative_label(tmp_path):
    caminho = _grava(tmp_path, "0,1,2\n-1,3,4\n")
    with pytest.raises(DataValidationError) as exc:
        load_csv_dataset(caminho)
    assert exc.value.linha == 2


def test_missing_file(tmp_path):
    with pytest.raises(DataValidationError):
        load_csv_dataset(tmp_path / "nao_existe.csv")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
