"""
io.py - Leitura e validacao de datasets em CSV.

Este modulo contem:
- Deteccao de encoding e separador do arquivo
- Leitura de linhas `label,f1,...,fdim` (cabecalho opcional)
- Validacao com numero da linha em erros de parse/esquema
- Normalizacao opcional das features para [0, 1]
"""

import logging
from io import BytesIO
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from .data import Dataset
from .errors import DataValidationError

logger = logging.getLogger(__name__)

ENCODINGS = ["utf-8-sig", "utf-8", "latin-1", "cp1252"]


def detect_encoding(raw: bytes) -> str:
    """Detecta encoding tentando decodificar."""
    for enc in ENCODINGS:
        try:
            raw.decode(enc)
            return enc
        except UnicodeDecodeError:
            continue
    raise DataValidationError("Nao foi possivel decodificar o arquivo CSV.")


def detect_sep(first_line: str) -> str:
    """Detecta separador pela primeira linha (prioriza ,, ;, \\t, |)."""
    counts = {
        ",": first_line.count(","),
        ";": first_line.count(";"),
        "\t": first_line.count("\t"),
        "|": first_line.count("|"),
    }
    sep = max(counts, key=counts.get)
    return sep if counts[sep] > 0 else ","


def load_csv_dataset(
    path: Union[str, Path],
    has_header: bool = False,
    normalize: bool = False,
) -> Tuple[Dataset, List[str]]:
    """
    Le um dataset no formato `label,f1,...,fdim`.

    Args:
        path: Caminho do arquivo CSV
        has_header: Se True, a primeira linha e cabecalho
        normalize: Se True, escala as features para [0, 1] (min-max global)

    Returns:
        Tupla (Dataset, lista de avisos)

    Raises:
        DataValidationError: Arquivo inexistente, linha malformada (com numero
            da linha) ou dimensao inconsistente entre linhas
    """
    avisos = []
    caminho = Path(path)
    if not caminho.exists():
        raise DataValidationError(f"Arquivo de dataset nao encontrado: {caminho}")

    raw = caminho.read_bytes()
    encoding = detect_encoding(raw)
    linhas = raw.decode(encoding, errors="replace").splitlines()
    if not linhas or (has_header and len(linhas) < 2):
        raise DataValidationError(f"Arquivo vazio: {caminho}")
    sep = detect_sep(linhas[0])
    largura = len(linhas[1 if has_header else 0].split(sep))
    if largura < 2:
        raise DataValidationError("cada linha precisa de rotulo e ao menos uma feature", linha=2 if has_header else 1)

    try:
        df = pd.read_csv(
            BytesIO(raw),
            sep=sep,
            header=0 if has_header else None,
            names=None if has_header else list(range(largura)),
            encoding=encoding,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            engine="c",
            on_bad_lines="error",
        )
    except pd.errors.ParserError as e:
        raise DataValidationError(f"dimensao inconsistente entre linhas: {str(e)[:200]}")

    offset = 2 if has_header else 1
    faltando = df.isna().any(axis=1).to_numpy()
    if faltando.any():
        i = int(np.flatnonzero(faltando)[0])
        raise DataValidationError(f"esperadas {largura} colunas", linha=i + offset)

    valores = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    invalidos = valores.isna().any(axis=1).to_numpy()
    if invalidos.any():
        i = int(np.flatnonzero(invalidos)[0])
        raise DataValidationError(f"valor nao numerico: {df.iloc[i].tolist()[:5]}...", linha=i + offset)

    matriz = valores.to_numpy(dtype=np.float64)
    rotulos = matriz[:, 0]
    if np.any(rotulos != np.round(rotulos)) or np.any(rotulos < 0):
        i = int(np.flatnonzero((rotulos != np.round(rotulos)) | (rotulos < 0))[0])
        raise DataValidationError("rotulo deve ser inteiro >= 0", linha=i + offset)

    features = matriz[:, 1:]
    if normalize:
        minimo, maximo = float(features.min()), float(features.max())
        if maximo > minimo:
            features = (features - minimo) / (maximo - minimo)
        else:
            avisos.append("Features constantes: normalizacao ignorada")

    rotulos = rotulos.astype(np.int64)
    n_classes = int(rotulos.max()) + 1
    dataset = Dataset(features, rotulos, n_classes)
    avisos.append(f"Dataset carregado: {len(dataset)} linhas, dim={dataset.dim}, C={n_classes}")
    logger.info("dataset %s: N=%d dim=%d C=%d", caminho.name, len(dataset), dataset.dim, n_classes)
    return dataset, avisos
