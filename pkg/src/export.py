"""
export.py - Funcoes de exportacao de tabelas de resultados.

Este modulo contem funcoes para exportar DataFrames (metricas, comparacoes,
auditorias) para CSV e Excel, em bytes (download na interface) ou em disco.
"""

from datetime import datetime
from io import BytesIO
from pathlib import Path
from typing import Dict, Union

import pandas as pd
from openpyxl.utils import get_column_letter

from .constants import FILE_COMPARISON_CSV, FILE_COMPARISON_TXT, FILE_COMPARISON_XLSX
from .reports import aggregate_by_variant, comparison_text


def to_csv_bytes(df: pd.DataFrame) -> bytes:
    """
    Exporta um DataFrame para CSV.

    Args:
        df: DataFrame a ser exportado

    Returns:
        Bytes do arquivo CSV (utf-8)
    """
    return df.to_csv(index=False).encode("utf-8")


def _ajustar_larguras(worksheet, df: pd.DataFrame) -> None:
    for idx, col in enumerate(df.columns):
        conteudo = df[col].astype(str).map(len).max() if len(df) > 0 else 0
        largura = max(min(max(conteudo, len(str(col))) + 2, 50), 10)
        worksheet.column_dimensions[get_column_letter(idx + 1)].width = largura


def to_excel_bytes(sheets: Dict[str, pd.DataFrame]) -> bytes:
    """
    Exporta varios DataFrames para um .xlsx, uma aba por tabela.

    Args:
        sheets: Dicionario {nome_aba: DataFrame}

    Returns:
        Bytes do arquivo Excel
    """
    output = BytesIO()
    with pd.ExcelWriter(output, engine="openpyxl") as writer:
        for nome_aba, df in sheets.items():
            # Limite do Excel: 31 caracteres
            nome = nome_aba[:31]
            df.to_excel(writer, sheet_name=nome, index=False)
            _ajustar_larguras(writer.sheets[nome], df)
    return output.getvalue()


def comparison_sheets(comparison: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """Abas do comparison.xlsx: tabela por execucao e medias por variante."""
    return {
        "comparacao": comparison,
        "por_variante": aggregate_by_variant(comparison),
    }


def write_comparison(comparison: pd.DataFrame, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Grava comparison.csv, comparison.txt e comparison.xlsx em out_dir.

    Returns:
        Dicionario {formato: caminho}
    """
    destino = Path(out_dir)
    destino.mkdir(parents=True, exist_ok=True)
    caminhos = {
        "csv": destino / FILE_COMPARISON_CSV,
        "txt": destino / FILE_COMPARISON_TXT,
        "xlsx": destino / FILE_COMPARISON_XLSX,
    }
    caminhos["csv"].write_bytes(to_csv_bytes(comparison))
    caminhos["txt"].write_text(comparison_text(comparison), encoding="utf-8")
    caminhos["xlsx"].write_bytes(to_excel_bytes(comparison_sheets(comparison)))
    return caminhos


def timestamped_name(prefixo: str, extensao: str) -> str:
    """
    Gera nome de arquivo com timestamp.

    Args:
        prefixo: Prefixo do nome do arquivo
        extensao: Extensao do arquivo (sem ponto)

    Returns:
        Nome do arquivo formatado
    """
    return f"{prefixo}_{datetime.now().strftime('%Y%m%d_%H%M%S')}.{extensao}"
