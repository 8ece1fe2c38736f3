"""
errors.py - Hierarquia de excecoes do simulador.

Todas as excecoes esperadas derivam de FedSiamError; a CLI converte qualquer
uma delas em codigo de saida 2 com uma linha de diagnostico.
"""

from typing import Optional


class FedSiamError(Exception):
    """Excecao base para erros previstos do simulador."""
    pass


class ShapeError(FedSiamError):
    """Dimensoes incompativeis entre modelo, lote ou gradiente."""
    pass


class ContractError(FedSiamError):
    """Pre-condicao de uma operacao violada (ex: lote sem rotulos)."""
    pass


class DataValidationError(FedSiamError):
    """Excecao customizada para erros de validacao de dados."""

    def __init__(self, mensagem: str, linha: Optional[int] = None):
        self.linha = linha
        if linha is not None:
            mensagem = f"linha {linha}: {mensagem}"
        super().__init__(mensagem)


class PartitionError(FedSiamError):
    """Particao inviavel para o dataset informado."""
    pass


class ScenarioError(FedSiamError):
    """Operacao chamada no cenario errado (labels-at-client/server)."""
    pass


class ProtocolError(FedSiamError):
    """Pacote de upload inconsistente com o protocolo."""
    pass


class AggregationError(FedSiamError):
    """Agregacao impossivel (ex: total de amostras igual a zero)."""
    pass


class ConfigError(FedSiamError):
    """Chave desconhecida, tipo invalido ou restricao violada na configuracao."""

    def __init__(self, chave: str, restricao: str):
        self.chave = chave
        self.restricao = restricao
        super().__init__(f"config '{chave}': {restricao}")


class ComparisonError(FedSiamError):
    """Execucoes incomparaveis (dataset ou seeds diferentes)."""
    pass
