"""
Exceções do solver
==================

Hierarquia pequena: a CLI traduz cada classe num código de saída
(1 leitura, 2 inviável, 3 falha numérica).
"""


class UwotError(Exception):
    """Erro base do projeto"""


class DimensionMismatchError(UwotError, ValueError):
    """Dimensões incompatíveis entre pontos, medidas ou planos"""


class CostDomainError(UwotError, ValueError):
    """Custo avaliado fora do seu domínio (ex.: z fora de R_+^d)"""


class MethodMismatchError(UwotError, ValueError):
    """Método de solução não se aplica ao modelo de custo"""


class InfeasibleProblemError(UwotError):
    """Massas de mu e nu não balanceadas"""


class NumericalFailureError(UwotError):
    """Solver esgotou o orçamento de pivôs/iterações sem convergir"""


class ProblemParseError(UwotError):
    """Arquivo de problema inválido; guarda linha e coluna quando conhecidas"""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (linha {line}, coluna {column})"
        super().__init__(message)
