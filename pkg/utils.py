"""
Módulo de Utilitários - Solver de Transporte Ótimo Fraco
========================================================

Este módulo contém funções utilitárias e helpers usados em todo o sistema:
logging, formatação numérica, grades e arquivos.
"""

import logging
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from config import Config

_LOG_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'


def configure_logging(level=None):
    """Configura logging para stdout (uma única vez por processo)"""
    root = logging.getLogger()
    level = (level or Config.LOG_LEVEL).upper()
    if not any(getattr(h, '_uwot', False) for h in root.handlers):
        stream_handler = logging.StreamHandler(sys.stdout)
        stream_handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        stream_handler._uwot = True
        root.addHandler(stream_handler)
    root.setLevel(level)
    return root


class NumberUtils:
    """Utilitários para números reais estendidos"""

    @staticmethod
    def format_float(value):
        """Representação decimal mais curta que faz ida e volta exata"""
        value = float(value)
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        if math.isnan(value):
            return 'nan'
        return repr(value)

    @staticmethod
    def parse_float(text):
        """Inverso de format_float"""
        return float(text.strip())

    @staticmethod
    def relative_gap(a, b):
        """|a - b| relativo a max(1, |a|, |b|)"""
        if math.isinf(a) or math.isinf(b):
            return 0.0 if a == b else math.inf
        return abs(a - b) / max(1.0, abs(a), abs(b))

    @staticmethod
    def scale_of(*arrays):
        """Maior |coeficiente| entre os arrays, no mínimo 1"""
        scale = 1.0
        for arr in arrays:
            arr = np.asarray(arr, dtype=float)
            if arr.size:
                scale = max(scale, float(np.max(np.abs(arr))))
        return scale


class GridUtils:
    """Utilitários para grades uniformes"""

    @staticmethod
    def midpoint_grid(n, lo=0.0, hi=1.0):
        """Pontos médios de n células iguais em [lo, hi]"""
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5)

    @staticmethod
    def cell_edges(n, lo=0.0, hi=1.0):
        return np.linspace(lo, hi, n + 1)


class FileUtils:
    """Utilitários para manipulação de arquivos"""

    @staticmethod
    def ensure_directory(path):
        """Garante que um diretório existe"""
        if path:
            os.makedirs(path, exist_ok=True)

    @staticmethod
    def get_safe_filename(filename):
        """Retorna um nome de arquivo seguro"""
        safe_chars = re.sub(r'[<>:"/\\|?*]', '_', filename)
        safe_chars = re.sub(r'\s+', '_', safe_chars).strip('._')
        return safe_chars or 'arquivo'


class ParallelUtils:
    """Execução concorrente limitada por UWOT_THREADS"""

    @staticmethod
    def map_indices(func, indices, threads=None):
        """Aplica func a cada índice; preserva a ordem dos resultados"""
        indices = list(indices)
        threads = Config.THREADS if threads is None else max(1, int(threads))
        if threads == 1 or len(indices) < 2:
            return [func(i) for i in indices]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, indices))
