"""
Arquivo de configuração do solver de transporte ótimo fraco não normalizado
===========================================================================

Este arquivo centraliza tolerâncias, limites de iteração, paralelismo e
pastas de saída, para facilitar manutenção e customização.
Os valores vêm de variáveis de ambiente (arquivo .env aceito).
"""

import os
from dotenv import load_dotenv

# Carregar variáveis de ambiente
load_dotenv()


def _env_float(name, default):
    return float(os.environ.get(name, default))


def _env_int(name, default):
    return int(os.environ.get(name, default))


class Config:
    """Configuração base do sistema"""

    ENV_NAME = os.environ.get('UWOT_ENV', 'default')

    # Tolerâncias numéricas (relativas à escala dos coeficientes)
    FEAS_TOL = _env_float('UWOT_FEAS_TOL', 1e-9)
    GAP_TOL = _env_float('UWOT_GAP_TOL', 1e-8)

    # Limites dos solvers
    MAX_PIVOTS = _env_int('UWOT_MAX_PIVOTS', 20000)
    DEGENERACY_LIMIT = _env_int('UWOT_DEGENERACY_LIMIT', 50)
    FW_MAX_ITERS = _env_int('UWOT_FW_MAX_ITERS', 5000)
    NNLS_MAX_OUTER = _env_int('UWOT_NNLS_MAX_OUTER', 400)

    # Paralelismo (avaliações de K_c / Q_F por átomo)
    THREADS = max(1, _env_int('UWOT_THREADS', 1))

    # Reprodutibilidade
    SEED = _env_int('UWOT_SEED', 42)
    PROPERTY_SAMPLES = _env_int('UWOT_PROPERTY_SAMPLES', 1000)

    # Saídas (relatórios JSON/CSV/PDF/XLSX)
    OUTPUT_FOLDER = os.environ.get(
        'UWOT_OUTPUT_DIR', os.path.join(os.path.dirname(__file__), 'output')
    )

    # Logs vão para stdout
    LOG_LEVEL = os.environ.get('UWOT_LOG_LEVEL', 'INFO')

    @classmethod
    def ensure_directories(cls):
        """Garante que a pasta de saída existe"""
        os.makedirs(cls.OUTPUT_FOLDER, exist_ok=True)


class DevelopmentConfig(Config):
    """Configuração para desenvolvimento"""
    LOG_LEVEL = os.environ.get('UWOT_LOG_LEVEL', 'DEBUG')


class TestingConfig(Config):
    """Configuração para testes (suítes menores)"""
    PROPERTY_SAMPLES = _env_int('UWOT_PROPERTY_SAMPLES', 200)
    FW_MAX_ITERS = _env_int('UWOT_FW_MAX_ITERS', 2000)


class StrictConfig(Config):
    """Tolerâncias mais apertadas para conferência"""
    FEAS_TOL = 1e-11
    GAP_TOL = 1e-10


# Configuração baseada em ambiente
config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'strict': StrictConfig,
    'default': Config
}


def active_config():
    """Retorna a classe de configuração selecionada por UWOT_ENV"""
    return config.get(os.environ.get('UWOT_ENV', 'default'), Config)
