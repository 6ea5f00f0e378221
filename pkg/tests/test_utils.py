import logging
import math

import numpy as np
import pytest

from config import Config, DevelopmentConfig, StrictConfig, TestingConfig, active_config
from utils import FileUtils, GridUtils, NumberUtils, ParallelUtils, configure_logging


@pytest.mark.parametrize('env, expected', [
    ('development', DevelopmentConfig),
    ('testing', TestingConfig),
    ('strict', StrictConfig),
    ('default', Config),
    ('desconhecido', Config),
])
def test_active_config(monkeypatch, env, expected):
    monkeypatch.setenv('UWOT_ENV', env)
    assert active_config() is expected


def test_strict_config_is_tighter():
    assert StrictConfig.FEAS_TOL < Config.FEAS_TOL
    assert StrictConfig.GAP_TOL < Config.GAP_TOL


@pytest.mark.parametrize('value', [0.1, 1.0 / 3.0, -2.5e-300, 1e300, math.inf, -math.inf])
def test_format_float_round_trip(value):
    assert NumberUtils.parse_float(NumberUtils.format_float(value)) == value


def test_format_nan():
    assert NumberUtils.format_float(math.nan) == 'nan'
    assert math.isnan(NumberUtils.parse_float(' nan '))


def test_relative_gap_and_scale():
    assert NumberUtils.relative_gap(1.0, 1.5) == pytest.approx(0.5 / 1.5)
    assert NumberUtils.relative_gap(-math.inf, -math.inf) == 0.0
    assert NumberUtils.relative_gap(0.0, math.inf) == math.inf
    assert NumberUtils.scale_of([0.1], np.array([[-3.0, 2.0]]), []) == 3.0
    assert NumberUtils.scale_of([0.5]) == 1.0


def test_grids():
    assert np.allclose(GridUtils.midpoint_grid(4), [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(GridUtils.cell_edges(2, -1.0, 1.0), [-1.0, 0.0, 1.0])


def test_safe_filename(tmp_path):
    assert FileUtils.get_safe_filename('a b/c?.pdf') == 'a_b_c_.pdf'
    assert FileUtils.get_safe_filename('...') == 'arquivo'
    target = tmp_path / 'x' / 'y'
    FileUtils.ensure_directory(str(target))
    assert target.is_dir()


@pytest.mark.parametrize('threads', [1, 3])
def test_map_indices_keeps_order(threads):
    assert ParallelUtils.map_indices(lambda i: i * i, range(6), threads=threads) == [0, 1, 4, 9, 16, 25]


def test_configure_logging_is_idempotent():
    root = configure_logging('warning')
    handlers = len(root.handlers)
    configure_logging('debug')
    assert len(root.handlers) == handlers
    assert root.level == logging.DEBUG
