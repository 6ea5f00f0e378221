import numpy as np
import pytest

import validation
from measures import DiscreteMeasure


@pytest.mark.parametrize('check', [
    validation.golden_power_closed_form,
    validation.golden_composite_square,
    validation.golden_linear_cost,
])
def test_fixed_golden_examples(check):
    result = check()
    assert result.passed, result.detail


@pytest.mark.parametrize('check, count', [
    (validation.golden_lp_duality, 10),
    (validation.golden_projection, 10),
    (validation.golden_monotone, 4),
    (validation.golden_monge_kantorovich, 10),
    (validation.golden_joint_convexity, 5),
])
def test_randomized_golden_examples(check, count):
    result = check(seed=13, count=count)
    assert result.passed, result.detail


def test_property_suite_small():
    results = validation.property_suite(seed=21, samples=100)
    failed = [f'{r.name}: {r.detail}' for r in results if not r.passed]
    assert not failed
    assert len(results) == 10


def test_zero_tolerance_is_reported():
    result = validation.golden_power_closed_form(tol=0.0)
    assert not result.passed


def test_dominated_pair_generator(rng):
    mu, nu = validation.dominated_pair(rng, 3, 4, 2)
    assert isinstance(mu, DiscreteMeasure)
    assert mu.mass == pytest.approx(nu.mass)
    assert np.allclose(mu.weights @ mu.atoms, nu.weights @ nu.atoms)


def test_run_prints_summary(capsys, monkeypatch):
    monkeypatch.setattr(validation, 'golden_suite', lambda seed, tol: [
        validation.CheckResult('a', True, 'ok'), validation.CheckResult('b', False, 'ruim')])
    assert not validation.run('golden')
    out = capsys.readouterr().out
    assert '✅ a: ok' in out
    assert '❌ b: ruim' in out
