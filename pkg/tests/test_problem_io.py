import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import problem_io
from costs import AffineSupCost, CompositeCost, PiecewiseLinearF, PowerF, QuadraticF, SigmaNormF
from errors import ProblemParseError

POWER_PROBLEM = {
    'version': 1,
    'mu': {'grid': {'kind': 'midpoint', 'n': 5}},
    'nu': {'grid': {'kind': 'midpoint', 'n': 5, 'lo': 0.0, 'hi': 1.0}},
    'cost': {'kind': 'power', 'eta': 0.5},
}


def _doc(**changes):
    doc = json.loads(json.dumps(POWER_PROBLEM))
    doc.update(changes)
    return doc


# =============================================
# LEITURA E ESCRITA
# =============================================

def test_parse_fills_defaults():
    spec = problem_io.parse(json.dumps(POWER_PROBLEM))
    assert spec.mu == {'grid': {'kind': 'midpoint', 'n': 5, 'lo': 0.0, 'hi': 1.0}}
    assert spec.solver['method'] == 'auto'
    assert spec.solver['gap_tol'] is None


def test_emit_is_canonical():
    spec = problem_io.parse(json.dumps(POWER_PROBLEM))
    text = problem_io.emit(spec)
    assert problem_io.parse(text) == spec
    assert problem_io.emit(problem_io.parse(text)) == text


def test_atoms_given_as_scalars():
    doc = _doc(mu={'atoms': [0.5, 1.5], 'weights': [0.5, 0.5]})
    spec = problem_io.parse(json.dumps(doc))
    assert spec.mu['atoms'] == [[0.5], [1.5]]


@pytest.mark.parametrize('doc, fragment', [
    (_doc(extra=1), 'extra'),
    (_doc(version=2), 'versão'),
    ({k: v for k, v in POWER_PROBLEM.items() if k != 'version'}, 'versão'),
    ({k: v for k, v in POWER_PROBLEM.items() if k != 'cost'}, 'cost'),
    (_doc(cost={'kind': 'banana'}), 'banana'),
    (_doc(cost={'kind': 'power', 'eta': 0.5, 'gamma': 1}), 'gamma'),
    (_doc(solver={'metodo': 'lp'}), 'metodo'),
    (_doc(mu={'grid': {'n': 0}}), 'inteiro'),
    (_doc(mu={'atoms': [[1.0]]}), 'weights'),
    (_doc(cost={'kind': 'composite', 'F': [[1.0]], 'G': {'kind': 'cosh'}}), 'G'),
])
def test_parse_rejects_invalid_documents(doc, fragment):
    with pytest.raises(ProblemParseError) as excinfo:
        problem_io.parse(json.dumps(doc))
    assert fragment in str(excinfo.value)


def test_json_error_has_position():
    with pytest.raises(ProblemParseError) as excinfo:
        problem_io.parse('{\n  "version": 1,\n  "mu": ]\n}')
    assert excinfo.value.line == 3
    assert excinfo.value.column is not None
    assert 'linha 3' in str(excinfo.value)


def test_load_from_file(tmp_path):
    path = tmp_path / 'problem.json'
    path.write_text(json.dumps(POWER_PROBLEM), encoding='utf-8')
    spec = problem_io.load(path)
    mu, nu = spec.build_measures()
    assert mu.n == 5
    assert_allclose(mu.scalar_atoms(), [0.1, 0.3, 0.5, 0.7, 0.9])
    assert isinstance(spec.build_cost(mu, nu), PowerF)


def test_load_measure(tmp_path):
    path = tmp_path / 'mu.json'
    path.write_text(json.dumps({'version': 1, 'atoms': [[1.0, 1.0]], 'weights': [1.0]}),
                    encoding='utf-8')
    mu = problem_io.load_measure(path)
    assert mu.dim == 2
    path.write_text(json.dumps({'atoms': [[1.0]], 'weights': [1.0]}), encoding='utf-8')
    with pytest.raises(ProblemParseError):
        problem_io.load_measure(path)


def test_invalid_weights_become_parse_error():
    block = {'atoms': [[1.0]], 'weights': [-1.0]}
    with pytest.raises(ProblemParseError):
        problem_io.build_measure(block, 'mu')


# =============================================
# CONSTRUÇÃO DOS CUSTOS
# =============================================

@pytest.mark.parametrize('block, expected', [
    ({'kind': 'squared_distance'}, AffineSupCost),
    ({'kind': 'l1_distance'}, PiecewiseLinearF),
    ({'kind': 'piecewise_linear', 'u': [[[1.0], [1.0]], [[-1.0], [-1.0]]], 'a': [[0.0, 0.0], [0.0, 0.0]]},
     PiecewiseLinearF),
    ({'kind': 'quadratic'}, QuadraticF),
    ({'kind': 'power', 'eta': 0.25}, PowerF),
    ({'kind': 'sigma_norm', 'A': [[[1.0]], [[2.0]]], 'sigma': 1.0, 'eta': 0.5}, SigmaNormF),
    ({'kind': 'composite', 'F': {'kind': 'abs_diff'}, 'G': {'kind': 'quadratic', 'a': 1.0}},
     CompositeCost),
    ({'kind': 'composite', 'F': {'kind': 'exp_product', 'scale': 1.0}, 'G': {'kind': 'neglog'}},
     CompositeCost),
])
def test_build_each_cost_kind(block, expected):
    doc = _doc(mu={'atoms': [[0.5], [1.0]], 'weights': [0.5, 0.5]},
               nu={'atoms': [[2.0]], 'weights': [1.0]}, cost=block)
    spec = problem_io.parse(json.dumps(doc))
    mu, nu = spec.build_measures()
    cost = spec.build_cost(mu, nu)
    assert isinstance(cost, expected)
    assert cost.n_x == 2
    assert cost.n_y == 1


def test_bad_cost_parameters_become_parse_error():
    doc = _doc(cost={'kind': 'power', 'eta': 1.5})
    spec = problem_io.parse(json.dumps(doc))
    mu, nu = spec.build_measures()
    with pytest.raises(ProblemParseError, match='power'):
        spec.build_cost(mu, nu)


# =============================================
# CSV E JSON
# =============================================

def test_matrix_csv_is_exact(tmp_path):
    M = np.array([[0.1, 1.0 / 3.0], [2e-300, -7.25]])
    path = tmp_path / 'm.csv'
    problem_io.write_matrix_csv(path, M)
    assert np.array_equal(problem_io.read_matrix_csv(path), M)


def test_matrix_csv_rejects_text(tmp_path):
    path = tmp_path / 'm.csv'
    path.write_text('1.0,abc\n', encoding='utf-8')
    with pytest.raises(ProblemParseError):
        problem_io.read_matrix_csv(path)


def test_json_safe():
    value = {'a': np.array([1.0, math.inf]), 'b': np.float64(-math.inf), 'c': np.int64(3),
             'd': np.bool_(True), 'e': (math.nan,)}
    safe = problem_io.json_safe(value)
    assert safe == {'a': [1.0, 'inf'], 'b': '-inf', 'c': 3, 'd': True, 'e': ['nan']}
    json.dumps(safe, allow_nan=False)
