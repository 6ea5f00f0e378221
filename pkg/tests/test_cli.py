import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from cli import EXIT_INFEASIBLE, EXIT_INPUT, cli
from costs import CompositeCost, quadratic_g
from measures import DiscreteMeasure
from primal import eval_bar_I, read_kernel_csv


@pytest.fixture
def runner():
    return CliRunner()


def _write(path, doc):
    path.write_text(json.dumps(doc), encoding='utf-8')
    return str(path)


def _power_problem(n=200):
    grid = {'grid': {'kind': 'midpoint', 'n': n}}
    return {'version': 1, 'mu': grid, 'nu': grid, 'cost': {'kind': 'power', 'eta': 0.5}}


def _quadratic_problem():
    return {
        'version': 1,
        'mu': {'atoms': [[-0.5, 0.0], [0.5, 1.0], [1.0, -1.0]], 'weights': [0.2, 0.3, 0.5]},
        'nu': {'atoms': [[1.0, 0.5], [0.5, 2.0]], 'weights': [0.6, 0.4]},
        'cost': {'kind': 'quadratic'},
    }


def _read_json(path):
    with open(path, encoding='utf-8') as fh:
        return json.load(fh)


# =============================================
# SOLVE / DUAL
# =============================================

def test_solve_power_problem(runner, tmp_path):
    problem = _write(tmp_path / 'power.json', _power_problem())
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['solve', problem, '--out', str(out)])
    assert result.exit_code == 0, result.output
    report = _read_json(out / 'report.json')
    assert report['status'] == 'success'
    assert report['method'] == 'closed_form'
    assert report['primal_value'] == pytest.approx(-0.408248, abs=5e-6)
    assert 'timings' not in report
    assert set(_read_json(out / 'timings.json')) == {'parse', 'solve', 'total'}


def test_solve_report_is_deterministic(runner, tmp_path):
    problem = _write(tmp_path / 'q.json', _quadratic_problem())
    out = tmp_path / 'out'
    runner.invoke(cli, ['solve', problem, '--out', str(out)])
    first = (out / 'report.json').read_bytes()
    kernel = (out / 'kernel.csv').read_bytes()
    result = runner.invoke(cli, ['solve', problem, '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert (out / 'report.json').read_bytes() == first
    assert (out / 'kernel.csv').read_bytes() == kernel


def test_solve_kernel_csv_round_trip(runner, tmp_path):
    problem = _write(tmp_path / 'q.json', _quadratic_problem())
    out = tmp_path / 'out'
    assert runner.invoke(cli, ['solve', problem, '--out', str(out)]).exit_code == 0
    doc = _quadratic_problem()
    mu = DiscreteMeasure(doc['mu']['atoms'], doc['mu']['weights'])
    nu = DiscreteMeasure(doc['nu']['atoms'], doc['nu']['weights'])
    weights, plan = read_kernel_csv(out / 'kernel.csv', nu.atoms)
    assert np.array_equal(weights, mu.weights)
    assert plan.is_feasible(mu, nu)


def test_solve_method_override(runner, tmp_path):
    problem = _write(tmp_path / 'power.json', _power_problem(10))
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['solve', problem, '--out', str(out), '--method', 'lp'])
    assert result.exit_code == EXIT_INPUT
    assert 'MethodMismatchError' in result.output


def test_solve_structure_check_uses_solver_seed(runner, tmp_path):
    doc = _power_problem(20)
    doc['solver'] = {'seed': 7}
    problem = _write(tmp_path / 'power.json', doc)
    reports = []
    for name in ('a', 'b'):
        out = tmp_path / name
        result = runner.invoke(cli, ['solve', problem, '--out', str(out), '--structure-trials', '15'])
        assert result.exit_code == 0, result.output
        reports.append(_read_json(out / 'report.json'))
    structure = reports[0]['structure']
    assert structure['passed']
    assert structure['trials'] == 15
    assert structure == reports[1]['structure']


def test_structure_check_needs_conical_cost(runner, tmp_path):
    doc = _quadratic_problem()
    doc['cost'] = {'kind': 'squared_distance'}
    problem = _write(tmp_path / 'sq.json', doc)
    result = runner.invoke(cli, ['solve', problem, '--out', str(tmp_path / 'out'),
                                 '--structure-trials', '5'])
    assert result.exit_code == EXIT_INPUT
    assert 'MethodMismatchError' in result.output


def test_unbalanced_masses_exit_code(runner, tmp_path):
    doc = _quadratic_problem()
    doc['nu']['weights'] = [0.3, 0.2]
    problem = _write(tmp_path / 'bad.json', doc)
    result = runner.invoke(cli, ['solve', problem, '--out', str(tmp_path / 'out')])
    assert result.exit_code == EXIT_INFEASIBLE


def test_parse_error_exit_code(runner, tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{\n  "version": 1,\n  "mu": [\n', encoding='utf-8')
    result = runner.invoke(cli, ['solve', str(path), '--out', str(tmp_path / 'out')])
    assert result.exit_code == EXIT_INPUT
    assert 'linha' in result.output


def test_dual_command(runner, tmp_path):
    problem = _write(tmp_path / 'power.json', _power_problem(20))
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['dual', problem, '--out', str(out)])
    assert result.exit_code == 0, result.output
    summary = _read_json(out / 'dual.json')
    assert summary['dual_value'] == pytest.approx(summary['primal_value'], abs=1e-10)
    assert len(summary['per_x']) == 20
    assert summary['potential_min'] > 0
    with open(out / 'potential.csv', encoding='utf-8') as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ['j', 'f']
    assert len(rows) == 21


# =============================================
# ORDEM / ESTRUTURA
# =============================================

def test_order_command_dominated(runner, tmp_path):
    mu = _write(tmp_path / 'mu.json', {'version': 1, 'atoms': [[1.0, 1.0]], 'weights': [1.0]})
    nu = _write(tmp_path / 'nu.json',
                {'version': 1, 'atoms': [[2.0, 0.0], [0.0, 2.0]], 'weights': [0.5, 0.5]})
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['order', mu, nu, '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert 'dominated' in result.output
    assert _read_json(out / 'order.json')['verdict'] == 'dominated'
    assert (out / 'order_kernel.csv').exists()


def test_order_command_witness(runner, tmp_path):
    mu = _write(tmp_path / 'mu.json', {'version': 1, 'atoms': [1.0], 'weights': [1.0]})
    nu = _write(tmp_path / 'nu.json', {'version': 1, 'atoms': [2.0], 'weights': [1.0]})
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['order', mu, nu, '--out', str(out)])
    assert result.exit_code == 0, result.output
    summary = _read_json(out / 'order.json')
    assert summary['verdict'] == 'not-dominated'
    assert summary['margin'] > 0
    assert (out / 'witness_directions.csv').exists()


def test_project_command(runner, tmp_path):
    problem = _write(tmp_path / 'q.json', _quadratic_problem())
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['project', problem, '--out', str(out)])
    assert result.exit_code == 0, result.output
    summary = _read_json(out / 'project.json')
    assert summary['match'] and summary['order_ok']
    assert summary['transport_value'] == pytest.approx(summary['I_c'], abs=1e-6)


def test_brenier_command(runner, tmp_path):
    doc = _quadratic_problem()
    mu = _write(tmp_path / 'mu.json', {'version': 1, **doc['mu']})
    nu = _write(tmp_path / 'nu.json', {'version': 1, **doc['nu']})
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['brenier', mu, nu, '--out', str(out)])
    assert result.exit_code == 0, result.output
    summary = _read_json(out / 'brenier.json')
    assert summary['passed']
    assert len(summary['points']) == 3


def test_bareval_command(runner, tmp_path):
    doc = {
        'version': 1,
        'mu': {'atoms': [[0.25], [0.75]], 'weights': [0.5, 0.5]},
        'nu': {'atoms': [[2.0], [3.0]], 'weights': [0.5, 0.5]},
        'cost': {'kind': 'composite', 'F': [[1.0, 2.0], [3.0, 1.0]], 'G': {'kind': 'quadratic', 'a': 1.0}},
    }
    problem = _write(tmp_path / 'c.json', doc)
    coupling = tmp_path / 'pi.csv'
    coupling.write_text('0.25,0.25\n0.25,0.25\n', encoding='utf-8')
    result = runner.invoke(cli, ['bareval', problem, str(coupling)])
    assert result.exit_code == 0, result.output
    mu = DiscreteMeasure([[0.25], [0.75]], [0.5, 0.5])
    cost = CompositeCost([[1.0, 2.0], [3.0, 1.0]], quadratic_g(1.0))
    expected = eval_bar_I(cost, mu, np.full((2, 2), 0.25))
    assert float(result.output.strip()) == pytest.approx(expected)

    coupling.write_text('0.5,0.5\n', encoding='utf-8')
    result = runner.invoke(cli, ['bareval', problem, str(coupling)])
    assert result.exit_code == EXIT_INPUT


# =============================================
# VALIDAÇÃO E PLOTDATA
# =============================================

def test_validate_fails_with_zero_tolerance(runner):
    result = runner.invoke(cli, ['validate', '--suite', 'golden', '--tol', '0', '--seed', '1'])
    assert result.exit_code != 0


def test_validate_properties(runner):
    result = runner.invoke(cli, ['validate', '--suite', 'properties', '--samples', '40', '--seed', '2'])
    assert result.exit_code == 0, result.output


def _plot_column(path, name):
    with open(path, encoding='utf-8') as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r[name]) for r in rows])


@pytest.mark.parametrize('triple, increasing', [('pam', True), ('nam', False)])
def test_plotdata_triple_monotone(runner, tmp_path, triple, increasing):
    out = tmp_path / f'{triple}.csv'
    result = runner.invoke(cli, ['plotdata', '--triple', triple, '--n', '40', '--out', str(out)])
    assert result.exit_code == 0, result.output
    T = _plot_column(out, 'T_1')
    steps = np.diff(T)
    assert np.all(steps >= 0) if increasing else np.all(steps <= 0)
    assert T.size == 40


def test_plotdata_header_and_sizes(runner, tmp_path):
    problem = _write(tmp_path / 'power.json', _power_problem(10))
    out = tmp_path / 'plot.csv'
    result = runner.invoke(cli, ['plotdata', problem, '--out', str(out)])
    assert result.exit_code == 0, result.output
    with open(out, encoding='utf-8') as fh:
        header = next(csv.reader(fh))
    assert header == ['x_1', 'mu', 'N', 'S_1', 'T_1']
    assert _plot_column(out, 'N') @ _plot_column(out, 'mu') == pytest.approx(1.0)


def test_plotdata_requires_source(runner, tmp_path):
    result = runner.invoke(cli, ['plotdata', '--out', str(tmp_path / 'x.csv')])
    assert result.exit_code == EXIT_INPUT
