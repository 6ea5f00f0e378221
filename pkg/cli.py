#!/usr/bin/env python3
"""
Linha de comando do solver de transporte ótimo fraco
====================================================

Comandos: solve, dual, order, project, brenier, validate, plotdata, bareval.

Códigos de saída:
    0  sucesso
    1  erro de leitura, dimensão ou método
    2  problema inviável (massas não balanceadas)
    3  falha numérica ou solução sem certificado
"""

import functools
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import click
import numpy as np

import problem_io
import validation
from config import Config, active_config
from dual import dual_report, write_directions, write_potential_csv
from errors import (CostDomainError, DimensionMismatchError, InfeasibleProblemError,
                    MethodMismatchError, NumericalFailureError, ProblemParseError)
from order import brenier_check, check_phc_order, project_phc, verify_structure_bis
from primal import METHODS, closed_form_uniform_triple, eval_bar_I, solve_primal, \
    write_kernel_csv
from reports import ReportGenerator
from utils import FileUtils, NumberUtils, configure_logging

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

_EXIT_CODES = (
    (ProblemParseError, EXIT_INPUT),
    (DimensionMismatchError, EXIT_INPUT),
    (MethodMismatchError, EXIT_INPUT),
    (CostDomainError, EXIT_INPUT),
    (InfeasibleProblemError, EXIT_INFEASIBLE),
    (NumericalFailureError, EXIT_NUMERICAL),
    (ValueError, EXIT_INPUT),
)


@dataclass
class RunReport:
    status: str
    method: str
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    artifacts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def _exit_on_error(func):
    """Traduz exceções do projeto em mensagem no stderr e código de saída"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except tuple(exc for exc, _ in _EXIT_CODES) as exc:
            code = next(c for cls, c in _EXIT_CODES if isinstance(exc, cls))
            click.echo(f"❌ {type(exc).__name__}: {exc}", err=True)
            sys.exit(code)
    return wrapper


def _write_json(path, payload):
    FileUtils.ensure_directory(os.path.dirname(os.path.abspath(path)))
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(problem_io.json_safe(payload), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write('\n')
    return path


def _load_problem(path):
    spec = problem_io.load(path)
    mu, nu = spec.build_measures()
    return spec, mu, nu, spec.build_cost(mu, nu)


def _out_dir(out):
    out = out or Config.OUTPUT_FOLDER
    FileUtils.ensure_directory(out)
    return out


@click.group()
def cli():
    """Solver de transporte ótimo fraco não normalizado entre medidas discretas."""


# =============================================
# SOLVE / DUAL
# =============================================

@cli.command()
@click.argument('problem', type=click.Path(exists=True, dir_okay=False))
@click.option('--method', type=click.Choice(METHODS), default=None,
              help='Sobrepõe solver.method do arquivo.')
@click.option('--out', type=click.Path(file_okay=False), default=None,
              help='Pasta de saída (report.json, timings.json).')
@click.option('--kernel', type=click.Path(dir_okay=False), default=None,
              help='CSV do núcleo (padrão: <out>/kernel.csv).')
@click.option('--tol', type=float, default=None, help='Tolerância do gap primal-dual.')
@click.option('--pdf', type=click.Path(dir_okay=False), default=None, help='Resumo em PDF.')
@click.option('--xlsx', type=click.Path(dir_okay=False), default=None, help='Núcleo em XLSX.')
@click.option('--structure-trials', type=click.IntRange(min=0), default=0, show_default=True,
              help='Acoplamentos aleatórios na checagem de estrutura (semente: solver.seed).')
@_exit_on_error
def solve(problem, method, out, kernel, tol, pdf, xlsx, structure_trials):
    """Resolve I_c(μ, ν) e grava relatório JSON e núcleo CSV."""
    started = time.perf_counter()
    spec, mu, nu, cost = _load_problem(problem)
    parsed = time.perf_counter()
    solver = spec.solver
    report = solve_primal(cost, mu, nu, method=method or solver['method'],
                          row_sums=solver['row_sums'],
                          gap_tol=tol if tol is not None else solver['gap_tol'],
                          max_iters=solver['max_iters'])
    out = _out_dir(out)
    kernel = kernel or os.path.join(out, 'kernel.csv')
    write_kernel_csv(kernel, report.plan, mu)
    artifacts = {'kernel': kernel}
    if pdf or xlsx:
        generator = ReportGenerator(out)
        if pdf:
            artifacts['pdf'] = generator.generate_solution_pdf(report, mu, pdf)
        if xlsx:
            artifacts['xlsx'] = generator.generate_kernel_xlsx(report, mu, xlsx)

    run = RunReport(status='success' if report.certified else 'uncertified',
                    method=report.method, primal_value=report.primal_value,
                    dual_value=report.dual_value, gap=report.gap,
                    iterations=report.iterations, artifacts=artifacts,
                    timings={'parse': parsed - started, 'solve': report.elapsed,
                             'total': time.perf_counter() - started})
    payload = asdict(run)
    timings = payload.pop('timings')
    if structure_trials:
        check = verify_structure_bis(cost, report.plan.to_coupling(mu), mu, nu,
                                     trials=structure_trials, seed=solver['seed'],
                                     I_c=report.primal_value)
        payload['structure'] = asdict(check)
    artifacts['report'] = _write_json(os.path.join(out, 'report.json'), payload)
    _write_json(os.path.join(out, 'timings.json'), timings)

    fmt = NumberUtils.format_float
    click.echo(f"método={run.method} valor={fmt(run.primal_value)} dual={fmt(run.dual_value)} "
               f"gap={fmt(run.gap)}")
    if not report.certified:
        click.echo("❌ gap acima da tolerância declarada", err=True)
        sys.exit(EXIT_NUMERICAL)


@cli.command('dual')
@click.argument('problem', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.option('--lam', type=float, default=2.0, show_default=True,
              help='λ > 1 da cota inferior −M/(λ−1).')
@_exit_on_error
def dual_command(problem, out, lam):
    """Resolve, extrai o potencial dual e grava potential.csv e dual.json."""
    spec, mu, nu, cost = _load_problem(problem)
    report = solve_primal(cost, mu, nu, method=spec.solver['method'],
                          gap_tol=spec.solver['gap_tol'], max_iters=spec.solver['max_iters'])
    if report.potential is None:
        raise NumericalFailureError('o método usado não produz potencial dual')
    out = _out_dir(out)
    write_potential_csv(os.path.join(out, 'potential.csv'), report.potential)
    dr = dual_report(cost, report.potential, mu, nu, lam)
    _write_json(os.path.join(out, 'dual.json'), {
        'primal_value': report.primal_value, 'dual_value': dr.dual_value,
        'gap': report.primal_value - dr.dual_value, 'per_x': dr.per_x,
        'bound_M': dr.bound_M, 'lower_bound': dr.lower_bound, 'potential_min': dr.potential_min,
        'bound_ok': dr.bound_ok,
    })
    click.echo(f"dual={NumberUtils.format_float(dr.dual_value)} "
               f"primal={NumberUtils.format_float(report.primal_value)}")


# =============================================
# ORDEM / ESTRUTURA
# =============================================

@cli.command()
@click.argument('mu_file', type=click.Path(exists=True, dir_okay=False))
@click.argument('nu_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--tol', type=float, default=1e-9, show_default=True)
@click.option('--out', type=click.Path(file_okay=False), default=None)
@_exit_on_error
def order(mu_file, nu_file, tol, out):
    """Decide μ <=_phc ν e grava o núcleo ou as direções da testemunha."""
    mu, nu = problem_io.load_measure(mu_file), problem_io.load_measure(nu_file)
    witness = check_phc_order(mu, nu, tol)
    out = _out_dir(out)
    summary = {'verdict': witness.verdict, 'margin': witness.margin}
    if witness.dominated:
        summary['kernel'] = os.path.join(out, 'order_kernel.csv')
        write_kernel_csv(summary['kernel'], witness.kernel, mu)
    elif witness.certified:
        summary['directions'] = os.path.join(out, 'witness_directions.csv')
        write_directions(summary['directions'], witness.potential)
    _write_json(os.path.join(out, 'order.json'), summary)
    click.echo(witness.verdict)


@cli.command()
@click.argument('problem', type=click.Path(exists=True, dir_okay=False))
@click.option('--tol', type=float, default=1e-7, show_default=True)
@click.option('--out', type=click.Path(file_okay=False), default=None)
@_exit_on_error
def project(problem, tol, out):
    """Confere I_c(μ, ν) = T_F(μ, S_#μ) para custos cônicos."""
    _, mu, nu, cost = _load_problem(problem)
    report = project_phc(cost, mu, nu, tol)
    out = _out_dir(out)
    _write_json(os.path.join(out, 'project.json'), {
        'I_c': report.I_c, 'transport_value': report.transport_value, 'match': report.match,
        'order_ok': report.order_ok, 'gamma_atoms': report.gamma.atoms,
        'gamma_weights': report.gamma.weights,
    })
    click.echo(f"I_c={NumberUtils.format_float(report.I_c)} "
               f"T_F={NumberUtils.format_float(report.transport_value)} "
               f"{'✅' if report.match and report.order_ok else '❌'}")


@cli.command()
@click.argument('mu_file', type=click.Path(exists=True, dir_okay=False))
@click.argument('nu_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--tol', type=float, default=1e-6, show_default=True)
@click.option('--out', type=click.Path(file_okay=False), default=None)
@_exit_on_error
def brenier(mu_file, nu_file, tol, out):
    """Forma de Brenier do custo quadrático: p_i = x_i − S_i."""
    mu, nu = problem_io.load_measure(mu_file), problem_io.load_measure(nu_file)
    report = brenier_check(mu, nu, tol)
    out = _out_dir(out)
    _write_json(os.path.join(out, 'brenier.json'), {
        'points': report.points, 'barycenters': report.barycenters,
        'violation': report.violation, 'passed': report.passed,
    })
    click.echo(f"violação={report.violation:.3e} {'✅' if report.passed else '❌'}")


@cli.command()
@click.argument('problem', type=click.Path(exists=True, dir_okay=False))
@click.argument('coupling', type=click.Path(exists=True, dir_okay=False))
@_exit_on_error
def bareval(problem, coupling):
    """Avalia bar-I(π) para um acoplamento π (CSV n×m sem cabeçalho)."""
    _, mu, nu, cost = _load_problem(problem)
    pi = problem_io.read_matrix_csv(coupling)
    if pi.shape != (mu.n, nu.n):
        raise DimensionMismatchError(f'acoplamento {pi.shape}, esperado {(mu.n, nu.n)}')
    click.echo(NumberUtils.format_float(eval_bar_I(cost, mu, pi, nu)))


# =============================================
# VALIDAÇÃO E DADOS PARA GRÁFICOS
# =============================================

@cli.command()
@click.option('--suite', type=click.Choice(['golden', 'properties', 'all']), default='all',
              show_default=True)
@click.option('--seed', type=int, default=None, help='Semente (padrão: UWOT_SEED).')
@click.option('--tol', type=float, default=None, help='Sobrepõe as tolerâncias das checagens.')
@click.option('--samples', type=int, default=None, help='Amostras por propriedade (padrão do UWOT_ENV ativo).')
def validate(suite, seed, tol, samples):
    """Roda as suítes golden e de propriedades; sai com 1 se algo falhar."""
    if samples is None:
        samples = active_config().PROPERTY_SAMPLES
    ok = validation.run(suite, seed=seed, tol=tol, samples=samples)
    sys.exit(EXIT_OK if ok else EXIT_INPUT)


PLOTDATA_HELP = """Grava o CSV de gráfico: uma linha por átomo de X.

\b
Colunas (nesta ordem):
  x_1..x_d  coordenadas de x_i
  mu        peso μ_i
  N         tamanho N_i = Σ_j Q_ij
  S_1..S_d  baricentro não normalizado S_i = Σ_j Q_ij y_j
  T_1..T_d  átomo y_j de maior Q_ij (empate: menor j)
Números na representação decimal mais curta com ida e volta exata.
"""


def _plot_rows(plan, mu):
    fmt = NumberUtils.format_float
    N, S = plan.N, plan.S
    T = plan.y_atoms[np.argmax(plan.Q, axis=1)]
    for i in range(mu.n):
        yield ([fmt(v) for v in mu.atoms[i]] + [fmt(mu.weights[i]), fmt(N[i])]
               + [fmt(v) for v in S[i]] + [fmt(v) for v in T[i]])


@cli.command(help=PLOTDATA_HELP)
@click.argument('problem', required=False, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', type=click.Path(dir_okay=False), required=True)
@click.option('--triple', type=click.Choice(['sorting', 'pam', 'nam']), default=None,
              help='Usa o núcleo fechado da trinca uniforme em vez de resolver.')
@click.option('--eta', type=float, default=0.5, show_default=True)
@click.option('--n', 'grid', type=int, default=200, show_default=True)
@_exit_on_error
def plotdata(problem, out, triple, eta, grid):
    if triple:
        t = closed_form_uniform_triple(eta, grid)
        mu = t.mu
        plan = {'sorting': t.random_sorting, 'pam': t.pam, 'nam': t.nam}[triple]
    elif problem:
        spec, mu, nu, cost = _load_problem(problem)
        plan = solve_primal(cost, mu, nu, method=spec.solver['method']).plan
    else:
        raise ProblemParseError('informe PROBLEM ou --triple')
    d, dy = mu.dim, plan.y_atoms.shape[1]
    header = ([f'x_{k + 1}' for k in range(d)] + ['mu', 'N'] + [f'S_{k + 1}' for k in range(dy)]
              + [f'T_{k + 1}' for k in range(dy)])
    FileUtils.ensure_directory(os.path.dirname(os.path.abspath(out)))
    with open(out, 'w', encoding='utf-8', newline='') as fh:
        fh.write(','.join(header) + '\n')
        for row in _plot_rows(plan, mu):
            fh.write(','.join(row) + '\n')
    click.echo(out)


def main():
    configure_logging(active_config().LOG_LEVEL)
    cli()


if __name__ == '__main__':
    main()
