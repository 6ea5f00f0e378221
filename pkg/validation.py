#!/usr/bin/env python3
"""
Suítes de validação
===================

golden: exemplos com valor conhecido (formas fechadas, identidades de
dualidade, ordem phc, projeção, Brenier, monotonia).
properties: verificações aleatórias (convexidade, subaditividade, cotas,
dualidade fraca, monotonia e concavidade de K_c).

Determinísticas para uma semente fixa.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from config import Config
from costs import (AffineSupCost, CompositeCost, PiecewiseLinearF, PowerF, QuadraticF,
                   SigmaNormF, affine_g, check_conditions, exp_g, neglog_g, power_g, quadratic_g,
                   squared_distance_cost)
from dual import ConicalPotential, DualPotential, K_c, dual_value, minorant
from measures import DiscreteMeasure
from order import (brenier_check, check_phc_order, classical_ot_value, monotone_support_check,
                   phc_order_1d, project_phc)
from primal import (CouplingPlan, closed_form_uniform_triple, eval_bar_I, primal_objective,
                    solve_primal)

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ''


def print_status(check, message):
    """Imprime status da verificação"""
    symbol = "✅" if check else "❌"
    print(f"{symbol} {message}")
    return check


def _pick(tol, default):
    return default if tol is None else tol


# =============================================
# GERADORES DE INSTÂNCIAS
# =============================================

def random_measure(rng, n, d, low=0.5, high=2.0):
    atoms = rng.uniform(low, high, size=(n, d))
    return DiscreteMeasure(atoms, rng.dirichlet(np.ones(n)))


def random_piecewise_cost(rng, mu, nu, max_pieces=3):
    K = int(rng.integers(1, max_pieces + 1))
    u = rng.normal(size=(K, mu.n, nu.dim))
    a = rng.normal(size=(K, mu.n))
    return PiecewiseLinearF(u, a, nu.atoms)


def random_affine_cost(rng, mu, nu, max_pieces=3):
    K = int(rng.integers(1, max_pieces + 1))
    return AffineSupCost(rng.normal(size=(K, mu.n)), rng.normal(size=(K, mu.n, nu.n)))


def dominated_pair(rng, n, m, d, low=0.5, high=2.0):
    """(μ, ν) com μ <=_phc ν por construção: x_i = Σ_j P_ij y_j / μ_i"""
    nu = random_measure(rng, m, d, low, high)
    P = rng.exponential(size=(n, m))
    P *= nu.weights / P.sum(axis=0)
    w = rng.dirichlet(np.ones(n))
    # μ_i arbitrários: o núcleo Q_ij = P_ij/μ_i tem baricentro x_i
    x = (P @ nu.atoms) / w[:, None]
    return DiscreteMeasure(x, w), nu


def random_cost_family(rng, k):
    """Custo aleatório da família k (para as propriedades por amostragem)"""
    n, m, d = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
    mu = random_measure(rng, n, d)
    nu = random_measure(rng, m, d)
    family = k % 8
    if family == 0:
        return random_affine_cost(rng, mu, nu)
    if family == 1:
        return random_piecewise_cost(rng, mu, nu)
    if family == 2:
        return QuadraticF(mu.atoms, nu.atoms)
    if family == 3:
        return PowerF(rng.uniform(0.2, 0.8), rng.uniform(0.0, 2.0, size=n), nu.atoms[:, :1])
    if family == 4:
        return SigmaNormF(rng.uniform(1.0, 2.0, size=(n, d, d)), rng.uniform(0.3, 1.0),
                          rng.uniform(0.2, 0.8), nu.atoms)
    Fxy = rng.uniform(0.2, 2.0, size=(n, m))
    G = [quadratic_g(rng.uniform(0.5, 2.0), rng.normal()), exp_g(rng.normal()),
         neglog_g()][family - 5]
    return CompositeCost(Fxy, G)


# =============================================
# SUÍTE GOLDEN
# =============================================

def golden_power_closed_form(tol=None):
    tol = _pick(tol, 5e-3)
    n, eta = 200, 0.5
    mu = DiscreteMeasure.midpoint_grid(n)
    nu = DiscreteMeasure.midpoint_grid(n)
    cost = PowerF(eta, mu.scalar_atoms(), nu.atoms)
    report = solve_primal(cost, mu, nu)
    Z = float(mu.weights @ mu.scalar_atoms() ** 2)
    formula = -Z ** (1 - eta) * float(nu.weights @ nu.scalar_atoms()) ** eta
    triple = closed_form_uniform_triple(eta, n)
    values = [primal_objective(cost, mu, p) for p in (triple.random_sorting, triple.pam, triple.nam)]
    spread = max(values) - min(values)
    ok = abs(report.primal_value - formula) <= tol and spread <= tol
    return CheckResult('forma fechada de potência (n=200, η=½)', ok,
                       f'valor={report.primal_value:.8f} fórmula={formula:.8f} dispersão={spread:.2e}')


def golden_composite_square(tol=None):
    tol = _pick(tol, 1e-8)
    details, ok = [], True
    for n in (4, 100):
        mu = DiscreteMeasure.midpoint_grid(n)
        nu = DiscreteMeasure.dirac(2.0)
        F = np.abs(2.0 - mu.scalar_atoms())[:, None]
        report = solve_primal(CompositeCost(F, quadratic_g(1.0)), mu, nu)
        w = F[:, 0] ** -2.0
        formula = 1.0 / float(mu.weights @ w)
        ratio = report.plan.N / w
        ok &= abs(report.primal_value - formula) <= tol * max(1.0, abs(formula))
        ok &= float(np.max(np.abs(ratio / ratio.mean() - 1.0))) <= _pick(tol and 100 * tol, 1e-6)
        if n == 100:
            ok &= abs(report.primal_value - 2.0) <= 0.01
        details.append(f'n={n}: {report.primal_value:.10f} (fórmula {formula:.10f})')
    return CheckResult('custo composto (∫|y−x|dm)²', bool(ok), '; '.join(details))


def golden_linear_cost(tol=None):
    tol = _pick(tol, 1e-8)
    mu = DiscreteMeasure.uniform(np.linspace(0.0, 1.0, 5).reshape(-1, 1))
    nu = DiscreteMeasure.dirac(2.0)
    value = solve_primal(squared_distance_cost(mu, nu), mu, nu).primal_value
    mu2 = DiscreteMeasure(np.array([[0.0], [1.0]]), [1.0, 0.0])
    bar = eval_bar_I(squared_distance_cost(mu2, nu), mu2, CouplingPlan([[0.0], [1.0]]))
    ok = abs(value - 1.0) <= tol and bar == 1.0
    return CheckResult('custo linear ∫|x−y|²dm', ok, f'I_c={value!r} bar-I={bar!r}')


def golden_lp_duality(seed, count=50, tol=None):
    tol = _pick(tol, 1e-8)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(count):
        n, m, d = int(rng.integers(1, 11)), int(rng.integers(1, 11)), int(rng.integers(1, 3))
        mu, nu = random_measure(rng, n, d), random_measure(rng, m, d)
        cost = random_piecewise_cost(rng, mu, nu) if k % 2 else random_affine_cost(rng, mu, nu)
        report = solve_primal(cost, mu, nu, method='lp')
        worst = max(worst, abs(report.gap) / max(1.0, abs(report.primal_value)))
    return CheckResult(f'dualidade LP ({count} instâncias)', worst <= tol, f'pior gap relativo={worst:.2e}')


def golden_strassen(seed, count=200, tol=None):
    tol = _pick(tol, 1e-8)
    rng = np.random.default_rng(seed)
    failures = 0
    for k in range(count):
        d = 1 + k % 2
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        if rng.random() < 0.5:
            mu, nu = dominated_pair(rng, n, m, d)
        else:
            mu, nu = random_measure(rng, n, d), random_measure(rng, m, d)
        w = check_phc_order(mu, nu)
        if d == 1:
            failures += w.dominated != phc_order_1d(mu, nu)
        elif w.dominated:
            residual = np.max(np.abs(w.kernel.S[mu.weights > 0] - mu.atoms[mu.weights > 0]))
            failures += residual > tol
        else:
            failures += not (w.certified and w.margin > 1e-9)
    return CheckResult(f'ordem phc ({count} instâncias)', failures == 0, f'falhas={failures}')


def golden_projection(seed, count=50, tol=None):
    tol = _pick(tol, 1e-7)
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(count):
        d = int(rng.integers(1, 3))
        mu = random_measure(rng, int(rng.integers(1, 6)), d)
        nu = random_measure(rng, int(rng.integers(1, 6)), d)
        report = project_phc(random_piecewise_cost(rng, mu, nu), mu, nu, tol=tol)
        failures += not (report.match and report.order_ok)
    return CheckResult(f'identidade de projeção ({count} instâncias)', failures == 0, f'falhas={failures}')


def golden_brenier(seed, count=50, tol=None):
    tol = _pick(tol, 1e-6)
    rng = np.random.default_rng(seed)
    worst_violation, worst_diff = 0.0, 0.0
    for _ in range(count):
        mu = random_measure(rng, int(rng.integers(1, 9)), 2, -1.0, 3.0)
        nu = random_measure(rng, int(rng.integers(1, 9)), 2)
        report = brenier_check(mu, nu, tol)
        worst_violation = max(worst_violation, report.violation)
        perm = rng.permutation(nu.n)
        nu_p = DiscreteMeasure(nu.atoms[perm], nu.weights[perm])
        S1 = solve_primal(QuadraticF(mu.atoms, nu.atoms), mu, nu).plan.S
        S2 = solve_primal(QuadraticF(mu.atoms, nu_p.atoms), mu, nu_p).plan.S
        active = mu.weights > 0
        worst_diff = max(worst_diff, float(np.max(np.abs(S1[active] - S2[active]))))
    ok = worst_violation <= tol and worst_diff <= tol
    return CheckResult(f'forma de Brenier ({count} instâncias)', ok,
                       f'violação={worst_violation:.2e} diferença de S={worst_diff:.2e}')


def golden_monotone(seed, count=20):
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(count):
        n, m = int(rng.integers(2, 31)), int(rng.integers(2, 31))
        mu = DiscreteMeasure(rng.uniform(0.0, 2.0, size=(n, 1)), rng.dirichlet(np.ones(n)))
        nu = DiscreteMeasure(rng.uniform(0.0, 2.0, size=(m, 1)), rng.dirichlet(np.ones(m)))
        xy = np.outer(mu.scalar_atoms(), nu.scalar_atoms())
        for scale, sign in ((-1.0, '+'), (1.0, '-')):
            plan = solve_primal(CompositeCost(np.exp(scale * xy), quadratic_g(1.0)), mu, nu).plan
            failures += not monotone_support_check(plan, mu, sign)
    return CheckResult(f'monotonia dos suportes ({count} instâncias)', failures == 0, f'falhas={failures}')


def golden_monge_kantorovich(seed, count=20, tol=None):
    """Custo linear com Σ_j Q_ij = 1 reproduz o transporte clássico (>= I_c)"""
    tol = _pick(tol, 1e-8)
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(count):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m))
        mu = DiscreteMeasure(rng.normal(size=(n, 1)), a)
        nu = DiscreteMeasure(rng.normal(size=(m, 1)), b)
        C = rng.uniform(0.0, 3.0, size=(n, m))
        cost = AffineSupCost(np.zeros((1, n)), C[None, :, :])
        mk = solve_primal(cost, mu, nu, row_sums='one').primal_value
        free = solve_primal(cost, mu, nu).primal_value
        classical = classical_ot_value(C, a, b)
        failures += abs(mk - classical) > tol * max(1.0, abs(classical)) or free > mk + tol
    return CheckResult(f'consistência Monge-Kantorovich ({count} instâncias)', failures == 0,
                       f'falhas={failures}')


def golden_joint_convexity(seed, count=20, tol=None):
    """I_c(μ_t, ν_t) <= (1−t) I_c(μ₀, ν₀) + t I_c(μ₁, ν₁) em átomos comuns"""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(count):
        d = int(rng.integers(1, 3))
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        X, Y = rng.uniform(0.5, 2.0, size=(n, d)), rng.uniform(0.5, 2.0, size=(m, d))
        mus = [DiscreteMeasure(X, rng.dirichlet(np.ones(n))) for _ in range(2)]
        nus = [DiscreteMeasure(Y, rng.dirichlet(np.ones(m))) for _ in range(2)]
        cost = random_piecewise_cost(rng, mus[0], nus[0])
        v0, v1 = (solve_primal(cost, mus[k], nus[k]).primal_value for k in range(2))
        for t in (0.25, 0.5, 0.75):
            mu_t = DiscreteMeasure(X, (1 - t) * mus[0].weights + t * mus[1].weights)
            nu_t = DiscreteMeasure(Y, (1 - t) * nus[0].weights + t * nus[1].weights)
            vt = solve_primal(cost, mu_t, nu_t).primal_value
            bound = (1 - t) * v0 + t * v1
            failures += vt > bound + _pick(tol, _slack(vt, bound))
    return CheckResult(f'convexidade conjunta de I_c ({count} instâncias)', failures == 0,
                       f'violações={failures}')


def golden_suite(seed=None, tol=None):
    seed = Config.SEED if seed is None else seed
    return [
        golden_power_closed_form(tol),
        golden_composite_square(tol),
        golden_linear_cost(tol),
        golden_lp_duality(seed, tol=tol),
        golden_strassen(seed, tol=tol),
        golden_projection(seed, tol=tol),
        golden_brenier(seed, tol=tol),
        golden_monotone(seed),
        golden_monge_kantorovich(seed, tol=tol),
        golden_joint_convexity(seed, tol=tol),
    ]


# =============================================
# SUÍTE DE PROPRIEDADES
# =============================================

def _random_mass(rng, size):
    m = rng.exponential(size=size) * rng.exponential()
    m[rng.random(size) < 0.3] = 0.0
    return m


def _slack(*values):
    return 1e-9 * (1.0 + sum(abs(v) for v in values if math.isfinite(v)))


def prop_cost_inequalities(seed, samples, tol=None):
    """Convexidade, subaditividade, (LB) e (C) nos custos aleatórios"""
    rng = np.random.default_rng(seed)
    failures = {'convexidade': 0, 'subaditividade': 0, 'cota inferior': 0, 'cota (C)': 0}
    cost = None
    for k in range(samples):
        if k % 25 == 0:
            cost = random_cost_family(rng, k // 25)
            report = check_conditions(cost)
        i = int(rng.integers(cost.n_x))
        m1, m2 = _random_mass(rng, cost.n_y), _random_mass(rng, cost.n_y)
        t = rng.random()
        c1, c2 = cost.evaluate(i, m1), cost.evaluate(i, m2)
        cm = cost.evaluate(i, t * m1 + (1 - t) * m2)
        if cm > t * c1 + (1 - t) * c2 + _pick(tol, _slack(c1, c2, cm)):
            failures['convexidade'] += 1
        rec = cost.recession(i, m2)
        c12 = cost.evaluate(i, m1 + m2)
        if c12 > c1 + rec + _pick(tol, _slack(c12, c1, rec)):
            failures['subaditividade'] += 1
        mass = float(np.sum(m1))
        if report.lb is not None and report.certified:
            r0, r1 = report.lb
            if c1 < r0 + r1 * mass - _pick(tol, _slack(c1, r0, r1 * mass)):
                failures['cota inferior'] += 1
        if report.holds_C and report.certified:
            bound = report.upper_intercept + report.recession_bound * mass
            if c1 > bound + _pick(tol, _slack(c1, bound)):
                failures['cota (C)'] += 1
    return [CheckResult(f'{name} ({samples} amostras)', n == 0, f'violações={n}')
            for name, n in failures.items()]


def _dual_instances(rng, count):
    out = []
    for k in range(count):
        d = int(rng.integers(1, 3))
        mu = random_measure(rng, int(rng.integers(1, 4)), d)
        nu = random_measure(rng, int(rng.integers(1, 4)), d)
        family = k % 4
        if family == 0:
            cost = random_affine_cost(rng, mu, nu)
        elif family == 1:
            cost = random_piecewise_cost(rng, mu, nu)
        elif family == 2:
            cost = QuadraticF(mu.atoms, nu.atoms)
        else:
            cost = CompositeCost(rng.uniform(0.2, 2.0, size=(mu.n, nu.n)),
                                 [quadratic_g(1.0, -1.0), exp_g(0.5), power_g(3.0), affine_g(1.0)][k % 4])
        out.append((cost, mu, nu))
    return out


def prop_duality(seed, samples, tol=None):
    """Dualidade fraca, monotonia de K_c e concavidade de f ↦ dual_value"""
    rng = np.random.default_rng(seed)
    per_instance = 25
    instances = _dual_instances(rng, max(1, samples // per_instance))
    weak = mono = concave = bounded = 0
    for cost, mu, nu in instances:
        primal = solve_primal(cost, mu, nu).primal_value
        for _ in range(per_instance):
            f = DualPotential(rng.normal(scale=2.0, size=nu.n))
            g = DualPotential(rng.normal(scale=2.0, size=nu.n))
            df, dg = dual_value(cost, f, mu, nu), dual_value(cost, g, mu, nu)
            dm = dual_value(cost, DualPotential(0.5 * (f.f + g.f)), mu, nu)
            slack = _pick(tol, 1e-7 * (1.0 + abs(primal) + sum(abs(v) for v in (df, dg) if math.isfinite(v))))
            weak += df > primal + slack
            if math.isfinite(df) and math.isfinite(dg):
                concave += dm < 0.5 * (df + dg) - slack
            i = int(rng.integers(mu.n))
            up = DualPotential(f.f + np.abs(rng.normal(size=nu.n)))
            kf, ku = K_c(cost, f, i), K_c(cost, up, i)
            mono += math.isfinite(kf) and kf > ku + slack
            if isinstance(cost, CompositeCost):
                bounded += kf > cost.G.value(0.0) + slack
    n = len(instances) * per_instance
    return [
        CheckResult(f'dualidade fraca ({n} amostras)', weak == 0, f'violações={weak}'),
        CheckResult(f'monotonia de K_c ({n} amostras)', mono == 0, f'violações={mono}'),
        CheckResult(f'concavidade do dual ({n} amostras)', concave == 0, f'violações={concave}'),
        CheckResult(f'K_c <= G(0) ({n} amostras)', bounded == 0, f'violações={bounded}'),
    ]


def prop_minorant(seed, samples):
    """f̄ <= f em Y, homogeneidade e vértices = oráculo LP"""
    rng = np.random.default_rng(seed)
    failures = 0
    count = max(1, samples // 10)
    for _ in range(count):
        d = int(rng.integers(1, 3))
        Y = rng.uniform(0.5, 2.0, size=(int(rng.integers(d, 5)), d))
        f = rng.uniform(0.1, 3.0, size=Y.shape[0])
        oracle = minorant(f, Y)
        phi = ConicalPotential.from_minorant(f, Y)
        failures += int(np.any(phi.on_atoms(Y) > f + 1e-9))
        for _ in range(9):
            z = Y.T @ rng.exponential(size=Y.shape[0])
            a, b = oracle(z), phi(z)
            failures += abs(a - b) > 1e-7 * (1.0 + abs(a))
            failures += abs(oracle(2.5 * z) - 2.5 * a) > 1e-7 * (1.0 + abs(a))
    return [CheckResult(f'minorante cônico ({count} instâncias)', failures == 0, f'violações={failures}')]


def prop_order_transitivity(seed, samples):
    rng = np.random.default_rng(seed)
    failures = 0
    count = max(1, samples // 20)
    for _ in range(count):
        d = int(rng.integers(1, 3))
        nu, rho = dominated_pair(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)), d)
        P = rng.exponential(size=(int(rng.integers(1, 4)), nu.n))
        P *= nu.weights / P.sum(axis=0)
        w = rng.dirichlet(np.ones(P.shape[0]))
        mu = DiscreteMeasure((P @ nu.atoms) / w[:, None], w)
        failures += not (check_phc_order(mu, nu).dominated and check_phc_order(nu, rho).dominated
                         and check_phc_order(mu, rho).dominated)
    return [CheckResult(f'transitividade da ordem ({count} trincas)', failures == 0, f'falhas={failures}')]


def property_suite(seed=None, samples=None, tol=None):
    seed = Config.SEED if seed is None else seed
    samples = Config.PROPERTY_SAMPLES if samples is None else samples
    return (prop_cost_inequalities(seed, samples, tol) + prop_duality(seed, samples, tol)
            + prop_minorant(seed, samples) + prop_order_transitivity(seed, samples))


def run(suite='all', seed=None, tol=None, samples=None):
    """Executa as suítes e imprime o resumo; devolve True se tudo passou"""
    print("\n" + "=" * 70)
    print("🔍 VALIDAÇÃO DO SOLVER")
    print("=" * 70 + "\n")
    results = []
    if suite in ('golden', 'all'):
        print("📐 Exemplos golden...")
        for r in golden_suite(seed, tol):
            print_status(r.passed, f"{r.name}: {r.detail}")
            results.append(r)
    if suite in ('properties', 'all'):
        print("\n🎲 Propriedades aleatórias...")
        for r in property_suite(seed, samples, tol):
            print_status(r.passed, f"{r.name}: {r.detail}")
            results.append(r)
    all_ok = all(r.passed for r in results)
    print("\n" + "=" * 70)
    print("✅ TODAS AS VERIFICAÇÕES PASSARAM" if all_ok else "❌ HÁ VERIFICAÇÕES COM FALHA")
    print("=" * 70 + "\n")
    return all_ok


if __name__ == '__main__':
    import sys
    sys.exit(0 if run() else 1)
