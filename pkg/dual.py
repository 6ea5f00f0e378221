"""
Operadores duais
================

K_c f(x) = inf_{w >= 0} Σ_j f_j w_j + c(x, w)
Q_F φ(x) = inf_{z ∈ Z} φ(z) + F(x, z)

dual_value = Σ μ_i K_c f(x_i) − Σ ν_j f_j (ou o análogo cônico com φ).
−∞ é um resultado legítimo (float('-inf')), nunca uma exceção.
"""

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from config import Config
from costs import (AffineSupCost, CompositeCost, OracleF, PiecewiseLinearF,
                   PowerF, QuadraticF, SigmaNormF)
from errors import DimensionMismatchError, MethodMismatchError, NumericalFailureError
from optim import LinearProgram, LpSolution, LpStatus, NnlsSolution, solve_lp, solve_nnls_eq
from utils import NumberUtils, ParallelUtils

logger = logging.getLogger(__name__)

NEG_INF = -math.inf
UNBOUNDED_PROXY = -1e12


# =============================================
# POTENCIAIS
# =============================================

@dataclass(frozen=True)
class DualPotential:
    """f: um valor real por átomo de Y"""

    f: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=float).reshape(-1)
        if not np.all(np.isfinite(f)):
            raise ValueError('potencial deve ser finito')
        f.setflags(write=False)
        object.__setattr__(self, 'f', f)

    @property
    def size(self):
        return self.f.size

    def shifted(self, j, delta):
        f = self.f.copy()
        f[j] += delta
        return DualPotential(f)


@dataclass(frozen=True)
class ConicalPotential:
    """φ(z) = max_k u_k·z sobre o cone Z"""

    directions: np.ndarray

    def __post_init__(self):
        U = np.array(self.directions, dtype=float)
        if U.ndim == 1:
            U = U.reshape(-1, 1)
        if U.shape[0] == 0:
            raise ValueError('potencial cônico precisa de ao menos uma direção')
        U.setflags(write=False)
        object.__setattr__(self, 'directions', U)

    @property
    def dim(self):
        return self.directions.shape[1]

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return float(np.max(self.directions @ z.reshape(-1)))

    def on_atoms(self, Y):
        """φ(y_j) para cada linha de Y"""
        return np.max(np.asarray(Y, dtype=float) @ self.directions.T, axis=1)

    def scaled(self, factor):
        return ConicalPotential(factor * self.directions)

    @classmethod
    def from_minorant(cls, f, Y, tol=1e-9):
        """Vértices de P = {u : u·y_j <= f_j}: f̄(z) = max_{u ∈ P} u·z em Z.

        Se Y não gera R^d, os vértices são procurados em span(Y) e levados
        de volta a R^d; φ só é avaliado em Z ⊂ span(Y).
        """
        f = f.f if isinstance(f, DualPotential) else np.asarray(f, dtype=float)
        Y = _as_generators(Y)
        m, d = Y.shape
        if f.size != m:
            raise DimensionMismatchError('f e Y com tamanhos diferentes')
        basis = _span_basis(Y)
        r = basis.shape[0]
        if r == 0:
            raise ValueError('Y sem geradores não nulos')
        Yr = Y @ basis.T
        scale = NumberUtils.scale_of(f, Y)
        vertices = []
        for subset in itertools.combinations(range(m), r):
            idx = list(subset)
            B = Yr[idx]
            if abs(np.linalg.det(B)) <= 1e-12 * scale ** r:
                continue
            u = basis.T @ np.linalg.solve(B, f[idx])
            if np.all(Y @ u <= f + tol * scale):
                vertices.append(u)
        if not vertices:
            raise ValueError('P = {u : Y u <= f} é vazio (f̄ ≡ −∞)')
        V = np.unique(np.round(np.array(vertices), 12), axis=0)
        return cls(V)


@dataclass
class DualReport:
    dual_value: float
    potential: object
    per_x: list = field(default_factory=list)
    bound_M: Optional[float] = None
    lower_bound: Optional[float] = None
    potential_min: Optional[float] = None
    bound_ok: Optional[bool] = None


def _as_generators(Y):
    Y = np.asarray(Y, dtype=float)
    return Y.reshape(-1, 1) if Y.ndim == 1 else Y


def _span_basis(Y, rtol=1e-12):
    """Base ortonormal (r×d) de span(Y); identidade quando r = d"""
    d = Y.shape[1]
    s, Vt = np.linalg.svd(Y, full_matrices=False)[1:]
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros((0, d))
    r = int(np.sum(s > rtol * s[0]))
    return np.eye(d) if r == d else Vt[:r]


def _polyhedron_nonempty(Y, f):
    """{u : Y u <= f} ≠ ∅"""
    d = Y.shape[1]
    lp = LinearProgram(c=np.zeros(d), A_ub=Y, b_ub=f, free=np.ones(d, dtype=bool))
    return solve_lp(lp).status == LpStatus.OPTIMAL


# =============================================
# MINORANTE CÔNICO
# =============================================

class MinorantOracle:
    """f̄(z) = min {f·w : w >= 0, Σ w_j y_j = z}, um LP por consulta"""

    def __init__(self, f, Y):
        self.f = f.f if isinstance(f, DualPotential) else np.asarray(f, dtype=float)
        self.Y = _as_generators(Y)
        if self.f.size != self.Y.shape[0]:
            raise DimensionMismatchError('f e Y com tamanhos diferentes')

    def __call__(self, z):
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != self.Y.shape[1]:
            raise DimensionMismatchError('z com dimensão errada')
        sol = solve_lp(LinearProgram(c=self.f, A_eq=self.Y.T, b_eq=z))
        if sol.status == LpStatus.INFEASIBLE:
            return math.inf
        if sol.status == LpStatus.UNBOUNDED:
            return NEG_INF
        if not sol.is_optimal:
            raise NumericalFailureError('LP do minorante falhou')
        return sol.objective

    def to_potential(self):
        return ConicalPotential.from_minorant(self.f, self.Y)


def minorant(f, Y):
    return MinorantOracle(f, Y)


# =============================================
# K_c
# =============================================

def _kc_affine(cost, f, i):
    K, m = cost.n_pieces, cost.n_y
    c = np.concatenate([f, [1.0]])
    A_ub = np.hstack([cost.b[:, i, :], -np.ones((K, 1))])
    free = np.concatenate([np.zeros(m, dtype=bool), [True]])
    sol = solve_lp(LinearProgram(c=c, A_ub=A_ub, b_ub=-cost.a[:, i], free=free))
    if sol.status == LpStatus.UNBOUNDED:
        return NEG_INF
    if not sol.is_optimal:
        raise NumericalFailureError(f'LP de K_c terminou com status {sol.status.value}')
    return sol.objective


def _projection_value(x, A, E, e):
    """½‖x‖² − ½ dist(x, C)², com C descrito por (A, E, e)"""
    sol = solve_nnls_eq(A, x, E, e)
    if sol.status != LpStatus.OPTIMAL:
        raise NumericalFailureError('projeção não convergiu')
    return 0.5 * float(x @ x) - sol.objective


def _kc_quadratic(cost, f, i):
    Y = cost.Y
    m, d = Y.shape
    if not _polyhedron_nonempty(Y, f):
        return NEG_INF
    x = cost.X[i]
    A = np.hstack([np.eye(d), -np.eye(d), np.zeros((d, m))])
    E = np.hstack([Y, -Y, np.eye(m)])
    return _projection_value(x, A, E, f)


def _homogeneous_constant(eta):
    return (1.0 - eta) * eta ** (eta / (1.0 - eta))


def _kc_power(cost, f, i):
    y = cost.Y[:, 0]
    x = cost.x[i]
    if np.any((y == 0) & (f < 0)):
        return NEG_INF
    pos = y > 0
    if not np.any(pos):
        return 0.0
    u = float(np.min(f[pos] / y[pos]))
    if u < 0 or (u == 0 and x > 0):
        return NEG_INF
    if x == 0:
        return 0.0
    eta = cost.eta
    return -_homogeneous_constant(eta) * x ** (1.0 / (1.0 - eta)) * u ** (-eta / (1.0 - eta))


def _kc_composite(cost, f, i):
    G = cost.G
    r = float(np.min(f / cost.Fxy[i]))
    h = lambda U: G.derivative(U) + r
    if math.isfinite(G.d0) and G.d0 + r >= 0:
        return float(G.value(0.0))
    if G.dinf + r < 0:
        return NEG_INF
    if G.dinf + r == 0:
        # ínfimo atingido só no limite U → ∞
        prev, U = G.value(1.0) + r, 1.0
        for _ in range(80):
            U *= 2.0
            cur = G.value(U) + r * U
            if abs(cur - prev) <= 1e-13 * max(1.0, abs(cur)):
                return float(cur)
            prev = cur
        return NEG_INF
    hi = 1.0
    while h(hi) <= 0:
        hi *= 2.0
        if hi > 1e300:
            return NEG_INF
    lo = 0.0 if math.isfinite(G.d0) else 1e-300
    U = brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(G.value(U) + r * U)


def _kc_oracle(cost, f, i):
    Y = cost.Y
    fun = lambda w: float(f @ w) + cost.F(i, Y.T @ w)
    jac = lambda w: f + Y @ cost.grad_F(i, Y.T @ w)
    res = minimize(fun, np.full(Y.shape[0], 1.0 / Y.shape[0]), jac=jac, method='L-BFGS-B',
                   bounds=[(0.0, None)] * Y.shape[0])
    return NEG_INF if res.fun < UNBOUNDED_PROXY else float(res.fun)


def K_c(cost, f, x_index):
    """inf_{w >= 0} f·w + c(x_i, w); −∞ quando ilimitado inferiormente"""
    f = f.f if isinstance(f, DualPotential) else np.asarray(f, dtype=float)
    if f.size != cost.n_y:
        raise DimensionMismatchError('potencial com tamanho diferente de Y')
    if isinstance(cost, PiecewiseLinearF):
        cost = cost.to_affine_sup()
    if isinstance(cost, AffineSupCost):
        return _kc_affine(cost, f, x_index)
    if isinstance(cost, QuadraticF):
        return _kc_quadratic(cost, f, x_index)
    if isinstance(cost, PowerF):
        return _kc_power(cost, f, x_index)
    if isinstance(cost, CompositeCost):
        return _kc_composite(cost, f, x_index)
    if isinstance(cost, SigmaNormF):
        if not _polyhedron_nonempty(cost.Y, f):
            return NEG_INF
        return Q_F(cost, ConicalPotential.from_minorant(f, cost.Y), x_index)
    if isinstance(cost, OracleF):
        return _kc_oracle(cost, f, x_index)
    raise MethodMismatchError(f'K_c não implementado para {type(cost).__name__}')


# =============================================
# Q_F
# =============================================

def _qf_piecewise(cost, phi, i):
    Y = cost.Y
    m = Y.shape[0]
    V = phi.directions
    U = cost.u[:, i, :]
    # variáveis: w (m) >= 0, s livre, t livre
    c = np.concatenate([np.zeros(m), [1.0, 1.0]])
    rows_phi = np.hstack([V @ Y.T, -np.ones((V.shape[0], 1)), np.zeros((V.shape[0], 1))])
    rows_F = np.hstack([U @ Y.T, np.zeros((U.shape[0], 1)), -np.ones((U.shape[0], 1))])
    A_ub = np.vstack([rows_phi, rows_F])
    b_ub = np.concatenate([np.zeros(V.shape[0]), -cost.a[:, i]])
    free = np.concatenate([np.zeros(m, dtype=bool), [True, True]])
    sol = solve_lp(LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub, free=free))
    if sol.status == LpStatus.UNBOUNDED:
        return NEG_INF
    if not sol.is_optimal:
        raise NumericalFailureError(f'LP de Q_F terminou com status {sol.status.value}')
    return sol.objective


def _qf_quadratic(cost, phi, i):
    """½‖x‖² − ½ dist(x, conv(V) + Z°)², Z° = {c : Y c <= 0}"""
    V = phi.directions
    Y = cost.Y
    K, d = V.shape
    m = Y.shape[0]
    A = np.hstack([V.T, np.eye(d), -np.eye(d), np.zeros((d, m))])
    E = np.vstack([
        np.concatenate([np.ones(K), np.zeros(2 * d + m)]),
        np.hstack([np.zeros((m, K)), Y, -Y, np.eye(m)]),
    ])
    e = np.concatenate([[1.0], np.zeros(m)])
    return _projection_value(cost.X[i], A, E, e)


def _phi_min_on_simplex(phi, Y):
    """min_{λ ∈ Δ} φ(Yᵀλ)"""
    m = Y.shape[0]
    V = phi.directions
    c = np.concatenate([np.zeros(m), [1.0]])
    A_ub = np.hstack([V @ Y.T, -np.ones((V.shape[0], 1))])
    A_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    free = np.concatenate([np.zeros(m, dtype=bool), [True]])
    sol = solve_lp(LinearProgram(c=c, A_eq=A_eq, b_eq=[1.0], A_ub=A_ub,
                                 b_ub=np.zeros(V.shape[0]), free=free))
    return sol.objective if sol.is_optimal else NEG_INF


def _direction_search(score, Y):
    """max de score(u) sobre as direções u de cone(Y)"""
    d = Y.shape[1]
    if d == 1:
        return max(score(y) for y in Y)
    if d == 2:
        angles = np.arctan2(Y[:, 1], Y[:, 0])
        e0, e1 = Y[np.argmin(angles)], Y[np.argmax(angles)]
        e0, e1 = e0 / np.linalg.norm(e0), e1 / np.linalg.norm(e1)
        g = lambda t: score((1.0 - t) * e0 + t * e1)
        grid = np.linspace(0.0, 1.0, 201)
        vals = np.array([g(t) for t in grid])
        k = int(np.argmax(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        res = minimize_scalar(lambda t: -g(t), bounds=(lo, hi), method='bounded',
                              options={'xatol': 1e-14})
        return max(float(vals[k]), -float(res.fun))
    m = Y.shape[0]
    best = max(score(y) for y in Y)
    starts = [np.eye(m)[j] for j in range(m)] + [np.full(m, 1.0 / m)]
    for lam0 in starts:
        res = minimize(lambda lam: -score(Y.T @ lam), lam0, method='SLSQP',
                       bounds=[(0.0, 1.0)] * m,
                       constraints=[{'type': 'eq', 'fun': lambda lam: np.sum(lam) - 1.0}])
        best = max(best, -float(res.fun))
    return best


def _qf_homogeneous(cost, phi, i):
    """F η-homogênea não positiva: busca sobre direções de Z"""
    Y = cost.Y[np.linalg.norm(cost.Y, axis=1) > 0]
    if Y.shape[0] == 0:
        return 0.0
    eta = cost.eta
    F_zero = all(cost.F(i, y) == 0.0 for y in Y)
    phi_min = _phi_min_on_simplex(phi, Y)
    tiny = 1e-14 * NumberUtils.scale_of(phi.directions, Y)
    if F_zero:
        return 0.0 if phi_min >= -tiny else NEG_INF
    if phi_min <= tiny:
        return NEG_INF
    a0 = 1.0 / (1.0 - eta)

    def score(u):
        return (-cost.F(i, u)) ** a0 * phi(u) ** (-eta * a0)

    return -_homogeneous_constant(eta) * _direction_search(score, Y)


def _qf_oracle(cost, phi, i):
    Y = cost.Y
    m = Y.shape[0]
    V = phi.directions
    fun = lambda v: v[m] + cost.F(i, Y.T @ v[:m])
    cons = [{'type': 'ineq', 'fun': lambda v: v[m] - V @ (Y.T @ v[:m])}]
    v0 = np.concatenate([np.full(m, 1.0 / m), [phi(Y.T @ np.full(m, 1.0 / m))]])
    res = minimize(fun, v0, method='SLSQP', bounds=[(0.0, None)] * m + [(None, None)],
                   constraints=cons)
    return NEG_INF if res.fun < UNBOUNDED_PROXY else float(res.fun)


def Q_F(cost, phi, x_index):
    """inf_{z ∈ Z} φ(z) + F(x_i, z)"""
    if not cost.is_conical:
        raise MethodMismatchError('Q_F exige custo cônico')
    if phi.dim != cost.dim:
        raise DimensionMismatchError('φ e Z com dimensões diferentes')
    if isinstance(cost, PiecewiseLinearF):
        return _qf_piecewise(cost, phi, x_index)
    if isinstance(cost, QuadraticF):
        return _qf_quadratic(cost, phi, x_index)
    if isinstance(cost, (PowerF, SigmaNormF)):
        return _qf_homogeneous(cost, phi, x_index)
    return _qf_oracle(cost, phi, x_index)


# =============================================
# VALOR DUAL E CERTIFICADOS
# =============================================

def _per_x_values(cost, potential, mu):
    active = [int(i) for i in np.flatnonzero(mu.weights > 0)]
    if isinstance(potential, ConicalPotential):
        op = lambda i: Q_F(cost, potential, i)
    else:
        op = lambda i: K_c(cost, potential, i)
    return active, ParallelUtils.map_indices(op, active)


def dual_value(cost, potential, mu, nu):
    """Σ μ_i K_c f(x_i) − Σ ν_j f_j; com φ cônico usa Q_F e φ(y_j)"""
    active, values = _per_x_values(cost, potential, mu)
    if any(v == NEG_INF for v in values):
        return NEG_INF
    if isinstance(potential, ConicalPotential):
        on_nu = float(nu.weights @ potential.on_atoms(cost.Y))
    else:
        on_nu = float(nu.weights @ potential.f)
    return float(sum(mu.weights[i] * v for i, v in zip(active, values)) - on_nu)


def extract_dual_certificate(solution, binding):
    """Potencial f lido dos multiplicadores das linhas de marginal.

    LP: y resolve Bᵀy = c_B e f = −y (binding.sign = −1);
    NNLS: os multiplicadores já são f (binding.sign = +1).
    """
    if isinstance(solution, LpSolution):
        if not solution.is_optimal:
            raise NumericalFailureError(f'certificado exige LP ótimo (status {solution.status.value})')
    elif isinstance(solution, NnlsSolution):
        if solution.status != LpStatus.OPTIMAL:
            raise NumericalFailureError('certificado exige NNLS convergido')
    else:
        raise TypeError(f'solução não suportada: {type(solution).__name__}')
    return DualPotential(binding.sign * np.asarray(solution.y_eq)[binding.marginal_rows])


def dual_bound_conical(cost, mu, lam):
    """M = max_j Σ_i μ_i F(x_i, λ y_j); cota inferior −M/(λ−1)"""
    if lam <= 1:
        raise ValueError('λ deve ser > 1')
    if not cost.is_conical:
        raise MethodMismatchError('cota exige custo cônico')
    active = np.flatnonzero(mu.weights > 0)
    M = max(sum(mu.weights[i] * cost.F(int(i), lam * y) for i in active) for y in cost.Y)
    return float(M), float(-M / (lam - 1.0))


def _potential_min_on_hull(potential, Y):
    """min de φ (ou de f̄) sobre co(Y)"""
    if isinstance(potential, ConicalPotential):
        return _phi_min_on_simplex(potential, Y)
    m, d = Y.shape
    # variáveis (w, λ) >= 0: Yᵀw = Yᵀλ, Σλ = 1
    c = np.concatenate([potential.f, np.zeros(m)])
    A_eq = np.vstack([np.hstack([Y.T, -Y.T]),
                      np.concatenate([np.zeros(m), np.ones(m)])[None, :]])
    b_eq = np.concatenate([np.zeros(d), [1.0]])
    sol = solve_lp(LinearProgram(c=c, A_eq=A_eq, b_eq=b_eq))
    return sol.objective if sol.is_optimal else NEG_INF


def dual_report(cost, potential, mu, nu, lam=2.0):
    """DualReport com valores por x e a checagem min_{co(Y)} φ >= −M/(λ−1)"""
    active, values = _per_x_values(cost, potential, mu)
    value = dual_value(cost, potential, mu, nu)
    report = DualReport(dual_value=value, potential=potential,
                        per_x=[{'i': i, 'value': v} for i, v in zip(active, values)])
    if cost.is_conical:
        M, bound = dual_bound_conical(cost, mu, lam)
        low = _potential_min_on_hull(potential, cost.Y)
        report.bound_M, report.lower_bound, report.potential_min = M, bound, low
        report.bound_ok = low >= bound - Config.FEAS_TOL * max(1.0, abs(bound))
    return report


# =============================================
# CONDIÇÕES DE OTIMALIDADE
# =============================================

@dataclass
class ConditionCheck:
    passed: bool
    worst_inequality: float
    worst_equality: float
    violations: list = field(default_factory=list)


def optimality_conditions_GF(plan, f, cost, mu, tol=1e-6):
    """G'(U_i) F(x_i, y_j) + f_j >= −tol, com igualdade onde Q_ij > tol"""
    if not isinstance(cost, CompositeCost):
        raise MethodMismatchError('condições (G, F) exigem CompositeCost')
    f = f.f if isinstance(f, DualPotential) else np.asarray(f, dtype=float)
    worst_ineq, worst_eq, violations = 0.0, 0.0, []
    for i in np.flatnonzero(mu.weights > 0):
        U = float(cost.Fxy[i] @ plan.Q[i])
        g = cost.G.derivative(U)
        if not math.isfinite(g):
            violations.append({'i': int(i), 'reason': "G'(U) infinito"})
            worst_ineq = math.inf
            continue
        slack = g * cost.Fxy[i] + f
        worst_ineq = max(worst_ineq, float(np.max(-slack)))
        support = plan.Q[i] > tol
        if np.any(support):
            worst_eq = max(worst_eq, float(np.max(np.abs(slack[support]))))
        for j in np.flatnonzero((slack < -tol) | (support & (np.abs(slack) > tol))):
            violations.append({'i': int(i), 'j': int(j), 'slack': float(slack[j])})
    return ConditionCheck(not violations, worst_ineq, worst_eq, violations)


@dataclass
class NonpositiveDualCheck:
    passed: bool
    min_on_generators: float
    min_on_unit_generators: float
    dual_value: float
    primal_value: float
    gap: float


def check_nonpositive_conical_dual(cost, phi, mu, nu, primal_value, tol=1e-6):
    """φ̄ >= 0 em Y, φ̄ > tol nas direções unitárias e dual = primal_value"""
    if not cost.nonpositive:
        raise MethodMismatchError('checagem exige F <= 0')
    Y = cost.Y[np.linalg.norm(cost.Y, axis=1) > 0]
    on_gens = phi.on_atoms(Y)
    on_unit = phi.on_atoms(Y / np.linalg.norm(Y, axis=1, keepdims=True))
    value = dual_value(cost, phi, mu, nu)
    gap = primal_value - value
    passed = (float(np.min(on_gens)) >= -tol and float(np.min(on_unit)) > tol
              and abs(gap) <= tol * max(1.0, abs(primal_value)))
    return NonpositiveDualCheck(passed, float(np.min(on_gens)), float(np.min(on_unit)),
                                value, float(primal_value), float(gap))


# =============================================
# SERIALIZAÇÃO
# =============================================

def write_potential_csv(path, potential):
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        writer.writerow(['j', 'f'])
        for j, v in enumerate(potential.f):
            writer.writerow([j, NumberUtils.format_float(v)])


def read_potential_csv(path):
    with open(path, newline='', encoding='utf-8') as fh:
        rows = list(csv.reader(fh))[1:]
    return DualPotential([NumberUtils.parse_float(r[1]) for r in rows])


def write_directions(path, phi):
    """Uma direção u_k por linha"""
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        for u in phi.directions:
            writer.writerow([NumberUtils.format_float(v) for v in u])


def read_directions(path):
    with open(path, newline='', encoding='utf-8') as fh:
        rows = [r for r in csv.reader(fh) if r]
    return ConicalPotential([[NumberUtils.parse_float(v) for v in r] for r in rows])
