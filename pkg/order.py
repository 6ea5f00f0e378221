"""
Ordem convexa positivamente homogênea (phc) e teoremas de estrutura
==================================================================

check_phc_order decide μ <=_phc ν por viabilidade LP e, quando inviável,
converte o certificado de Farkas numa função φ(z) = max_k u_k·z que separa
as medidas; o certificado é sempre revalidado por avaliação direta.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize

from config import Config
from costs import PiecewiseLinearF, PowerF, QuadraticF, l1_distance_cost
from dual import ConicalPotential, Q_F
from errors import DimensionMismatchError, MethodMismatchError, NumericalFailureError
from measures import ConeModel, DiscreteMeasure, merge_atoms, moments, zero_in_convex_hull
from optim import LinearProgram, LpStatus, solve_lp
from primal import KernelPlan, solve_primal

logger = logging.getLogger(__name__)


# =============================================
# TIPOS
# =============================================

@dataclass
class PhcWitness:
    """Veredito de μ <=_phc ν com o certificado correspondente"""

    dominated: bool
    kernel: Optional[KernelPlan] = None
    nu1: Optional[np.ndarray] = None
    nu2: Optional[np.ndarray] = None
    potential: Optional[ConicalPotential] = None
    margin: float = float('nan')
    certified: bool = True

    @property
    def verdict(self):
        if self.dominated:
            return 'dominated'
        return 'not-dominated' if self.certified else 'infeasible, no certified witness'


@dataclass
class ProjectionReport:
    gamma: DiscreteMeasure
    transport_value: float
    I_c: float
    match: bool
    order_ok: bool


@dataclass
class BrenierReport:
    points: np.ndarray
    barycenters: np.ndarray
    violation: float
    passed: bool


@dataclass
class StructureReport:
    identity_gap: float
    worst_trial_margin: float
    trials: int
    passed: bool


@dataclass
class ArticulationReport:
    passed: bool
    worst: float
    residuals: list = field(default_factory=list)


def _same_dim(mu, nu):
    if mu.dim != nu.dim:
        raise DimensionMismatchError(f'μ em R^{mu.dim} e ν em R^{nu.dim}')


def _support_cone(nu):
    return ConeModel(nu.atoms[nu.support_mask])


# =============================================
# ORÁCULO DA ORDEM
# =============================================

def _witness_margin(phi, mu, nu):
    return float(mu.weights @ phi.on_atoms(mu.atoms) - nu.weights @ phi.on_atoms(nu.atoms))


def check_phc_order(mu, nu, tol=1e-9):
    """LP de viabilidade: Σ_i μ_i Q_ij + ν₂_j = ν_j, Σ_j Q_ij y_j = x_i, Σ_j ν₂_j y_j = 0.

    ν₂ só entra quando 0 ∈ co(supp ν). Se o LP é inviável, o raio de Farkas
    (g, α, β) fornece as direções u_i = α_i/μ_i (e β), com
    Σ φ dμ > Σ φ dν para φ(z) = max_k u_k·z.
    """
    _same_dim(mu, nu)
    active = np.flatnonzero(mu.weights > 0)
    k, m, d = active.size, nu.n, mu.dim
    general = zero_in_convex_hull(_support_cone(nu))
    nq = k * m
    n_vars = nq + (m if general else 0)

    rows = []
    rhs = []
    # marginais
    A_marg = np.zeros((m, n_vars))
    for r, i in enumerate(active):
        A_marg[np.arange(m), r * m + np.arange(m)] = mu.weights[i]
    if general:
        A_marg[np.arange(m), nq + np.arange(m)] = 1.0
    rows.append(A_marg)
    rhs.append(nu.weights)
    # baricentros
    A_bar = np.zeros((k * d, n_vars))
    for r, i in enumerate(active):
        A_bar[r * d:(r + 1) * d, r * m:(r + 1) * m] = nu.atoms.T
    rows.append(A_bar)
    rhs.append(mu.atoms[active].reshape(-1))
    if general:
        A_zero = np.zeros((d, n_vars))
        A_zero[:, nq:] = nu.atoms.T
        rows.append(A_zero)
        rhs.append(np.zeros(d))

    lp = LinearProgram(c=np.zeros(n_vars), A_eq=np.vstack(rows), b_eq=np.concatenate(rhs))
    sol = solve_lp(lp)
    if sol.is_optimal:
        Q = np.zeros((mu.n, m))
        Q[active] = sol.x[:nq].reshape(k, m)
        nu2 = sol.x[nq:] if general else np.zeros(m)
        nu1 = mu.weights @ Q
        logger.debug('μ <=_phc ν: núcleo encontrado')
        return PhcWitness(True, kernel=KernelPlan(Q, nu.atoms), nu1=nu1, nu2=nu2, margin=0.0)
    if sol.status != LpStatus.INFEASIBLE:
        raise NumericalFailureError(f'LP da ordem terminou com status {sol.status.value}')

    y = sol.farkas_eq
    alpha = y[m:m + k * d].reshape(k, d)
    directions = alpha / mu.weights[active, None]
    if general:
        directions = np.vstack([directions, y[m + k * d:]])
    scale = float(np.max(np.abs(directions)))
    if scale > 0:
        directions = directions / scale
    phi = ConicalPotential(directions)
    margin = _witness_margin(phi, mu, nu)
    if margin > tol:
        return PhcWitness(False, potential=phi, margin=margin)
    logger.warning(f'Certificado de Farkas não revalidou (margem {margin:.3e})')
    return PhcWitness(False, potential=None, margin=margin, certified=False)


def phc_order_1d(mu, nu, tol=1e-9):
    """Em d = 1: mesma média e partes positiva/negativa dominadas"""
    _same_dim(mu, nu)
    if mu.dim != 1:
        raise DimensionMismatchError('phc_order_1d exige d = 1')
    a, b = moments(mu), moments(nu)
    return bool(abs(a.mean[0] - b.mean[0]) <= tol
                and a.positive_part[0] <= b.positive_part[0] + tol
                and a.negative_part[0] <= b.negative_part[0] + tol)


def phc_order_via_cost(mu, nu, tol=1e-9):
    """I_c(μ, ν) com F(x, z) = ‖x − z‖₁; zero sse μ <=_phc ν"""
    _same_dim(mu, nu)
    cost = l1_distance_cost(mu, nu)
    value = solve_primal(cost, mu, nu, method='lp').primal_value
    return value, bool(value <= tol)


# =============================================
# IDENTIDADE DE PROJEÇÃO
# =============================================

def classical_ot_value(cost_matrix, a, b):
    """Transporte clássico: min Σ C_ik π_ik sobre Π(a, b)"""
    k, K = cost_matrix.shape
    A_eq = np.zeros((k + K, k * K))
    for i in range(k):
        A_eq[i, i * K:(i + 1) * K] = 1.0
    for j in range(K):
        A_eq[k + j, j::K] = 1.0
    sol = solve_lp(LinearProgram(c=cost_matrix.reshape(-1), A_eq=A_eq, b_eq=np.concatenate([a, b])))
    if not sol.is_optimal:
        raise NumericalFailureError(f'LP de transporte terminou com status {sol.status.value}')
    return sol.objective


def project_phc(cost, mu, nu, tol=1e-7):
    """I_c(μ, ν) = T_F(μ, γ̄) com γ̄ = S_#μ, γ̄ <=_phc ν"""
    if not cost.is_conical:
        raise MethodMismatchError('project_phc exige custo cônico')
    if zero_in_convex_hull(_support_cone(nu)):
        raise ValueError('project_phc exige 0 ∉ co(supp ν)')
    report = solve_primal(cost, mu, nu)
    active = np.flatnonzero(mu.weights > 0)
    S = report.plan.S[active]
    gamma, _ = merge_atoms(S, mu.weights[active], tol=1e-9)
    order = check_phc_order(gamma, nu)
    if not order.dominated:
        logger.warning('γ̄ = S_#μ não é dominada por ν: quebra de invariante')
    C = np.array([[cost.F(int(i), s) for s in gamma.atoms] for i in active])
    value = classical_ot_value(C, mu.weights[active], gamma.weights)
    match = abs(value - report.primal_value) <= tol * max(1.0, abs(report.primal_value))
    return ProjectionReport(gamma, value, report.primal_value, match, order.dominated)


# =============================================
# REDUÇÃO UNIDIMENSIONAL
# =============================================

def _reduce_quadratic(x, w, mass):
    """s_i = max(0, x_i + τ) com Σ w_i s_i = mass"""
    g = lambda tau: float(w @ np.maximum(0.0, x + tau)) - mass
    lo = -float(np.max(x))
    hi = mass / float(np.sum(w)) - float(np.min(x)) + 1.0
    tau = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return np.maximum(0.0, x + tau)


def _reduce_piecewise(cost, active, w, mass):
    k = active.size
    U = cost.u[:, active, 0]
    a = cost.a[:, active]
    K = U.shape[0]
    c = np.concatenate([np.zeros(k), w])
    A_ub = np.zeros((K * k, 2 * k))
    b_ub = np.zeros(K * k)
    for r in range(k):
        for p in range(K):
            A_ub[r * K + p, r] = U[p, r]
            A_ub[r * K + p, k + r] = -1.0
            b_ub[r * K + p] = -a[p, r]
    A_eq = np.concatenate([w, np.zeros(k)])[None, :]
    free = np.concatenate([np.zeros(k, dtype=bool), np.ones(k, dtype=bool)])
    sol = solve_lp(LinearProgram(c=c, A_eq=A_eq, b_eq=[mass], A_ub=A_ub, b_ub=b_ub, free=free))
    if not sol.is_optimal:
        raise NumericalFailureError(f'LP da redução terminou com status {sol.status.value}')
    return sol.x[:k]


def _reduce_generic(cost, active, w, mass):
    k = active.size
    fun = lambda s: float(sum(w[r] * cost.F(int(i), s[r:r + 1]) for r, i in enumerate(active)))
    s0 = np.full(k, mass / float(np.sum(w)))
    res = minimize(fun, s0, method='SLSQP', bounds=[(0.0, None)] * k,
                   constraints=[{'type': 'eq', 'fun': lambda s: float(w @ s) - mass}],
                   options={'ftol': 1e-14, 'maxiter': 1000})
    return np.maximum(res.x, 0.0)


def dim1_reduce(cost, mu, nu):
    """Plano q̄_i = (s_i/m)·ν a partir do problema reduzido em s = S(x) >= 0"""
    if not cost.is_conical or cost.dim != 1:
        raise DimensionMismatchError('dim1_reduce exige custo cônico com d = 1')
    y = nu.scalar_atoms()
    if np.any(y < 0):
        raise ValueError('dim1_reduce exige Y ⊂ R_+')
    mass = float(nu.weights @ y)
    if mass <= 0:
        raise ValueError('média de ν deve ser positiva')
    active = np.flatnonzero(mu.weights > 0)
    w = mu.weights[active]
    if isinstance(cost, QuadraticF):
        s = _reduce_quadratic(cost.X[active, 0], w, mass)
    elif isinstance(cost, PiecewiseLinearF):
        s = _reduce_piecewise(cost, active, w, mass)
    elif isinstance(cost, PowerF):
        xa = cost.x[active] ** (1.0 / (1.0 - cost.eta))
        s = mass * xa / float(w @ xa)
    else:
        s = _reduce_generic(cost, active, w, mass)
    Q = np.zeros((mu.n, nu.n))
    Q[active] = np.outer(s / mass, nu.weights)
    return KernelPlan(Q, nu.atoms)


# =============================================
# ESTRUTURA DAS SOLUÇÕES
# =============================================

def brenier_check(mu, nu, tol=1e-6):
    """p_i = x_i − S_i deve ser a projeção de x_i num convexo que contém os p_k"""
    _same_dim(mu, nu)
    if zero_in_convex_hull(_support_cone(nu)):
        raise ValueError('brenier_check exige 0 ∉ co(supp ν)')
    cost = QuadraticF(mu.atoms, nu.atoms)
    report = solve_primal(cost, mu, nu)
    active = np.flatnonzero(mu.weights > 0)
    S = report.plan.S[active]
    p = mu.atoms[active] - S
    # (x_i − p_i)·(p_k − p_i) = S_i·(p_k − p_i)
    violation = float(np.max(np.einsum('id,ikd->ik', S, p[None, :, :] - p[:, None, :])))
    return BrenierReport(points=p, barycenters=S, violation=violation, passed=violation <= tol)


def monotone_support_check(plan, mu, sign='+', mass_tol=None):
    """Suportes ordenados: x_{i₁} < x_{i₂} ⇒ y <= y' (sign +) ou y >= y' (sign −)"""
    if sign not in ('+', '-'):
        raise ValueError("sign deve ser '+' ou '-'")
    x = mu.scalar_atoms()
    y = plan.y_atoms[:, 0]
    Q = plan.Q
    mass_tol = 1e-8 * float(np.max(Q, initial=0.0)) if mass_tol is None else mass_tol
    rows = [i for i in np.argsort(x, kind='stable') if mu.weights[i] > 0]
    s = 1.0 if sign == '+' else -1.0
    running = -math.inf
    for i in rows:
        support = s * y[Q[i] > mass_tol]
        if support.size == 0:
            continue
        if float(np.min(support)) < running:
            return False
        running = max(running, float(np.max(support)))
    return True


def _northwest_corner(a, b):
    a, b = a.copy(), b.copy()
    P = np.zeros((a.size, b.size))
    i = j = 0
    while i < a.size and j < b.size:
        t = min(a[i], b[j])
        P[i, j] = t
        a[i] -= t
        b[j] -= t
        if a[i] <= 1e-15:
            i += 1
        else:
            j += 1
    return P


def random_coupling(a, b, rng, pieces=3):
    """Combinação convexa de vértices de canto noroeste de marginais permutadas"""
    weights = rng.dirichlet(np.ones(pieces))
    P = np.zeros((a.size, b.size))
    for w in weights:
        ra, rb = rng.permutation(a.size), rng.permutation(b.size)
        V = _northwest_corner(a[ra], b[rb])
        P[np.ix_(ra, rb)] += w * V
    return P


def verify_structure_bis(cost, pi, mu, nu, trials=50, tol=1e-7, seed=None, I_c=None):
    """I_c = Σ η̄_i G(x_i, T̄_i) e, para π′ ∈ Π(η̄, ν) aleatórios, Σ η̄_i G(x_i, T′_i) >= I_c − tol"""
    if not cost.is_conical:
        raise MethodMismatchError('verify_structure_bis exige custo cônico')
    if I_c is None:
        I_c = solve_primal(cost, mu, nu).primal_value
    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    P = pi.pi
    eta_bar = P.sum(axis=1)
    rows = np.flatnonzero((mu.weights > 0) & (eta_bar > 0))
    N_bar = eta_bar[rows] / mu.weights[rows]
    Y = nu.atoms

    def structured_value(coupling):
        T = (coupling[rows] @ Y) / eta_bar[rows, None]
        return float(sum(eta_bar[i] * cost.F(int(i), N_bar[r] * T[r]) / N_bar[r]
                         for r, i in enumerate(rows)))

    identity_gap = abs(structured_value(P) - I_c)
    worst = math.inf
    for _ in range(trials):
        Pp = random_coupling(eta_bar, nu.weights, rng)
        worst = min(worst, structured_value(Pp) - I_c)
    scale = max(1.0, abs(I_c))
    passed = identity_gap <= tol * scale and (trials == 0 or worst >= -tol * scale)
    return StructureReport(identity_gap, worst, trials, passed)


def articulation_check(plan, phi, cost, mu, tol=1e-6):
    """Q_F φ̄(x_i) = φ̄(S_i) + F(x_i, S_i) para μ_i > 0"""
    if not cost.is_conical:
        raise MethodMismatchError('articulation_check exige custo cônico')
    S = plan.S
    residuals = []
    for i in np.flatnonzero(mu.weights > 0):
        lhs = Q_F(cost, phi, int(i))
        rhs = phi(S[i]) + cost.F(int(i), S[i])
        residuals.append(abs(lhs - rhs) if math.isfinite(lhs) else math.inf)
    worst = max(residuals, default=0.0)
    return ArticulationReport(worst <= tol, worst, residuals)
