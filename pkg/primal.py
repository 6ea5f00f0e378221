"""
Problema primal I_c(μ, ν)
=========================

Núcleos não normalizados Q (n×m, Q >= 0, Σ_i μ_i Q_ij = ν_j), o funcional
estendido bar-I e as soluções em forma fechada das famílias de potência.

Métodos de solve_primal:
    lp           AffineSup / PiecewiseLinearF (variáveis de epígrafo)
    qp           custo por linha quadrático afim (QuadraticF, G quadrática)
    fw           Frank-Wolfe com busca exata
    nlp          SLSQP para instâncias pequenas não diferenciáveis em 0
    closed_form  PowerF
"""

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

import dual
from config import Config
from costs import (AffineSupCost, CompositeCost, PiecewiseLinearF,
                   PowerF, QuadraticF, SigmaNormF)
from errors import (DimensionMismatchError, InfeasibleProblemError,
                    MethodMismatchError, NumericalFailureError)
from measures import DiscreteMeasure
from optim import LinearProgram, LpStatus, fw_minimize, solve_lp, solve_nnls_eq
from utils import GridUtils, NumberUtils

logger = logging.getLogger(__name__)

METHODS = ('auto', 'lp', 'fw', 'closed_form', 'qp', 'nlp')


# =============================================
# TIPOS
# =============================================

@dataclass(frozen=True)
class KernelPlan:
    """Núcleo Q (n×m) sobre os átomos y_j"""

    Q: np.ndarray
    y_atoms: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        Y = np.array(self.y_atoms, dtype=float)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        if Q.ndim != 2 or Q.shape[1] != Y.shape[0]:
            raise DimensionMismatchError('Q deve ter uma coluna por átomo de Y')
        if np.any(Q < -1e-9 * max(1.0, float(np.max(np.abs(Q), initial=0.0)))):
            raise ValueError('núcleo com entradas negativas')
        Q = np.maximum(Q, 0.0)
        Q.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, 'Q', Q)
        object.__setattr__(self, 'y_atoms', Y)

    @property
    def N(self):
        """Tamanho N_i = Σ_j Q_ij"""
        return self.Q.sum(axis=1)

    @property
    def S(self):
        """Baricentro não normalizado S_i = Σ_j Q_ij y_j"""
        return self.Q @ self.y_atoms

    def marginal_residual(self, mu, nu):
        return float(np.max(np.abs(mu.weights @ self.Q - nu.weights)))

    def is_feasible(self, mu, nu, tol=None):
        tol = Config.FEAS_TOL if tol is None else tol
        return self.marginal_residual(mu, nu) <= tol * max(1.0, nu.mass)

    def to_coupling(self, mu):
        return CouplingPlan(mu.weights[:, None] * self.Q)


@dataclass(frozen=True)
class CouplingPlan:
    """π (n×m) com primeira marginal dividida em parte ac e singular"""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        if pi.ndim != 2 or np.any(pi < 0):
            raise ValueError('acoplamento deve ser uma tabela não negativa')
        pi.setflags(write=False)
        object.__setattr__(self, 'pi', pi)

    @property
    def first_marginal(self):
        return self.pi.sum(axis=1)

    @property
    def second_marginal(self):
        return self.pi.sum(axis=0)

    def split(self, mu):
        """(π₁ ac, π₁ singular) em relação a μ"""
        p1 = self.first_marginal
        ac = np.where(mu.weights > 0, p1, 0.0)
        return ac, p1 - ac


@dataclass
class SolveReport:
    primal_value: float
    plan: KernelPlan
    method: str
    dual_value: float = float('nan')
    potential: object = None
    gap: float = float('nan')
    iterations: int = 0
    certified: bool = False
    elapsed: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def success(self):
        return self.certified


@dataclass(frozen=True)
class LpBinding:
    """Liga um LP/QP montado às linhas de marginal e às variáveis Q_ij"""

    active_rows: np.ndarray
    n: int
    m: int
    marginal_rows: slice
    sign: float

    def unpack(self, x):
        Q = np.zeros((self.n, self.m))
        k = self.active_rows.size
        Q[self.active_rows, :] = np.asarray(x[:k * self.m]).reshape(k, self.m)
        return Q


# =============================================
# OBJETIVO
# =============================================

def _check_instance(cost, mu, nu):
    if cost.n_x != mu.n or cost.n_y != nu.n:
        raise DimensionMismatchError(
            f'custo {cost.n_x}×{cost.n_y} incompatível com medidas {mu.n}×{nu.n}')
    if mu.mass <= 0:
        raise InfeasibleProblemError('μ tem massa nula')
    if abs(mu.mass - nu.mass) > Config.FEAS_TOL * max(1.0, mu.n, nu.n):
        raise InfeasibleProblemError(
            f'massas desbalanceadas: μ={mu.mass!r}, ν={nu.mass!r}')


def primal_objective(cost, mu, plan):
    """Σ_{μ_i>0} μ_i c(x_i, Q_i)"""
    if plan.Q.shape != (mu.n, cost.n_y):
        raise DimensionMismatchError('dimensões do núcleo não batem com μ e o custo')
    total = 0.0
    for i in np.flatnonzero(mu.weights > 0):
        total += mu.weights[i] * cost.evaluate(int(i), plan.Q[i])
    return float(total)


def _total_objective(cost, mu):
    active = np.flatnonzero(mu.weights > 0)

    def value(Q):
        return float(sum(mu.weights[i] * cost.evaluate(int(i), Q[i]) for i in active))

    def grad(Q):
        G = np.zeros_like(Q)
        for i in active:
            G[i] = mu.weights[i] * cost.gradient(int(i), Q[i])
        return G

    return value, grad


def _restore_marginal(Q, mu, nu):
    """Reescala colunas para Σ_i μ_i Q_ij = ν_j exato"""
    col = mu.weights @ Q
    scale = np.divide(nu.weights, col, out=np.ones_like(col), where=col > 0)
    return Q * scale[None, :]


def gradient_certificate(cost, mu, plan):
    """f_j = −min_{μ_i>0} ∂c(x_i, Q_i)/∂m_j"""
    active = np.flatnonzero(mu.weights > 0)
    grads = np.array([cost.gradient(int(i), plan.Q[i]) for i in active])
    return dual.DualPotential(-np.min(grads, axis=0))


# =============================================
# MONTAGEM DE PROGRAMAS
# =============================================

def build_affine_lp(cost, mu, nu, row_sums=None):
    """LP de epígrafo: min Σ μ_i t_i, t_i >= b_k(x_i)·Q_i + a_k(x_i)"""
    if isinstance(cost, PiecewiseLinearF):
        cost = cost.to_affine_sup()
    if not isinstance(cost, AffineSupCost):
        raise MethodMismatchError('método lp exige AffineSupCost ou PiecewiseLinearF')
    active = np.flatnonzero(mu.weights > 0)
    k, m, K = active.size, nu.n, cost.n_pieces
    nq = k * m
    c = np.concatenate([np.zeros(nq), mu.weights[active]])

    A_eq = np.zeros((m, nq + k))
    for r, i in enumerate(active):
        A_eq[np.arange(m), r * m + np.arange(m)] = mu.weights[i]
    b_eq = nu.weights.copy()
    if row_sums == 'one':
        R = np.zeros((k, nq + k))
        for r in range(k):
            R[r, r * m:(r + 1) * m] = 1.0
        A_eq = np.vstack([A_eq, R])
        b_eq = np.concatenate([b_eq, np.ones(k)])
    elif row_sums is not None:
        raise ValueError(f'row_sums desconhecido: {row_sums}')

    A_ub = np.zeros((k * K, nq + k))
    b_ub = np.zeros(k * K)
    for r, i in enumerate(active):
        for p in range(K):
            row = r * K + p
            A_ub[row, r * m:(r + 1) * m] = cost.b[p, i, :]
            A_ub[row, nq + r] = -1.0
            b_ub[row] = -cost.a[p, i]
    free = np.concatenate([np.zeros(nq, dtype=bool), np.ones(k, dtype=bool)])
    lp = LinearProgram(c=c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub, free=free)
    binding = LpBinding(active, mu.n, m, slice(0, m), sign=-1.0)
    return lp, binding


def build_quadratic_program(cost, mu, nu):
    """(A, b, E, e, const) para min ½‖A q − b‖² + const s.a. E q = e, q >= 0"""
    active = np.flatnonzero(mu.weights > 0)
    m = nu.n
    blocks, targets, const = [], [], 0.0
    for i in active:
        rows = cost.least_squares_rows(int(i))
        if rows is None:
            raise MethodMismatchError(f'custo {cost.kind} não é quadrático afim por linha')
        A_i, b_i, c_i = rows
        w = math.sqrt(mu.weights[i])
        blocks.append(w * np.atleast_2d(A_i))
        targets.append(w * np.asarray(b_i, dtype=float))
        const += mu.weights[i] * c_i
    k = active.size
    r_sizes = [B.shape[0] for B in blocks]
    A = np.zeros((sum(r_sizes), k * m))
    row = 0
    for r, B in enumerate(blocks):
        A[row:row + B.shape[0], r * m:(r + 1) * m] = B
        row += B.shape[0]
    E = np.zeros((m, k * m))
    for r, i in enumerate(active):
        E[np.arange(m), r * m + np.arange(m)] = mu.weights[i]
    binding = LpBinding(active, mu.n, m, slice(0, m), sign=1.0)
    return A, np.concatenate(targets), E, nu.weights.copy(), const, binding


# =============================================
# CAMINHOS DE SOLUÇÃO
# =============================================

def _auto_method(cost):
    if isinstance(cost, PowerF):
        return 'closed_form'
    if isinstance(cost, (AffineSupCost, PiecewiseLinearF)):
        return 'lp'
    if isinstance(cost, QuadraticF):
        return 'qp'
    if isinstance(cost, CompositeCost):
        return 'qp' if cost.G.quadratic is not None else 'fw'
    if isinstance(cost, SigmaNormF):
        return 'nlp'
    return 'fw'


def _solve_lp_path(cost, mu, nu, row_sums):
    lp, binding = build_affine_lp(cost, mu, nu, row_sums)
    sol = solve_lp(lp)
    if sol.status == LpStatus.INFEASIBLE:
        raise InfeasibleProblemError('LP primal inviável')
    if not sol.is_optimal:
        raise NumericalFailureError(f'simplex terminou com status {sol.status.value} '
                                    f'após {sol.pivots} pivôs')
    plan = KernelPlan(binding.unpack(sol.x), nu.atoms)
    details = {'lp_objective': sol.objective, 'lp_dual_objective': sol.dual_objective(lp)}
    potential = None
    if row_sums is None:
        potential = dual.extract_dual_certificate(sol, binding)
    return plan, potential, sol.pivots, details


def _solve_qp_path(cost, mu, nu):
    A, b, E, e, const, binding = build_quadratic_program(cost, mu, nu)
    sol = solve_nnls_eq(A, b, E, e)
    if sol.status != LpStatus.OPTIMAL:
        raise NumericalFailureError(f'NNLS com igualdades não convergiu (resíduo {sol.residual:.3e})')
    Q = _restore_marginal(binding.unpack(sol.x), mu, nu)
    plan = KernelPlan(Q, nu.atoms)
    potential = dual.extract_dual_certificate(sol, binding)
    details = {'qp_objective': sol.objective + const, 'polished': sol.polished}
    return plan, potential, sol.iterations, details


def _solve_fw_path(cost, mu, nu, max_iters, gap_tol):
    if not cost.is_differentiable() and not isinstance(cost, CompositeCost):
        raise MethodMismatchError(f'fw exige custo diferenciável; {cost.kind} não é')
    value, grad = _total_objective(cost, mu)
    variant = 'pairwise' if isinstance(cost, CompositeCost) else 'vanilla'
    state = fw_minimize(grad, value, mu.weights, nu.weights, max_iters=max_iters,
                        gap_tol=gap_tol, line_search=True, variant=variant)
    plan = KernelPlan(_restore_marginal(state.Q, mu, nu), nu.atoms)
    potential = gradient_certificate(cost, mu, plan)
    return plan, potential, state.iterations, {'fw_gap': state.gap}


def _solve_nlp_path(cost, mu, nu, max_iters):
    active = np.flatnonzero(mu.weights > 0)
    k, m = active.size, nu.n
    value, grad = _total_objective(cost, mu)

    def unpack(q):
        Q = np.zeros((mu.n, m))
        Q[active] = q.reshape(k, m)
        return Q

    E = np.zeros((m, k * m))
    for r, i in enumerate(active):
        E[np.arange(m), r * m + np.arange(m)] = mu.weights[i]
    q0 = np.tile(nu.weights / mu.weights[active].sum(), k)
    res = minimize(lambda q: value(unpack(q)), q0,
                   jac=lambda q: grad(unpack(q))[active].reshape(-1),
                   method='SLSQP', bounds=[(0.0, None)] * (k * m),
                   constraints=[{'type': 'eq', 'fun': lambda q: E @ q - nu.weights,
                                 'jac': lambda q: E}],
                   options={'maxiter': max_iters or 1000, 'ftol': 1e-15})
    if not res.success:
        logger.warning(f'SLSQP: {res.message}')
    Q = _restore_marginal(np.maximum(unpack(res.x), 0.0), mu, nu)
    plan = KernelPlan(Q, nu.atoms)
    potential = gradient_certificate(cost, mu, plan)
    return plan, potential, int(res.nit), {'slsqp_message': str(res.message)}


def _solve_closed_form_path(cost, mu, nu):
    if not isinstance(cost, PowerF):
        raise MethodMismatchError('closed_form exige PowerF')
    plan, _ = closed_form_power(mu, nu, cost.eta, x_values=cost.x)
    Z = float(mu.weights @ cost.x ** (1.0 / (1.0 - cost.eta)))
    C = float(nu.weights @ cost.Y[:, 0]) / Z
    # derivada comum a todas as linhas no ótimo: −η C^{η−1} y_j
    f = cost.eta * C ** (cost.eta - 1.0) * cost.Y[:, 0]
    return plan, dual.DualPotential(f), 0, {'C': C, 'Z': Z}


def solve_primal(cost, mu, nu, method='auto', row_sums=None, gap_tol=None, max_iters=None):
    """Resolve I_c(μ, ν) e certifica o valor por um potencial dual.

    Parameters
    ----------
    method : {'auto', 'lp', 'fw', 'closed_form', 'qp', 'nlp'}
    row_sums : None ou 'one'
        'one' acrescenta Σ_j Q_ij = 1 (transporte clássico; só no caminho lp).

    Raises
    ------
    InfeasibleProblemError
        Massas de μ e ν diferentes.
    MethodMismatchError
        Método não se aplica ao custo.
    NumericalFailureError
        Orçamento de pivôs/iterações esgotado.
    """
    if method not in METHODS:
        raise MethodMismatchError(f'método desconhecido: {method}')
    _check_instance(cost, mu, nu)
    gap_tol = Config.GAP_TOL if gap_tol is None else gap_tol
    if method == 'auto':
        method = 'lp' if row_sums is not None else _auto_method(cost)
    if row_sums is not None and method != 'lp':
        raise MethodMismatchError('row_sums só é suportado no método lp')

    started = time.perf_counter()
    if method == 'lp':
        plan, potential, iterations, details = _solve_lp_path(cost, mu, nu, row_sums)
    elif method == 'qp':
        plan, potential, iterations, details = _solve_qp_path(cost, mu, nu)
    elif method == 'fw':
        if isinstance(cost, (PowerF, SigmaNormF)):
            raise MethodMismatchError(f'{cost.kind} não é diferenciável em z = 0; use nlp ou closed_form')
        plan, potential, iterations, details = _solve_fw_path(cost, mu, nu, max_iters, gap_tol)
    elif method == 'nlp':
        if isinstance(cost, (AffineSupCost, PiecewiseLinearF)) and not cost.is_differentiable():
            raise MethodMismatchError('nlp exige custo suave por partes simples; use lp')
        plan, potential, iterations, details = _solve_nlp_path(cost, mu, nu, max_iters)
    else:
        plan, potential, iterations, details = _solve_closed_form_path(cost, mu, nu)

    primal = primal_objective(cost, mu, plan)
    if potential is not None:
        dual_val = dual.dual_value(cost, potential, mu, nu)
    else:
        dual_val = details['lp_dual_objective']
    gap = primal - dual_val if math.isfinite(dual_val) else math.inf
    # iterativos: a tolerância é relativa ao valor
    tol = gap_tol if method in ('lp', 'qp', 'closed_form') else max(gap_tol, 1e-4)
    certified = abs(gap) <= tol * max(1.0, abs(primal))
    elapsed = time.perf_counter() - started
    if certified:
        logger.info(f'solve_primal[{method}] valor={primal:.12g} dual={dual_val:.12g} gap={gap:.3e}')
    else:
        logger.warning(f'solve_primal[{method}] gap {gap:.3e} acima da tolerância ({tol:.1e})')
    return SolveReport(primal_value=primal, plan=plan, method=method, dual_value=dual_val,
                       potential=potential, gap=gap, iterations=iterations,
                       certified=certified, elapsed=elapsed, details=details)


# =============================================
# FUNCIONAL ESTENDIDO bar-I
# =============================================

def eval_bar_I(cost, mu, pi, nu=None):
    """Σ_{μ_i>0} μ_i c(x_i, π_i/μ_i) + Σ_{μ_i=0} π₁_i c'_∞(x_i, π_i/π₁_i)"""
    if not isinstance(pi, CouplingPlan):
        pi = CouplingPlan(pi)
    if pi.pi.shape != (mu.n, cost.n_y):
        raise DimensionMismatchError('acoplamento com dimensões incompatíveis')
    if nu is not None and np.max(np.abs(pi.second_marginal - nu.weights)) > Config.FEAS_TOL:
        raise ValueError('segunda marginal de π difere de ν')
    p1 = pi.first_marginal
    total = 0.0
    for i in range(mu.n):
        if mu.weights[i] > 0:
            total += mu.weights[i] * cost.evaluate(i, pi.pi[i] / mu.weights[i])
        elif p1[i] > 0:
            total += p1[i] * cost.recession(i, pi.pi[i] / p1[i])
        if total == math.inf:
            return math.inf
    return float(total)


# =============================================
# FORMAS FECHADAS
# =============================================

def closed_form_power(mu, nu, eta, x_values=None):
    """Plano ótimo de F(x, z) = −x z^η: Q_ij = (x_i^{1/(1−η)}/Z) ν_j, linha nula se μ_i = 0.

    Valor −Z^{1−η} (Σ y_j ν_j)^η com Z = Σ μ_i x_i^{1/(1−η)}.
    """
    if not 0 < eta < 1:
        raise ValueError('η deve estar em (0, 1)')
    x = mu.scalar_atoms() if x_values is None else np.asarray(x_values, dtype=float)
    y = nu.scalar_atoms()
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError('forma fechada exige suportes em R_+')
    a0 = 1.0 / (1.0 - eta)
    xa = x ** a0
    Z = float(mu.weights @ xa)
    if Z <= 0:
        raise ValueError('todos os x_i são nulos (Z = 0)')
    Q = np.outer(np.where(mu.weights > 0, xa / Z, 0.0), nu.weights)
    value = -Z ** (1.0 - eta) * float(nu.weights @ y) ** eta
    return KernelPlan(Q, nu.atoms), value


@dataclass(frozen=True)
class UniformTriple:
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    random_sorting: KernelPlan
    pam: KernelPlan
    nam: KernelPlan
    exponents: dict


def _interval_map_plan(T, n):
    """P_ij = |T(célula_i) ∩ célula_j| para T bijeção monótona de [0,1]"""
    edges = GridUtils.cell_edges(n)
    images = T(edges)
    lo = np.minimum(images[:-1], images[1:])
    hi = np.maximum(images[:-1], images[1:])
    P = np.maximum(0.0, np.minimum(hi[:, None], edges[None, 1:]) - np.maximum(lo[:, None], edges[None, :-1]))
    # coluna exata: a imagem cobre cada célula de Y uma vez
    return P * (1.0 / n) / np.maximum(P.sum(axis=0, keepdims=True), 1e-300)


def closed_form_uniform_triple(eta, n):
    """Três núcleos ótimos para μ = ν uniformes em [0, 1] e F = −x z^η.

    random_sorting: N₀(x) = C x^{a₀} com o ν inteiro;
    pam: T₁(x) = x^{a₁}, crescente;  nam: T₂(x) = √(1 − x^{a₂}), decrescente.
    """
    if not 0 < eta < 1:
        raise ValueError('η deve estar em (0, 1)')
    a0 = 1.0 / (1.0 - eta)
    C = (2.0 - eta) / (1.0 - eta)
    a1, a2 = C / 2.0, C
    mu = DiscreteMeasure.midpoint_grid(n)
    nu = DiscreteMeasure.midpoint_grid(n)
    sorting, _ = closed_form_power(mu, nu, eta)
    pam = n * _interval_map_plan(lambda x: x ** a1, n)
    nam = n * _interval_map_plan(lambda x: np.sqrt(np.maximum(0.0, 1.0 - x ** a2)), n)
    return UniformTriple(mu, nu, sorting, KernelPlan(pam, nu.atoms), KernelPlan(nam, nu.atoms),
                         {'a0': a0, 'C': C, 'a1': a1, 'a2': a2})


# =============================================
# CSV DE NÚCLEOS
# =============================================

def write_kernel_csv(path, plan, mu):
    """Cabeçalho: i, mu, N, S_1..S_d, índices de Y; uma linha por átomo de X"""
    d = plan.y_atoms.shape[1]
    m = plan.Q.shape[1]
    fmt = NumberUtils.format_float
    N, S = plan.N, plan.S
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        writer.writerow(['i', 'mu', 'N'] + [f'S_{k + 1}' for k in range(d)] + [str(j) for j in range(m)])
        for i in range(plan.Q.shape[0]):
            writer.writerow([i, fmt(mu.weights[i]), fmt(N[i])] + [fmt(v) for v in S[i]]
                            + [fmt(q) for q in plan.Q[i]])


def read_kernel_csv(path, y_atoms):
    """Lê o CSV de write_kernel_csv; devolve (pesos μ, KernelPlan)"""
    Y = np.asarray(y_atoms, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    d, m = Y.shape[1], Y.shape[0]
    with open(path, newline='', encoding='utf-8') as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if len(header) != 3 + d + m:
        raise DimensionMismatchError(f'CSV com {len(header)} colunas, esperado {3 + d + m}')
    mu_w = np.array([NumberUtils.parse_float(r[1]) for r in body])
    Q = np.array([[NumberUtils.parse_float(v) for v in r[3 + d:]] for r in body])
    return mu_w, KernelPlan(Q, Y)
