"""
Núcleos de otimização
=====================

Motores internos usados por todos os módulos do solver:

- solve_lp: simplex revisado de duas fases (denso), regra de Dantzig com
  troca definitiva para a regra de Bland quando o contador de pivôs
  degenerados estoura; devolve duais e certificado de Farkas.
- solve_nnls_eq: mínimos quadrados não negativos com restrições de igualdade
  (método dos multiplicadores sobre scipy.optimize.nnls + polimento KKT).
- fw_minimize: Frank-Wolfe sobre o politopo de transporte com somas de
  linha livres.
- project_onto_polytope: projeção euclidiana sobre conv(pontos).

Todas as tolerâncias são relativas ao maior |coeficiente| do problema.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar, nnls

from config import Config
from errors import DimensionMismatchError
from utils import NumberUtils

logger = logging.getLogger(__name__)


class LpStatus(str, Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'
    FAILED = 'failed'


# =============================================
# PROGRAMAÇÃO LINEAR
# =============================================

def _as_matrix(A, ncols):
    if A is None:
        return np.zeros((0, ncols))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return np.zeros((0, ncols))
    return A


def _as_vector(b, size):
    if b is None:
        return np.zeros(size)
    return np.asarray(b, dtype=float).reshape(-1)


@dataclass(frozen=True)
class LinearProgram:
    """min c·x  s.a.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0 (ou livre)"""

    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    free: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A_eq = _as_matrix(self.A_eq, n)
        A_ub = _as_matrix(self.A_ub, n)
        b_eq = _as_vector(self.b_eq, A_eq.shape[0])
        b_ub = _as_vector(self.b_ub, A_ub.shape[0])
        free = (np.zeros(n, dtype=bool) if self.free is None
                else np.asarray(self.free, dtype=bool).reshape(-1))
        if A_eq.shape[1] != n or A_ub.shape[1] != n or free.size != n:
            raise DimensionMismatchError('colunas das restrições não batem com c')
        if b_eq.size != A_eq.shape[0] or b_ub.size != A_ub.shape[0]:
            raise DimensionMismatchError('lado direito com tamanho errado')
        for arr in (c, A_eq, A_ub, b_eq, b_ub):
            if not np.all(np.isfinite(arr)):
                raise ValueError('coeficientes do LP devem ser finitos')
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'A_eq', A_eq)
        object.__setattr__(self, 'b_eq', b_eq)
        object.__setattr__(self, 'A_ub', A_ub)
        object.__setattr__(self, 'b_ub', b_ub)
        object.__setattr__(self, 'free', free)

    @property
    def n_vars(self):
        return self.c.size

    @property
    def scale(self):
        return NumberUtils.scale_of(self.c, self.A_eq, self.A_ub, self.b_eq, self.b_ub)


@dataclass
class LpSolution:
    """Resultado do simplex.

    Convenção dos duais: y resolve Bᵀy = c_B, logo Aᵀy <= c nas variáveis
    não negativas, y_ub <= 0 e b·y = c·x no ótimo.
    Em caso de inviabilidade, (farkas_eq, farkas_ub) satisfaz
    Aᵀy <= 0 (= 0 nas livres), farkas_ub <= 0 e b·y > 0.
    """

    status: LpStatus
    x: Optional[np.ndarray] = None
    y_eq: Optional[np.ndarray] = None
    y_ub: Optional[np.ndarray] = None
    objective: float = float('nan')
    farkas_eq: Optional[np.ndarray] = None
    farkas_ub: Optional[np.ndarray] = None
    pivots: int = 0

    @property
    def is_optimal(self):
        return self.status == LpStatus.OPTIMAL

    def dual_objective(self, lp):
        if not self.is_optimal:
            return float('nan')
        return float(lp.b_eq @ self.y_eq + lp.b_ub @ self.y_ub)


class _StandardForm:
    """A x = b, x >= 0 com linhas de b >= 0 e artificiais ao final"""

    def __init__(self, lp):
        n = lp.n_vars
        m_eq, m_ub = lp.A_eq.shape[0], lp.A_ub.shape[0]
        self.m_eq, self.m_ub = m_eq, m_ub
        cols, costs, self.var_map = [], [], []
        A_rows = np.vstack([lp.A_eq, lp.A_ub])
        for k in range(n):
            cols.append(A_rows[:, k])
            costs.append(lp.c[k])
            self.var_map.append((k, 1.0))
            if lp.free[k]:
                cols.append(-A_rows[:, k])
                costs.append(-lp.c[k])
                self.var_map.append((k, -1.0))
        for r in range(m_ub):
            slack = np.zeros(m_eq + m_ub)
            slack[m_eq + r] = 1.0
            cols.append(slack)
            costs.append(0.0)
            self.var_map.append((None, 0.0))
        rows = m_eq + m_ub
        A = np.column_stack(cols) if cols else np.zeros((rows, 0))
        b = np.concatenate([lp.b_eq, lp.b_ub])
        self.sign = np.where(b < 0, -1.0, 1.0)
        A = A * self.sign[:, None]
        b = b * self.sign
        self.n_struct = A.shape[1]
        self.A = np.hstack([A, np.eye(rows)])
        self.b = b
        self.c = np.concatenate([np.asarray(costs, dtype=float), np.zeros(rows)])
        self.is_artificial = np.zeros(self.A.shape[1], dtype=bool)
        self.is_artificial[self.n_struct:] = True
        self.rows = rows

    def recover_x(self, x_std, n):
        x = np.zeros(n)
        for col, (k, s) in enumerate(self.var_map):
            if k is not None:
                x[k] += s * x_std[col]
        return x

    def split_duals(self, y):
        y = self.sign * y
        return y[:self.m_eq].copy(), y[self.m_eq:].copy()


class _RevisedSimplex:
    """Iterações do simplex revisado sobre uma forma padrão"""

    def __init__(self, sf, scale, max_pivots, degeneracy_limit):
        self.sf = sf
        self.tol = Config.FEAS_TOL * scale
        self.piv_tol = 1e-11 * max(1.0, scale)
        self.max_pivots = max_pivots
        self.degeneracy_limit = degeneracy_limit
        self.use_bland = False
        self.degenerate_run = 0
        self.pivots = 0
        self.basis = list(range(sf.n_struct, sf.n_struct + sf.rows))

    def _basic_solution(self):
        B = self.sf.A[:, self.basis]
        return B, np.linalg.solve(B, self.sf.b)

    def duals(self, c):
        B = self.sf.A[:, self.basis]
        return np.linalg.solve(B.T, c[self.basis])

    def run(self, c, phase):
        """Executa pivôs até ótimo/ilimitado; devolve LpStatus"""
        sf = self.sf
        allowed = np.ones(sf.A.shape[1], dtype=bool)
        if phase == 2:
            allowed &= ~sf.is_artificial
        while self.pivots < self.max_pivots:
            try:
                B, x_B = self._basic_solution()
                y = np.linalg.solve(B.T, c[self.basis])
            except np.linalg.LinAlgError:
                logger.warning('Base singular no simplex; abortando')
                return LpStatus.FAILED
            d = c - sf.A.T @ y
            d[self.basis] = 0.0
            d[~allowed] = 0.0
            candidates = np.flatnonzero(d < -self.tol)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            q = int(candidates[0]) if self.use_bland else int(candidates[np.argmin(d[candidates])])
            alpha = np.linalg.solve(B, sf.A[:, q])
            r = self._ratio_test(x_B, alpha, phase)
            if r is None:
                return LpStatus.UNBOUNDED
            theta = max(x_B[r], 0.0) / alpha[r] if alpha[r] > 0 else 0.0
            if theta <= self.tol:
                self.degenerate_run += 1
                if not self.use_bland and self.degenerate_run > self.degeneracy_limit:
                    logger.debug('Contador de degenerescência estourou; usando regra de Bland')
                    self.use_bland = True
            else:
                self.degenerate_run = 0
            self.basis[r] = q
            self.pivots += 1
        logger.warning(f'Simplex excedeu {self.max_pivots} pivôs')
        return LpStatus.FAILED

    def _ratio_test(self, x_B, alpha, phase):
        sf = self.sf
        if phase == 2:
            # artificial básica (em zero) nunca pode crescer
            blocking = [r for r, k in enumerate(self.basis)
                        if sf.is_artificial[k] and abs(alpha[r]) > self.piv_tol]
            if blocking:
                return min(blocking, key=lambda r: self.basis[r])
        rows = np.flatnonzero(alpha > self.piv_tol)
        if rows.size == 0:
            return None
        ratios = np.maximum(x_B[rows], 0.0) / alpha[rows]
        best = ratios.min()
        ties = rows[ratios <= best + self.tol]
        if self.use_bland or ties.size == 1:
            return int(min(ties, key=lambda r: self.basis[r]))
        return int(ties[np.argmax(alpha[ties])])


def solve_lp(lp, max_pivots=None, degeneracy_limit=None):
    """Resolve um LinearProgram pelo simplex revisado de duas fases.

    Determinístico: mesma entrada, mesma sequência de pivôs.

    Returns:
        LpSolution com status optimal / infeasible / unbounded / failed
    """
    max_pivots = Config.MAX_PIVOTS if max_pivots is None else max_pivots
    degeneracy_limit = Config.DEGENERACY_LIMIT if degeneracy_limit is None else degeneracy_limit
    scale = lp.scale
    sf = _StandardForm(lp)

    if sf.rows == 0:
        # sem restrições: x = 0 é ótimo sse nenhum custo aponta para -inf
        if np.any(lp.c[~lp.free] < -Config.FEAS_TOL * scale) or np.any(
                np.abs(lp.c[lp.free]) > Config.FEAS_TOL * scale):
            return LpSolution(LpStatus.UNBOUNDED, objective=-np.inf)
        return LpSolution(LpStatus.OPTIMAL, x=np.zeros(lp.n_vars), y_eq=np.zeros(0),
                          y_ub=np.zeros(0), objective=0.0)

    engine = _RevisedSimplex(sf, scale, max_pivots, degeneracy_limit)

    # Fase I: minimizar a soma das artificiais
    c1 = sf.is_artificial.astype(float)
    status = engine.run(c1, phase=1)
    if status == LpStatus.FAILED:
        return LpSolution(LpStatus.FAILED, pivots=engine.pivots)
    _, x_B = engine._basic_solution()
    infeasibility = float(c1[engine.basis] @ x_B)
    if infeasibility > Config.FEAS_TOL * scale:
        y = engine.duals(c1)
        f_eq, f_ub = sf.split_duals(y)
        logger.debug(f'LP inviável (fase I = {infeasibility:.3e})')
        return LpSolution(LpStatus.INFEASIBLE, farkas_eq=f_eq, farkas_ub=f_ub,
                          pivots=engine.pivots)

    # Fase II
    status = engine.run(sf.c, phase=2)
    if status == LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, objective=-np.inf, pivots=engine.pivots)
    if status == LpStatus.FAILED:
        return LpSolution(LpStatus.FAILED, pivots=engine.pivots)

    _, x_B = engine._basic_solution()
    x_std = np.zeros(sf.A.shape[1])
    x_std[engine.basis] = np.maximum(x_B, 0.0)
    x = sf.recover_x(x_std, lp.n_vars)
    y_eq, y_ub = sf.split_duals(engine.duals(sf.c))
    solution = LpSolution(LpStatus.OPTIMAL, x=x, y_eq=y_eq, y_ub=y_ub,
                          objective=float(lp.c @ x), pivots=engine.pivots)
    logger.debug(f'LP ótimo: {solution.objective:.12g} em {engine.pivots} pivôs')
    return solution


# =============================================
# MÍNIMOS QUADRADOS NÃO NEGATIVOS COM IGUALDADES
# =============================================

@dataclass
class NnlsSolution:
    """min ½‖Ax − b‖²  s.a.  Ex = e, x >= 0.

    y_eq são os multiplicadores de L = ½‖Ax−b‖² + y_eqᵀ(Ex − e) − sᵀx.
    """

    status: LpStatus
    x: np.ndarray
    y_eq: np.ndarray
    objective: float
    residual: float
    iterations: int = 0
    polished: bool = False


def _nnls(M, r):
    try:
        x, _ = nnls(M, r, maxiter=max(50 * M.shape[1], 1000))
    except RuntimeError:
        return None
    return x


def _polish(A, b, E, e, x, tol):
    """Resolve o sistema KKT restrito ao suporte detectado"""
    support = np.flatnonzero(x > tol * max(1.0, float(np.max(x, initial=0.0))))
    if support.size == 0:
        return None
    As, Es = A[:, support], E[:, support]
    k, p = support.size, E.shape[0]
    K = np.zeros((k + p, k + p))
    K[:k, :k] = As.T @ As
    K[:k, k:] = Es.T
    K[k:, :k] = Es
    rhs = np.concatenate([As.T @ b, e])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    xs, lam = sol[:k], sol[k:]
    if np.any(xs < -tol * max(1.0, float(np.max(np.abs(xs))))):
        return None
    x_new = np.zeros_like(x)
    x_new[support] = np.maximum(xs, 0.0)
    return x_new, lam


def solve_nnls_eq(A, b, E=None, e=None, tol=None, max_outer=None):
    """Mínimos quadrados não negativos com restrições lineares de igualdade.

    Método dos multiplicadores: cada subproblema é um NNLS exato
    (scipy.optimize.nnls) com as igualdades penalizadas; ao final o par
    (x, y_eq) é polido resolvendo o sistema KKT no suporte.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    ncols = A.shape[1]
    E = _as_matrix(E, ncols)
    e = _as_vector(e, E.shape[0])
    tol = 1e-10 if tol is None else tol
    max_outer = Config.NNLS_MAX_OUTER if max_outer is None else max_outer

    if E.shape[0] == 0:
        x = _nnls(A, b)
        status = LpStatus.OPTIMAL if x is not None else LpStatus.FAILED
        x = np.zeros(ncols) if x is None else x
        obj = 0.5 * float(np.sum((A @ x - b) ** 2))
        return NnlsSolution(status, x, np.zeros(0), obj, 0.0, 1)

    # linhas de E normalizadas: multiplicadores voltam multiplicados por D
    D = 1.0 / np.maximum(np.max(np.abs(E), axis=1), 1e-300)
    Es, es = E * D[:, None], e * D
    col_norm = float(np.max(np.sum(A ** 2, axis=0), initial=0.0))
    rho = 1e5 * max(1.0, col_norm)
    eq_scale = max(1.0, float(np.max(np.abs(es))))
    lam = np.zeros(Es.shape[0])
    x = np.zeros(ncols)
    resid_norm = np.inf
    it = 0
    for it in range(1, max_outer + 1):
        M = np.vstack([A, np.sqrt(rho) * Es])
        r = np.concatenate([b, np.sqrt(rho) * (es - lam / rho)])
        x_new = _nnls(M, r)
        if x_new is None:
            break
        x = x_new
        resid = Es @ x - es
        lam = lam + rho * resid
        resid_norm = float(np.max(np.abs(resid)))
        if resid_norm <= tol * eq_scale:
            break

    lam_orig = lam * D
    polished = False
    if resid_norm <= 1e-6 * eq_scale:
        out = _polish(A, b, E, e, x, 1e-10)
        if out is not None:
            x_p, lam_p = out
            grad = A.T @ (A @ x_p - b) + E.T @ lam_p
            dual_tol = 1e-8 * max(1.0, float(np.max(np.abs(A.T @ b), initial=0.0)))
            resid_p = float(np.max(np.abs((E @ x_p - e) * D)))
            if resid_p <= max(resid_norm, tol * eq_scale) and np.all(grad >= -dual_tol):
                x, lam_orig, polished = x_p, lam_p, True
                resid_norm = resid_p
            else:
                logger.debug('Polimento KKT rejeitado; mantendo iterado do método dos multiplicadores')

    status = LpStatus.OPTIMAL if resid_norm <= 1e-8 * eq_scale else LpStatus.FAILED
    if status == LpStatus.FAILED:
        logger.warning(f'NNLS com igualdades não convergiu em {it} iterações externas '
                       f'(resíduo {resid_norm:.3e})')
    objective = 0.5 * float(np.sum((A @ x - b) ** 2))
    residual = float(np.max(np.abs(E @ x - e)))
    return NnlsSolution(status, x, lam_orig, objective, residual, it, polished)



# =============================================
# FRANK-WOLFE NO POLITOPO DE TRANSPORTE
# =============================================

@dataclass
class FwState:
    """Iterado Q (n×m), gap de Frank-Wolfe e número de iterações"""

    Q: np.ndarray
    gap: float
    iterations: int
    value: float = float('nan')
    history: list = field(default_factory=list)


def _product_start(mu, nu):
    active = mu > 0
    Q = np.zeros((mu.size, nu.size))
    Q[active, :] = nu[None, :] / float(np.sum(mu[active]))
    return Q


def _linear_oracle(grad, mu, nu):
    """Vértice que minimiza ⟨grad, V⟩: por coluna, i* = argmin_i grad_ij/μ_i"""
    active = np.flatnonzero(mu > 0)
    ratios = grad[active, :] / mu[active, None]
    # np.argmin devolve o primeiro índice: desempate pela menor linha
    best = active[np.argmin(ratios, axis=0)]
    V = np.zeros_like(grad)
    cols = np.arange(nu.size)
    V[best, cols] = nu / mu[best]
    return V, best


def _line_search(value_oracle, Q, D, upper):
    """Busca exata em [0, upper], conferindo o extremo (passo de descarte)"""
    phi = lambda g: value_oracle(Q + g * D)
    res = minimize_scalar(phi, bounds=(0.0, upper), method='bounded',
                          options={'xatol': 1e-12 * max(1.0, upper)})
    gamma = float(res.x)
    if phi(upper) <= phi(gamma):
        gamma = upper
    if phi(0.0) < phi(gamma):
        gamma = 0.0
    return gamma


def fw_minimize(grad_oracle: Callable, value_oracle: Callable, mu, nu,
                max_iters=None, gap_tol=None, line_search=False,
                variant='vanilla', Q0=None):
    """Frank-Wolfe sobre {Q >= 0 : Σ_i μ_i Q_ij = ν_j}.

    Parameters
    ----------
    grad_oracle : callable
        Q -> gradiente (n×m) do objetivo total Σ_i μ_i c(x_i, Q_i).
    value_oracle : callable
        Q -> valor do objetivo.
    mu, nu : array
        Pesos das medidas; linhas com μ_i = 0 ficam nulas.
    line_search : bool
        Busca exata no lugar do passo 2/(t+2).
    variant : {'vanilla', 'pairwise'}
        'pairwise' move, por coluna, a massa da pior linha ativa para a
        melhor; com busca exata zera linhas (passos de descarte).

    Returns
    -------
    FwState com iterado viável, gap e iterações.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    max_iters = Config.FW_MAX_ITERS if max_iters is None else max_iters
    gap_tol = Config.GAP_TOL if gap_tol is None else gap_tol
    if variant not in ('vanilla', 'pairwise'):
        raise ValueError(f'variante desconhecida: {variant}')

    Q = _product_start(mu, nu) if Q0 is None else np.array(Q0, dtype=float)
    gap = np.inf
    t = 0
    history = []
    for t in range(max_iters):
        try:
            grad = np.asarray(grad_oracle(Q), dtype=float)
        except (ArithmeticError, ValueError) as exc:
            raise RuntimeError(f'falha no oráculo de gradiente: {exc}') from exc
        V, _ = _linear_oracle(grad, mu, nu)
        gap = float(np.sum(grad * (Q - V)))
        history.append(gap)
        if gap <= gap_tol * max(1.0, abs(value_oracle(Q))):
            break
        if variant == 'pairwise':
            D = _pairwise_direction(grad, Q, mu, nu)
            if not np.any(D):
                D = V - Q
            gamma = _line_search(value_oracle, Q, D, 1.0)
        else:
            D = V - Q
            gamma = _line_search(value_oracle, Q, D, 1.0) if line_search else 2.0 / (t + 2.0)
        if gamma == 0.0 and variant == 'pairwise':
            D = V - Q
            gamma = _line_search(value_oracle, Q, D, 1.0)
        Q = Q + gamma * D
        Q[Q < 0] = 0.0
    else:
        t = max_iters
    value = float(value_oracle(Q))
    logger.debug(f'FW terminou: valor={value:.10g}, gap={gap:.3e}, iterações={t}')
    return FwState(Q=Q, gap=max(gap, 0.0), iterations=t, value=value, history=history)


def _pairwise_direction(grad, Q, mu, nu):
    active = np.flatnonzero(mu > 0)
    D = np.zeros_like(Q)
    for j in range(nu.size):
        ratios = grad[active, j] / mu[active]
        s = active[int(np.argmin(ratios))]
        carrying = active[Q[active, j] > 0]
        if carrying.size == 0:
            continue
        a = carrying[int(np.argmax(grad[carrying, j] / mu[carrying]))]
        if a == s:
            continue
        mass = mu[a] * Q[a, j]
        D[s, j] += mass / mu[s]
        D[a, j] -= Q[a, j]
    return D


# =============================================
# PROJEÇÃO EM POLITOPO
# =============================================

def project_onto_polytope(points, query, tol=None):
    """Projeção euclidiana de query sobre conv(points).

    Resolve min ½‖Pᵀw − q‖² com w no simplex e confere a desigualdade
    variacional (q − p)·(v − p) <= tol para todo vértice v.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    q = np.asarray(query, dtype=float).reshape(-1)
    if P.shape[0] == 0:
        raise ValueError('conjunto de pontos vazio')
    if P.shape[1] != q.size:
        raise DimensionMismatchError('dimensão da consulta difere dos pontos')
    tol = 1e-9 * NumberUtils.scale_of(P, q) if tol is None else tol
    if P.shape[0] == 1:
        return P[0].copy()
    sol = solve_nnls_eq(P.T, q, np.ones((1, P.shape[0])), np.ones(1))
    p = P.T @ sol.x
    violation = float(np.max((P - p) @ (q - p)))
    if violation > tol:
        logger.warning(f'Projeção viola a desigualdade variacional em {violation:.3e}')
    return p
