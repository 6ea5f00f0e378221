"""
Modelos de custo c(x, m)
========================

Famílias suportadas (todas indexadas pelo átomo x_i e por um vetor m >= 0
de massas sobre os átomos de Y):

- AffineSupCost: c = max_k { Σ_j b_k(x, y_j) m_j + a_k(x) }
- custos cônicos c = F(x, z), z = Σ_j m_j y_j:
  PiecewiseLinearF, QuadraticF, PowerF, SigmaNormF, OracleF
- CompositeCost: c = G(Σ_j F(x, y_j) m_j) com G convexa

Cada modelo avalia custo, (sub)gradiente em m, função de recessão c'_∞ e
classifica as condições (LB), (B) e (C).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from errors import CostDomainError, DimensionMismatchError

logger = logging.getLogger(__name__)

INF = math.inf

# limite declarado para derivadas que explodem em z = 0
GRADIENT_CAP = 1e12


def _weights(m, size):
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.size != size:
        raise DimensionMismatchError(f'm tem {m.size} entradas, esperado {size}')
    if np.any(m < -1e-12 * max(1.0, float(np.max(np.abs(m), initial=0.0)))):
        raise ValueError('massas m devem ser não negativas')
    return np.maximum(m, 0.0)


@dataclass(frozen=True)
class ConditionReport:
    """(LB): c >= r0 + r1·massa; (B) recessão infinita; (C) c <= b + a·massa"""

    lb: Optional[tuple]
    holds_B: Optional[bool]
    holds_C: Optional[bool]
    recession_bound: Optional[float]
    upper_intercept: Optional[float] = None
    certified: bool = True


# =============================================
# FUNÇÕES ESCALARES CONVEXAS (G)
# =============================================

@dataclass(frozen=True)
class ScalarConvex:
    """G convexa com derivada e limites declarados G'(0), G'(+∞)"""

    value: Callable
    derivative: Callable
    d0: float
    dinf: float
    name: str = 'custom'
    quadratic: Optional[tuple] = None
    params: Optional[dict] = None

    def __post_init__(self):
        samples = np.linspace(0.05, 10.0, 25)
        for u in samples:
            for v in samples[::4]:
                mid = self.value(0.5 * (u + v))
                avg = 0.5 * (self.value(u) + self.value(v))
                if mid > avg + 1e-9 * max(1.0, abs(avg)):
                    raise ValueError(f'G "{self.name}" não é convexa em ({u:.3g}, {v:.3g})')

    def __call__(self, u):
        return self.value(u)


def quadratic_g(a, b=0.0, c=0.0):
    """G(u) = a u² + b u + c, a > 0"""
    if a <= 0:
        raise ValueError('coeficiente quadrático deve ser positivo')
    return ScalarConvex(lambda u: a * u * u + b * u + c, lambda u: 2 * a * u + b,
                        d0=b, dinf=INF, name='quadratic', quadratic=(a, b, c),
                        params={'kind': 'quadratic', 'a': a, 'b': b, 'c': c})


def power_g(p, coef=1.0):
    """G(u) = coef·u^p, p >= 1, coef > 0"""
    if p < 1 or coef <= 0:
        raise ValueError('power_g exige p >= 1 e coef > 0')
    if p == 1:
        return affine_g(coef)
    if p == 2:
        g = quadratic_g(coef)
        return ScalarConvex(g.value, g.derivative, 0.0, INF, 'power', (coef, 0.0, 0.0),
                            {'kind': 'power', 'p': p, 'coef': coef})
    return ScalarConvex(lambda u: coef * u ** p, lambda u: coef * p * u ** (p - 1),
                        d0=0.0, dinf=INF, name='power', params={'kind': 'power', 'p': p, 'coef': coef})


def exp_g(s, coef=1.0):
    """G(u) = coef·exp(s u), coef > 0"""
    if coef <= 0:
        raise ValueError('exp_g exige coef > 0')
    return ScalarConvex(lambda u: coef * math.exp(s * u), lambda u: coef * s * math.exp(s * u),
                        d0=coef * s, dinf=INF if s > 0 else 0.0, name='exp',
                        params={'kind': 'exp', 's': s, 'coef': coef})


def neglog_g():
    """G(u) = −log u (G'(0) = −∞)"""
    def value(u):
        return INF if u <= 0 else -math.log(u)

    def derivative(u):
        return -INF if u <= 0 else -1.0 / u

    return ScalarConvex(value, derivative, d0=-INF, dinf=0.0, name='neglog',
                        params={'kind': 'neglog'})


def affine_g(b, c=0.0):
    """G(u) = b u + c"""
    return ScalarConvex(lambda u: b * u + c, lambda u: b, d0=b, dinf=b, name='affine',
                        params={'kind': 'affine', 'b': b, 'c': c})


def g_from_params(params):
    """Reconstrói G a partir do bloco do arquivo de problema"""
    kind = params.get('kind')
    if kind == 'quadratic':
        return quadratic_g(params['a'], params.get('b', 0.0), params.get('c', 0.0))
    if kind == 'power':
        return power_g(params['p'], params.get('coef', 1.0))
    if kind == 'exp':
        return exp_g(params['s'], params.get('coef', 1.0))
    if kind == 'neglog':
        return neglog_g()
    if kind == 'affine':
        return affine_g(params['b'], params.get('c', 0.0))
    raise ValueError(f'família de G desconhecida: {kind}')


# =============================================
# CLASSE BASE
# =============================================

class CostModel:
    """Interface comum dos modelos de custo"""

    kind = 'abstract'
    is_conical = False
    nonpositive = False
    eta = None

    @property
    def n_x(self):
        raise NotImplementedError

    @property
    def n_y(self):
        raise NotImplementedError

    def evaluate(self, i, m):
        raise NotImplementedError

    def gradient(self, i, m):
        raise NotImplementedError

    def recession(self, i, m):
        raise NotImplementedError

    def conditions(self, sample_budget=200, seed=0):
        raise NotImplementedError

    def least_squares_rows(self, i):
        """(A_i, b_i, const) com c(x_i, m) = ½‖A_i m − b_i‖² + const, ou None"""
        return None

    def is_differentiable(self):
        return True

    def _check_index(self, i):
        if not 0 <= i < self.n_x:
            raise IndexError(f'átomo x_{i} fora do intervalo')


class AffineSupCost(CostModel):
    """Máximo finito de custos afins em m"""

    kind = 'affine_sup'

    def __init__(self, a, b):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float)
        if b.ndim == 2:
            b = b[None, :, :]
        if b.ndim != 3 or a.shape != b.shape[:2]:
            raise DimensionMismatchError('peças a (K×n) e b (K×n×m) incompatíveis')
        if b.shape[0] == 0:
            raise ValueError('AffineSupCost precisa de ao menos uma peça')
        self.a, self.b = a, b

    @property
    def n_x(self):
        return self.b.shape[1]

    @property
    def n_y(self):
        return self.b.shape[2]

    @property
    def n_pieces(self):
        return self.b.shape[0]

    def _pieces(self, i, m):
        self._check_index(i)
        m = _weights(m, self.n_y)
        return self.b[:, i, :] @ m + self.a[:, i]

    def evaluate(self, i, m):
        return float(np.max(self._pieces(i, m)))

    def gradient(self, i, m):
        k = int(np.argmax(self._pieces(i, m)))
        return self.b[k, i, :].copy()

    def recession(self, i, m):
        self._check_index(i)
        m = _weights(m, self.n_y)
        return float(np.max(self.b[:, i, :] @ m))

    def is_differentiable(self):
        return self.n_pieces == 1

    def conditions(self, sample_budget=200, seed=0):
        return ConditionReport(
            lb=(float(np.min(self.a[0])), float(np.min(self.b[0]))),
            holds_B=False,
            holds_C=True,
            recession_bound=float(np.max(self.b)),
            upper_intercept=float(np.max(self.a)),
        )


def linear_cost(mu, nu, func):
    """AffineSup de uma peça, a ≡ 0, b(x, y) = func(x, y): c(x,m) = ∫ func(x,y) dm"""
    b = np.array([[func(x, y) for y in nu.atoms] for x in mu.atoms], dtype=float)
    return AffineSupCost(np.zeros((1, mu.n)), b[None, :, :])


def squared_distance_cost(mu, nu):
    """c(x, m) = ∫ |x − y|² dm"""
    return linear_cost(mu, nu, lambda x, y: float(np.sum((x - y) ** 2)))


# =============================================
# CUSTOS CÔNICOS
# =============================================

class ConicalCost(CostModel):
    """c(x, m) = F(x, Σ_j m_j y_j) sobre o cone Z gerado por Y"""

    is_conical = True

    def __init__(self, generators):
        gens = np.asarray(generators, dtype=float)
        if gens.ndim == 1:
            gens = gens.reshape(-1, 1)
        self.Y = gens

    @property
    def n_y(self):
        return self.Y.shape[0]

    @property
    def dim(self):
        return self.Y.shape[1]

    def barycenter(self, m):
        return self.Y.T @ _weights(m, self.n_y)

    def F(self, i, z):
        raise NotImplementedError

    def grad_F(self, i, z):
        raise NotImplementedError

    def recession_F(self, i, z):
        raise NotImplementedError

    def evaluate(self, i, m):
        self._check_index(i)
        return float(self.F(i, self.barycenter(m)))

    def gradient(self, i, m):
        self._check_index(i)
        return self.Y @ self.grad_F(i, self.barycenter(m))

    def recession(self, i, m):
        self._check_index(i)
        return float(self.recession_F(i, self.barycenter(m)))


class PiecewiseLinearF(ConicalCost):
    """F(x, z) = max_k u_k(x)·z + a_k(x)"""

    kind = 'piecewise_linear'

    def __init__(self, u, a, generators):
        super().__init__(generators)
        u = np.asarray(u, dtype=float)
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if u.ndim != 3 or u.shape[:2] != a.shape or u.shape[2] != self.dim:
            raise DimensionMismatchError('peças u (K×n×d) e a (K×n) incompatíveis')
        self.u, self.a = u, a

    @property
    def n_x(self):
        return self.u.shape[1]

    def F(self, i, z):
        return float(np.max(self.u[:, i, :] @ z + self.a[:, i]))

    def grad_F(self, i, z):
        k = int(np.argmax(self.u[:, i, :] @ z + self.a[:, i]))
        return self.u[k, i, :].copy()

    def recession_F(self, i, z):
        return float(np.max(self.u[:, i, :] @ z))

    def is_differentiable(self):
        return self.u.shape[0] == 1

    def to_affine_sup(self):
        """Mesma função vista como AffineSup: b_k(x_i, y_j) = u_k(x_i)·y_j"""
        return AffineSupCost(self.a, np.einsum('kid,jd->kij', self.u, self.Y))

    def conditions(self, sample_budget=200, seed=0):
        return self.to_affine_sup().conditions(sample_budget, seed)


def l1_distance_cost(mu, nu):
    """F(x, z) = ‖x − z‖₁ como máximo de 2^d peças lineares"""
    d = mu.dim
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing='ij')).reshape(d, -1).T
    u = np.repeat(-signs[:, None, :], mu.n, axis=1)
    a = signs @ mu.atoms.T
    return PiecewiseLinearF(u, a, nu.atoms)


class QuadraticF(ConicalCost):
    """F(x, z) = ½‖x − z‖²"""

    kind = 'quadratic'

    def __init__(self, points, generators):
        super().__init__(generators)
        X = np.asarray(points, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] != self.dim:
            raise DimensionMismatchError('X e Y precisam da mesma dimensão')
        self.X = X

    @property
    def n_x(self):
        return self.X.shape[0]

    def F(self, i, z):
        diff = self.X[i] - z
        return 0.5 * float(diff @ diff)

    def grad_F(self, i, z):
        return z - self.X[i]

    def recession_F(self, i, z):
        return 0.0 if not np.any(z) else INF

    def recession(self, i, m):
        self._check_index(i)
        return 0.0 if not np.any(_weights(m, self.n_y) > 0) else INF

    def least_squares_rows(self, i):
        return self.Y.T.copy(), self.X[i].copy(), 0.0

    def conditions(self, sample_budget=200, seed=0):
        return ConditionReport(lb=(0.0, 0.0), holds_B=True, holds_C=False, recession_bound=None)


class PowerF(ConicalCost):
    """F(x, z) = −x z^η em d = 1, x >= 0, z >= 0"""

    kind = 'power'
    nonpositive = True

    def __init__(self, eta, x_values, generators):
        super().__init__(generators)
        if not 0 < eta < 1:
            raise ValueError('η deve estar em (0, 1)')
        if self.dim != 1:
            raise DimensionMismatchError('PowerF é unidimensional')
        x = np.asarray(x_values, dtype=float).reshape(-1)
        if np.any(x < 0) or np.any(self.Y < 0):
            raise CostDomainError('PowerF exige X, Y ⊂ R_+')
        self.eta = float(eta)
        self.x = x

    @property
    def n_x(self):
        return self.x.size

    @property
    def domain(self):
        """(α, β, γ, δ) com X ⊂ [α, β] e Y ⊂ [γ, δ]"""
        return (float(self.x.min()), float(self.x.max()),
                float(self.Y.min()), float(self.Y.max()))

    def _z(self, z):
        z = float(np.asarray(z).reshape(-1)[0])
        if z < -1e-12:
            raise CostDomainError(f'PowerF avaliado em z = {z} < 0')
        return max(z, 0.0)

    def F(self, i, z):
        return -self.x[i] * self._z(z) ** self.eta

    def grad_F(self, i, z):
        z = self._z(z)
        if z == 0.0:
            return np.array([-GRADIENT_CAP if self.x[i] > 0 else 0.0])
        return np.array([-min(GRADIENT_CAP, self.x[i] * self.eta * z ** (self.eta - 1.0))])

    def recession_F(self, i, z):
        self._z(z)
        return 0.0

    def is_differentiable(self):
        return False

    def conditions(self, sample_budget=200, seed=0):
        _, beta, _, delta = self.domain
        eta = self.eta
        return ConditionReport(lb=(-beta * (1 - eta), -beta * eta * delta), holds_B=False,
                               holds_C=True, recession_bound=0.0, upper_intercept=0.0)


class SigmaNormF(ConicalCost):
    """F(x, z) = −‖A(x) z‖_σ^η, A(x) com entradas positivas, 0 < σ <= 1"""

    kind = 'sigma_norm'
    nonpositive = True

    def __init__(self, matrices, sigma, eta, generators):
        super().__init__(generators)
        A = np.asarray(matrices, dtype=float)
        if A.ndim == 2:
            A = A[None, :, :]
        if A.shape[1:] != (self.dim, self.dim):
            raise DimensionMismatchError('A(x) deve ser d×d')
        if np.any(A <= 0):
            raise ValueError('A(x) deve ter entradas positivas')
        if not 0 < sigma <= 1 or not 0 < eta < 1:
            raise ValueError('exige 0 < σ <= 1 e 0 < η < 1')
        if np.any(self.Y < 0):
            raise CostDomainError('SigmaNormF exige Y ⊂ R_+^d')
        self.A, self.sigma, self.eta = A, float(sigma), float(eta)

    @property
    def n_x(self):
        return self.A.shape[0]

    def _v(self, i, z):
        z = np.asarray(z, dtype=float).reshape(-1)
        if np.any(z < -1e-12):
            raise CostDomainError('SigmaNormF avaliado fora de R_+^d')
        return self.A[i] @ np.maximum(z, 0.0)

    def _norm(self, v):
        return float(np.sum(v ** self.sigma) ** (1.0 / self.sigma))

    def F(self, i, z):
        return -self._norm(self._v(i, z)) ** self.eta

    def grad_F(self, i, z):
        v = self._v(i, z)
        norm = self._norm(v)
        if norm <= 0.0:
            return -GRADIENT_CAP * np.ones(self.dim)
        s = norm ** self.sigma
        with np.errstate(divide='ignore'):
            dv = s ** (1.0 / self.sigma - 1.0) * np.where(v > 0, v ** (self.sigma - 1.0), GRADIENT_CAP)
        g = -self.eta * norm ** (self.eta - 1.0) * (self.A[i].T @ dv)
        return np.maximum(g, -GRADIENT_CAP)

    def recession_F(self, i, z):
        self._v(i, z)
        return 0.0

    def is_differentiable(self):
        return False

    def conditions(self, sample_budget=200, seed=0):
        d, eta = self.dim, self.eta
        col_max = float(np.max(np.sum(self.A, axis=1)))
        y_l1 = float(np.max(np.sum(np.abs(self.Y), axis=1)))
        # u^η <= 1 − η + η u  e  ‖v‖_σ <= d^{1/σ − 1} ‖v‖₁
        r1 = -eta * d ** (1.0 / self.sigma - 1.0) * col_max * y_l1
        return ConditionReport(lb=(-(1.0 - eta), r1), holds_B=False, holds_C=True,
                               recession_bound=0.0, upper_intercept=0.0)


class OracleF(ConicalCost):
    """F fornecida por callbacks value(i, z) e grad(i, z)"""

    kind = 'oracle'

    def __init__(self, value, grad, n_x, generators):
        super().__init__(generators)
        self._value, self._grad, self._n_x = value, grad, int(n_x)

    @property
    def n_x(self):
        return self._n_x

    def F(self, i, z):
        return float(self._value(i, np.asarray(z, dtype=float)))

    def grad_F(self, i, z):
        return np.asarray(self._grad(i, np.asarray(z, dtype=float)), dtype=float)

    def recession_F(self, i, z, lam=1e6):
        # estimativa numérica; não certificada
        return (self.F(i, lam * np.asarray(z)) - self.F(i, np.zeros(self.dim))) / lam

    def conditions(self, sample_budget=200, seed=0):
        rng = np.random.default_rng(seed)
        r0 = min(self.F(i, np.zeros(self.dim)) for i in range(self.n_x))
        r1 = 0.0
        for _ in range(sample_budget):
            i = int(rng.integers(self.n_x))
            m = rng.exponential(size=self.n_y) * rng.exponential()
            mass = float(np.sum(m))
            if mass > 0:
                r1 = min(r1, (self.evaluate(i, m) - r0) / mass)
        return ConditionReport(lb=(r0, r1), holds_B=None, holds_C=None, recession_bound=None,
                               certified=False)


# =============================================
# CUSTO COMPOSTO G(Σ F m)
# =============================================

class CompositeCost(CostModel):
    """c(x, m) = G(Σ_j F(x, y_j) m_j), F > 0"""

    kind = 'composite'

    def __init__(self, Fxy, G):
        Fxy = np.atleast_2d(np.asarray(Fxy, dtype=float))
        if np.any(Fxy <= 0) or not np.all(np.isfinite(Fxy)):
            raise ValueError('F(x, y) deve ser positiva e finita')
        self.Fxy, self.G = Fxy, G

    @property
    def n_x(self):
        return self.Fxy.shape[0]

    @property
    def n_y(self):
        return self.Fxy.shape[1]

    def load(self, i, m):
        """U_i = Σ_j F(x_i, y_j) m_j"""
        self._check_index(i)
        return float(self.Fxy[i] @ _weights(m, self.n_y))

    def evaluate(self, i, m):
        return float(self.G.value(self.load(i, m)))

    def gradient(self, i, m):
        g = self.G.derivative(self.load(i, m))
        return max(g, -GRADIENT_CAP) * self.Fxy[i]

    def recession(self, i, m):
        U = self.load(i, m)
        if U == 0.0:
            return 0.0
        if self.G.dinf == INF:
            return INF
        return self.G.dinf * U

    def is_differentiable(self):
        return math.isfinite(self.G.d0)

    def least_squares_rows(self, i):
        if self.G.quadratic is None:
            return None
        a, b, c = self.G.quadratic
        s = math.sqrt(2.0 * a)
        return s * self.Fxy[i][None, :], np.array([-s * b / (2.0 * a)]), c - b * b / (4.0 * a)

    def conditions(self, sample_budget=200, seed=0):
        G = self.G
        f_max, f_min = float(self.Fxy.max()), float(self.Fxy.min())
        u0 = 0.0 if math.isfinite(G.d0) else 1.0
        slope = G.derivative(u0)
        lb = (G.value(u0) - slope * u0, min(0.0, slope) * f_max)
        holds_B = G.dinf == INF
        a = None if holds_B else (G.dinf * f_max if G.dinf >= 0 else G.dinf * f_min)
        return ConditionReport(lb=lb, holds_B=holds_B, holds_C=not holds_B,
                               recession_bound=a, upper_intercept=G.value(0.0))


def composite_from_function(mu, nu, func, G):
    Fxy = np.array([[func(x, y) for y in nu.atoms] for x in mu.atoms], dtype=float)
    return CompositeCost(Fxy, G)


# =============================================
# OPERAÇÕES DO MÓDULO
# =============================================

def eval_cost(cost, x_index, m):
    """Valor exato de c(x_i, m)"""
    return cost.evaluate(x_index, m)


def recession(cost, x_index, m):
    """c'_∞(x_i, m) = lim c(x_i, λm)/λ (real estendido)"""
    return cost.recession(x_index, m)


def check_conditions(cost, sample_budget=200, seed=0):
    """Classifica (LB), (B) e (C); OracleF devolve veredito amostral não certificado"""
    report = cost.conditions(sample_budget, seed)
    logger.debug(f'Condições de {cost.kind}: {report}')
    return report
