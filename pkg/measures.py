"""
Medidas discretas e geometria do cone
=====================================

DiscreteMeasure modela μ (átomos de X) e ν (átomos de Y). Átomos com peso
zero são mantidos: definem o suporte modelado usado em bar-I.
ConeModel responde perguntas sobre Z = cone(Y) e co(Y) por viabilidade LP.
"""

import logging
from dataclasses import dataclass

import numpy as np

from config import Config
from errors import DimensionMismatchError
from optim import LinearProgram, LpStatus, project_onto_polytope, solve_lp
from utils import GridUtils

logger = logging.getLogger(__name__)


def as_point(z, dim=None):
    """Converte escalar ou sequência em vetor float de dimensão d"""
    z = np.atleast_1d(np.asarray(z, dtype=float)).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise ValueError('coordenadas devem ser finitas')
    if dim is not None and z.size != dim:
        raise DimensionMismatchError(f'ponto de dimensão {z.size}, esperado {dim}')
    return z


@dataclass(frozen=True)
class DiscreteMeasure:
    """Átomos (n×d) com pesos não negativos"""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[1] == 0:
            raise ValueError('medida precisa de ao menos um átomo com d >= 1')
        if atoms.shape[0] != weights.size:
            raise DimensionMismatchError('número de pesos difere do número de átomos')
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError('átomos e pesos devem ser finitos')
        if np.any(weights < 0):
            raise ValueError('pesos devem ser não negativos')
        if np.unique(atoms, axis=0).shape[0] != atoms.shape[0]:
            raise ValueError('átomos devem ser distintos')
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, 'atoms', atoms)
        object.__setattr__(self, 'weights', weights)

    @property
    def n(self):
        return self.weights.size

    @property
    def dim(self):
        return self.atoms.shape[1]

    @property
    def mass(self):
        return float(np.sum(self.weights))

    @property
    def support_mask(self):
        return self.weights > 0

    def is_probability(self, tol=None):
        tol = Config.FEAS_TOL if tol is None else tol
        return abs(self.mass - 1.0) <= tol * max(1, self.n)

    def scalar_atoms(self):
        """Átomos como vetor 1-d (exige d = 1)"""
        if self.dim != 1:
            raise DimensionMismatchError('operação exige d = 1')
        return self.atoms[:, 0]

    @classmethod
    def dirac(cls, point):
        return cls(np.atleast_2d(as_point(point)), np.ones(1))

    @classmethod
    def uniform(cls, atoms):
        atoms = np.asarray(atoms, dtype=float)
        n = atoms.shape[0]
        return cls(atoms, np.full(n, 1.0 / n))

    @classmethod
    def midpoint_grid(cls, n, lo=0.0, hi=1.0):
        """Medida uniforme nos pontos médios de n células de [lo, hi]"""
        return cls.uniform(GridUtils.midpoint_grid(n, lo, hi).reshape(-1, 1))


def merge_atoms(atoms, weights, tol=1e-12):
    """Soma pesos de átomos coincidentes (até tol) e devolve DiscreteMeasure"""
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    weights = np.asarray(weights, dtype=float)
    keys = np.round(atoms / max(tol, 1e-300)).astype(np.int64) if tol > 0 else atoms
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    merged = np.zeros(first.size)
    np.add.at(merged, inverse, weights)
    return DiscreteMeasure(atoms[first], merged), inverse


# =============================================
# CONE GERADO POR Y
# =============================================

@dataclass(frozen=True)
class ConeModel:
    """Z = {Σ w_j y_j : w >= 0} e co(Y), a partir dos átomos de uma medida"""

    generators: np.ndarray

    def __post_init__(self):
        gens = np.asarray(self.generators, dtype=float)
        if gens.ndim == 1:
            gens = gens.reshape(-1, 1)
        if gens.shape[0] == 0:
            raise ValueError('cone sem geradores')
        object.__setattr__(self, 'generators', gens)

    @classmethod
    def of(cls, measure):
        return cls(measure.atoms)

    @property
    def dim(self):
        return self.generators.shape[1]

    @property
    def default_tol(self):
        return Config.FEAS_TOL * (1.0 + float(np.max(np.linalg.norm(self.generators, axis=1))))


def _residual_lp(gens, z, with_simplex):
    """min ‖Σ w_j y_j − z‖₁ sobre w >= 0 (e Σw = 1 se pedido)"""
    m, d = gens.shape
    c = np.concatenate([np.zeros(m), np.ones(2 * d)])
    A_eq = np.hstack([gens.T, np.eye(d), -np.eye(d)])
    b_eq = z
    if with_simplex:
        A_eq = np.vstack([A_eq, np.concatenate([np.ones(m), np.zeros(2 * d)])])
        b_eq = np.concatenate([z, [1.0]])
    sol = solve_lp(LinearProgram(c=c, A_eq=A_eq, b_eq=b_eq))
    if sol.status != LpStatus.OPTIMAL:
        logger.warning(f'LP de pertinência terminou com status {sol.status.value}')
        return np.inf
    return sol.objective


def cone_contains(cone, z, tol=None):
    """True sse existe w >= 0 com Σ w_j y_j = z (dentro de tol)"""
    z = as_point(z, cone.dim)
    tol = cone.default_tol if tol is None else tol
    return _residual_lp(cone.generators, z, with_simplex=False) <= tol


def zero_in_convex_hull(cone, tol=None):
    """True sse 0 ∈ co(Y) (dentro de tol)"""
    tol = cone.default_tol if tol is None else tol
    return _residual_lp(cone.generators, np.zeros(cone.dim), with_simplex=True) <= tol


def min_hull_norm(cone):
    """α = min_{y ∈ co(Y)} ‖y‖; positivo quando 0 ∉ co(Y)"""
    p = project_onto_polytope(cone.generators, np.zeros(cone.dim))
    return float(np.linalg.norm(p))


@dataclass(frozen=True)
class Moments:
    mass: float
    mean: np.ndarray
    positive_part: np.ndarray
    negative_part: np.ndarray


def moments(m):
    """Massa, primeiro momento e momentos de [x]_+ e [x]_- por coordenada"""
    w = m.weights
    return Moments(
        mass=float(np.sum(w)),
        mean=w @ m.atoms,
        positive_part=w @ np.maximum(m.atoms, 0.0),
        negative_part=w @ np.maximum(-m.atoms, 0.0),
    )
