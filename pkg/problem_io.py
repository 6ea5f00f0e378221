"""
Arquivos de problema
====================

Formato JSON com campo "version" obrigatório; campos desconhecidos são
rejeitados. emit produz a forma canônica (chaves ordenadas, defaults
preenchidos) e parse(emit(spec)) == spec.

Exemplo::

    {
      "version": 1,
      "mu": {"grid": {"kind": "midpoint", "n": 200, "lo": 0.0, "hi": 1.0}},
      "nu": {"grid": {"kind": "midpoint", "n": 200, "lo": 0.0, "hi": 1.0}},
      "cost": {"kind": "power", "eta": 0.5},
      "solver": {"method": "auto"}
    }
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from costs import (AffineSupCost, CompositeCost, PiecewiseLinearF, PowerF, QuadraticF,
                   SigmaNormF, g_from_params, l1_distance_cost, squared_distance_cost)
from errors import ProblemParseError
from measures import DiscreteMeasure
from utils import NumberUtils

FORMAT_VERSION = 1

_TOP_FIELDS = {'version', 'mu', 'nu', 'cost', 'solver'}
_MEASURE_FIELDS = {'atoms', 'weights', 'grid'}
_GRID_FIELDS = {'kind', 'n', 'lo', 'hi'}
_SOLVER_FIELDS = {'method', 'gap_tol', 'seed', 'row_sums', 'max_iters'}
_COST_FIELDS = {
    'affine_sup': {'kind', 'a', 'b'},
    'squared_distance': {'kind'},
    'piecewise_linear': {'kind', 'u', 'a'},
    'l1_distance': {'kind'},
    'quadratic': {'kind'},
    'power': {'kind', 'eta'},
    'sigma_norm': {'kind', 'A', 'sigma', 'eta'},
    'composite': {'kind', 'F', 'G'},
}
_F_KINDS = {'exp_product': {'kind', 'scale'}, 'abs_diff': {'kind'}}
_G_FIELDS = {
    'quadratic': {'kind', 'a', 'b', 'c'},
    'power': {'kind', 'p', 'coef'},
    'exp': {'kind', 's', 'coef'},
    'neglog': {'kind'},
    'affine': {'kind', 'b', 'c'},
}
_SOLVER_DEFAULTS = {'method': 'auto', 'gap_tol': None, 'seed': None, 'row_sums': None,
                    'max_iters': None}


@dataclass
class ProblemSpec:
    mu: dict
    nu: dict
    cost: dict
    solver: dict = field(default_factory=lambda: dict(_SOLVER_DEFAULTS))
    version: int = FORMAT_VERSION

    def build_measures(self):
        return build_measure(self.mu, 'mu'), build_measure(self.nu, 'nu')

    def build_cost(self, mu, nu):
        return build_cost(self.cost, mu, nu)


def _reject_unknown(block, allowed, where):
    if not isinstance(block, dict):
        raise ProblemParseError(f'{where}: esperado objeto')
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ProblemParseError(f'{where}: campos desconhecidos {unknown}')


def _canonical_measure(block, where):
    _reject_unknown(block, _MEASURE_FIELDS, where)
    if 'grid' in block:
        if set(block) != {'grid'}:
            raise ProblemParseError(f'{where}: "grid" exclui "atoms"/"weights"')
        grid = block['grid']
        _reject_unknown(grid, _GRID_FIELDS, f'{where}.grid')
        if grid.get('kind', 'midpoint') != 'midpoint':
            raise ProblemParseError(f'{where}.grid: tipo de grade desconhecido')
        if not isinstance(grid.get('n'), int) or grid['n'] < 1:
            raise ProblemParseError(f'{where}.grid: "n" deve ser inteiro positivo')
        return {'grid': {'kind': 'midpoint', 'n': grid['n'],
                         'lo': float(grid.get('lo', 0.0)), 'hi': float(grid.get('hi', 1.0))}}
    if 'atoms' not in block or 'weights' not in block:
        raise ProblemParseError(f'{where}: exige "atoms" e "weights" ou "grid"')
    atoms = [[float(v) for v in (a if isinstance(a, list) else [a])] for a in block['atoms']]
    return {'atoms': atoms, 'weights': [float(w) for w in block['weights']]}


def _canonical_cost(block):
    _reject_unknown(block, set().union(*_COST_FIELDS.values()), 'cost')
    kind = block.get('kind')
    if kind not in _COST_FIELDS:
        raise ProblemParseError(f'cost: tipo desconhecido {kind!r}')
    _reject_unknown(block, _COST_FIELDS[kind], 'cost')
    out = dict(block)
    if kind == 'composite':
        F = block.get('F')
        if isinstance(F, dict):
            _reject_unknown(F, _F_KINDS.get(F.get('kind'), {'kind'}), 'cost.F')
            if F.get('kind') not in _F_KINDS:
                raise ProblemParseError(f'cost.F: tipo desconhecido {F.get("kind")!r}')
        elif not isinstance(F, list):
            raise ProblemParseError('cost.F: esperado matriz ou objeto')
        G = block.get('G')
        if not isinstance(G, dict) or G.get('kind') not in _G_FIELDS:
            raise ProblemParseError('cost.G: família desconhecida')
        _reject_unknown(G, _G_FIELDS[G['kind']], 'cost.G')
    return out


def _from_document(doc):
    _reject_unknown(doc, _TOP_FIELDS, 'problema')
    if doc.get('version') != FORMAT_VERSION:
        raise ProblemParseError(f'versão ausente ou não suportada: {doc.get("version")!r}')
    for key in ('mu', 'nu', 'cost'):
        if key not in doc:
            raise ProblemParseError(f'campo obrigatório ausente: "{key}"')
    solver = doc.get('solver', {})
    _reject_unknown(solver, _SOLVER_FIELDS, 'solver')
    return ProblemSpec(
        mu=_canonical_measure(doc['mu'], 'mu'),
        nu=_canonical_measure(doc['nu'], 'nu'),
        cost=_canonical_cost(doc['cost']),
        solver={**_SOLVER_DEFAULTS, **solver},
        version=doc['version'],
    )


def parse(text):
    """Texto JSON -> ProblemSpec; erros carregam linha e coluna quando existem"""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(exc.msg, exc.lineno, exc.colno) from exc
    return _from_document(doc)


def load(path):
    with open(path, encoding='utf-8') as fh:
        return parse(fh.read())


def emit(spec):
    """ProblemSpec -> JSON canônico"""
    doc = {'version': spec.version, 'mu': spec.mu, 'nu': spec.nu, 'cost': spec.cost,
           'solver': spec.solver}
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + '\n'


def load_measure(path):
    """Arquivo de medida avulsa: {"version": 1, "atoms": ..., "weights": ...} ou grade"""
    with open(path, encoding='utf-8') as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict) or doc.pop('version', None) != FORMAT_VERSION:
        raise ProblemParseError('medida: versão ausente ou não suportada')
    return build_measure(_canonical_measure(doc, 'medida'), 'medida')


# =============================================
# CONSTRUÇÃO DOS OBJETOS
# =============================================

def build_measure(block, where='medida'):
    try:
        if 'grid' in block:
            g = block['grid']
            return DiscreteMeasure.midpoint_grid(g['n'], g['lo'], g['hi'])
        return DiscreteMeasure(np.array(block['atoms'], dtype=float), block['weights'])
    except ValueError as exc:
        raise ProblemParseError(f'{where}: {exc}') from exc


def _composite_matrix(F, mu, nu):
    if isinstance(F, list):
        return np.array(F, dtype=float)
    x, y = mu.scalar_atoms(), nu.scalar_atoms()
    if F['kind'] == 'exp_product':
        return np.exp(F['scale'] * np.outer(x, y))
    return np.abs(np.subtract.outer(y, x)).T


def build_cost(block, mu, nu):
    kind = block['kind']
    try:
        if kind == 'affine_sup':
            return AffineSupCost(block['a'], block['b'])
        if kind == 'squared_distance':
            return squared_distance_cost(mu, nu)
        if kind == 'piecewise_linear':
            return PiecewiseLinearF(block['u'], block['a'], nu.atoms)
        if kind == 'l1_distance':
            return l1_distance_cost(mu, nu)
        if kind == 'quadratic':
            return QuadraticF(mu.atoms, nu.atoms)
        if kind == 'power':
            return PowerF(block['eta'], mu.scalar_atoms(), nu.atoms)
        if kind == 'sigma_norm':
            return SigmaNormF(block['A'], block['sigma'], block['eta'], nu.atoms)
        return CompositeCost(_composite_matrix(block['F'], mu, nu), g_from_params(block['G']))
    except (KeyError, ValueError) as exc:
        raise ProblemParseError(f'cost ({kind}): {exc}') from exc


# =============================================
# CSV AUXILIARES
# =============================================

def read_matrix_csv(path):
    """Tabela numérica sem cabeçalho (uma linha por átomo de X)"""
    try:
        with open(path, newline='', encoding='utf-8') as fh:
            rows = [r for r in csv.reader(fh) if r]
        return np.array([[NumberUtils.parse_float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ProblemParseError(f'{path}: {exc}') from exc


def write_matrix_csv(path, matrix):
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        for row in np.atleast_2d(matrix):
            writer.writerow([NumberUtils.format_float(v) for v in row])


def json_safe(value):
    """Converte ±inf/nan em strings e arrays em listas para json.dumps"""
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else NumberUtils.format_float(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value
