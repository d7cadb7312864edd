"""Independent oracles shared by the tests."""

from __future__ import annotations

import itertools
import random

import numpy as np

from cudfmilp.encoder import IlpModel, LinearConstraint, Objective, VarId

DATA = __import__("pathlib").Path(__file__).parent / "data"


def feasible_indices(model: IlpModel) -> np.ndarray:
    """All feasible assignments as integers, variable 0 being the most significant bit."""
    n = len(model.variables)
    idx = model.index()
    ks = np.arange(1 << n, dtype=np.int64)
    X = (ks[:, None] >> np.arange(n - 1, -1, -1)) & 1
    ok = np.ones(len(ks), dtype=bool)
    for c in model.constraints:
        lhs = np.zeros(len(ks), dtype=np.int64)
        for coef, v in c.terms:
            lhs += coef * X[:, idx[v]]
        if c.sense == ">=":
            ok &= lhs >= c.rhs
        elif c.sense == "<=":
            ok &= lhs <= c.rhs
        else:
            ok &= lhs == c.rhs
    return ks[ok]


def index_to_values(model: IlpModel, k: int) -> dict[VarId, int]:
    n = len(model.variables)
    return {v: (k >> (n - 1 - i)) & 1 for i, v in enumerate(model.variables)}


def values_to_index(model: IlpModel, values) -> int:
    k = 0
    for v in model.variables:
        k = (k << 1) | values[v]
    return k


def all_subsets(items):
    items = list(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def random_model(rng: random.Random, n_vars: int | None = None) -> IlpModel:
    """Arbitrary small 0-1 program, not necessarily CUDF-shaped."""
    n = n_vars if n_vars is not None else rng.randint(1, 12)
    variables = tuple(VarId.unit(f"v{i}", 1) for i in range(n))
    constraints = []
    for _ in range(rng.randint(0, 2 * n)):
        k = rng.randint(1, min(4, n))
        vs = rng.sample(variables, k)
        terms = tuple((rng.choice([-3, -2, -1, -1, 1, 1, 2, 3]), v) for v in vs)
        lo = sum(min(c, 0) for c, _ in terms)
        hi = sum(max(c, 0) for c, _ in terms)
        constraints.append(LinearConstraint(terms, rng.choice([">=", "<=", "="]), rng.randint(lo, hi)))
    objective = Objective(tuple((rng.randint(-5, 5), v) for v in variables if rng.random() < 0.8))
    objective = Objective(tuple(t for t in objective.terms if t[0]))
    return IlpModel(variables, tuple(constraints), objective)
