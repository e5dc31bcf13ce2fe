"""The fixed test-ensemble suite used by the verification runners.

Four regimes per dimension and norm budget: a deterministic single
generator, a symmetric pair of nilpotent shifts, commuting diagonal
generators, and a seeded non-normal random triple.  Atoms are scaled so
their certified norm in the requested model equals the budget exactly.
"""

from dataclasses import dataclass

import numpy as np

from .ensembles import DiscreteOperatorDistribution, GeneratorEnsemble
from .rng import generator, splitmix64
from .spaces import SpaceModel, euclidean_model, norm_budget_bound

SUITE_KINDS = ("deterministic", "nilpotent", "diagonal", "random")
SUITE_DIMS = (2, 3, 4, 5, 6)
SUITE_RHOS = (0.5, 1.0)
_SUITE_SEED = 0x5EED_5EED


@dataclass(frozen=True)
class SuiteCase:
    name: str
    kind: str
    model: SpaceModel
    ensemble: GeneratorEnsemble
    x: np.ndarray
    functional: np.ndarray
    degenerate: bool  # deterministic: error curves vanish identically


def _unit_budget(model: SpaceModel, A: np.ndarray, rho: float) -> np.ndarray:
    nrm = norm_budget_bound(model, A)
    return A * (rho / nrm)


def _lower_shift(dim: int) -> np.ndarray:
    return np.diag(np.ones(dim - 1), -1)


def _suite_atoms(kind: str, dim: int, rho: float, model: SpaceModel):
    if kind == "deterministic":
        gen = generator(splitmix64(_SUITE_SEED ^ (dim * 7919)))
        M = gen.standard_normal((dim, dim)) + np.diag(np.linspace(-0.5, 0.5, dim))
        return [_unit_budget(model, M, rho)], [1.0]
    if kind == "nilpotent":
        N = _unit_budget(model, _lower_shift(dim), rho)
        return [N, -N], [0.5, 0.5]
    if kind == "diagonal":
        D = np.diag(np.linspace(1.0, -1.0, dim))
        D = _unit_budget(model, D, rho)
        return [D, -D], [0.5, 0.5]
    if kind == "random":
        gen = generator(splitmix64(_SUITE_SEED ^ (dim * 104729) ^ int(rho * 1024)))
        atoms = []
        for _ in range(3):
            A = gen.standard_normal((dim, dim)) + np.triu(gen.standard_normal((dim, dim)), 1)
            atoms.append(_unit_budget(model, A, rho))
        raw = gen.uniform(0.2, 1.0, size=3)
        probs = raw / raw.sum()
        return atoms, probs.tolist()
    raise ValueError(f"unknown suite kind {kind!r}")


def suite_case(kind: str, dim: int, rho: float, model: SpaceModel | None = None) -> SuiteCase:
    model = euclidean_model(dim) if model is None else model
    if model.dim != dim:
        raise ValueError("model dimension must match the requested dim")
    atoms, probs = _suite_atoms(kind, dim, rho, model)
    dist = DiscreteOperatorDistribution(atoms=tuple(atoms), probs=np.array(probs))
    ensemble = GeneratorEnsemble.from_distribution(dist, model, rho=rho)
    if model.kind == "schatten_p":
        x = np.zeros((dim, dim))
        x[0, 0] = 1.0
        f = np.ones((dim, dim))
    else:
        x = np.zeros(dim)
        x[0] = 1.0
        f = np.ones(dim)
    return SuiteCase(name=f"{kind}-d{dim}-rho{rho:g}", kind=kind, model=model,
                     ensemble=ensemble, x=x, functional=f,
                     degenerate=(kind == "deterministic"))


def standard_suite(dims=SUITE_DIMS, rhos=SUITE_RHOS, kinds=SUITE_KINDS,
                   model_for_dim=None) -> list:
    """The fixed suite: every (kind, dim, rho) combination."""
    cases = []
    for dim in dims:
        model = None if model_for_dim is None else model_for_dim(dim)
        for kind in kinds:
            for rho in rhos:
                cases.append(suite_case(kind, dim, rho, model))
    return cases
