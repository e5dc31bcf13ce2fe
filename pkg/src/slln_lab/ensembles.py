"""Discrete laws of generator matrices with exact means and certified
norm budgets, i.i.d. path sampling with the prefix property, and exact
enumeration checks of the expectation identities used downstream.

Probability spaces here are finite, so every expectation identity is
verifiable by full enumeration of the (product) outcome space.
"""

import math
from dataclasses import dataclass

import numpy as np

from .rng import generator
from .spaces import SpaceModel, norm_budget_bound

PROB_SUM_TOL = 1e-12
MEAN_TOL = 1e-14
ATOM_NORM_SLACK = 1e-10


def _freeze(a, force_complex=False):
    arr = np.array(a, dtype=complex if (force_complex or np.iscomplexobj(a)) else float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteOperatorDistribution:
    """Finitely supported law of same-shape arrays.

    Atoms are dim x dim generator matrices in the main use, but the same
    container holds vector-valued laws (random elements) for the
    expectation-of-action checks.
    """

    atoms: tuple
    probs: np.ndarray

    def __post_init__(self):
        atoms = tuple(_freeze(a) for a in self.atoms)
        if not atoms:
            raise ValueError("distribution needs at least one atom")
        shape = atoms[0].shape
        if any(a.shape != shape for a in atoms):
            raise ValueError("atoms must all share one shape")
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.shape[0] != len(atoms):
            raise ValueError("probs must be a vector with one weight per atom")
        if np.any(probs < 0):
            raise ValueError("probs must be nonnegative")
        total = math.fsum(probs.tolist())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probs sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def shape(self) -> tuple:
        return self.atoms[0].shape

    def stacked(self) -> np.ndarray:
        return np.stack(self.atoms)


def expectation(dist: DiscreteOperatorDistribution) -> np.ndarray:
    """Probability-weighted atom sum, exactly summed entrywise in atom order."""
    stack = dist.stacked()
    probs = dist.probs
    out_shape = dist.shape
    if np.iscomplexobj(stack):
        flat = stack.reshape(dist.size, -1)
        re = [math.fsum((probs * flat[:, j].real).tolist()) for j in range(flat.shape[1])]
        im = [math.fsum((probs * flat[:, j].imag).tolist()) for j in range(flat.shape[1])]
        return (np.array(re) + 1j * np.array(im)).reshape(out_shape)
    flat = stack.reshape(dist.size, -1)
    vals = [math.fsum((probs * flat[:, j]).tolist()) for j in range(flat.shape[1])]
    return np.array(vals).reshape(out_shape)


@dataclass(frozen=True)
class GeneratorEnsemble:
    """Distribution of generators plus its certified norm budget and mean.

    ``rho`` upper-bounds every atom's certified operator norm in ``model``;
    ``mean`` caches the probability-weighted atom sum.
    """

    dist: DiscreteOperatorDistribution
    model: SpaceModel
    rho: float
    mean: np.ndarray

    def __post_init__(self):
        d = self.model.dim
        if self.dist.shape != (d, d):
            raise ValueError(f"atoms have shape {self.dist.shape}, model needs ({d}, {d})")
        for idx, atom in enumerate(self.dist.atoms):
            nrm = norm_budget_bound(self.model, atom)
            if nrm > self.rho + ATOM_NORM_SLACK:
                raise ValueError(f"atom {idx} has certified norm {nrm:.6g} > rho={self.rho:.6g}")
        mean = _freeze(self.mean, force_complex=np.iscomplexobj(self.dist.atoms[0]))
        exact = expectation(self.dist)
        dev = float(np.max(np.abs(mean - exact)))
        if dev > MEAN_TOL * max(1.0, float(np.max(np.abs(exact)))):
            raise ValueError(f"cached mean deviates from weighted atom sum by {dev:.3e}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "rho", float(self.rho))

    @classmethod
    def from_distribution(cls, dist, model, rho=None) -> "GeneratorEnsemble":
        norms = [norm_budget_bound(model, a) for a in dist.atoms]
        budget = max(norms) if rho is None else float(rho)
        return cls(dist=dist, model=model, rho=budget, mean=expectation(dist))

    @classmethod
    def deterministic(cls, matrix, model) -> "GeneratorEnsemble":
        dist = DiscreteOperatorDistribution(atoms=(np.asarray(matrix),), probs=np.array([1.0]))
        return cls.from_distribution(dist, model)

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def atoms(self) -> tuple:
        return self.dist.atoms

    @property
    def probs(self) -> np.ndarray:
        return self.dist.probs

    @property
    def atom_count(self) -> int:
        return self.dist.size


def build_symmetric_ensemble(mean, perturbations, weights, model: SpaceModel) -> GeneratorEnsemble:
    """Ensemble with atoms {M + D_j, M - D_j} at weight_j/2 each.

    Leftover probability mass (1 - sum of weights) goes to the atom M, so
    the mean is exactly M by construction.  The norm budget is the maximum
    certified atom norm; non-certifiable models raise CapabilityError.
    """
    M = np.asarray(mean)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("mean must be a square matrix")
    weights = [float(w) for w in weights]
    if len(weights) != len(perturbations):
        raise ValueError("need one weight per perturbation")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    total = math.fsum(weights)
    if total > 1.0 + PROB_SUM_TOL:
        raise ValueError(f"weights sum to {total!r} > 1")
    atoms, probs = [], []
    for D, w in zip(perturbations, weights):
        D = np.asarray(D)
        if D.shape != M.shape:
            raise ValueError("perturbation shape differs from mean shape")
        atoms.extend([M + D, M - D])
        probs.extend([w / 2.0, w / 2.0])
    leftover = 1.0 - total
    if not atoms:
        atoms.append(M.copy())
        probs.append(1.0)
    elif leftover > 0.0:
        atoms.append(M.copy())
        probs.append(leftover)
    dist = DiscreteOperatorDistribution(atoms=tuple(atoms), probs=np.array(probs))
    norms = [norm_budget_bound(model, a) for a in dist.atoms]
    return GeneratorEnsemble(dist=dist, model=model, rho=max(norms), mean=M)


@dataclass(frozen=True)
class SamplePath:
    """Indices of an i.i.d. draw; regeneration from (seed, n) is bit-identical.

    Paths may also be constructed with explicit indices (seed None) for
    conditional-expectation checks.
    """

    seed: int | None
    n: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.shape[0] != self.n:
            raise ValueError(f"indices must be a length-{self.n} vector")
        if np.any(idx < 0):
            raise ValueError("indices must be nonnegative")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def prefix(self, n: int) -> "SamplePath":
        if n > self.n:
            raise ValueError(f"prefix length {n} exceeds path length {self.n}")
        return SamplePath(seed=self.seed, n=n, indices=self.indices[:n])


def path_from_indices(indices) -> SamplePath:
    idx = np.asarray(indices, dtype=np.int64)
    return SamplePath(seed=None, n=idx.shape[0], indices=idx)


def sample_iid(ensemble: GeneratorEnsemble, n: int, seed: int) -> SamplePath:
    """Draw n i.i.d. atom indices from a counter-based stream.

    The first n draws of a stream never depend on how many are taken, so
    sample_iid(e, n, s) is a prefix of sample_iid(e, n', s) for n' > n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    uniforms = generator(seed).random(n)
    cum = np.cumsum(ensemble.probs)
    idx = np.searchsorted(cum, uniforms, side="right")
    idx = np.minimum(idx, ensemble.atom_count - 1)
    return SamplePath(seed=int(seed), n=int(n), indices=idx)


@dataclass(frozen=True)
class IdentityReport:
    name: str
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def check_independence_product(distA: DiscreteOperatorDistribution,
                               distB: DiscreteOperatorDistribution,
                               tol: float = 1e-12) -> IdentityReport:
    """E(AB) = (EA)(EB) for independent laws, by product-space enumeration."""
    if distA.shape[1] != distB.shape[0]:
        raise ValueError("distributions are not composable")
    lhs = np.zeros((distA.shape[0], distB.shape[1]), dtype=complex)
    for A, pa in zip(distA.atoms, distA.probs):
        for B, pb in zip(distB.atoms, distB.probs):
            lhs = lhs + (pa * pb) * (A @ B)
    rhs = expectation(distA) @ expectation(distB)
    dev = float(np.max(np.abs(lhs - rhs)))
    return IdentityReport("independence_product", dev, tol)


def check_expectation_action(dist: DiscreteOperatorDistribution, x, tol: float = 1e-13) -> IdentityReport:
    """(EA)x = E(Ax), by enumeration."""
    x = np.asarray(x)
    lhs = expectation(dist) @ x
    rhs = np.zeros(lhs.shape, dtype=complex)
    for A, p in zip(dist.atoms, dist.probs):
        rhs = rhs + p * (A @ x)
    dev = float(np.max(np.abs(lhs - rhs)))
    return IdentityReport("expectation_action", dev, tol)


def check_adjoint_expectation(dist: DiscreteOperatorDistribution, tol: float = 1e-14) -> IdentityReport:
    """E(A*) = (EA)*, by enumeration of conjugate transposes."""
    adj = DiscreteOperatorDistribution(atoms=tuple(a.conj().T for a in dist.atoms), probs=dist.probs)
    dev = float(np.max(np.abs(expectation(adj) - expectation(dist).conj().T)))
    return IdentityReport("adjoint_expectation", dev, tol)


def check_random_element_action(distA: DiscreteOperatorDistribution,
                                distXi: DiscreteOperatorDistribution,
                                tol: float = 1e-13) -> IdentityReport:
    """E(A xi) = (EA)(E xi) for independent operator and element laws."""
    if distA.shape[1] != distXi.shape[0]:
        raise ValueError("operator and element shapes are not composable")
    first = distA.atoms[0] @ distXi.atoms[0]
    lhs = np.zeros(np.shape(first), dtype=complex)
    for A, pa in zip(distA.atoms, distA.probs):
        for xi, pq in zip(distXi.atoms, distXi.probs):
            lhs = lhs + (pa * pq) * (A @ xi)
    rhs = expectation(distA) @ expectation(distXi)
    dev = float(np.max(np.abs(lhs - rhs)))
    return IdentityReport("random_element_action", dev, tol)
