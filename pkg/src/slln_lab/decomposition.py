"""The factor-by-factor expansion of a sampled semigroup product around
its expected factor: centered factors, interleaved decomposition terms,
the multilinear expansion identity, martingale increments grouped by
largest index, conditional-mean checks, and the explicit norm bounds.

Subset enumeration is exact and capped at n <= 14 (16384 terms); the
enumerations walk every subset, sharing prefix products only (an
associative regrouping of each term's fixed-order factor product).
"""

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import DiscreteOperatorDistribution, GeneratorEnsemble, SamplePath
from .errors import CapabilityError
from .semigroups import EXPM_DEFAULT_TOL, chernoff_iterate, expected_semigroup, expm, product_composition

MAX_ENUM_N = 14


@dataclass(frozen=True)
class SubsetIndex:
    """Strictly increasing subset of {1, ..., n}; empty allowed."""

    n: int
    members: tuple

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("ambient size must be nonnegative")
        members = tuple(int(i) for i in self.members)
        if any(b <= a for a, b in zip(members, members[1:])):
            raise ValueError("members must be strictly increasing")
        if members and (members[0] < 1 or members[-1] > self.n):
            raise ValueError(f"members must lie in [1, {self.n}]")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def max_member(self) -> int:
        return self.members[-1] if self.members else 0


@dataclass(frozen=True)
class DecompositionTerm:
    subset: SubsetIndex
    value: np.ndarray


def delta(path: SamplePath, ensemble: GeneratorEnsemble, i: int, s: float,
          tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """Centered factor e^{A_i s} - E e^{A s} (i is 1-based)."""
    if not (1 <= i <= path.n):
        raise ValueError(f"need 1 <= i <= {path.n}, got {i}")
    atom = ensemble.atoms[path.indices[i - 1]]
    return expm(atom, s, tol) - expected_semigroup(ensemble, s, tol)


def term_F(path: SamplePath, ensemble: GeneratorEnsemble, subset: SubsetIndex, s: float,
           tol: float = EXPM_DEFAULT_TOL) -> DecompositionTerm:
    """Interleaved term: powers of F(s) broken by centered factors at the
    subset positions; the empty subset gives F(s)^n."""
    n = subset.n
    if n != path.n:
        raise ValueError(f"subset ambient size {n} differs from path length {path.n}")
    F = expected_semigroup(ensemble, s, tol)
    if not subset.members:
        return DecompositionTerm(subset, np.linalg.matrix_power(F, n))
    value = np.linalg.matrix_power(F, subset.members[0] - 1)
    prev = None
    for i in subset.members:
        if prev is not None:
            value = value @ np.linalg.matrix_power(F, i - prev - 1)
        value = value @ delta(path, ensemble, i, s, tol)
        prev = i
    value = value @ np.linalg.matrix_power(F, n - subset.members[-1])
    return DecompositionTerm(subset, value)


def _position_factors(path, ensemble, n, s, tol):
    """Per-position (e^{A_i s}, Delta_i(s)) pairs plus F(s)."""
    F = expected_semigroup(ensemble, s, tol)
    idx = path.indices[:n]
    exps = {a: expm(ensemble.atoms[a], s, tol) for a in np.unique(idx)}
    E = [exps[a] for a in idx]
    D = [e - F for e in E]
    return F, E, D


def _enumerate_subset_terms(F, deltas, n):
    """Stack of all 2^n interleaved terms; row index has bit (i-1) set
    exactly when position i carries its centered factor.

    Position i's factor joins on the right, and its inclusion block is
    appended after the exclusion block, so the included rows sit at
    old_index + 2^{i-1}: the bit convention holds by induction.
    """
    d = F.shape[0]
    arr = np.eye(d, dtype=F.dtype)[None, :, :]
    for i in range(n):
        arr = np.concatenate([arr @ F, arr @ deltas[i]])
    return arr


@dataclass(frozen=True)
class ExpansionIdentityReport:
    n: int
    s: float
    deviation: float
    tolerance: float
    scale: float
    empty_term_deviation: float
    nonempty_sum_deviation: float

    @property
    def passed(self) -> bool:
        return (self.deviation <= self.tolerance
                and self.empty_term_deviation <= self.tolerance
                and self.nonempty_sum_deviation <= self.tolerance)


def expansion_identity_check(path: SamplePath, ensemble: GeneratorEnsemble, s: float,
                             n: int | None = None, rel_tol: float = 1e-10,
                             tol: float = EXPM_DEFAULT_TOL) -> ExpansionIdentityReport:
    """Verify that the 2^n interleaved terms sum to the sampled product.

    Also checks that the empty-subset term reproduces the iterated
    expected factor, and that the nonempty terms sum to product - F^n.
    """
    n = path.n if n is None else int(n)
    if n > MAX_ENUM_N:
        raise CapabilityError(f"subset enumeration capped at n <= {MAX_ENUM_N}, got {n}")
    if n < 1 or n > path.n:
        raise ValueError(f"need 1 <= n <= path length, got n={n}")
    F, E, D = _position_factors(path, ensemble, n, s, tol)
    terms = _enumerate_subset_terms(F, D, n)
    total = terms.sum(axis=0)

    product = np.eye(ensemble.dim, dtype=terms.dtype)
    for e in E:
        product = product @ e
    scale = max(1.0, float(np.max(np.abs(product))))
    deviation = float(np.max(np.abs(total - product)))

    iterate = chernoff_iterate(ensemble, s * n, n, tol)
    empty_dev = float(np.max(np.abs(terms[0] - iterate)))

    F_pow = np.linalg.matrix_power(F, n)
    nonempty_dev = float(np.max(np.abs((total - terms[0]) - (product - F_pow))))
    return ExpansionIdentityReport(
        n=n, s=float(s), deviation=deviation, tolerance=rel_tol * scale, scale=scale,
        empty_term_deviation=empty_dev, nonempty_sum_deviation=nonempty_dev,
    )


def mu(path: SamplePath, ensemble: GeneratorEnsemble, t: float, n: int, x,
       tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """Centered product applied to x: (product - F(t/n)^n) x."""
    x = np.asarray(x)
    diff = product_composition(path, ensemble, t, n, tol) - chernoff_iterate(ensemble, t, n, tol)
    return diff @ x


def _increment_core(F, deltas_prefix, delta_k, n, k, x):
    """Sum over the 2^{k-1} subsets of {1..k-1}, each extended by k.

    Terms are accumulated right to left on vectors: v = B_1 ... B_{k-1}
    Delta_k F^{n-k} x with B_i in {F, Delta_i}.
    """
    v0 = np.linalg.matrix_power(F, n - k) @ np.asarray(x, dtype=F.dtype)
    v0 = delta_k @ v0
    V = v0.reshape(1, *v0.shape)
    for i in range(k - 2, -1, -1):
        V = np.concatenate([np.einsum("ij,nj...->ni...", F, V),
                            np.einsum("ij,nj...->ni...", deltas_prefix[i], V)])
    return V.sum(axis=0)


def increment_d(path: SamplePath, ensemble: GeneratorEnsemble, t: float, n: int, k: int, x,
                tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """Martingale increment d_{n,k}(t): the sum of decomposition terms
    whose index set has maximum exactly k, applied to x."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n > MAX_ENUM_N:
        raise CapabilityError(f"exact increments capped at n <= {MAX_ENUM_N}, got {n}")
    if k > path.n:
        raise ValueError("path too short for position k")
    s = t / n
    F, E, D = _position_factors(path, ensemble, k, s, tol)
    return _increment_core(F, D[:k - 1], D[k - 1], n, k, x)


def increment_profile(path: SamplePath, ensemble: GeneratorEnsemble, t: float, n: int, x,
                      tol: float = EXPM_DEFAULT_TOL) -> list:
    """All increments d_{n,k}(t), k = 1..n, sharing one factor table."""
    if n > MAX_ENUM_N:
        raise CapabilityError(f"exact increments capped at n <= {MAX_ENUM_N}, got {n}")
    if n < 1 or n > path.n:
        raise ValueError(f"need 1 <= n <= path length, got n={n}")
    s = t / n
    F, E, D = _position_factors(path, ensemble, n, s, tol)
    return [_increment_core(F, D[:k - 1], D[k - 1], n, k, x) for k in range(1, n + 1)]


def centered_product_and_increments(path: SamplePath, ensemble: GeneratorEnsemble,
                                    t: float, n: int, x, tol: float = EXPM_DEFAULT_TOL):
    """mu_n(t) together with every increment d_{n,k}(t), one factor table.

    The centered product is evaluated as (prod_i e^{A_i t/n} - F(t/n)^n) x,
    independently of the subset enumeration behind the increments.
    """
    if n > MAX_ENUM_N:
        raise CapabilityError(f"exact increments capped at n <= {MAX_ENUM_N}, got {n}")
    if n < 1 or n > path.n:
        raise ValueError(f"need 1 <= n <= path length, got n={n}")
    s = t / n
    F, E, D = _position_factors(path, ensemble, n, s, tol)
    prod = np.eye(ensemble.dim, dtype=F.dtype)
    for e in E:
        prod = prod @ e
    xa = np.asarray(x)
    mu_vec = (prod - np.linalg.matrix_power(F, n)) @ xa
    ds = [_increment_core(F, D[:k - 1], D[k - 1], n, k, xa) for k in range(1, n + 1)]
    return mu_vec, ds


@dataclass(frozen=True)
class MartingaleReport:
    n: int
    k: int
    prefix: tuple
    max_abs: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs <= self.tolerance


def martingale_property_check(ensemble: GeneratorEnsemble, t: float, n: int, k: int, x,
                              prefix_indices, tol: float = 1e-11) -> MartingaleReport:
    """Average d_{n,k}(t) over the law of A_k with A_1..A_{k-1} held at the
    given atom prefix; the conditional mean must vanish."""
    prefix = tuple(int(a) for a in prefix_indices)
    if len(prefix) != k - 1:
        raise ValueError(f"prefix must fix the first {k - 1} factors, got {len(prefix)}")
    avg = None
    for a, p in enumerate(ensemble.probs):
        path = SamplePath(seed=None, n=k, indices=np.array(prefix + (a,), dtype=np.int64))
        val = p * increment_d(path, ensemble, t, n, k, x)
        avg = val if avg is None else avg + val
    return MartingaleReport(n=n, k=k, prefix=prefix,
                            max_abs=float(np.max(np.abs(avg))), tolerance=tol)


def mean_matched_martingale_probe(ensemble: GeneratorEnsemble,
                                  alt_dist: DiscreteOperatorDistribution,
                                  t: float, n: int, k: int, x,
                                  prefix_indices) -> MartingaleReport:
    """Conditional mean of the k-th increment when position k is drawn
    from alt_dist while the expected factor still comes from the ensemble.

    With alt_dist mean-matched but not identically distributed, the
    average equals (E_alt e^{Bs} - E e^{As}) inserted at position k and is
    generally nonzero: matching means alone does not center the factors.
    """
    prefix = tuple(int(a) for a in prefix_indices)
    if len(prefix) != k - 1:
        raise ValueError(f"prefix must fix the first {k - 1} factors, got {len(prefix)}")
    s = t / n
    F = expected_semigroup(ensemble, s)
    D = []
    if k > 1:
        path = SamplePath(seed=None, n=k - 1, indices=np.array(prefix, dtype=np.int64))
        F, _, D = _position_factors(path, ensemble, k - 1, s, EXPM_DEFAULT_TOL)
    alt_exp = np.einsum("a...,a->...", np.stack([expm(b, s) for b in alt_dist.atoms]), alt_dist.probs)
    val = _increment_core(F, D, alt_exp - F, n, k, x)
    return MartingaleReport(n=n, k=k, prefix=prefix,
                            max_abs=float(np.max(np.abs(val))), tolerance=0.0)


def bound_est_norm(n: int, k: int, s: float, rho: float) -> float:
    """Norm bound (2 rho s)^k e^{n rho s} for a k-factor decomposition term."""
    if not (0 <= k <= n):
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if s < 0 or rho <= 0:
        raise ValueError("need s >= 0 and rho > 0")
    return (2.0 * rho * s) ** k * math.exp(n * rho * s)


@dataclass(frozen=True)
class IncrementBound:
    """Bound chain for ||d_{n,k}(t)||: binomial sum = closed form <= final."""

    final: float
    intermediate: float
    binomial_sum: float


def bound_increment(n: int, k: int, t: float, rho: float, x_norm: float) -> IncrementBound:
    """(2 rho t / n) e^{3 rho t} ||x||, with the intermediate closed form
    (2 rho t / n) e^{rho t} (1 + 2 rho t / n)^{k-1} ||x|| also exposed."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if t < 0 or rho <= 0 or x_norm < 0:
        raise ValueError("need t >= 0, rho > 0, x_norm >= 0")
    z = 2.0 * rho * t / n
    final = z * math.exp(3.0 * rho * t) * x_norm
    closed = z * math.exp(rho * t) * (1.0 + z) ** (k - 1) * x_norm
    binom = math.exp(rho * t) * x_norm * math.fsum(
        math.comb(k - 1, j - 1) * z ** j for j in range(1, k + 1))
    return IncrementBound(final=final, intermediate=closed, binomial_sum=binom)
