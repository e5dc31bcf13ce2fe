"""Covering-tuple combinatorics behind the fourth-moment tail bound.

The weighted count of 4-tuples (P, P', Q, Q') of nonempty subsets of
{1..n} in which every element of every set lies in the union of the
other three reduces, by inclusion-exclusion over forcibly-empty sets, to
an alternating sum of n-th powers.  Both routes are implemented: the
closed formula and a direct enumeration over all (2^n - 1)^4 tuples.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapabilityError

MAX_BRUTEFORCE_N = 8


def fourth_moment_formula(n: int, u):
    """Alternating power-sum sum_j (-1)^j C(4,j) S_{4-j}^n.

    S_4 = 1 + 6u^2 + 4u^3 + u^4, S_3 = 1 + 3u^2 + u^3, S_2 = 1 + u^2,
    S_1 = S_0 = 1.  Exact for Fraction/int arguments, float otherwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if u < 0:
        raise ValueError("u must be nonnegative")
    s4 = 1 + 6 * u ** 2 + 4 * u ** 3 + u ** 4
    s3 = 1 + 3 * u ** 2 + u ** 3
    s2 = 1 + u ** 2
    return s4 ** n - 4 * s3 ** n + 6 * s2 ** n - 4 + 1


def _popcounts(masks: np.ndarray) -> np.ndarray:
    return np.array([bin(int(m)).count("1") for m in masks], dtype=np.int64)


def covering_tuple_counts(n: int) -> np.ndarray:
    """Exact tuple counts by total membership size, by full enumeration.

    Entry s counts the admissible 4-tuples with |P|+|P'|+|Q|+|Q'| = s.
    Every tuple of nonempty subsets is visited; the covering property is
    checked per tuple with bitmask containments.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_BRUTEFORCE_N:
        raise CapabilityError(f"brute-force enumeration capped at n <= {MAX_BRUTEFORCE_N}, got {n}")
    masks = np.arange(1, 2 ** n, dtype=np.int16)
    pc = _popcounts(masks).astype(np.int16)
    b = masks[:, None, None]
    c = masks[None, :, None]
    d = masks[None, None, :]
    union_cd = c | d
    union_bd = b | d
    union_bc = b | c
    union_bcd = b | union_cd
    size_bcd = (pc[:, None, None] + pc[None, :, None] + pc[None, None, :]).astype(np.int16)
    counts = np.zeros(4 * n + 1, dtype=np.int64)
    for a, size_a in zip(masks, pc):
        ok = (a & ~union_bcd) == 0
        ok &= (b & ~(a | union_cd)) == 0
        ok &= (c & ~(a | union_bd)) == 0
        ok &= (d & ~(a | union_bc)) == 0
        total = (size_a + size_bcd)[ok]
        counts += np.bincount(total, minlength=4 * n + 1)
    return counts


def fourth_moment_bruteforce(n: int, u):
    """Weighted covering-tuple sum sum u^{|P|+|P'|+|Q|+|Q'|} by enumeration.

    Counting is exact integer arithmetic; the final polynomial is
    evaluated exactly when u is a Fraction or int.
    """
    if u < 0:
        raise ValueError("u must be nonnegative")
    counts = covering_tuple_counts(n)
    total = 0
    for size, count in enumerate(counts):
        if count:
            total = total + int(count) * u ** size
    return total


@dataclass(frozen=True)
class TailCoefficientProbe:
    """Fit of the formula values at u = 2 rho t / n against c / n^2."""

    rho: float
    t: float
    n_values: tuple
    values: tuple
    fitted_coefficient: float
    fit_residual: float
    free_exponent: float
    quadratic_coefficient: float
    quadratic_relative_gap: float
    expansion_coefficient: float
    expansion_relative_gap: float

    @property
    def matches_expansion(self) -> bool:
        return self.expansion_relative_gap <= 0.25

    @property
    def matches_quadratic_candidate(self) -> bool:
        return self.quadratic_relative_gap <= 0.25


def tail_coefficient_probe(rho: float, t: float, n_values) -> TailCoefficientProbe:
    """Measure the leading 1/n^2 coefficient of the covering-tuple sum.

    Compares the least-squares constant against two candidates without
    asserting either: first, 12 rho^2 t^2; second, the directly expanded
    leading term 3 (2 rho t)^4, which comes from the pairs of positions
    whose membership patterns split the four sets into complementary
    halves (count 6 per ordered position pair, weight u^4).
    """
    n_values = tuple(int(n) for n in n_values)
    if any(n < 1 for n in n_values) or len(n_values) < 2:
        raise ValueError("need at least two positive n values")
    values = tuple(float(fourth_moment_formula(n, 2.0 * rho * t / n)) for n in n_values)
    ns = np.array(n_values, dtype=float)
    vals = np.array(values)
    scaled = ns ** 2 * vals
    c_fit = float(np.mean(scaled))
    residual = float(np.max(np.abs(scaled - c_fit)) / max(abs(c_fit), 1e-300))
    if np.all(vals > 0):
        slope = float(np.polyfit(np.log(ns), np.log(vals), 1)[0])
    else:
        slope = math.nan
    quadratic = 12.0 * rho ** 2 * t ** 2
    expansion = 3.0 * (2.0 * rho * t) ** 4
    return TailCoefficientProbe(
        rho=rho, t=t, n_values=n_values, values=values,
        fitted_coefficient=c_fit, fit_residual=residual, free_exponent=slope,
        quadratic_coefficient=quadratic,
        quadratic_relative_gap=abs(c_fit - quadratic) / max(quadratic, 1e-300),
        expansion_coefficient=expansion,
        expansion_relative_gap=abs(c_fit - expansion) / max(expansion, 1e-300),
    )
