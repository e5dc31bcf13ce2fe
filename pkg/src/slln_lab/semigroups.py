"""Matrix exponentials with certified truncation control, products of
sampled semigroup factors, the expected one-step factor F(s), its
iterate F(t/n)^n, and the mean semigroup e^{E[A] t}.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import GeneratorEnsemble, SamplePath
from .spaces import operator_norm

EXPM_DEFAULT_TOL = 1e-13
_TAYLOR_THETA = 0.5
_MAX_TERMS = 64
_EPS = 2.0 ** -53


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_{m-1} = T used to discretize sup_t.

    horizon == 0 marks the degenerate grid (all points at 0).
    """

    horizon: float
    points: int

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("grid needs at least 2 points")
        if not (0.0 <= self.horizon < math.inf):
            raise ValueError(f"horizon must be finite and nonnegative, got {self.horizon}")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.points)

    @property
    def degenerate(self) -> bool:
        return self.horizon == 0.0


def _one_norms(M: np.ndarray) -> np.ndarray:
    return np.max(np.sum(np.abs(M), axis=-2), axis=-1)


def expm(A, s=1.0, tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """e^{A s} with relative truncation error <= tol in spectral norm.

    Power-of-two argument scaling plus a Taylor sum that runs until both
    the a-priori remainder bound meets the budget and the terms fall
    below machine precision, then repeated squaring.  ``s`` may be a
    scalar or a 1-d array of time points; for an array the result is the
    batched stack of exponentials, shape (len(s), d, d).
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    s_arr = np.asarray(s, dtype=float)
    scalar = s_arr.ndim == 0
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("time argument must be finite")
    s_arr = np.atleast_1d(s_arr)
    M = s_arr[:, None, None] * A.astype(complex if np.iscomplexobj(A) else float)
    out = _expm_core(M, tol)
    return out[0] if scalar else out


def _expm_core(M: np.ndarray, tol: float) -> np.ndarray:
    d = M.shape[-1]
    norm = float(np.max(_one_norms(M))) if M.size else 0.0
    squarings = 0
    if norm > _TAYLOR_THETA:
        squarings = int(math.ceil(math.log2(norm / _TAYLOR_THETA)))
    B = M / (2.0 ** squarings)
    theta = norm / (2.0 ** squarings)
    eye = np.broadcast_to(np.eye(d, dtype=B.dtype), B.shape)
    acc = eye.copy()
    term = eye.copy()
    # remainder bound doubles per squaring; e^{-theta} lower-bounds ||e^B||
    budget = tol * math.exp(-theta) / (2.0 ** (squarings + 1))
    for j in range(1, _MAX_TERMS + 1):
        term = term @ B / j
        acc = acc + term
        tmax = float(np.max(np.abs(term)))
        if tmax == 0.0:
            break
        remainder = theta ** (j + 1) / math.factorial(j + 1) / (1.0 - theta / (j + 2))
        if remainder <= budget and tmax <= _EPS * float(np.max(np.abs(acc))):
            break
    for _ in range(squarings):
        acc = acc @ acc
    return acc


def product_composition(path: SamplePath, ensemble: GeneratorEnsemble, t: float,
                        n: int | None = None, tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """Ordered product e^{A_1 t/n} ... e^{A_n t/n} along a sampled path.

    Factors multiply left to right in index order and act on column
    vectors from the left.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = path.n if n is None else int(n)
    if n < 1 or n > path.n:
        raise ValueError(f"need 1 <= n <= path length, got n={n}")
    idx = path.indices[:n]
    if np.any(idx >= ensemble.atom_count):
        raise ValueError("path indices exceed the ensemble's atom count")
    s = t / n
    factors = {a: expm(ensemble.atoms[a], s, tol) for a in np.unique(idx)}
    P = np.eye(ensemble.dim, dtype=factors[idx[0]].dtype)
    for a in idx:
        P = P @ factors[a]
    return P


def expected_semigroup(ensemble: GeneratorEnsemble, s, tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """F(s) = E e^{A s}, exact over the atom set up to expm tolerance.

    Accepts a scalar s or a 1-d array of time points (batched result).
    """
    stack = np.stack([expm(a, s, tol) for a in ensemble.atoms])
    return np.einsum("a...,a->...", stack, ensemble.probs)


def chernoff_iterate(ensemble: GeneratorEnsemble, t: float, n: int,
                     tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """F(t/n)^n, computed by repeated squaring."""
    if n < 1:
        raise ValueError("n must be >= 1")
    F = expected_semigroup(ensemble, t / n, tol)
    return np.linalg.matrix_power(F, n)


def limit_semigroup(ensemble: GeneratorEnsemble, t: float, tol: float = EXPM_DEFAULT_TOL) -> np.ndarray:
    """e^{E[A] t}."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return expm(ensemble.mean, t, tol)


@dataclass(frozen=True)
class ChernoffConditionsReport:
    """Numeric check of the hypotheses behind the iterate's convergence."""

    identity_deviation: float
    continuity_margin: float
    norm_margin: float
    derivative_errors: dict
    derivative_decay_ok: bool
    derivative_error_final: float
    failed_conditions: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return not self.failed_conditions


def chernoff_conditions_check(ensemble: GeneratorEnsemble, grid: TimeGrid,
                              derivative_steps=(1e-4, 1e-5)) -> ChernoffConditionsReport:
    """Verify F(0) = I, Lipschitz continuity on the grid, the growth bound
    ||F(t)|| <= e^{rho t}, and F'(0) = E[A] by central differences with
    second-order (Richardson-consistent) step refinement.
    """
    model, rho = ensemble.model, ensemble.rho
    d = ensemble.dim
    failed = []

    F_grid = expected_semigroup(ensemble, grid.values)
    identity_dev = float(np.max(np.abs(F_grid[0] - np.eye(d))))
    if identity_dev > 1e-13:
        failed.append("identity_at_zero")

    # ||F(t+dt) - F(t)|| <= rho dt e^{rho (t+dt)}; slack for expm truncation
    dt = grid.values[1] - grid.values[0] if not grid.degenerate else 0.0
    cont_margin = 0.0
    if dt > 0:
        for j in range(grid.points - 1):
            step = operator_norm(model, F_grid[j + 1] - F_grid[j], mode="exact").value
            bound = rho * dt * math.exp(rho * grid.values[j + 1]) * (1.0 + 1e-8) + 1e-12
            cont_margin = max(cont_margin, step - bound)
        if cont_margin > 0:
            failed.append("continuity")

    norm_margin = -math.inf
    for j, t in enumerate(grid.values):
        nrm = operator_norm(model, F_grid[j], mode="exact").value
        norm_margin = max(norm_margin, nrm - math.exp(rho * t) * (1.0 + 1e-8))
    if norm_margin > 0:
        failed.append("norm_growth")

    mean = ensemble.mean
    mean_scale = 1.0 + float(np.max(np.abs(mean)))
    errors = {}
    for h in derivative_steps:
        diff = (expected_semigroup(ensemble, h) - expected_semigroup(ensemble, -h)) / (2.0 * h)
        errors[h] = float(np.max(np.abs(diff - mean)))
    hs = sorted(derivative_steps, reverse=True)
    decay_ok = True
    for big, small in zip(hs, hs[1:]):
        if errors[big] > 1e-9 * mean_scale:
            # second-order decay would shrink by (small/big)^2; allow 25x slack
            allowed = errors[big] * (small / big) ** 2 * 25.0 + 1e-12 * mean_scale
            if errors[small] > allowed:
                decay_ok = False
    final_err = errors[min(derivative_steps)]
    if final_err > 1e-7 * mean_scale or not decay_ok:
        failed.append("derivative_at_zero")

    return ChernoffConditionsReport(
        identity_deviation=identity_dev,
        continuity_margin=cont_margin,
        norm_margin=norm_margin,
        derivative_errors=errors,
        derivative_decay_ok=decay_ok,
        derivative_error_final=final_err,
        failed_conditions=tuple(failed),
    )
