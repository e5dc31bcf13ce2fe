"""Finite-dimensional normed-space models.

Three families are supported: coordinate sequence spaces with a p-sum
norm, the max-norm space, and Schatten-p spaces of dim x dim matrices.
The module fixes the duality pairing (conjugate-linear in the dual
coordinate), induced operator norms with a certified/exact flag,
a p-smoothness sampler, and seminorms induced by positive forms.

Operators on the Schatten models act by left multiplication X -> AX,
so the induced Schatten-p -> Schatten-p norm of A equals the spectral
norm of A for every p and is certified.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, FormInvariantError
from .rng import generator

# Global tolerance policy: exact algebraic identities vs norm comparisons.
EXACT_TOL = 1e-12
NORM_TOL = 1e-10

_KINDS = ("sequence_p", "schatten_p", "max_norm")


@dataclass(frozen=True)
class SpaceModel:
    """Descriptor of the ambient space; fixes every norm used downstream.

    ``dim`` is the coordinate length for sequence_p/max_norm and the
    matrix side for schatten_p.  ``p`` is required for the p-norm kinds
    and must satisfy 1 <= p < inf; max_norm carries no exponent.
    """

    kind: str
    dim: int
    p: float | None = None
    scalars: str = "real"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.scalars not in ("real", "complex"):
            raise ValueError(f"scalars must be 'real' or 'complex', got {self.scalars!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if self.kind == "max_norm":
            if self.p is not None:
                raise ValueError("max_norm model carries no exponent p")
        else:
            if self.p is None or not (1.0 <= self.p < math.inf):
                raise ValueError(f"exponent p must satisfy 1 <= p < inf, got {self.p!r}")

    @property
    def is_complex(self) -> bool:
        return self.scalars == "complex"

    @property
    def element_shape(self) -> tuple:
        if self.kind == "schatten_p":
            return (self.dim, self.dim)
        return (self.dim,)

    @property
    def coordinate_count(self) -> int:
        return int(np.prod(self.element_shape))


def sequence_model(p: float, dim: int, scalars: str = "real") -> SpaceModel:
    return SpaceModel(kind="sequence_p", dim=dim, p=float(p), scalars=scalars)


def euclidean_model(dim: int, scalars: str = "real") -> SpaceModel:
    return sequence_model(2.0, dim, scalars)


def schatten_model(p: float, dim: int, scalars: str = "real") -> SpaceModel:
    return SpaceModel(kind="schatten_p", dim=dim, p=float(p), scalars=scalars)


def max_norm_model(dim: int, scalars: str = "real") -> SpaceModel:
    return SpaceModel(kind="max_norm", dim=dim, scalars=scalars)


def as_element(model: SpaceModel, x) -> np.ndarray:
    """Validate and coerce x to the model's element shape and dtype."""
    arr = np.asarray(x)
    if np.iscomplexobj(arr) and not model.is_complex:
        if np.any(arr.imag != 0):
            raise ValueError("complex coordinates supplied to a real-scalar model")
        arr = arr.real
    arr = arr.astype(complex if model.is_complex else float)
    if arr.shape != model.element_shape:
        raise ValueError(f"element shape {arr.shape} does not match model shape {model.element_shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("element has non-finite coordinates")
    return arr


def batch_vector_norm(model: SpaceModel, batch: np.ndarray) -> np.ndarray:
    """Model norm of each element in a leading-axis stack."""
    batch = np.asarray(batch)
    if model.kind == "schatten_p":
        sv = np.linalg.svd(batch, compute_uv=False)
        if model.p == 1.0:
            return np.sum(sv, axis=-1)
        return np.sum(sv ** model.p, axis=-1) ** (1.0 / model.p)
    a = np.abs(batch)
    if model.kind == "max_norm":
        return np.max(a, axis=-1)
    if model.p == 1.0:
        return np.sum(a, axis=-1)
    if model.p == 2.0:
        return np.sqrt(np.sum(a * a, axis=-1))
    return np.sum(a ** model.p, axis=-1) ** (1.0 / model.p)


def vector_norm(model: SpaceModel, x) -> float:
    """Norm of an element: p-sum, max coordinate, or singular-value p-sum."""
    x = as_element(model, x)
    return float(batch_vector_norm(model, x[None, ...])[0])


def dual_norm(model: SpaceModel, f) -> float:
    """Norm of f in the dual space (q-norm with 1/p + 1/q = 1)."""
    f = as_element(model, f)
    if model.kind == "max_norm":
        return float(np.sum(np.abs(f)))
    if model.kind == "sequence_p":
        if model.p == 1.0:
            return float(np.max(np.abs(f)))
        q = model.p / (model.p - 1.0)
        return float(np.sum(np.abs(f) ** q) ** (1.0 / q))
    sv = np.linalg.svd(f, compute_uv=False)
    if model.p == 1.0:
        return float(np.max(sv))
    q = model.p / (model.p - 1.0)
    return float(np.sum(sv ** q) ** (1.0 / q))


def pairing(f, x):
    """Duality pairing <f, x>: conjugate-linear in f, linear in x.

    Coordinate sum for vectors, trace pairing for matrix elements.
    """
    f = np.asarray(f)
    x = np.asarray(x)
    if f.shape != x.shape:
        raise ValueError(f"pairing shapes differ: {f.shape} vs {x.shape}")
    val = np.vdot(f, x)
    if np.iscomplexobj(f) or np.iscomplexobj(x):
        return complex(val)
    return float(val.real)


@dataclass(frozen=True)
class OperatorNorm:
    value: float
    certified: bool


def _probe_batch(model: SpaceModel, gen: np.random.Generator, count: int) -> np.ndarray:
    shape = (count,) + model.element_shape
    probes = gen.standard_normal(shape)
    if model.is_complex:
        probes = probes + 1j * gen.standard_normal(shape)
    return probes


def _apply_operator(model: SpaceModel, A: np.ndarray, batch: np.ndarray) -> np.ndarray:
    if model.kind == "schatten_p":
        return np.einsum("ij,njk->nik", A, batch)
    return batch @ A.T


def _ascent_refine(model: SpaceModel, A: np.ndarray, x0: np.ndarray, best: float, steps: int) -> float:
    """Normalized-gradient ascent on ||Ax||/||x||; returns the best ratio seen."""
    p = model.p if model.kind == "sequence_p" else None
    x = x0 / vector_norm(model, x0)
    step = 0.5
    for _ in range(steps):
        y = A @ x
        ny = vector_norm(model, y)
        if ny == 0.0:
            break
        if model.kind == "max_norm":
            w = np.zeros_like(y)
            j = int(np.argmax(np.abs(y)))
            w[j] = np.sign(y[j]) if not model.is_complex else y[j] / abs(y[j])
        else:
            ay = np.abs(y)
            if p == 2.0:
                scale = 1.0
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    scale = np.where(ay > 0, ay ** (p - 2.0), 0.0)
            w = (y * scale) / ny ** (p - 1.0)
        g = A.conj().T @ w
        gn = vector_norm(model, g)
        if gn == 0.0:
            break
        cand = x + step * g / gn
        cn = vector_norm(model, cand)
        if cn == 0.0:
            step *= 0.5
            continue
        cand = cand / cn
        ratio = vector_norm(model, A @ cand)
        if ratio > best:
            best = ratio
            x = cand
        else:
            step *= 0.5
    return best


def operator_norm(model: SpaceModel, A, mode: str = "exact", *,
                  seed: int = 0, probes: int = 10000, ascent_steps: int = 50) -> OperatorNorm:
    """Induced operator norm of a dim x dim matrix acting on the model.

    Exact mode is available for sequence p in {1, 2}, max_norm, and all
    Schatten models (left-multiplication convention).  Lower-bound mode
    maximizes ||Ax||/||x|| over seeded random probes with gradient-ascent
    refinement and is never certified.
    """
    A = np.asarray(A, dtype=complex if (model.is_complex or np.iscomplexobj(A)) else float)
    if A.shape != (model.dim, model.dim):
        raise ValueError(f"operator shape {A.shape} does not match dim {model.dim}")
    if not np.all(np.isfinite(A)):
        raise ValueError("operator has non-finite entries")
    if mode == "exact":
        if model.kind == "sequence_p" and model.p == 1.0:
            return OperatorNorm(float(np.max(np.sum(np.abs(A), axis=0))), True)
        if model.kind == "sequence_p" and model.p == 2.0:
            return OperatorNorm(float(np.linalg.norm(A, 2)), True)
        if model.kind == "max_norm":
            return OperatorNorm(float(np.max(np.sum(np.abs(A), axis=1))), True)
        if model.kind == "schatten_p":
            # left multiplication X -> AX has induced norm sigma_max(A) for all p
            return OperatorNorm(float(np.linalg.norm(A, 2)), True)
        raise CapabilityError(
            f"exact operator norm unavailable for sequence exponent p={model.p}; use mode='lower_bound'")
    if mode != "lower_bound":
        raise ValueError(f"unknown mode {mode!r}")
    gen = generator(seed)
    X = _probe_batch(model, gen, probes)
    nx = batch_vector_norm(model, X)
    keep = nx > 0
    X, nx = X[keep], nx[keep]
    ny = batch_vector_norm(model, _apply_operator(model, A, X))
    ratios = ny / nx
    best_idx = int(np.argmax(ratios))
    best = float(ratios[best_idx])
    if model.kind != "schatten_p":
        best = _ascent_refine(model, A, X[best_idx], best, ascent_steps)
    return OperatorNorm(best, False)


def norm_budget_bound(model: SpaceModel, A) -> float:
    """Certified upper bound on the induced operator norm.

    Exact where exact norms exist; for other sequence exponents the
    Riesz-Thorin interpolation bound ||A||_1^{1/p} ||A||_inf^{1-1/p}
    (column-sum and row-sum norms) is returned instead.
    """
    try:
        return operator_norm(model, A, mode="exact").value
    except CapabilityError:
        A = np.asarray(A)
        col = float(np.max(np.sum(np.abs(A), axis=0)))
        row = float(np.max(np.sum(np.abs(A), axis=1)))
        theta = 1.0 / model.p
        return col ** theta * row ** (1.0 - theta)


def p_smooth_gap(model: SpaceModel, p_s: float, C: float, x, y) -> float:
    """Slack of the p-smoothness inequality on one pair (negative = violated)."""
    x = as_element(model, x)
    y = as_element(model, y)
    lhs = vector_norm(model, x + y) ** p_s + vector_norm(model, x - y) ** p_s
    rhs = 2.0 * vector_norm(model, x) ** p_s + C * vector_norm(model, y) ** p_s
    return rhs - lhs


@dataclass(frozen=True)
class PSmoothReport:
    trials: int
    violation_count: int
    max_relative_excess: float
    empirical_min_c: float
    max_abs_gap: float

    @property
    def passed(self) -> bool:
        return self.violation_count == 0


def p_smooth_check(model: SpaceModel, p_s: float, C: float, trials: int, seed: int) -> PSmoothReport:
    """Sample random pairs and test ||x+y||^p + ||x-y||^p <= 2||x||^p + C||y||^p.

    Violations are counted beyond relative tolerance 1e-10.  The report
    carries the empirical minimal constant that would have passed every
    sampled pair, and the largest absolute two-sided gap (useful for
    equality checks such as the parallelogram law).
    """
    if not (1.0 < p_s <= 2.0):
        raise ValueError(f"smoothness exponent must lie in (1, 2], got {p_s}")
    if C <= 0:
        raise ValueError("C must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gen = generator(seed)
    X = _probe_batch(model, gen, trials)
    Y = _probe_batch(model, gen, trials)
    nx = batch_vector_norm(model, X) ** p_s
    ny = batch_vector_norm(model, Y) ** p_s
    lhs = batch_vector_norm(model, X + Y) ** p_s + batch_vector_norm(model, X - Y) ** p_s
    rhs = 2.0 * nx + C * ny
    excess = (lhs - rhs) / np.maximum(rhs, 1e-300)
    violations = int(np.sum(excess > NORM_TOL))
    nz = ny > 0
    required = (lhs[nz] - 2.0 * nx[nz]) / ny[nz]
    empirical_min_c = float(np.max(required)) if required.size else 0.0
    return PSmoothReport(
        trials=trials,
        violation_count=violations,
        max_relative_excess=float(np.max(excess)),
        empirical_min_c=empirical_min_c,
        max_abs_gap=float(np.max(np.abs(lhs - rhs))),
    )


@dataclass(frozen=True)
class PositiveForm:
    """Positive operator i: X -> X* through its Gram matrix G.

    Convention: <i(x), y> = pairing(G @ x, y), with elements flattened to
    their coordinate vectors.  G must be Hermitian (tolerance 1e-12) and
    positive semidefinite (smallest eigenvalue >= -1e-10).
    """

    gram: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gram)
        g = g.astype(complex if np.iscomplexobj(g) else float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise FormInvariantError(f"Gram matrix must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise FormInvariantError("Gram matrix has non-finite entries")
        herm_dev = float(np.max(np.abs(g - g.conj().T))) if g.size else 0.0
        if herm_dev > EXACT_TOL * max(1.0, float(np.max(np.abs(g)))):
            raise FormInvariantError(f"Gram matrix is not Hermitian (deviation {herm_dev:.3e})")
        eigmin = float(np.min(np.linalg.eigvalsh((g + g.conj().T) / 2.0)))
        if eigmin < -NORM_TOL:
            raise FormInvariantError(f"Gram matrix is not positive semidefinite (eigmin {eigmin:.3e})")
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    @property
    def operator_bound(self) -> float:
        """Spectral norm of G (equals the largest eigenvalue; G is PSD)."""
        return float(np.max(np.linalg.eigvalsh((self.gram + self.gram.conj().T) / 2.0)))


def seminorm_i(form: PositiveForm, x) -> float:
    """Seminorm sqrt(<i(x), x>) induced by a positive form."""
    xf = np.asarray(x).reshape(-1)
    if xf.shape[0] != form.size:
        raise ValueError(f"element has {xf.shape[0]} coordinates, form expects {form.size}")
    quad = np.vdot(form.gram @ xf, xf)
    scale = 1.0 + abs(quad)
    if abs(quad.imag) > NORM_TOL * scale:
        raise FormInvariantError(f"quadratic value has imaginary part {quad.imag:.3e}")
    re = quad.real
    if re < -NORM_TOL * scale:
        raise FormInvariantError(f"quadratic value is negative: {re:.3e}")
    return math.sqrt(max(re, 0.0))


def rank_one_form(f) -> PositiveForm:
    """Form i(y) = f(y) f, whose seminorm is |<f, y>|."""
    ff = np.asarray(f).reshape(-1)
    return PositiveForm(np.outer(ff, ff.conj()))


def truncation_form(N: int, dim: int) -> PositiveForm:
    """Form keeping the first N coordinates: <i(x), x> = sum_{n<=N} |x_n|^2."""
    if not (1 <= N <= dim):
        raise ValueError(f"need 1 <= N <= dim, got N={N}, dim={dim}")
    diag = np.zeros(dim)
    diag[:N] = 1.0
    return PositiveForm(np.diag(diag))
