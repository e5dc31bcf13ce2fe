"""Experiment orchestration: sup-error curves in the model norm, against
dual functionals and form seminorms, single-path convergence studies,
tail-probability scans with rate fits, and moment-ratio series for the
martingale increments.

Trials are embarrassingly parallel: every trial derives its own seed
from (base seed, trial index), and aggregation sorts by trial index, so
results are bit-identical for any worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decomposition import MAX_ENUM_N, centered_product_and_increments
from .ensembles import GeneratorEnsemble, SamplePath, sample_iid
from .errors import CapabilityError
from .records import TrialRecord, wilson_interval
from .rng import derive_seed
from .semigroups import EXPM_DEFAULT_TOL, TimeGrid, expm
from .spaces import (PositiveForm, SpaceModel, batch_vector_norm, operator_norm,
                     pairing, seminorm_i, vector_norm)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment inputs; see the config schema in the docs."""

    model: SpaceModel
    ensemble: GeneratorEnsemble
    x: np.ndarray
    T: float
    grid_points: int = 65
    n_values: tuple = (16, 64, 256)
    trials: int = 1000
    seed: int = 0
    epsilon: float = 0.1
    p_s: float = 2.0
    r: float | None = None
    functional: np.ndarray | None = None
    form: PositiveForm | None = None

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_values)
        if any(n <= 0 for n in ns):
            raise ValueError("n values must be positive")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n values must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (1.0 < self.p_s <= 2.0):
            raise ValueError("smoothness exponent p_s must lie in (1, 2]")
        r = self.r if self.r is not None else 2.0 * self.p_s / (self.p_s - 1.0)
        if r < 1.0:
            raise ValueError("moment order r must be >= 1")
        if self.ensemble.model != self.model:
            raise ValueError("ensemble was certified against a different space model")
        object.__setattr__(self, "n_values", ns)
        object.__setattr__(self, "r", float(r))
        object.__setattr__(self, "x", np.asarray(self.x))
        if self.functional is not None:
            object.__setattr__(self, "functional", np.asarray(self.functional))
        TimeGrid(self.T, self.grid_points)  # validates horizon and points

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.grid_points)


@dataclass(frozen=True)
class _GridTable:
    """Per-(ensemble, n, grid) cache: semigroup factors at every grid time,
    the iterated expected factor, and the mean semigroup."""

    factors: np.ndarray   # (atoms, m, d, d) with factor e^{A_a t_j / n}
    chernoff: np.ndarray  # (m, d, d): F(t_j/n)^n
    limit: np.ndarray     # (m, d, d): e^{E[A] t_j}


def _build_grid_table(ensemble: GeneratorEnsemble, n: int, grid: TimeGrid,
                      tol: float = EXPM_DEFAULT_TOL) -> _GridTable:
    s_values = grid.values / n
    factors = np.stack([expm(a, s_values, tol) for a in ensemble.atoms])
    F = np.einsum("amij,a->mij", factors, ensemble.probs)
    return _GridTable(factors=factors,
                      chernoff=np.linalg.matrix_power(F, n),
                      limit=expm(ensemble.mean, grid.values, tol))


def _grid_product(table: _GridTable, indices: np.ndarray) -> np.ndarray:
    m, d = table.factors.shape[1], table.factors.shape[2]
    P = np.broadcast_to(np.eye(d, dtype=table.factors.dtype), (m, d, d)).copy()
    for a in indices:
        P = P @ table.factors[a]
    return P


def _difference_action(table: _GridTable, indices, x, center: str) -> np.ndarray:
    ref = table.limit if center == "limit" else table.chernoff
    return (_grid_product(table, indices) - ref) @ x


def sot_error(path: SamplePath, ensemble: GeneratorEnsemble, x, grid: TimeGrid,
              n: int | None = None, center: str = "limit") -> float:
    """sup over the grid of ||(product - e^{E[A] t}) x|| in the model norm."""
    n = path.n if n is None else int(n)
    table = _build_grid_table(ensemble, n, grid)
    dx = _difference_action(table, path.indices[:n], np.asarray(x), center)
    return float(np.max(batch_vector_norm(ensemble.model, dx)))


def wot_error(path: SamplePath, ensemble: GeneratorEnsemble, x, f, grid: TimeGrid,
              n: int | None = None, center: str = "limit") -> float:
    """sup over the grid of |<f, (product - e^{E[A] t}) x>|."""
    n = path.n if n is None else int(n)
    table = _build_grid_table(ensemble, n, grid)
    dx = _difference_action(table, path.indices[:n], np.asarray(x), center)
    return float(max(abs(pairing(f, row)) for row in dx))


def form_error(path: SamplePath, ensemble: GeneratorEnsemble, x, form: PositiveForm,
               grid: TimeGrid, n: int | None = None, center: str = "limit") -> float:
    """sup over the grid of the form seminorm of (product - e^{E[A] t}) x."""
    n = path.n if n is None else int(n)
    table = _build_grid_table(ensemble, n, grid)
    dx = _difference_action(table, path.indices[:n], np.asarray(x), center)
    return float(max(seminorm_i(form, row) for row in dx))


def _grid_pairings(f: np.ndarray, dx: np.ndarray) -> np.ndarray:
    """|<f, dx_j>| for every grid row at once."""
    flat = dx.reshape(dx.shape[0], -1)
    return np.abs(flat @ f.reshape(-1).conj())


def _grid_seminorms(form: PositiveForm, dx: np.ndarray) -> np.ndarray:
    """Form seminorm of every grid row at once (same quadratic as seminorm_i)."""
    flat = dx.reshape(dx.shape[0], -1)
    gram = form.gram
    if np.iscomplexobj(gram) or np.iscomplexobj(flat):
        flat = flat.astype(complex)
        gram = gram.astype(complex)
    quad = np.einsum("mi,ij,mj->m", flat.conj(), gram, flat)
    return np.sqrt(np.maximum(quad.real, 0.0))


def _trial_chunk(payload: dict, trial_indices) -> list:
    """Worker: evaluate the requested error kinds for a block of trials."""
    table: _GridTable = payload["table"]
    ensemble: GeneratorEnsemble = payload["ensemble"]
    model: SpaceModel = payload["model"]
    x = payload["x"]
    f = payload["functional"]
    form = payload["form"]
    n = payload["n"]
    kinds = payload["kinds"]
    center = payload["center"]
    out = []
    for trial in trial_indices:
        seed = derive_seed(payload["seed"], trial)
        path = sample_iid(ensemble, n, seed)
        dx = _difference_action(table, path.indices, x, center)
        rec = TrialRecord(seed=seed, trial=trial, n=n, sup_error_sot=math.nan)
        grid_profile = None
        for kind in kinds:
            if kind == "sot":
                errs = batch_vector_norm(model, dx)
                rec.sup_error_sot = float(np.max(errs))
            elif kind == "wot":
                errs = _grid_pairings(f, dx)
                rec.sup_error_wot = float(np.max(errs))
            elif kind == "form":
                errs = _grid_seminorms(form, dx)
                rec.sup_error_form = float(np.max(errs))
            else:
                raise ValueError(f"unknown error kind {kind!r}")
            if grid_profile is None:
                grid_profile = [float(e) for e in errs]
        if payload["keep_grid"]:
            rec.grid_errors = grid_profile
        out.append(rec)
    return out


def run_error_trials(config: ExperimentConfig, n: int, kinds=("sot",), center: str = "limit",
                     workers: int = 1, keep_grid: bool = True) -> list:
    """Independent trials of the sup error at one n; deterministic for any
    worker count (per-trial derived seeds, index-sorted aggregation)."""
    if "wot" in kinds and config.functional is None:
        raise ValueError("wot errors need a functional in the config")
    if "form" in kinds and config.form is None:
        raise ValueError("form errors need a positive form in the config")
    payload = {
        "table": _build_grid_table(config.ensemble, n, config.grid),
        "ensemble": config.ensemble,
        "model": config.model,
        "x": np.asarray(config.x),
        "functional": config.functional,
        "form": config.form,
        "n": int(n),
        "kinds": tuple(kinds),
        "center": center,
        "seed": config.seed,
        "keep_grid": keep_grid,
    }
    indices = list(range(config.trials))
    if workers <= 1:
        records = _trial_chunk(payload, indices)
    else:
        chunks = [indices[i::workers] for i in range(workers)]
        records = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_trial_chunk, [payload] * len(chunks), chunks):
                records.extend(part)
    records.sort(key=lambda r: r.trial)
    return records


@dataclass(frozen=True)
class PathConvergenceStudy:
    n_values: tuple
    errors: tuple
    decreasing_fraction: float | None
    slope: float | None
    degenerate: bool
    regime: str  # "smooth" or "conjecture experiment"


def path_convergence_study(config: ExperimentConfig) -> PathConvergenceStudy:
    """Errors along one growing path (prefix property) at each n.

    Reports the fraction of adjacent n pairs whose error decreases and
    the log-log slope; all-zero or partially zero error curves are
    flagged degenerate.  Runs on non-smooth models (sequence p = 1,
    max norm) are labeled conjecture experiments.
    """
    ns = config.n_values
    path = sample_iid(config.ensemble, max(ns), config.seed)
    errors = tuple(sot_error(path, config.ensemble, config.x, config.grid, n=n) for n in ns)
    model = config.model
    smooth = model.kind != "max_norm" and (model.p is None or model.p > 1.0)
    regime = "smooth" if smooth else "conjecture experiment"
    # errors at rounding scale carry no trend information
    floor = 1e-12 * math.exp(config.ensemble.rho * config.T) * max(1.0, vector_norm(model, config.x))
    if any(e <= floor for e in errors) or len(ns) < 2:
        return PathConvergenceStudy(ns, errors, None, None, True, regime)
    ratios = [b / a for a, b in zip(errors, errors[1:])]
    fraction = sum(r < 1.0 for r in ratios) / len(ratios)
    slope = float(np.polyfit(np.log(ns), np.log(errors), 1)[0])
    return PathConvergenceStudy(ns, errors, fraction, slope, False, regime)


def fit_tail_slope(n_values, hits, trials):
    """Weighted log-log regression of tail frequency against n.

    Weights are the exceedance counts (inverse-variance up to the
    (1 - p) factor); zero-frequency points carry no information and are
    dropped.  Returns None with fewer than two usable points.
    """
    xs, ys, ws = [], [], []
    for n, h in zip(n_values, hits):
        if h > 0:
            xs.append(math.log(n))
            ys.append(math.log(h / trials))
            ws.append(float(h))
    if len(xs) < 2:
        return None
    xs, ys, ws = np.array(xs), np.array(ys), np.array(ws)
    xbar = np.average(xs, weights=ws)
    ybar = np.average(ys, weights=ws)
    denom = np.sum(ws * (xs - xbar) ** 2)
    if denom == 0:
        return None
    return float(np.sum(ws * (xs - xbar) * (ys - ybar)) / denom)


@dataclass(frozen=True)
class TailPoint:
    n: int
    hits: int
    trials: int
    frequency: float
    wilson_lo: float
    wilson_hi: float
    chernoff_distance: float


@dataclass(frozen=True)
class TailScanResult:
    epsilon: float
    points: tuple
    slope: float | None
    estimable: bool
    below_resolution: bool
    contract_met: bool | None
    records: dict = field(repr=False, default_factory=dict)


def _certified_or_probe_norm(model: SpaceModel, A) -> float:
    try:
        return operator_norm(model, A, mode="exact").value
    except CapabilityError:
        return operator_norm(model, A, mode="lower_bound", probes=2000, ascent_steps=20).value


def tail_scan(config: ExperimentConfig, workers: int = 1) -> TailScanResult:
    """Exceedance frequencies of sup_t ||mu_n(t)|| over the threshold.

    mu_n is centered at the iterated expected factor F(t/n)^n, so the
    scan isolates the martingale part; the deterministic distance
    ||F(t/n)^n - e^{E[A] t}|| is reported separately per n.  The slope
    contract (<= -1.5) is only evaluated in the estimable regime where
    every n has at least 10 exceedances.
    """
    if config.trials < 500:
        raise ValueError("tail scans need at least 500 trials per n")
    points = []
    records = {}
    for n in config.n_values:
        recs = run_error_trials(config, n, kinds=("sot",), center="chernoff",
                                workers=workers, keep_grid=False)
        errs = np.array([r.sup_error_sot for r in recs])
        hits = int(np.sum(errs > config.epsilon))
        lo, hi = wilson_interval(hits, errs.size)
        table = _build_grid_table(config.ensemble, n, config.grid)
        dist = max(_certified_or_probe_norm(config.model, table.chernoff[j] - table.limit[j])
                   for j in range(config.grid_points))
        points.append(TailPoint(n=n, hits=hits, trials=errs.size, frequency=hits / errs.size,
                                wilson_lo=lo, wilson_hi=hi, chernoff_distance=float(dist)))
        records[n] = recs
    hits_list = [p.hits for p in points]
    below = all(h == 0 for h in hits_list)
    slope = None if below else fit_tail_slope(config.n_values, hits_list, config.trials)
    estimable = all(h >= 10 for h in hits_list)
    contract = None
    if estimable and slope is not None:
        contract = slope <= -1.5
    return TailScanResult(epsilon=config.epsilon, points=tuple(points), slope=slope,
                          estimable=estimable, below_resolution=below,
                          contract_met=contract, records=records)


@dataclass(frozen=True)
class BurkholderPoint:
    n: int
    lhs_mean: float    # E ||mu_n||^r
    rhs_mean: float    # E (sum_k ||d_k||^p)^{r/p}
    ratio: float


@dataclass(frozen=True)
class BurkholderSeries:
    r: float
    p_s: float
    t: float
    points: tuple
    degenerate: bool
    max_ratio: float | None
    median_ratio: float | None
    contract_met: bool | None


def burkholder_ratio(config: ExperimentConfig, t: float) -> BurkholderSeries:
    """Monte Carlo estimates of both sides of the moment inequality
    E||mu_n||^r <= C E(sum_k ||d_k||^p)^{r/p} and their ratio per n.

    Trials share seeds across n (common random numbers).  Deterministic
    ensembles make the denominator vanish and are flagged degenerate.
    """
    if any(n > MAX_ENUM_N for n in config.n_values):
        raise CapabilityError(f"increments are exact only for n <= {MAX_ENUM_N}")
    r, p = config.r, config.p_s
    model, x = config.model, np.asarray(config.x)
    points = []
    degenerate = False
    for n in config.n_values:
        lhs_samples = np.empty(config.trials)
        rhs_samples = np.empty(config.trials)
        for trial in range(config.trials):
            path = sample_iid(config.ensemble, n, derive_seed(config.seed, trial))
            mu_vec, ds = centered_product_and_increments(path, config.ensemble, t, n, x)
            lhs_samples[trial] = vector_norm(model, mu_vec) ** r
            rhs_samples[trial] = sum(vector_norm(model, d) ** p for d in ds) ** (r / p)
        lhs, rhs = float(np.mean(lhs_samples)), float(np.mean(rhs_samples))
        if rhs <= 1e-300:
            degenerate = True
            points.append(BurkholderPoint(n=n, lhs_mean=lhs, rhs_mean=rhs, ratio=math.nan))
        else:
            points.append(BurkholderPoint(n=n, lhs_mean=lhs, rhs_mean=rhs, ratio=lhs / rhs))
    if degenerate:
        return BurkholderSeries(r=r, p_s=p, t=t, points=tuple(points), degenerate=True,
                                max_ratio=None, median_ratio=None, contract_met=None)
    ratios = np.array([pt.ratio for pt in points])
    max_ratio = float(np.max(ratios))
    median_ratio = float(np.median(ratios))
    return BurkholderSeries(r=r, p_s=p, t=t, points=tuple(points), degenerate=False,
                            max_ratio=max_ratio, median_ratio=median_ratio,
                            contract_met=max_ratio <= 3.0 * median_ratio)
