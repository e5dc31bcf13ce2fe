"""Configuration documents: a versioned JSON schema, strict validation
with every problem reported at once, and normalization into an
ExperimentConfig.

Schema (version 1), unknown keys rejected everywhere:

    {
      "schema_version": 1,
      "model": {"kind": "sequence_p"|"schatten_p"|"max_norm",
                 "p": number (absent for max_norm),
                 "dim": int, "scalars": "real"|"complex"},
      "ensemble": {"kind": "standard", "name": <suite kind>, "rho": number}
                | {"kind": "explicit", "atoms": [[[...]]], "probs": [...]}
                | {"kind": "symmetric", "mean": [[...]],
                   "perturbations": [[[...]]], "weights": [...]},
      "x": [...],                  # optional, default first basis element
      "functional": [...] | null,  # optional
      "form": {"kind": "rank_one", "f": [...]}
            | {"kind": "truncation", "N": int}
            | {"kind": "gram", "matrix": [[...]]} | null,
      "T": number, "grid_points": int, "n_values": [int...],
      "trials": int, "seed": int, "epsilon": number,
      "p_s": number, "r": number
    }

Defaults: grid_points 65, trials 1000, n_values [16, 64, 256], seed 0,
epsilon 0.1, T 1.0, p_s = min(p, 2) for smooth models else 2, and
r = 2 p_s / (p_s - 1).
"""

import json

import numpy as np

from .errors import ConfigError
from .experiments import ExperimentConfig
from .ensembles import DiscreteOperatorDistribution, GeneratorEnsemble, build_symmetric_ensemble
from .records import config_hash
from .spaces import PositiveForm, SpaceModel, rank_one_form, truncation_form
from .suite import SUITE_KINDS, suite_case

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "model", "ensemble", "x", "functional", "form",
             "T", "grid_points", "n_values", "trials", "seed", "epsilon", "p_s", "r"}
_MODEL_KEYS = {"kind", "p", "dim", "scalars"}
_FORM_KEYS = {"kind", "f", "N", "matrix"}
_ENSEMBLE_KEYS = {"kind", "name", "rho", "atoms", "probs", "mean", "perturbations", "weights"}

PROB_SUM_CONFIG_TOL = 1e-9


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        document = json.load(fh)
    return validate_config(document)


def document_hash(document) -> str:
    return config_hash(document)


def _check_unknown(doc, allowed, where, problems):
    for key in doc:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")


def _parse_model(doc, problems):
    if not isinstance(doc, dict):
        problems.append("model: must be an object")
        return None
    _check_unknown(doc, _MODEL_KEYS, "model", problems)
    kind = doc.get("kind")
    dim = doc.get("dim")
    if kind not in ("sequence_p", "schatten_p", "max_norm"):
        problems.append(f"model.kind: unknown kind {kind!r}")
        return None
    if not isinstance(dim, int) or dim < 1:
        problems.append("model.dim: must be a positive integer")
        return None
    try:
        return SpaceModel(kind=kind, dim=dim,
                          p=doc.get("p"), scalars=doc.get("scalars", "real"))
    except ValueError as exc:
        problems.append(f"model: {exc}")
        return None


def _parse_matrix(value, where, problems):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        try:
            arr = np.asarray(value, dtype=complex)
        except (TypeError, ValueError):
            problems.append(f"{where}: not a numeric array")
            return None
    if not np.all(np.isfinite(arr)):
        problems.append(f"{where}: non-finite entries")
        return None
    return arr


def _parse_ensemble(doc, model, problems):
    if not isinstance(doc, dict):
        problems.append("ensemble: must be an object")
        return None
    _check_unknown(doc, _ENSEMBLE_KEYS, "ensemble", problems)
    kind = doc.get("kind")
    if kind == "standard":
        name = doc.get("name")
        if name not in SUITE_KINDS:
            problems.append(f"ensemble.name: unknown suite ensemble {name!r}")
            return None
        rho = doc.get("rho", 1.0)
        if not isinstance(rho, (int, float)) or rho <= 0:
            problems.append("ensemble.rho: must be a positive number")
            return None
        try:
            return suite_case(name, model.dim, float(rho), model).ensemble
        except Exception as exc:  # noqa: BLE001 - report, don't crash
            problems.append(f"ensemble: {exc}")
            return None
    if kind == "explicit":
        atoms = doc.get("atoms")
        probs = doc.get("probs")
        if not isinstance(atoms, list) or not atoms:
            problems.append("ensemble.atoms: must be a non-empty list of matrices")
            return None
        if not isinstance(probs, list) or len(probs) != len(atoms):
            problems.append("ensemble.probs: must list one probability per atom")
            return None
        total = sum(probs)
        if abs(total - 1.0) > PROB_SUM_CONFIG_TOL:
            problems.append(f"ensemble.probs: sum to {total!r}, not 1")
            return None
        mats = [_parse_matrix(a, f"ensemble.atoms[{i}]", problems) for i, a in enumerate(atoms)]
        if any(m is None for m in mats):
            return None
        # renormalize the tiny float slack so the exact-sum invariant holds
        weights = np.array(probs, dtype=float)
        weights = weights / weights.sum()
        try:
            dist = DiscreteOperatorDistribution(atoms=tuple(mats), probs=weights)
            return GeneratorEnsemble.from_distribution(dist, model, rho=doc.get("rho"))
        except Exception as exc:  # noqa: BLE001
            problems.append(f"ensemble: {exc}")
            return None
    if kind == "symmetric":
        mean = _parse_matrix(doc.get("mean"), "ensemble.mean", problems)
        perts = doc.get("perturbations")
        weights = doc.get("weights")
        if mean is None:
            return None
        if not isinstance(perts, list) or not isinstance(weights, list):
            problems.append("ensemble: symmetric kind needs perturbations and weights lists")
            return None
        mats = [_parse_matrix(p, f"ensemble.perturbations[{i}]", problems) for i, p in enumerate(perts)]
        if any(m is None for m in mats):
            return None
        try:
            return build_symmetric_ensemble(mean, mats, weights, model)
        except Exception as exc:  # noqa: BLE001
            problems.append(f"ensemble: {exc}")
            return None
    problems.append(f"ensemble.kind: unknown kind {kind!r}")
    return None


def _parse_form(doc, model, problems):
    if doc is None:
        return None
    if not isinstance(doc, dict):
        problems.append("form: must be an object or null")
        return None
    _check_unknown(doc, _FORM_KEYS, "form", problems)
    kind = doc.get("kind")
    try:
        if kind == "rank_one":
            f = _parse_matrix(doc.get("f"), "form.f", problems)
            return None if f is None else rank_one_form(f)
        if kind == "truncation":
            return truncation_form(int(doc.get("N", 1)), model.coordinate_count)
        if kind == "gram":
            g = _parse_matrix(doc.get("matrix"), "form.matrix", problems)
            return None if g is None else PositiveForm(g)
    except Exception as exc:  # noqa: BLE001
        problems.append(f"form: {exc}")
        return None
    problems.append(f"form.kind: unknown kind {kind!r}")
    return None


def validate_config(document) -> ExperimentConfig:
    """Normalize a configuration document, reporting every problem at once."""
    problems = []
    if not isinstance(document, dict):
        raise ConfigError(["document must be a JSON object"])
    _check_unknown(document, _TOP_KEYS, "top level", problems)
    version = document.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        problems.append(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    model = _parse_model(document.get("model"), problems)
    ensemble = None
    if model is not None and "ensemble" in document:
        ensemble = _parse_ensemble(document["ensemble"], model, problems)
    elif "ensemble" not in document:
        problems.append("ensemble: required")

    x = None
    if model is not None:
        if "x" in document:
            x = _parse_matrix(document["x"], "x", problems)
            if x is not None and x.shape != model.element_shape:
                problems.append(f"x: shape {x.shape} does not match model shape {model.element_shape}")
                x = None
        else:
            x = np.zeros(model.element_shape)
            x[(0,) * len(model.element_shape)] = 1.0

    functional = None
    if document.get("functional") is not None and model is not None:
        functional = _parse_matrix(document["functional"], "functional", problems)
        if functional is not None and functional.shape != model.element_shape:
            problems.append("functional: shape does not match the model")
            functional = None

    form = _parse_form(document.get("form"), model, problems) if model is not None else None

    T = document.get("T", 1.0)
    if not isinstance(T, (int, float)) or not (0.0 <= T < float("inf")):
        problems.append("T: must be a finite nonnegative number")
    grid_points = document.get("grid_points", 65)
    if not isinstance(grid_points, int) or grid_points < 2:
        problems.append("grid_points: must be an integer >= 2")
    n_values = document.get("n_values", [16, 64, 256])
    if (not isinstance(n_values, list) or not n_values
            or any((not isinstance(n, int)) or n <= 0 for n in n_values)):
        problems.append("n_values: must be a list of positive integers")
    elif any(b <= a for a, b in zip(n_values, n_values[1:])):
        problems.append("n_values: must be strictly increasing")
    trials = document.get("trials", 1000)
    if not isinstance(trials, int) or trials < 1:
        problems.append("trials: must be a positive integer")
    seed = document.get("seed", 0)
    if not isinstance(seed, int):
        problems.append("seed: must be an integer")
    epsilon = document.get("epsilon", 0.1)
    if not isinstance(epsilon, (int, float)) or epsilon <= 0:
        problems.append("epsilon: must be a positive number")

    p_s = document.get("p_s")
    if p_s is None and model is not None:
        if model.kind != "max_norm" and model.p is not None and model.p > 1.0:
            p_s = min(float(model.p), 2.0)
        else:
            p_s = 2.0  # formal default for non-smooth (conjecture) models
    if p_s is not None and (not isinstance(p_s, (int, float)) or not (1.0 < p_s <= 2.0)):
        problems.append("p_s: must lie in (1, 2]")
    r = document.get("r")
    if r is None and isinstance(p_s, (int, float)) and 1.0 < p_s <= 2.0:
        r = 2.0 * p_s / (p_s - 1.0)
    if r is not None and (not isinstance(r, (int, float)) or r < 1.0):
        problems.append("r: must be a number >= 1")

    if problems or model is None or ensemble is None or x is None:
        if not problems:
            problems.append("configuration incomplete")
        raise ConfigError(problems)
    try:
        return ExperimentConfig(model=model, ensemble=ensemble, x=x, T=float(T),
                                grid_points=grid_points, n_values=tuple(n_values),
                                trials=trials, seed=seed, epsilon=float(epsilon),
                                p_s=float(p_s), r=float(r), functional=functional, form=form)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
