"""Verification runners behind the verify-identities and check-bounds
subcommands.  Each runner walks a family of exact identities or proven
norm bounds and returns structured findings; an empty findings list
means everything held at its stated tolerance.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .decomposition import (bound_est_norm, bound_increment, expansion_identity_check,
                            increment_profile, martingale_property_check, term_F, SubsetIndex)
from .ensembles import (DiscreteOperatorDistribution, check_adjoint_expectation,
                        check_expectation_action, check_independence_product,
                        check_random_element_action, sample_iid)
from .rng import derive_seed, generator
from .semigroups import expected_semigroup, expm
from .spaces import operator_norm, rank_one_form, seminorm_i, vector_norm, pairing
from .suite import standard_suite

BOUND_SLACK = 1.0 + 1e-8


@dataclass(frozen=True)
class Finding:
    check: str
    case: str
    deviation: float
    tolerance: float

    def __str__(self):
        return f"{self.check} [{self.case}]: deviation {self.deviation:.3e} > {self.tolerance:.3e}"


def _random_distribution(gen, dim, atoms=3, complex_scalars=False, scale=0.8):
    mats = []
    for _ in range(atoms):
        A = gen.standard_normal((dim, dim))
        if complex_scalars:
            A = A + 1j * gen.standard_normal((dim, dim))
        mats.append(scale * A / max(1.0, np.linalg.norm(A, 2)))
    raw = gen.uniform(0.1, 1.0, size=atoms)
    return DiscreteOperatorDistribution(atoms=tuple(mats), probs=raw / raw.sum())


def verify_expansion_identities(seed=0, dims=(2, 3, 4), n_max=10,
                                s_values=(0.1, 0.5, 1.0), rhos=(0.5, 1.0)) -> list:
    """Expansion identity over the standard suite; findings on failure."""
    findings = []
    for case in standard_suite(dims=dims, rhos=rhos):
        for n in range(1, n_max + 1):
            path = sample_iid(case.ensemble, n, derive_seed(seed, n))
            for s in s_values:
                rep = expansion_identity_check(path, case.ensemble, s, n)
                if not rep.passed:
                    findings.append(Finding("expansion_identity", f"{case.name} n={n} s={s}",
                                            max(rep.deviation, rep.empty_term_deviation,
                                                rep.nonempty_sum_deviation), rep.tolerance))
    return findings


def verify_martingale_property(n_max=6, t=1.0, dims=(2,), rhos=(1.0,)) -> list:
    """Conditional-mean checks with every atom prefix enumerated."""
    findings = []
    for case in standard_suite(dims=dims, rhos=rhos, kinds=("nilpotent", "diagonal", "random")):
        atoms = case.ensemble.atom_count
        for n in range(1, n_max + 1):
            for k in range(1, n + 1):
                for prefix in itertools.product(range(atoms), repeat=k - 1):
                    rep = martingale_property_check(case.ensemble, t, n, k, case.x, prefix)
                    if not rep.passed:
                        findings.append(Finding("martingale_property",
                                                f"{case.name} n={n} k={k} prefix={prefix}",
                                                rep.max_abs, rep.tolerance))
    return findings


def verify_expectation_identities(seed=0, count=100, dims=(2, 3, 4, 5, 6), tol=1e-12) -> list:
    """The four enumeration identities on seeded random discrete laws."""
    findings = []
    for i in range(count):
        gen = generator(derive_seed(seed, i))
        dim = dims[i % len(dims)]
        cplx = bool(i % 2)
        distA = _random_distribution(gen, dim, atoms=2 + i % 3, complex_scalars=cplx)
        distB = _random_distribution(gen, dim, atoms=2, complex_scalars=cplx)
        x = gen.standard_normal(dim) + (1j * gen.standard_normal(dim) if cplx else 0.0)
        xi_atoms = tuple(gen.standard_normal(dim) + (1j * gen.standard_normal(dim) if cplx else 0.0)
                         for _ in range(3))
        raw = gen.uniform(0.1, 1.0, size=3)
        dist_xi = DiscreteOperatorDistribution(atoms=xi_atoms, probs=raw / raw.sum())
        reports = [
            check_independence_product(distA, distB, tol=tol),
            check_expectation_action(distA, x, tol=tol),
            check_adjoint_expectation(distA, tol=tol),
            check_random_element_action(distA, dist_xi, tol=tol),
        ]
        for rep in reports:
            if not rep.passed:
                findings.append(Finding(rep.name, f"seeded case {i} dim={dim}",
                                        rep.max_deviation, rep.tolerance))
    return findings


def verify_seminorm_equivalence(seed=0, trials=200, dim=3, tol=1e-12) -> list:
    """Rank-one form seminorm must reproduce |<f, .>| on random data."""
    findings = []
    gen = generator(seed)
    for i in range(trials):
        f = gen.standard_normal(dim)
        y = gen.standard_normal(dim)
        form = rank_one_form(f)
        dev = abs(seminorm_i(form, y) - abs(pairing(f, y)))
        if dev > tol * max(1.0, abs(pairing(f, y))):
            findings.append(Finding("rank_one_seminorm", f"trial {i}", dev, tol))
    return findings


def verify_bounds(seed=0, trials=200, dims=(2, 3), rhos=(0.5, 1.0),
                  model_for_dim=None, s_max=1.0, n_max=10) -> list:
    """Proven norm bounds on sampled data, with multiplicative slack 1+1e-8.

    Per trial: the growth bound on the expected factor, the distance of a
    sampled factor from the identity, the centered factor bound, a random
    interleaved term against its (2 rho s)^k e^{n rho s} bound, and a
    random increment against (2 rho t / n) e^{3 rho t} ||x||.
    """
    findings = []
    for case in standard_suite(dims=dims, rhos=rhos, model_for_dim=model_for_dim):
        ens, model, rho = case.ensemble, case.model, case.ensemble.rho
        for trial in range(trials):
            gen = generator(derive_seed(seed, trial))
            s = float(gen.uniform(1e-3, s_max))
            n = int(gen.integers(2, n_max + 1))
            t = float(gen.uniform(1e-3, s_max)) * n  # so s_grid = t/n stays desk-scale
            name = f"{case.name} trial={trial}"

            F = expected_semigroup(ens, s)
            nF = operator_norm(model, F, mode="exact").value
            if nF > math.exp(rho * s) * BOUND_SLACK:
                findings.append(Finding("expected_factor_growth", name, nF, math.exp(rho * s)))

            a = int(gen.integers(0, ens.atom_count))
            E = expm(ens.atoms[a], s)
            dI = operator_norm(model, E - np.eye(ens.dim), mode="exact").value
            if dI > rho * s * math.exp(rho * s) * BOUND_SLACK + 1e-15:
                findings.append(Finding("factor_minus_identity", name, dI, rho * s * math.exp(rho * s)))

            dD = operator_norm(model, E - F, mode="exact").value
            if dD > 2 * rho * s * math.exp(rho * s) * BOUND_SLACK + 1e-15:
                findings.append(Finding("centered_factor", name, dD, 2 * rho * s * math.exp(rho * s)))

            path = sample_iid(ens, n, derive_seed(seed, 10_000 + trial))
            members = tuple(sorted(gen.choice(np.arange(1, n + 1), size=int(gen.integers(0, n + 1)),
                                              replace=False).tolist()))
            subset = SubsetIndex(n=n, members=members)
            term = term_F(path, ens, subset, s)
            nT = operator_norm(model, term.value, mode="exact").value
            bound = bound_est_norm(n, subset.size, s, rho)
            if nT > bound * BOUND_SLACK + 1e-15:
                findings.append(Finding("interleaved_term", f"{name} P={members}", nT, bound))

            x_norm = vector_norm(model, case.x)
            for k, d_vec in enumerate(increment_profile(path, ens, t, n, case.x), start=1):
                nd = vector_norm(model, d_vec)
                db = bound_increment(n, k, t, rho, x_norm)
                if nd > db.final * BOUND_SLACK + 1e-15:
                    findings.append(Finding("increment", f"{name} k={k}", nd, db.final))
                if nd > db.intermediate * BOUND_SLACK + 1e-15:
                    findings.append(Finding("increment_intermediate", f"{name} k={k}",
                                            nd, db.intermediate))
    return findings
