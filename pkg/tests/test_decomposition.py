"""Tests for the interleaved decomposition terms, increments, and bounds."""

import itertools
import math

import numpy as np
import pytest

import slln_lab as sl
from slln_lab.decomposition import _enumerate_subset_terms, _position_factors
from slln_lab.errors import CapabilityError
from slln_lab.rng import derive_seed, generator

N2 = np.array([[0.0, 0.0], [1.0, 0.0]])


def _nilpotent_ensemble():
    return sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.0], sl.euclidean_model(2))


def test_delta_deterministic_zero():
    case = sl.suite_case("deterministic", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 4, 1)
    np.testing.assert_allclose(sl.delta(path, case.ensemble, 2, 0.7), np.zeros((2, 2)), atol=1e-15)


def test_delta_nilpotent_linear():
    ens = _nilpotent_ensemble()
    path = sl.path_from_indices([0, 1, 0])
    s = 0.6
    np.testing.assert_allclose(sl.delta(path, ens, 1, s), s * N2, atol=1e-15)
    np.testing.assert_allclose(sl.delta(path, ens, 2, s), -s * N2, atol=1e-15)


def test_delta_mean_zero_by_enumeration():
    case = sl.suite_case("random", 3, 1.0)
    ens = case.ensemble
    s = 0.4
    avg = np.zeros((3, 3))
    for a, p in enumerate(ens.probs):
        path = sl.path_from_indices([a])
        avg = avg + p * sl.delta(path, ens, 1, s)
    assert np.max(np.abs(avg)) <= 1e-13


def test_subset_index_validation():
    sub = sl.SubsetIndex(n=5, members=(1, 3, 5))
    assert sub.size == 3 and sub.max_member == 5
    assert sl.SubsetIndex(n=5, members=()).max_member == 0
    with pytest.raises(ValueError):
        sl.SubsetIndex(n=5, members=(3, 3))
    with pytest.raises(ValueError):
        sl.SubsetIndex(n=5, members=(0, 2))
    with pytest.raises(ValueError):
        sl.SubsetIndex(n=5, members=(2, 6))


def test_term_empty_subset_deterministic():
    case = sl.suite_case("deterministic", 2, 1.0)
    M = case.ensemble.atoms[0]
    path = sl.sample_iid(case.ensemble, 3, 1)
    term = sl.term_F(path, case.ensemble, sl.SubsetIndex(n=3, members=()), 0.5)
    np.testing.assert_allclose(term.value, sl.expm(M, 1.5), atol=1e-12)


def test_term_full_subset_nilpotent_vanishes():
    ens = _nilpotent_ensemble()
    path = sl.path_from_indices([0, 0, 1])
    term = sl.term_F(path, ens, sl.SubsetIndex(n=3, members=(1, 2, 3)), 0.5)
    np.testing.assert_allclose(term.value, np.zeros((2, 2)), atol=1e-15)


def test_term_single_interior_against_direct_product():
    case = sl.suite_case("random", 3, 1.0)
    ens = case.ensemble
    path = sl.sample_iid(ens, 3, 5)
    s = 0.7
    F = sl.expected_semigroup(ens, s)
    direct = F @ sl.delta(path, ens, 2, s) @ F
    term = sl.term_F(path, ens, sl.SubsetIndex(n=3, members=(2,)), s)
    np.testing.assert_allclose(term.value, direct, atol=1e-13)


def test_enumeration_rows_match_term_values():
    case = sl.suite_case("random", 2, 0.5)
    ens = case.ensemble
    n, s = 6, 0.9
    path = sl.sample_iid(ens, n, 8)
    F, E, D = _position_factors(path, ens, n, s, 1e-13)
    rows = _enumerate_subset_terms(F, D, n)
    gen = generator(0)
    for _ in range(12):
        mask = int(gen.integers(0, 2 ** n))
        members = tuple(i + 1 for i in range(n) if mask & (1 << i))
        term = sl.term_F(path, ens, sl.SubsetIndex(n=n, members=members), s)
        np.testing.assert_allclose(rows[mask], term.value, atol=1e-12)


def test_expansion_identity_n1():
    case = sl.suite_case("random", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 1, 2)
    s = 0.8
    F = sl.expected_semigroup(case.ensemble, s)
    lhs = F + sl.delta(path, case.ensemble, 1, s)
    np.testing.assert_allclose(lhs, sl.expm(case.ensemble.atoms[path.indices[0]], s), atol=1e-14)
    assert sl.expansion_identity_check(path, case.ensemble, s).passed


def test_expansion_identity_random_n10():
    case = sl.suite_case("random", 4, 1.0)
    path = sl.sample_iid(case.ensemble, 10, 3)
    rep = sl.expansion_identity_check(path, case.ensemble, 0.5)
    assert rep.passed
    assert rep.deviation <= 1e-10 * rep.scale


def test_expansion_identity_deterministic():
    case = sl.suite_case("deterministic", 3, 0.5)
    path = sl.sample_iid(case.ensemble, 6, 4)
    rep = sl.expansion_identity_check(path, case.ensemble, 1.0)
    assert rep.passed
    assert rep.empty_term_deviation <= 1e-12 * rep.scale


def test_expansion_identity_caps_enumeration():
    case = sl.suite_case("random", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 15, 5)
    with pytest.raises(CapabilityError):
        sl.expansion_identity_check(path, case.ensemble, 0.5)


def test_mu_deterministic_zero():
    case = sl.suite_case("deterministic", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 6, 6)
    assert np.max(np.abs(sl.mu(path, case.ensemble, 1.0, 6, case.x))) <= 1e-13


def test_mu_nilpotent_single_step():
    ens = _nilpotent_ensemble()
    path = sl.path_from_indices([0])
    x = np.array([1.0, 0.0])
    t = 0.9
    np.testing.assert_allclose(sl.mu(path, ens, t, 1, x), t * (N2 @ x), atol=1e-14)


def test_mu_equals_nonempty_subset_sum():
    case = sl.suite_case("random", 3, 1.0)
    ens = case.ensemble
    n, t = 7, 1.0
    path = sl.sample_iid(ens, n, 12)
    s = t / n
    total = np.zeros(3)
    for k in range(1, n + 1):
        for members in itertools.combinations(range(1, n + 1), k):
            term = sl.term_F(path, ens, sl.SubsetIndex(n=n, members=members), s)
            total = total + term.value @ case.x
    np.testing.assert_allclose(sl.mu(path, ens, t, n, case.x), total, atol=1e-10)


def test_increment_k1_single_subset():
    case = sl.suite_case("random", 3, 1.0)
    ens = case.ensemble
    n, t = 5, 1.0
    path = sl.sample_iid(ens, n, 13)
    s = t / n
    F = sl.expected_semigroup(ens, s)
    expected = sl.delta(path, ens, 1, s) @ np.linalg.matrix_power(F, n - 1) @ case.x
    np.testing.assert_allclose(sl.increment_d(path, ens, t, n, 1, case.x), expected, atol=1e-13)


def test_increment_partition_sums_to_mu():
    case = sl.suite_case("random", 4, 0.5)
    ens = case.ensemble
    n, t = 9, 1.0
    path = sl.sample_iid(ens, n, 14)
    ds = sl.increment_profile(path, ens, t, n, case.x)
    total = sum(ds)
    np.testing.assert_allclose(sl.mu(path, ens, t, n, case.x), total, atol=1e-10)


def test_increment_prefix_product_identity():
    """Enumerated increment equals e^{A_1 s}..e^{A_{k-1} s} Delta_k F^{n-k} x."""
    case = sl.suite_case("random", 3, 1.0)
    ens = case.ensemble
    n, k, t = 8, 5, 1.2
    path = sl.sample_iid(ens, n, 15)
    s = t / n
    F = sl.expected_semigroup(ens, s)
    P = np.eye(3)
    for i in range(k - 1):
        P = P @ sl.expm(ens.atoms[path.indices[i]], s)
    direct = P @ sl.delta(path, ens, k, s) @ np.linalg.matrix_power(F, n - k) @ case.x
    np.testing.assert_allclose(sl.increment_d(path, ens, t, n, k, case.x), direct, atol=1e-12)


def test_increment_deterministic_zero():
    case = sl.suite_case("deterministic", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 5, 16)
    for k in range(1, 6):
        assert np.max(np.abs(sl.increment_d(path, case.ensemble, 1.0, 5, k, case.x))) <= 1e-13


def test_martingale_property_examples():
    det = sl.suite_case("deterministic", 2, 1.0)
    assert sl.martingale_property_check(det.ensemble, 1.0, 4, 2, det.x, (0,)).max_abs <= 1e-15
    nil = _nilpotent_ensemble()
    x = np.array([1.0, 0.0])
    for prefix in itertools.product(range(2), repeat=2):
        rep = sl.martingale_property_check(nil, 1.0, 5, 3, x, prefix)
        assert rep.max_abs <= 1e-15
    case = sl.suite_case("random", 3, 1.0)
    rep = sl.martingale_property_check(case.ensemble, 1.0, 6, 4, case.x, (2, 0, 1))
    assert rep.passed


def test_martingale_full_filtration_small():
    case = sl.suite_case("random", 2, 1.0)
    atoms = case.ensemble.atom_count
    for n in range(1, 6):
        for k in range(1, n + 1):
            for prefix in itertools.product(range(atoms), repeat=k - 1):
                rep = sl.martingale_property_check(case.ensemble, 1.0, n, k, case.x, prefix)
                assert rep.passed, (n, k, prefix, rep.max_abs)


def test_mean_matched_probe_detects_heterogeneity():
    """Equal means with different laws break the conditional centering."""
    model = sl.euclidean_model(2)
    D = np.diag([1.0, -1.0])
    ens = sl.build_symmetric_ensemble(np.zeros((2, 2)), [D], [1.0], model)
    alt = sl.DiscreteOperatorDistribution(atoms=(2 * D, -2 * D), probs=np.array([0.5, 0.5]))
    x = np.array([1.0, 1.0])
    same = sl.mean_matched_martingale_probe(ens, ens.dist, 1.0, 4, 2, x, (0,))
    assert same.max_abs <= 1e-14
    # alt has the same (zero) mean but cosh(2s) != cosh(s) exponential moments
    probe = sl.mean_matched_martingale_probe(ens, alt, 1.0, 4, 2, x, (0,))
    assert probe.max_abs > 1e-3


def test_bound_est_norm_values():
    assert sl.bound_est_norm(3, 0, 0.5, 1.0) == pytest.approx(math.exp(1.5))
    assert sl.bound_est_norm(3, 2, 0.0, 1.0) == 0.0
    assert sl.bound_est_norm(4, 2, 0.5, 1.0) == pytest.approx(math.exp(2.0))
    with pytest.raises(ValueError):
        sl.bound_est_norm(2, 3, 0.5, 1.0)


def test_bound_increment_rejects_bad_indices():
    with pytest.raises(ValueError):
        sl.bound_increment(2, 3, 1.0, 1.0, 1.0)


def test_bound_increment_binomial_identity():
    # sum_j C(k-1, j-1) z^j = z (1 + z)^{k-1}; at k=3, z=1 both sides are 4
    z = 1.0
    lhs = math.fsum(math.comb(2, j - 1) * z ** j for j in range(1, 4))
    assert lhs == pytest.approx(z * (1 + z) ** 2) == pytest.approx(4.0)
    # the bound exposes the same two forms (n=4, t=2, rho=1 gives z=1)
    b = sl.bound_increment(4, 3, 2.0, 1.0, 1.0)
    assert b.binomial_sum == pytest.approx(math.exp(2.0) * z * (1 + z) ** 2)
    assert b.intermediate == pytest.approx(b.binomial_sum, rel=1e-12)
    assert b.intermediate <= b.final * (1 + 1e-12)
    assert sl.bound_increment(4, 1, 0.0, 1.0, 1.0).final == 0.0


def test_bound_increment_intermediate_below_final_grid():
    for n in (2, 5, 9):
        for k in range(1, n + 1):
            for rt in (0.1, 0.5, 1.0, 2.0):
                b = sl.bound_increment(n, k, rt, 1.0, 1.0)
                assert b.binomial_sum <= b.intermediate * (1 + 1e-12)
                assert b.intermediate <= b.final * (1 + 1e-12)


def test_term_norms_within_est_bound():
    gen = generator(77)
    for case in sl.standard_suite(dims=(2, 3), rhos=(0.5, 1.0)):
        ens, model = case.ensemble, case.model
        for trial in range(25):
            n = int(gen.integers(2, 9))
            s = float(gen.uniform(0.01, 1.0))
            path = sl.sample_iid(ens, n, derive_seed(7, trial))
            size = int(gen.integers(0, n + 1))
            members = tuple(sorted(gen.choice(np.arange(1, n + 1), size=size, replace=False).tolist()))
            term = sl.term_F(path, ens, sl.SubsetIndex(n=n, members=members), s)
            nrm = sl.operator_norm(model, term.value).value
            assert nrm <= sl.bound_est_norm(n, size, s, ens.rho) * (1 + 1e-8) + 1e-15


def test_increment_norms_within_bound():
    gen = generator(78)
    for case in sl.standard_suite(dims=(2, 3), rhos=(1.0,), kinds=("nilpotent", "random")):
        ens, model = case.ensemble, case.model
        x_norm = sl.vector_norm(model, case.x)
        for trial in range(15):
            n = int(gen.integers(2, 9))
            t = float(gen.uniform(0.05, 2.0))
            path = sl.sample_iid(ens, n, derive_seed(9, trial))
            for k, d in enumerate(sl.increment_profile(path, ens, t, n, case.x), start=1):
                bound = sl.bound_increment(n, k, t, ens.rho, x_norm)
                assert sl.vector_norm(model, d) <= bound.intermediate * (1 + 1e-8) + 1e-15
