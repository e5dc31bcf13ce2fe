"""Tests for the matrix exponential, sampled products, and the iterate."""

import math

import numpy as np
import pytest
import scipy.linalg

import slln_lab as sl
from slln_lab.rng import generator
from slln_lab.semigroups import TimeGrid

N2 = np.array([[0.0, 0.0], [1.0, 0.0]])


def test_expm_zero_matrix():
    np.testing.assert_array_equal(sl.expm(np.zeros((3, 3)), 1.7), np.eye(3))


def test_expm_nilpotent_exact():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(sl.expm(A, 2.0), np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_expm_rotation():
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    R = sl.expm(A, np.pi / 2)
    np.testing.assert_allclose(R, np.array([[0.0, -1.0], [1.0, 0.0]]), atol=1e-12)


def test_expm_against_scipy():
    gen = generator(3)
    for _ in range(20):
        A = gen.standard_normal((4, 4))
        s = float(gen.uniform(0.0, 2.0))
        ours = sl.expm(A, s)
        ref = scipy.linalg.expm(A * s)
        scale = np.linalg.norm(ref, 2)
        assert np.linalg.norm(ours - ref, 2) <= 1e-12 * max(1.0, scale)


def test_expm_complex_and_negative_time():
    gen = generator(4)
    A = gen.standard_normal((3, 3)) + 1j * gen.standard_normal((3, 3))
    for s in (-0.7, 0.4):
        np.testing.assert_allclose(sl.expm(A, s), scipy.linalg.expm(A * s), atol=1e-11)


def test_expm_batched_matches_scalar():
    gen = generator(5)
    A = gen.standard_normal((3, 3))
    s_values = np.array([0.0, 0.1, 0.5, 1.3])
    batch = sl.expm(A, s_values)
    assert batch.shape == (4, 3, 3)
    for j, s in enumerate(s_values):
        np.testing.assert_allclose(batch[j], scipy.linalg.expm(A * s), atol=1e-12)


def test_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        sl.expm(np.array([[np.nan, 0.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        sl.expm(np.zeros((2, 3)), 1.0)


def test_semigroup_law():
    gen = generator(6)
    for _ in range(10):
        A = gen.standard_normal((3, 3))
        A = 4.0 * A / np.linalg.norm(A, 2)
        s, u = float(gen.uniform(0, 2)), float(gen.uniform(0, 2))
        lhs = sl.expm(A, s + u)
        rhs = sl.expm(A, s) @ sl.expm(A, u)
        assert np.max(np.abs(lhs - rhs)) <= 1e-11 * max(1.0, np.max(np.abs(lhs)))


def test_expm_norm_bounds():
    model = sl.euclidean_model(3)
    gen = generator(7)
    for _ in range(50):
        A = gen.standard_normal((3, 3))
        rho = np.linalg.norm(A, 2)
        s = float(gen.uniform(0, 1.5))
        E = sl.expm(A, s)
        assert sl.operator_norm(model, E).value <= math.exp(rho * s) * (1 + 1e-9)
        assert sl.operator_norm(model, E - np.eye(3)).value <= rho * s * math.exp(rho * s) * (1 + 1e-9) + 1e-15


def test_time_grid():
    grid = TimeGrid(2.0, 5)
    np.testing.assert_allclose(grid.values, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert not grid.degenerate
    assert TimeGrid(0.0, 3).degenerate
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 4)


def test_product_composition_basics():
    case = sl.suite_case("random", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 5, 11)
    one = sl.product_composition(path, case.ensemble, 0.8, n=1)
    np.testing.assert_allclose(one, sl.expm(case.ensemble.atoms[path.indices[0]], 0.8))
    with pytest.raises(ValueError):
        sl.product_composition(path, case.ensemble, -1.0)


def test_product_composition_commuting_atoms():
    model = sl.euclidean_model(2)
    A = np.diag([0.3, -0.2])
    ens = sl.GeneratorEnsemble.deterministic(A, model)
    path = sl.sample_iid(ens, 40, 3)
    got = sl.product_composition(path, ens, 1.0)
    np.testing.assert_allclose(got, sl.expm(A, 1.0), atol=40 * 1e-13)


def test_product_composition_nilpotent_cancellation():
    model = sl.euclidean_model(2)
    ens = sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.0], model)
    path = sl.path_from_indices([0, 1])  # +N then -N
    got = sl.product_composition(path, ens, 1.0)
    np.testing.assert_allclose(got, np.eye(2), atol=1e-15)


def test_expected_semigroup_cases():
    model = sl.euclidean_model(2)
    M = np.array([[0.1, 0.4], [0.0, -0.3]])
    det = sl.GeneratorEnsemble.deterministic(M, model)
    np.testing.assert_allclose(sl.expected_semigroup(det, 0.7), sl.expm(M, 0.7))
    nil = sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.0], model)
    np.testing.assert_allclose(sl.expected_semigroup(nil, 1.3), np.eye(2), atol=1e-15)
    scal = sl.GeneratorEnsemble.from_distribution(
        sl.DiscreteOperatorDistribution(atoms=(np.zeros((1, 1)), 2 * np.eye(1)),
                                        probs=np.array([0.5, 0.5])),
        sl.euclidean_model(1))
    s = 0.3
    assert sl.expected_semigroup(scal, s)[0, 0] == pytest.approx((1 + math.exp(2 * s)) / 2, rel=1e-13)


def test_chernoff_iterate_deterministic_exact():
    model = sl.euclidean_model(3)
    case = sl.suite_case("deterministic", 3, 1.0)
    for n in (1, 7, 64, 1024):
        diff = sl.chernoff_iterate(case.ensemble, 1.0, n) - sl.limit_semigroup(case.ensemble, 1.0)
        assert sl.operator_norm(model, diff).value <= 2e-12


def test_chernoff_iterate_scalar_oracle():
    scal = sl.GeneratorEnsemble.from_distribution(
        sl.DiscreteOperatorDistribution(atoms=(np.zeros((1, 1)), 2 * np.eye(1)),
                                        probs=np.array([0.5, 0.5])),
        sl.euclidean_model(1))
    n = 10 ** 4
    got = sl.chernoff_iterate(scal, 1.0, n)[0, 0]
    oracle = ((1 + math.exp(2.0 / n)) / 2) ** n
    assert got == pytest.approx(oracle, rel=1e-11)
    assert abs(got - math.e) <= 1e-3


def test_chernoff_iterate_nilpotent_identity():
    model = sl.euclidean_model(2)
    ens = sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.0], model)
    for n in (1, 5, 50):
        np.testing.assert_allclose(sl.chernoff_iterate(ens, 1.0, n), np.eye(2), atol=1e-13)


def test_limit_semigroup_cases():
    model = sl.euclidean_model(2)
    ens = sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.0], model)
    np.testing.assert_array_equal(sl.limit_semigroup(ens, 2.0), np.eye(2))
    with pytest.raises(ValueError):
        sl.limit_semigroup(ens, -0.1)


def test_chernoff_error_trend_decreases():
    """Iterate error vs the mean semigroup shrinks from n=16 to n=1024."""
    model = sl.euclidean_model(2)
    for case in sl.standard_suite(dims=(2, 3), rhos=(0.5, 1.0)):
        ref = sl.limit_semigroup(case.ensemble, 1.0)
        errs = {}
        for n in (16, 64, 256, 1024):
            diff = sl.chernoff_iterate(case.ensemble, 1.0, n) - ref
            errs[n] = sl.operator_norm(case.model, diff).value
        ns = sorted(errs)
        for a, b in zip(ns, ns[1:]):
            assert errs[b] <= errs[a] * 1.1 + 1e-12  # rounding floor
        if errs[16] > 1e-11:  # meaningful error at the coarse end
            assert errs[1024] < errs[16]


def test_chernoff_conditions_deterministic():
    case = sl.suite_case("deterministic", 2, 1.0)
    rep = sl.chernoff_conditions_check(case.ensemble, TimeGrid(1.0, 17))
    assert rep.passed
    assert rep.derivative_error_final <= 1e-7 * (1 + np.max(np.abs(case.ensemble.mean)))
    assert rep.derivative_decay_ok


def test_chernoff_conditions_nilpotent():
    model = sl.euclidean_model(2)
    ens = sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.0], model)
    rep = sl.chernoff_conditions_check(ens, TimeGrid(1.0, 9))
    assert rep.passed
    assert rep.identity_deviation == 0.0
    # F is identically I here, so the derivative matches the zero mean exactly
    assert rep.derivative_error_final <= 1e-12


def test_chernoff_conditions_standard_suite():
    for case in sl.standard_suite(dims=(2, 3), rhos=(1.0,)):
        rep = sl.chernoff_conditions_check(case.ensemble, TimeGrid(1.0, 9))
        assert rep.passed, (case.name, rep.failed_conditions)
