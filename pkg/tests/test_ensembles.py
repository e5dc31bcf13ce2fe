"""Tests for discrete operator laws, sampling, and expectation identities."""

import numpy as np
import pytest

import slln_lab as sl
from slln_lab.rng import derive_seed, generator

N2 = np.array([[0.0, 0.0], [1.0, 0.0]])


def _dist(atoms, probs):
    return sl.DiscreteOperatorDistribution(atoms=tuple(np.asarray(a) for a in atoms),
                                           probs=np.asarray(probs, dtype=float))


def _random_dist(gen, dim, k=3, complex_scalars=False):
    atoms = []
    for _ in range(k):
        A = gen.standard_normal((dim, dim))
        if complex_scalars:
            A = A + 1j * gen.standard_normal((dim, dim))
        atoms.append(0.7 * A / max(1.0, np.linalg.norm(A, 2)))
    raw = gen.uniform(0.1, 1.0, size=k)
    return _dist(atoms, raw / raw.sum())


def test_expectation_examples():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(sl.expectation(_dist([M], [1.0])), M)
    np.testing.assert_allclose(sl.expectation(_dist([N2, -N2], [0.5, 0.5])), np.zeros((2, 2)))
    got = sl.expectation(_dist([np.eye(2), 3 * np.eye(2)], [0.25, 0.75]))
    np.testing.assert_allclose(got, 2.5 * np.eye(2))


def test_distribution_validation():
    with pytest.raises(ValueError):
        _dist([np.eye(2), np.eye(3)], [0.5, 0.5])
    with pytest.raises(ValueError):
        _dist([np.eye(2)], [0.9])
    with pytest.raises(ValueError):
        _dist([np.eye(2), np.eye(2)], [1.5, -0.5])


def test_build_symmetric_deterministic():
    model = sl.euclidean_model(2)
    M = np.array([[0.5, 0.0], [0.0, -0.5]])
    ens = sl.build_symmetric_ensemble(M, [], [], model)
    assert ens.atom_count == 1
    np.testing.assert_array_equal(ens.mean, M)


def test_build_symmetric_nilpotent():
    model = sl.euclidean_model(2)
    ens = sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.0], model)
    assert ens.atom_count == 2
    np.testing.assert_allclose(ens.mean, np.zeros((2, 2)))
    np.testing.assert_allclose(sl.expectation(ens.dist), np.zeros((2, 2)), atol=1e-16)


def test_build_symmetric_rho_certified_against_svd():
    model = sl.euclidean_model(2)
    M = np.diag([1.0, -1.0])
    D = np.array([[0.0, 1.0], [0.0, 0.0]])
    ens = sl.build_symmetric_ensemble(M, [D], [1.0], model)
    for atom in ens.atoms:
        assert np.linalg.svd(atom, compute_uv=False)[0] <= ens.rho + 1e-10


def test_build_symmetric_dyadic_mean_exact():
    model = sl.euclidean_model(2)
    M = np.array([[1.0, 0.25], [-0.5, 2.0]])
    D1 = np.array([[0.25, 0.0], [0.125, -0.5]])
    D2 = np.array([[0.0, 0.5], [0.0, 0.25]])
    ens = sl.build_symmetric_ensemble(M, [D1, D2], [0.5, 0.25], model)
    # dyadic entries and weights: the weighted atom sum reproduces M bitwise
    assert np.array_equal(sl.expectation(ens.dist), M)


def test_build_symmetric_rejects_bad_weights():
    model = sl.euclidean_model(2)
    with pytest.raises(ValueError):
        sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [1.5], model)
    with pytest.raises(ValueError):
        sl.build_symmetric_ensemble(np.zeros((2, 2)), [N2], [-0.1], model)


def test_ensemble_rejects_undersized_rho():
    model = sl.euclidean_model(2)
    dist = _dist([np.diag([1.0, 0.0])], [1.0])
    with pytest.raises(ValueError):
        sl.GeneratorEnsemble(dist=dist, model=model, rho=0.5, mean=np.diag([1.0, 0.0]))


def test_ensemble_budget_in_uncertified_model_uses_interpolation():
    """General-p models certify rho through the interpolation upper bound."""
    model = sl.sequence_model(1.5, 2)
    A = np.array([[0.0, 2.0], [0.5, 0.0]])
    ens = sl.GeneratorEnsemble.from_distribution(_dist([A], [1.0]), model)
    from slln_lab.spaces import norm_budget_bound
    expected = 2.0 ** (1 / 1.5) * 2.0 ** (1 - 1 / 1.5)  # colsum 2, rowsum 2
    assert ens.rho == pytest.approx(expected)
    assert norm_budget_bound(model, A) >= sl.operator_norm(
        model, A, mode="lower_bound", probes=2000).value - 1e-12


def test_sample_iid_determinism_and_prefix():
    case = sl.suite_case("random", 3, 1.0)
    p1 = sl.sample_iid(case.ensemble, 50, 1234)
    p2 = sl.sample_iid(case.ensemble, 50, 1234)
    assert np.array_equal(p1.indices, p2.indices)
    longer = sl.sample_iid(case.ensemble, 500, 1234)
    assert np.array_equal(longer.indices[:50], p1.indices)
    assert p1.prefix(10).indices.shape == (10,)


def test_sample_iid_single_atom():
    case = sl.suite_case("deterministic", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 100, 9)
    assert np.all(path.indices == 0)


def test_sample_iid_frequencies():
    case = sl.suite_case("nilpotent", 2, 1.0)
    path = sl.sample_iid(case.ensemble, 10 ** 5, 777)
    freq = np.mean(path.indices == 0)
    assert 0.49 <= freq <= 0.51  # 6 sigma band for Binomial(1e5, 1/2)
    # looser uniform bound, also exercised on a three-atom law
    bound = 4.0 * np.sqrt(np.log(10 ** 5) / 10 ** 5)
    assert abs(freq - 0.5) <= bound
    tri = sl.suite_case("random", 3, 1.0)
    tri_path = sl.sample_iid(tri.ensemble, 10 ** 5, 778)
    for a, prob in enumerate(tri.ensemble.probs):
        assert abs(np.mean(tri_path.indices == a) - prob) <= bound


def test_derived_seeds_differ():
    seeds = {derive_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000


def test_independence_product_examples():
    det = _dist([np.array([[1.0, 1.0], [0.0, 1.0]])], [1.0])
    rnd = _random_dist(generator(1), 2)
    assert sl.check_independence_product(det, rnd).passed
    sym = _dist([N2, -N2], [0.5, 0.5])
    rep = sl.check_independence_product(sym, sym)
    assert rep.passed
    np.testing.assert_allclose(sl.expectation(sym) @ sl.expectation(sym), np.zeros((2, 2)))


def test_independence_product_enumeration_oracle():
    genr = generator(5)
    distA = _random_dist(genr, 3, k=3)
    distB = _random_dist(genr, 3, k=2)
    rep = sl.check_independence_product(distA, distB)
    assert rep.passed and rep.max_deviation <= 1e-12


def test_expectation_action():
    genr = generator(8)
    dist = _random_dist(genr, 3)
    assert sl.check_expectation_action(dist, np.zeros(3)).max_deviation == 0.0
    assert sl.check_expectation_action(dist, genr.standard_normal(3)).passed


def test_adjoint_expectation():
    genr = generator(21)
    sym = _dist([np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])], [0.5, 0.5])
    assert sl.check_adjoint_expectation(sym).max_deviation == 0.0
    cdist = _random_dist(genr, 4, complex_scalars=True)
    assert sl.check_adjoint_expectation(cdist).passed


def test_random_element_action():
    genr = generator(34)
    distA = _random_dist(genr, 3)
    # deterministic element: reduces to the expectation-action identity
    xi = _dist([genr.standard_normal(3)], [1.0])
    assert sl.check_random_element_action(distA, xi).passed
    # symmetric element law: both sides vanish
    v = genr.standard_normal(3)
    sym = _dist([v, -v], [0.5, 0.5])
    rep = sl.check_random_element_action(distA, sym)
    assert rep.passed
    xi3 = _dist([genr.standard_normal(3) for _ in range(3)], [0.2, 0.3, 0.5])
    assert sl.check_random_element_action(distA, xi3).passed


def test_identity_checks_over_seeded_ensembles():
    for i in range(60):
        genr = generator(derive_seed(1000, i))
        dim = 2 + i % 5
        cplx = bool(i % 2)
        distA = _random_dist(genr, dim, k=2 + i % 3, complex_scalars=cplx)
        distB = _random_dist(genr, dim, k=2, complex_scalars=cplx)
        x = genr.standard_normal(dim)
        assert sl.check_independence_product(distA, distB).passed
        assert sl.check_expectation_action(distA, x).passed
        assert sl.check_adjoint_expectation(distA).passed


def test_suite_atom_norms_within_budget():
    for case in sl.standard_suite(dims=(2, 4), rhos=(0.5, 1.0)):
        for atom in case.ensemble.atoms:
            nrm = sl.operator_norm(case.model, atom).value
            assert nrm <= case.ensemble.rho + 1e-10
