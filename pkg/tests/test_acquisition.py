import math

import numpy as np
import pytest
from scipy.special import ndtri

from pcabo.acquisition import (
    BoundingCube,
    boundary_distance,
    bounding_cube,
    expected_improvement,
    penalized_ei,
)
from pcabo.de import DeConfig, de_maximize
from pcabo.doe import BoxDomain
from pcabo.gpr import Kernel, condition, fit, predict
from pcabo.pca import PcaMap, fit_pca, forward_map, inverse_map


def mc_ei(mean, sd, best, rng, draws=1_000_000):
    """Monte Carlo EI with one normal draw per probability stratum.

    Returns the estimate and the plain i.i.d. standard error, which
    overstates the error of the stratified estimate.
    """
    u = (np.arange(draws) + rng.random(draws)) / draws
    samples = np.maximum(0.0, best - (mean + sd * ndtri(u)))
    return samples.mean(), samples.std(ddof=1) / math.sqrt(draws)


def fitted_map_and_model(seed, D=5, n=25):
    rng = np.random.default_rng(seed)
    dom = BoxDomain.cube(-5, 5, D)
    X = rng.uniform(-5, 5, (n, D))
    y = ((X[:, :2] - 1) ** 2).sum(1)
    pmap = fit_pca(X, y, alpha=0.9)
    model = fit(forward_map(pmap, X), y, seed=seed, restarts=2)
    return dom, pmap, model, y.min()


def test_ei_deterministic_cases():
    assert expected_improvement(1.0, 0.0, 3.0) == 2.0
    assert expected_improvement(3.0, 0.0, 1.0) == 0.0


def test_ei_at_the_incumbent():
    assert expected_improvement(0.7, 1.0, 0.7) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-12)
    assert expected_improvement(0.7, 1.0, 0.7) == pytest.approx(0.398942, abs=1e-6)


def test_ei_incumbent_monte_carlo():
    est, _ = mc_ei(0.0, 1.0, 0.0, np.random.default_rng(0))
    assert abs(est - 0.398942) < 1e-3


def test_ei_matches_monte_carlo_on_random_triples():
    rng = np.random.default_rng(1)
    for _ in range(100):
        # standardized gap within +-3 sd so the sample sees improvements at all
        mean, sd = rng.normal(0, 3), rng.uniform(0.01, 5)
        best = mean + sd * rng.uniform(-3, 3)
        est, se = mc_ei(mean, sd, best, rng)
        assert abs(expected_improvement(mean, sd, best) - est) < 3 * se + 1e-12


def test_ei_monotone():
    means = np.linspace(-3, 3, 61)
    ei = expected_improvement(means, np.full(61, 0.8), 0.0)
    assert np.all(np.diff(ei) < 0)
    sds = np.linspace(0.1, 4, 40)
    ei = expected_improvement(np.full(40, 1.0), sds, 0.0)
    assert np.all(np.diff(ei) > 0)


def test_ei_nonnegative_and_vectorized():
    rng = np.random.default_rng(2)
    ei = expected_improvement(rng.normal(0, 50, 1000), rng.uniform(0, 1e-3, 1000), 0.0)
    assert ei.shape == (1000,)
    assert np.all(ei >= 0)


def test_ei_rejects_negative_stddev():
    with pytest.raises(ValueError):
        expected_improvement(0.0, -1.0, 0.0)


def test_boundary_distance_examples():
    dom = BoxDomain([0, 0], [1, 1])
    assert boundary_distance([2.0, 0.5], dom) == pytest.approx(1.0)
    assert boundary_distance([0.3, 0.9], dom) == 0.0
    assert boundary_distance([2.0, 2.0], dom) == pytest.approx(math.sqrt(2))
    np.testing.assert_allclose(boundary_distance(np.array([[-1.0, 0.5], [0.5, 0.5]]), dom), [1.0, 0.0])


def test_boundary_distance_against_projection():
    rng = np.random.default_rng(3)
    dom = BoxDomain([-1, 0, 2], [1, 3, 2.5])
    for x in rng.normal(0, 5, (200, 3)):
        nearest = np.minimum(np.maximum(x, dom.lower), dom.upper)
        assert boundary_distance(x, dom) == pytest.approx(np.linalg.norm(x - nearest))


def test_pei_feasible_branch_is_ei():
    dom = BoxDomain.cube(-1, 1, 2)
    pmap = PcaMap.from_components(np.eye(2))
    model = condition(np.array([[0.0, 0.0], [0.5, 0.5]]), np.array([1.0, 2.0]), Kernel(1.0, [1.0, 1.0]))
    z = np.array([0.0, 0.0])
    mean, var = predict(model, z)
    assert penalized_ei(z, model, pmap, dom, best=3.0) == pytest.approx(expected_improvement(mean, math.sqrt(var), 3.0))
    assert penalized_ei(z, model, pmap, dom, best=3.0) == pytest.approx(2.0, abs=1e-6)


def test_pei_infeasible_branch_is_negative_distance():
    dom = BoxDomain.cube(-1, 1, 2)
    pmap = PcaMap.from_components(np.eye(2))
    model = condition(np.array([[0.0, 0.0], [0.5, 0.5]]), np.array([1.0, 2.0]), Kernel(1.0, [1.0, 1.0]))
    assert penalized_ei(np.array([3.0, 0.0]), model, pmap, dom, best=0.0) == pytest.approx(-2.0)
    assert penalized_ei(np.array([2.0, -2.0]), model, pmap, dom, best=0.0) == pytest.approx(-math.sqrt(2))


@pytest.mark.parametrize("seed", range(5))
def test_pei_sign_separation(seed):
    dom, pmap, model, best = fitted_map_and_model(seed)
    cube = bounding_cube(pmap, dom)
    rng = np.random.default_rng(100 + seed)
    Z = rng.uniform(cube.lower, cube.upper, (10_000, pmap.r))
    values = penalized_ei(Z, model, pmap, dom, best)
    feasible = dom.contains(inverse_map(pmap, Z))
    assert np.all((values >= 0) == feasible)
    assert feasible.any() and (~feasible).any()


def test_pei_dimension_mismatch():
    dom, pmap, model, best = fitted_map_and_model(0)
    with pytest.raises(ValueError):
        penalized_ei(np.zeros(pmap.r + 1), model, pmap, dom, best)


def test_de_never_settles_on_infeasible_when_feasible_seen():
    dom = BoxDomain.cube(0, 1, 2)
    pmap = PcaMap.from_components(np.eye(2))
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (10, 2))
    model = fit(X, (X**2).sum(1), seed=0)
    # cube [-1, 1]^2 around the origin: three quarters infeasible
    seen_feasible = []

    def objective(Z):
        values = penalized_ei(Z, model, pmap, dom, 0.0)
        seen_feasible.append(np.any(values >= 0))
        return values

    for seed in range(10):
        seen_feasible.clear()
        res = de_maximize(objective, [(-1, 1), (-1, 1)], DeConfig(20, 800, seed=seed))
        if any(seen_feasible):
            assert dom.contains(inverse_map(pmap, res.x))
            assert res.value >= 0


def test_cube_radius_is_half_diagonal():
    dom = BoxDomain.cube(-5, 5, 2)
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    cube = bounding_cube(PcaMap.from_components(q.T), dom)
    assert cube.radius == pytest.approx(math.sqrt(50))
    assert cube.radius == pytest.approx(7.07107, abs=1e-5)


def test_cube_centered_for_symmetric_domain():
    cube = bounding_cube(PcaMap.from_components(np.eye(4)[:3]), BoxDomain.cube(-1, 1, 4))
    np.testing.assert_allclose(cube.center, 0.0)


def test_cube_contains_the_domain_image():
    rng = np.random.default_rng(2)
    for trial in range(20):
        D = int(rng.integers(2, 9))
        lower = rng.uniform(-5, 0, D)
        dom = BoxDomain(lower, lower + rng.uniform(0.5, 10, D))
        X = rng.uniform(dom.lower, dom.upper, (30, D))
        pmap = fit_pca(X, rng.normal(size=30), alpha=rng.uniform(0.5, 1))
        cube = bounding_cube(pmap, dom)
        probes = rng.uniform(dom.lower, dom.upper, (10_000, D))
        assert np.all(cube.contains(forward_map(pmap, probes)))
        corners = dom.lower + dom.width * np.array(np.meshgrid(*[[0, 1]] * D)).reshape(D, -1).T
        assert np.all(cube.contains(forward_map(pmap, corners)))


def test_cube_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        BoundingCube(np.zeros(2), 0.0)
