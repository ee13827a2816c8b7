import numpy as np
import pytest

import semicoupling as sc
from semicoupling.fields import FieldSpec
from semicoupling.uhs import sample_region, uhs_check

from conftest import unit_square_source


@pytest.fixture(scope="module")
def pair_problem():
    src = unit_square_source(64)
    tgt = sc.TargetMeasure([[-0.5, 0.0], [0.5, 0.0]], [0.1, 0.1])
    prob = sc.Problem(src, tgt, sc.QuadraticCost())
    pot = sc.Potential(np.array([0.02, 0.02]))
    return prob, pot


def test_far_sample_hull_distance(pair_problem):
    # gradients at x = (2, 0) are (1.5, 0) and (2.5, 0): hull distance 1.5
    prob, pot = pair_problem
    rep = uhs_check(prob, pot, np.array([[2.0, 0.0]]))
    assert rep.hull_dist[0] == pytest.approx(1.5)
    assert rep.passed
    assert 0.0 <= rep.ratio[0] <= 1.0


def test_midpoint_sample_fails(pair_problem):
    # x = 0 between the targets: gradients (+-0.5, 0), hull contains 0
    prob, pot = pair_problem
    rep = uhs_check(prob, pot, np.array([[0.0, 0.0]]))
    assert rep.hull_dist[0] == 0.0
    assert not rep.passed
    assert rep.failing_indices().tolist() == [0]


def test_empty_sample_set_rejected(pair_problem):
    prob, pot = pair_problem
    with pytest.raises(ValueError, match="nonempty"):
        uhs_check(prob, pot, np.zeros((0, 2)))


def test_property_c_ratio_lower_bound(single512):
    # on a region with hull distance >= delta the empirical constant obeys
    # C_est >= delta / max_i |grad_x c|
    prob, sol = single512
    rng = np.random.default_rng(5)
    samples = sample_region(prob, sol.potential, "offdomain", 100, rng)
    rep = uhs_check(prob, sol.potential, samples)
    assert rep.passed
    grad_max = np.sqrt((samples**2).sum(1)).max()
    delta = rep.hull_dist.min()
    assert rep.ratio.min() >= delta / grad_max - 1e-12


def test_boundary_targets_failure_located_in_hull(boundary512):
    prob, sol = boundary512
    rng = np.random.default_rng(6)
    samples = sample_region(prob, sol.potential, "offdomain", 250, rng)
    rep = uhs_check(prob, sol.potential, samples)
    assert not rep.passed
    worst = rep.samples[rep.worst_sample()]
    # failing witness sits in conv(Y) (the diamond) and off the active set
    assert abs(worst[0]) + abs(worst[1]) < 1.0
    assert not sc.is_active(prob, sol.potential.psi, worst[None, :])[0]
    d = rep.as_dict()
    assert d["passed"] is False and d["n_failing"] > 0


def test_cellular_region_uhs(tri512):
    prob, sol = tri512
    rng = np.random.default_rng(7)
    samples = sample_region(prob, sol.potential, "stratum", 40, rng, stratum=2)
    assert samples.shape[0] > 0
    rep = uhs_check(prob, sol.potential, samples, FieldSpec("cellular", stratum=2))
    assert rep.region == "Z_2-Z_3"
    assert rep.passed
    assert rep.minima["hull_dist"] > 0


def test_sample_region_validation(single512):
    prob, sol = single512
    with pytest.raises(ValueError, match="unknown region"):
        sample_region(prob, sol.potential, "everywhere", 10, 0)
    with pytest.raises(ValueError, match="stratum"):
        sample_region(prob, sol.potential, "stratum", 10, 0)
