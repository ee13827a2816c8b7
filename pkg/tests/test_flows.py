import numpy as np
import pytest
from scipy.integrate import quad

import semicoupling as sc
from semicoupling.flows import CellularField, OffDomainField, integrate_flow, reparameterize
from semicoupling.singularity import local_tie_gap, subdifferential, stratify

from conftest import single_dirac_problem, feasible_tol_mass


class Oracle1D:
    """x' = -beta x^{-1-beta} with beta = 2; omega(x0) = x0^4 / 8."""

    def direction(self, x):
        if x[0] <= 0:
            raise sc.PoleError("pole")
        return np.array([-2.0 * x[0] ** -3.0])

    def gap(self, x):
        return float(x[0])

    def u_min(self, x):
        return float(x[0])

    def project(self, x):
        return x


@pytest.fixture(scope="module")
def oracle_trajectory():
    tol = sc.Tolerances(eps_stop=1e-4, ode_rel_err=1e-13)
    return integrate_flow(Oracle1D(), np.array([1.0]), tol)


def test_oracle_blowup_time(oracle_trajectory):
    tr = oracle_trajectory
    assert tr.terminated_by == "pole_reached"
    assert tr.omega == pytest.approx(0.125, abs=1e-3)


def test_oracle_trajectory_supnorm(oracle_trajectory):
    tr = oracle_trajectory
    exact = np.where(tr.times < 0.125, np.maximum(1.0 - 8.0 * tr.times, 0.0), 0.0) ** 0.25
    assert np.abs(tr.points[:, 0] - exact).max() <= 1e-3


def test_oracle_reparameterization(oracle_trajectory):
    s, pts = reparameterize(oracle_trajectory)
    assert s.size == 33
    assert pts[0, 0] == 1.0  # identity at s = 0, exact
    assert pts[-1, 0] == oracle_trajectory.endpoint[0]
    exact = np.maximum(1.0 - s, 0.0) ** 0.25
    assert np.abs(pts[:, 0] - exact).max() <= 1e-3


def test_oracle_monotonicity_and_blowup_norms(oracle_trajectory):
    tr = oracle_trajectory
    assert np.all(np.diff(tr.u_min) < 0)
    late = tr.field_norms[tr.times >= 0.9 * tr.omega]
    assert np.all(np.diff(late) >= 0)


def test_single_dirac_radial_flow(single512):
    prob, sol = single512
    field = OffDomainField(prob, sol.potential)
    seed = np.array([0.57, 0.76])
    tr = integrate_flow(field, seed, prob.tolerances)
    assert tr.terminated_by == "pole_reached"
    r = np.sqrt(2 * sol.potential.psi[0])
    assert np.linalg.norm(tr.endpoint) == pytest.approx(r, abs=1e-3)
    # radial field keeps the orbit on the seed ray
    cross = seed[0] * tr.endpoint[1] - seed[1] * tr.endpoint[0]
    assert abs(cross) <= 1e-12
    # omega against the separable radial quadrature oracle
    psi = float(sol.potential.psi[0])
    s0, s1 = np.linalg.norm(seed), np.linalg.norm(tr.endpoint)
    om, _ = quad(lambda s: (s * s / 2 - psi) ** 2.0 / s, s1, s0)
    assert tr.omega == pytest.approx(om, rel=1e-6, abs=1e-9)
    assert np.all(np.diff(tr.u_min) < 0)
    assert tr.gaps[-1] <= prob.tolerances.eps_stop / 10


def test_degenerate_seed_is_identity(single512):
    prob, sol = single512
    field = OffDomainField(prob, sol.potential)
    inside = np.array([0.1, 0.0])
    tr = integrate_flow(field, inside, prob.tolerances)
    assert tr.terminated_by == "pole_reached"
    assert tr.n_samples == 1
    assert tr.omega == 0.0
    assert np.array_equal(tr.endpoint, inside)
    s, pts = reparameterize(tr)
    assert np.all(pts == inside)


def test_reparameterize_requires_pole(single512):
    prob, sol = single512
    tr = sc.Trajectory(
        seed=np.zeros(2), times=np.array([0.0]), points=np.zeros((1, 2)),
        u_min=np.array([1.0]), gaps=np.array([1.0]), field_norms=np.array([1.0]),
        omega=0.0, terminated_by="max_time")
    with pytest.raises(ValueError, match="max_time"):
        reparameterize(tr)


def test_retract_region_single_dirac(single512):
    prob, sol = single512
    field = OffDomainField(prob, sol.potential)
    rng = np.random.default_rng(3)
    seeds = sc.sample_region(prob, sol.potential, "offdomain", 60, rng)
    result = sc.retract_region(lambda s: field, seeds, prob.tolerances)
    assert result.ok
    assert all(t == "pole_reached" for t in result.terminations)
    mod = result.neighbor_modulus()
    assert np.isfinite(mod["max"]) and mod["max"] > 0


def test_retract_region_reports_vanishing_witnesses(boundary512):
    prob, sol = boundary512
    field = OffDomainField(prob, sol.potential)
    h = prob.source.spacing.max()
    diag = np.array([h / 2, h / 2])  # on the diagonal: flows into the field zero
    result = sc.retract_region(lambda s: field, diag[None, :], prob.tolerances)
    assert not result.ok
    assert result.terminations[0] == "field_vanished"
    assert result.failures == [0]


def test_cellular_edge_flow_reaches_circumcenter(tri512):
    prob, sol = tri512
    tolerances = prob.tolerances
    seed = np.array([0.0, -0.25])
    tie = float(local_tie_gap(prob, sol.potential.psi, seed[None, :])[0])
    sub = subdifferential(prob, sol.potential, seed, tie)
    assert list(sub.indices) == [1, 2]
    cf = CellularField(prob, sol.potential, sub.indices)
    tr = integrate_flow(cf, seed, tolerances)
    assert tr.terminated_by == "pole_reached"
    assert np.linalg.norm(tr.endpoint) <= 1e-3  # circumcenter by symmetry
    drift = max(cf.tie_residual(p) for p in tr.points)
    assert drift <= tie
    tie_end = float(local_tie_gap(prob, sol.potential.psi, tr.endpoint[None, :])[0])
    sub_end = subdifferential(prob, sol.potential, tr.endpoint, tie_end)
    assert set(sub.indices) < set(sub_end.indices)  # gained a new tied target


def test_cellular_identity_on_next_stratum(tri512):
    prob, sol = tri512
    cf = CellularField(prob, sol.potential, np.array([1, 2]))
    z3_point = np.zeros(2)
    # the circumcenter carries gap ~ 0 to the remaining target
    tr = integrate_flow(cf, z3_point, prob.tolerances)
    assert tr.n_samples == 1 and tr.omega == 0.0
    assert np.array_equal(tr.endpoint, z3_point)


def test_retraction_flow_estimator(single512):
    prob, sol = single512
    est = sc.RetractionFlow(mode="offdomain").fit(prob, sol.potential)
    seeds = np.array([[0.9, 0.0], [0.0, 0.85]])
    ends = est.transform(seeds)
    r = np.sqrt(2 * sol.potential.psi[0])
    assert np.linalg.norm(ends, axis=1) == pytest.approx([r, r], abs=1e-3)
    assert est.omega_.shape == (2,)
    assert est.terminations_ == ["pole_reached", "pole_reached"]
    params = est.get_params()
    assert "mode" in params and "beta" in params


def test_retraction_flow_cellular_estimator(tri512):
    prob, sol = tri512
    est = sc.RetractionFlow(mode="cellular", stratum=2).fit(prob, sol.potential)
    seeds = np.array([[0.0, -0.25]])
    ends = est.transform(seeds)
    assert np.linalg.norm(ends[0]) <= 1e-3
