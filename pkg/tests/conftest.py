import math

import numpy as np
import pytest

import semicoupling as sc
from semicoupling.dual import grid_mass_quantum

TRIANGLE_R = 0.45
TRIANGLE_ANGLES = (math.pi / 2, math.pi / 2 + 2 * math.pi / 3, math.pi / 2 + 4 * math.pi / 3)


def unit_square_source(resolution, density=1.0):
    return sc.make_source(([-1.0, -1.0], [1.0, 1.0]), resolution, density)


def single_dirac_problem(resolution, mass=0.5, **tol_kwargs):
    src = unit_square_source(resolution)
    tgt = sc.TargetMeasure([[0.0, 0.0]], [mass])
    return sc.Problem(src, tgt, sc.QuadraticCost(), sc.Tolerances(**tol_kwargs))


def two_ball_problem(resolution, masses=(0.6, 0.6), centers=((-0.4, 0.0), (0.4, 0.0)),
                     **tol_kwargs):
    src = unit_square_source(resolution)
    tgt = sc.TargetMeasure(list(centers), list(masses))
    return sc.Problem(src, tgt, sc.QuadraticCost(), sc.Tolerances(**tol_kwargs))


def triangle_points(radius=TRIANGLE_R):
    return [[radius * math.cos(a), radius * math.sin(a)] for a in TRIANGLE_ANGLES]


def three_dirac_problem(resolution, mass=0.7, **tol_kwargs):
    src = unit_square_source(resolution)
    tgt = sc.TargetMeasure(triangle_points(), [mass] * 3)
    return sc.Problem(src, tgt, sc.QuadraticCost(), sc.Tolerances(**tol_kwargs))


def boundary_target_problem(resolution, mass=0.05, **tol_kwargs):
    src = unit_square_source(resolution)
    tgt = sc.TargetMeasure(
        [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [mass] * 4)
    return sc.Problem(src, tgt, sc.QuadraticCost(), sc.Tolerances(**tol_kwargs))


def feasible_tol_mass(problem, wanted=1e-3, rings=16):
    """Mass tolerance achievable on this grid: quantization-aware floor."""
    return max(wanted, rings * grid_mass_quantum(problem))


@pytest.fixture(scope="session")
def solved_cache():
    """Memoized solves shared across the whole test session."""
    cache = {}

    def solve(key, problem, **kwargs):
        if key not in cache:
            cache[key] = sc.solve_dual(problem, **kwargs)
        return cache[key]

    return solve


@pytest.fixture(scope="session")
def single128(solved_cache):
    prob = single_dirac_problem(128, tol_mass=feasible_tol_mass(single_dirac_problem(128)))
    return prob, solved_cache("single128", prob)


@pytest.fixture(scope="session")
def single512(solved_cache):
    prob = single_dirac_problem(512)
    return prob, solved_cache("single512", prob)


@pytest.fixture(scope="session")
def twoball256(solved_cache):
    prob = two_ball_problem(256)
    return prob, solved_cache("twoball256", prob)


@pytest.fixture(scope="session")
def tri256(solved_cache):
    prob = three_dirac_problem(256)
    return prob, solved_cache("tri256", prob)


@pytest.fixture(scope="session")
def tri512(solved_cache):
    prob = three_dirac_problem(512)
    return prob, solved_cache("tri512", prob)


@pytest.fixture(scope="session")
def boundary512(solved_cache):
    prob = boundary_target_problem(512)
    return prob, solved_cache("boundary512", prob)
