import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from decisionfp.errors import DegenerateMass, InvalidGeometry, NoWells
from decisionfp.fp1d import (ObservableReport, face_fluxes, fp1d_operator, gaussian_density1, kramers_estimate,
                             mass_between, mean_first_passage_time, partition_wells, performance,
                             reaction_protocol, reaction_time, solve_fp1d, steady_state, uniform_density)
from decisionfp.grids import DensityGrid1, Grid1
from decisionfp.reduction import SlowManifold

BETA = 0.3


def ou(n=1000, half_width=1.5):
    return SlowManifold.from_drift(lambda y: -y, half_width, n)


def gaussian_cells(grid, sd):
    return np.diff(norm.cdf(grid.faces, scale=sd)) / grid.h


def test_ou_steady_state_matches_gaussian():
    m = ou()
    q = steady_state(m, BETA)
    exact = gaussian_cells(m.grid, BETA / math.sqrt(2.0))
    assert q.mass == pytest.approx(1.0, abs=1e-12)
    assert np.sum(np.abs(q.values - exact)) * m.grid.h <= 1e-3


def test_ou_long_time_solution_matches_gaussian():
    m = ou()
    q = solve_fp1d(uniform_density(m.grid), m, BETA, t_end=40.0, dt=0.02)
    exact = gaussian_cells(m.grid, BETA / math.sqrt(2.0))
    assert np.sum(np.abs(q.values - exact)) * m.grid.h <= 1e-3


def test_discrete_steady_state_is_a_fixed_point(decision_manifold):
    m = decision_manifold
    q = steady_state(m, BETA)
    A = fp1d_operator(m.grid, m.g_red, BETA)
    assert np.max(np.abs(A @ q.values)) <= 1e-9 * np.max(q.values)
    assert np.max(np.abs(face_fluxes(q, m, BETA))) <= 1e-10 * np.max(q.values)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.05, 1.0), st.floats(0.01, 5.0))
def test_operator_is_a_generator(coeffs, beta, dt):
    """Columns sum to zero, off-diagonals are nonnegative: mass and sign are kept."""
    poly = np.polynomial.Polynomial(coeffs)
    m = SlowManifold.from_drift(poly, 1.0, 60)
    A = fp1d_operator(m.grid, m.g_red, beta).toarray()
    np.testing.assert_allclose(A.sum(axis=0), 0.0, atol=1e-9 * np.max(np.abs(A)))
    assert np.all(A - np.diag(np.diag(A)) >= 0)
    q0 = gaussian_density1(m.grid, 0.3, 0.2)
    q = solve_fp1d(q0, m, beta, t_end=10 * dt, dt=dt)
    assert q.mass == pytest.approx(q0.mass, abs=1e-10)
    assert np.min(q.values) >= 0.0


def test_boundary_fluxes_vanish(decision_manifold):
    q = gaussian_density1(decision_manifold.grid, 0.5, 0.3)
    flux = face_fluxes(q, decision_manifold, BETA)
    assert flux[0] == 0.0 and flux[-1] == 0.0
    assert len(flux) == decision_manifold.grid.n + 1


def test_snapshots_are_evenly_spaced(decision_manifold):
    q0 = gaussian_density1(decision_manifold.grid, 0.0, 0.1)
    out, shots = solve_fp1d(q0, decision_manifold, BETA, t_end=100.0, dt=10.0, snapshots=5)
    assert [s.time for s in shots] == pytest.approx([20.0, 40.0, 60.0, 80.0, 100.0])
    assert out.time == pytest.approx(100.0)
    with pytest.raises(ValueError):
        solve_fp1d(q0, decision_manifold, BETA, t_end=1.0, dt=0.0)


@pytest.mark.parametrize("L", [0.5, 1.0, 2.0])
def test_flat_mfpt(L):
    m = SlowManifold.from_drift(lambda y: 0.0 * y, lo=0.0, hi=L, n=1000)
    assert mean_first_passage_time(m, BETA, 0.0, L, 0.0) == pytest.approx(L * L / BETA ** 2, rel=1e-4)
    # mirrored orientation
    assert mean_first_passage_time(m, BETA, L, 0.0, L) == pytest.approx(L * L / BETA ** 2, rel=1e-4)


def test_ou_mfpt_against_quadrature():
    c = 2.0 / BETA ** 2
    G = lambda y: 0.5 * y * y  # noqa: E731
    inner = lambda z: integrate.quad(lambda u: math.exp(-c * G(u)), -1.5, z, epsabs=0, epsrel=1e-12)[0]  # noqa: E731
    exact = c * integrate.quad(lambda z: math.exp(c * G(z)) * inner(z), 0.0, 0.6, epsrel=1e-11)[0]
    errors = [abs(mean_first_passage_time(ou(n), BETA, 0.0, 0.6, -1.5) / exact - 1.0) for n in (2001, 4001)]
    assert errors[0] <= 1e-4
    # nested trapezoid rule: second order in the cell size
    assert errors[1] == pytest.approx(errors[0] / 4.0, rel=0.05)


def test_kramers_limit():
    """The MFPT between the wells of y - y^3 approaches the Kramers time as noise shrinks."""
    m = SlowManifold.from_drift(lambda y: y - y ** 3, 2.0, 2001)
    ratios = []
    for beta in (0.3, 0.2):
        t = mean_first_passage_time(m, beta, -1.0, 1.0, -2.0)
        ratios.append(abs(t / kramers_estimate(m, beta, -1.0, 0.0) - 1.0))
    assert ratios[1] < ratios[0] < 0.1
    with pytest.raises(InvalidGeometry):
        kramers_estimate(m, 0.2, 0.0, -1.0)


def test_mfpt_geometry_checks():
    m = ou()
    with pytest.raises(InvalidGeometry):
        mean_first_passage_time(m, BETA, 1.0, 0.5, 0.0)
    with pytest.raises(InvalidGeometry):
        mean_first_passage_time(m, BETA, 0.0, 3.0, -1.0)
    assert mean_first_passage_time(m, BETA, 0.5, 0.5, 0.0) == 0.0


def test_partition_of_the_decision_manifold(decision_manifold):
    part = partition_wells(decision_manifold)
    assert part.labels == ("decision-2", "decision-1")
    assert part.wells[0] == pytest.approx(-part.wells[1], abs=1e-9)
    assert part.barriers[0] == pytest.approx(0.0, abs=1e-12)
    assert part.basin("decision-1") == (pytest.approx(0.0, abs=1e-12), decision_manifold.grid.hi)
    assert not part.has_middle
    with pytest.raises(KeyError):
        part.well("spontaneous-middle")


def test_partition_three_wells():
    m = SlowManifold.from_drift(lambda y: -y * (y * y - 0.25) * (y * y - 1.0), 1.5, 601)
    part = partition_wells(m)
    assert part.labels == ("decision-2", "spontaneous-middle", "decision-1")
    np.testing.assert_allclose(part.wells, [-1.0, 0.0, 1.0], atol=1e-3)
    np.testing.assert_allclose(part.barriers, [-0.5, 0.5], atol=1e-3)


def test_single_well_has_no_decision(literal_central_manifold):
    part = partition_wells(literal_central_manifold)
    assert len(part.wells) == 1
    with pytest.raises(NoWells):
        performance(literal_central_manifold, BETA, part)
    with pytest.raises(NoWells):
        reaction_time(literal_central_manifold, BETA, part)


def test_no_wells():
    with pytest.raises(NoWells):
        partition_wells(SlowManifold.from_drift(lambda y: 1.0 + 0 * y, 1.0, 101))


def test_unbiased_performance_is_one_half(decision_manifold):
    assert performance(decision_manifold, BETA) == pytest.approx(0.5, abs=1e-9)


def test_bias_improves_performance_and_speeds_decisions(decision, decision_manifold):
    from decisionfp.reduction import build_manifold

    biased = build_manifold(decision.with_bias(0.01))
    assert performance(biased, BETA) > 0.5
    rt0, proto0 = reaction_time(decision_manifold, BETA)
    rt1, _ = reaction_time(biased, BETA)
    assert proto0.kind == "two-well" and proto0.target == "decision-1"
    assert rt1 < rt0


def test_two_well_protocol(decision_manifold):
    proto = reaction_protocol(partition_wells(decision_manifold))
    assert proto.start == pytest.approx(0.0, abs=1e-12)
    assert proto.absorb > 0 and proto.reflect == decision_manifold.grid.lo


def test_three_well_protocol_targets_the_deeper_well():
    g = lambda y: -y * (y * y - 0.25) * (y * y - 1.0) - 0.02 * y * y  # noqa: E731
    m = SlowManifold.from_drift(g, 1.5, 1201)
    proto = reaction_protocol(partition_wells(m), manifold=m)
    assert proto.kind == "three-well"
    assert proto.target == "decision-2"
    assert proto.reflect == m.grid.hi


def test_mass_between_prorates_cells():
    grid = Grid1(4, 0.0, 1.0)
    q = DensityGrid1(grid, np.ones(4))
    assert mass_between(q, 0.1, 0.6) == pytest.approx(0.5)


def test_degenerate_steady_state():
    with pytest.raises(DegenerateMass):
        steady_state(ou(), 0.0)


def test_report_validates_performance():
    with pytest.raises(ValueError):
        ObservableReport(1.0, 1.5, "reduced")
    ObservableReport(math.nan, math.nan, "fp2d")
