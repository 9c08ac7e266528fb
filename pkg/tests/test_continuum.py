"""Limit-flow tests: velocity laws, event-driven integration, and the
lattice-to-continuum comparison.

Closed-form targets come from hand integration of the piecewise-constant
flows; trajectory values are cross-checked against an exact Fraction
cascade computed independently in this file.
"""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from begflow.continuum import (
    ContinuumState,
    ContinuumTrajectory,
    VelocityTag,
    convergence_check,
    integrate,
    lower_floor,
    upper_branch,
    velocities,
    _hausdorff_sets,
)
from begflow.lattice import OctagonGeom, hausdorff

SQRT2 = math.sqrt(2.0)


def square(P0=1.5, lam=0.0, k=0.6, zeta=1.0, **kw):
    return ContinuumState(0.0, 0.0, P0, P0, (0.0,) * 4, lam, k, zeta, **kw)


def octagon(P, D, lam, k, zeta, **kw):
    return ContinuumState.from_lengths((P,) * 4, (D,) * 4, lam, k, zeta, **kw)


def cascade_P(t_query: float, P0=Fraction(3, 2)) -> float:
    """Exact side length of the shrinking square at time t_query.

    Independent oracle: the side speed is 2 * floor(4 zeta / P) with
    zeta = 1, so P runs through segments (4/(j+1), 4/j) at slope -2j.
    """
    t = Fraction(0)
    P = P0
    j = int(Fraction(4) / P0)  # initial floor (P0 strictly inside a segment)
    tq = Fraction(t_query).limit_denominator(10 ** 12)
    while True:
        P_next = Fraction(4, j + 1)
        dt = (P - P_next) / (2 * j)
        if t + dt >= tq:
            return float(P - 2 * j * (tq - t))
        t += dt
        P = P_next
        j += 1


# exact event times of the P0 = 3/2 cascade: P hits 4/3, 1, 4/5, 2/3
CASCADE_EVENTS = [Fraction(1, 24),
                  Fraction(1, 24) + Fraction(1, 18),
                  Fraction(11, 90),
                  Fraction(61, 450)]
T_EXTINCTION = 1 / 24 + math.pi ** 2 / 3 - 19 / 6


class TestState:
    def test_lengths_roundtrip(self):
        s = ContinuumState.from_lengths((5.0, 4.0, 4.8, 4.0), (0.2 * SQRT2,
                                        0.5 * SQRT2, 0.3 * SQRT2, 0.4 * SQRT2),
                                        0.1, 0.6, 1.0)
        assert s.P == pytest.approx((5.0, 4.0, 4.8, 4.0))
        assert s.D == pytest.approx((0.2 * SQRT2, 0.5 * SQRT2,
                                     0.3 * SQRT2, 0.4 * SQRT2))
        assert s.closure_residuals() == pytest.approx((0.0, 0.0))

    def test_closure_violation_rejected(self):
        with pytest.raises(ValueError, match="closure"):
            ContinuumState.from_lengths((5.0, 4.0, 4.0, 3.6),
                                        (0.3,) * 4, 0.1, 0.6, 1.0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            square(k=0.2)
        with pytest.raises(ValueError):
            square(zeta=-1.0)
        with pytest.raises(ValueError):
            ContinuumState(0, 0, 2.0, 2.0, (-0.1, 0, 0, 0), 0.0, 0.6, 1.0)
        with pytest.raises(ValueError, match="gaps exceed"):
            ContinuumState(0, 0, 1.0, 1.0, (0.8, 0.8, 0.0, 0.0),
                           0.0, 0.6, 1.0)

    def test_area(self):
        s = octagon(5.0, 0.6 * SQRT2, 0.4, 0.6, 0.5)
        # box 6.2^2 minus four corner triangles of leg 0.6
        assert s.area() == pytest.approx(6.2 ** 2 - 4 * 0.6 ** 2 / 2)

    def test_rasterize_matches_lattice_geometry(self):
        s = octagon(5.0, 0.6 * SQRT2, 0.4, 0.6, 0.5)
        g = s.rasterize(0.1)
        assert (g.width, g.height) == (62, 62)
        assert g.cuts == (6, 6, 6, 6)
        assert g.lattice_P() == (50, 50, 50, 50)

    def test_octagon_roundtrip(self):
        from begflow.energy import ModelParams
        geom = OctagonGeom((3, 2), 40, 36, (4, 5, 6, 3))
        params = ModelParams(eps=0.05, k=0.6, zeta=1.0)
        s = ContinuumState.from_octagon(geom, params, lam=0.3)
        assert s.rasterize(0.05) == geom


class TestBranchSelectors:
    def test_lower_floor_takes_lower_branch_at_integers(self):
        assert lower_floor(5.0) == 4
        assert lower_floor(5.0 - 5e-10) == 4
        assert lower_floor(5.0 + 5e-10) == 4
        assert lower_floor(5.1) == 5
        assert lower_floor(0.7) == 0

    def test_upper_branch(self):
        assert upper_branch(5.0) == 5
        assert upper_branch(5.1) == 6
        assert upper_branch(4.999999999) == 5

    @given(st.floats(min_value=0.01, max_value=50.0))
    @settings(max_examples=200, deadline=None)
    def test_branches_bracket_the_argument(self, x):
        lo, hi = lower_floor(x), upper_branch(x)
        assert lo <= x + 1e-9
        assert hi >= x - 1e-9
        assert hi - lo in (0, 1)


class TestVelocities:
    def test_pinned_below_unit_mobility(self):
        s = octagon(5.0, 0.6 * SQRT2, 0.4, 0.6, 0.5)
        law = velocities(s)
        assert law.tag is VelocityTag.PRE_PINNED
        assert law.v_P == (0.0,) * 4 and law.v_D == (0.0,) * 4
        assert not law.moving

    def test_negligible_surfactant_square(self):
        law = velocities(square(P0=1.5))
        assert law.tag is VelocityTag.NEGLIGIBLE_SURF
        assert law.v_P == (2.0,) * 4

    def test_surfactant_dependent(self):
        g = 0.4 / SQRT2
        s = octagon(2.6, 0.4, 4 * g + 1.0, 0.5, 1.0)
        law = velocities(s)
        assert law.tag is VelocityTag.SURF_DEPENDENT
        assert law.v_P == (0.0,) * 4
        assert law.n_D == (5,) * 4
        assert law.v_D == pytest.approx((SQRT2 * 5 / 2,) * 4)

    def test_lower_branch_at_exact_discontinuity(self):
        D = SQRT2 * 1.5 / 5.0  # wetting argument lands exactly on 5
        g = D / SQRT2
        s = octagon(2.6, D, 4 * g + 1.0, 0.5, 1.0)
        law = velocities(s)
        assert law.n_D == (4,) * 4

    def test_selection_envelopes(self):
        # 2 zeta (1 - k) / P = 1.5: floor and ceil genuinely differ
        g = 0.5 / SQRT2
        s = octagon(1.0, 0.5, 4 * g + 0.5, 0.5, 1.5)
        assert velocities(s, "floor").n_P == (1,) * 4
        assert velocities(s, "ceil").n_P == (2,) * 4

    def test_gamma2_surrounded(self):
        s = octagon(1.5, 1.0, 0.0, 0.5, 2.0, gamma=2.0, surrounded=True)
        law = velocities(s)
        assert law.tag is VelocityTag.GAMMA2_SURROUNDED
        assert law.v_P == pytest.approx((0.5,) * 4)
        assert law.v_D == pytest.approx((SQRT2 / 4,) * 4)

    def test_gamma2_subcritical_reduces(self):
        law = velocities(square(zeta=0.4, k=0.5, gamma=2.0))
        assert law.tag is VelocityTag.NEGLIGIBLE_SURF

    def test_gamma2_supercritical_without_surrounding_undefined(self):
        with pytest.raises(ValueError, match="supercritical"):
            velocities(square(zeta=2.0, k=0.5, gamma=2.0))

    def test_side_collapse_raises(self):
        s = ContinuumState(0, 0, 1.0, 1.0, (0.5, 0.5, 0.0, 0.0),
                           0.0, 0.6, 1.0)
        assert s.P[1] == pytest.approx(0.0)
        with pytest.raises(ValueError, match="side collapse"):
            velocities(s)

    def test_degenerate_mass_raises(self):
        g = 0.4 / SQRT2
        s = octagon(2.6, 0.4, 4 * g, 0.5, 1.0)
        with pytest.raises(ValueError, match="degenerate velocity"):
            velocities(s)

    def test_capacity_exceeded_raises(self):
        g = 0.4 / SQRT2
        s = octagon(2.6, 0.4, 4 * g + 4 * 2.6 + 1.0, 0.5, 1.0)
        with pytest.raises(ValueError, match="capacity"):
            velocities(s)


class TestIntegrate:
    def test_cascade_event_times(self):
        traj = integrate(square(), dt=0.01, t_end=0.14)
        times = [e["t"] for e in traj.events]
        assert len(times) >= 4
        for got, want in zip(times, CASCADE_EVENTS):
            assert got == pytest.approx(float(want), abs=1e-9)
        assert all(e["kind"] == "velocity floor crossing"
                   for e in traj.events)

    def test_cascade_matches_exact_oracle(self):
        traj = integrate(square(), dt=0.01, t_end=0.16)
        for t in (0.05, 0.10, 0.13, 0.15):
            assert traj.state_at(t).P[0] == pytest.approx(
                cascade_P(t), abs=1e-8)

    def test_extinction_time(self):
        traj = integrate(square(), dt=0.01, t_end=0.2, vanish_tol=0.005)
        assert traj.status == "extinct"
        # tail below the vanish threshold lasts ~ vanish_tol^2 / 16
        assert traj.final.t == pytest.approx(T_EXTINCTION, abs=5e-6)

    def test_area_decreases_and_closure_holds(self):
        traj = integrate(square(), dt=0.01, t_end=0.15)
        areas = [s.area() for s in traj.states]
        assert all(a1 <= a0 + 1e-12 for a0, a1 in zip(areas, areas[1:]))
        for s in traj.states:
            rw, rh = s.closure_residuals()
            assert abs(rw) <= 1e-9 and abs(rh) <= 1e-9

    def test_pinned_flow_is_constant(self):
        s = octagon(5.0, 0.6 * SQRT2, 0.4, 0.6, 0.5)
        traj = integrate(s, dt=0.05, t_end=1.0)
        assert traj.status == "ok"
        assert traj.final.t == pytest.approx(1.0)
        assert traj.events == []
        assert traj.final.P == pytest.approx(s.P)
        assert traj.final.D == pytest.approx(s.D)

    def test_growing_mass_gap_halts_indeterminate(self):
        # wetting grows sum D / sqrt2 at rate 20 toward lam, gap 0.01
        g = 0.4 / SQRT2
        s = octagon(2.6, 0.4, 4 * g + 0.01, 0.5, 1.0)
        traj = integrate(s, dt=0.01, t_end=0.1)
        assert traj.status == "indeterminate"
        assert traj.final.t == pytest.approx(0.01 / 20.0, abs=1e-6)
        assert "degenerate velocity" in traj.events[-1]["kind"]

    def test_event_times_independent_of_dt(self):
        t1 = integrate(square(), dt=0.01, t_end=0.14)
        t2 = integrate(square(), dt=0.005, t_end=0.14)
        e1 = [e["t"] for e in t1.events]
        e2 = [e["t"] for e in t2.events]
        assert len(e1) == len(e2)
        for a, b in zip(e1, e2):
            assert a == pytest.approx(b, abs=1e-9)

    def test_event_budget(self):
        traj = integrate(square(), dt=0.01, t_end=0.2, max_events=3,
                         vanish_tol=1e-6)
        assert traj.status == "event budget exhausted"
        assert len(traj.events) == 3

    def test_state_at_interpolates_exactly(self):
        traj = integrate(square(), dt=0.01, t_end=0.03)
        # inside the first segment the flow is linear with slope -4
        s = traj.state_at(0.017)
        assert s.P[0] == pytest.approx(1.5 - 4 * 0.017)
        assert s.t == pytest.approx(0.017)

    def test_envelope_trajectories_differ(self):
        g = 0.5 / SQRT2
        s = octagon(1.0, 0.5, 4 * g + 0.5, 0.5, 1.5)
        lo = integrate(s, dt=0.002, t_end=0.01, selection="floor")
        hi = integrate(s, dt=0.002, t_end=0.01, selection="ceil")
        # slower faces leave more room for diagonal wetting to eat the
        # parallel sides, so the floor envelope ends strictly shorter
        assert hi.final.P[0] - lo.final.P[0] > 1e-6

    def test_rows_export_shape(self):
        traj = integrate(square(), dt=0.01, t_end=0.06)
        rows = traj.to_rows()
        assert len(rows) == len(traj.states)
        assert set(rows[0]) == {"t", "P1", "P2", "P3", "P4",
                                "D1", "D2", "D3", "D4", "regime", "event"}
        assert rows[1]["regime"] == "NegligibleSurf"


class TestHausdorffFast:
    def test_matches_reference_on_octagons(self):
        pairs = [
            (OctagonGeom((0, 0), 12, 10, (2, 1, 3, 0)),
             OctagonGeom((1, 2), 11, 9, (1, 2, 2, 1))),
            (OctagonGeom((0, 0), 8, 8, (0, 0, 0, 0)),
             OctagonGeom((4, 4), 8, 8, (2, 2, 2, 2))),
            (OctagonGeom((0, 0), 6, 6, (1, 1, 1, 1)),
             OctagonGeom((0, 0), 6, 6, (1, 1, 1, 1))),
        ]
        for ga, gb in pairs:
            A, B = ga.rasterize(), gb.rasterize()
            assert _hausdorff_sets(A, B) == hausdorff(A, B)

    @given(st.integers(0, 5), st.integers(0, 5), st.integers(4, 9),
           st.integers(4, 9), st.integers(0, 2), st.integers(0, 2))
    @settings(max_examples=40, deadline=None)
    def test_matches_reference_random(self, x, y, w, h, c1, c3):
        ga = OctagonGeom((0, 0), 8, 8, (1, 1, 1, 1))
        gb = OctagonGeom((x, y), w, h, (c1, 0, c3, 0))
        A, B = ga.rasterize(), gb.rasterize()
        assert _hausdorff_sets(A, B) == hausdorff(A, B)


class TestConvergence:
    def test_pinned_scenario_distance_zero(self):
        s = octagon(5.0, 0.6 * SQRT2, 0.4, 0.6, 0.5)
        rep = convergence_check(s, [1 / 10, 1 / 20], t_end=0.5)
        assert rep["continuum_status"] == "ok"
        assert rep["discrete_status"] == ["ok", "ok"]
        assert rep["distances"] == [0.0, 0.0]
        assert all(rep["bound_4eps"])
        assert rep["monotone_within_factor2"]

    def test_shrinking_square_tracks_limit(self):
        s = square()
        rep = convergence_check(s, [1 / 10, 1 / 20], t_end=0.12)
        assert all(rep["bound_4eps"])
        assert rep["monotone_within_factor2"]
        assert all(n >= 2 for n in rep["checkpoints"])
