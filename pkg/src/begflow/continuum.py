"""Limit flows of the facet dynamics.

The evolving shape is an octagon described by its bounding box and the
four corner gaps g_i (the axis projection of diagonal i, so
D_i = sqrt2 g_i).  Between events every side moves at a constant normal
velocity, so explicit Euler is exact and the work is in locating the
events: floor arguments crossing integers, the surfactant mass lambda
crossing sum D / sqrt2 or sum (D / sqrt2 + P), and lengths hitting
zero.

Side indexing is bottom, left, top, right; gap i sits between sides i
and i+1.  The length rates are

    dP_i/dt = 2 v_{P,i} - sqrt2 (v_{D,i} + v_{D,i-1})
    dD_i/dt = 2 v_{D,i} - sqrt2 (v_{P,i} + v_{P,i+1})

equivalently dg_i/dt = sqrt2 v_{D,i} - v_{P,i} - v_{P,i+1} with g_i
clamped at zero, which also covers shapes with vanished diagonals.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy import ndimage

from .energy import ModelParams
from .lattice import OctagonGeom

SQRT2 = math.sqrt(2.0)
_NEAR_INT = 1e-9
_TOL = 1e-12


class VelocityTag(str, Enum):
    PRE_PINNED = "PrePinned"
    SURF_DEPENDENT = "SurfDependent"
    NEGLIGIBLE_SURF = "NegligibleSurf"
    GAMMA2_SURROUNDED = "Gamma2Surrounded"


def lower_floor(x: float) -> int:
    """Floor taking the lower branch at discontinuities.

    At an integer argument the velocity law jumps; the selection is the
    approached-from-below value, so an exact integer n yields n - 1.
    """
    n = round(x)
    if abs(x - n) <= _NEAR_INT:
        return max(0, n - 1)
    return max(0, math.floor(x))


def upper_branch(x: float) -> int:
    """Ceiling companion used for the envelope selection."""
    n = round(x)
    if abs(x - n) <= _NEAR_INT:
        return max(0, n)
    return max(0, math.ceil(x))


@dataclass(frozen=True)
class VelocityLaw:
    """Normal velocities of the eight sides under one regime."""

    tag: VelocityTag
    v_P: tuple[float, float, float, float]
    v_D: tuple[float, float, float, float]
    # the integer floor values behind the velocities; event signatures
    # compare these, so a crossing is a signature change
    n_P: tuple[int, int, int, int]
    n_D: tuple[int, int, int, int]

    @property
    def moving(self) -> bool:
        return any(v > 0 for v in self.v_P) or any(v > 0 for v in self.v_D)


@dataclass(frozen=True)
class ContinuumState:
    """Octagon lengths, surfactant mass, and mobility parameters.

    x, y anchor the lower-left corner of the bounding box so rasterized
    comparisons against lattice flows share a frame.
    """

    x: float
    y: float
    W: float
    H: float
    g: tuple[float, float, float, float]
    lam: float
    k: float
    zeta: float
    gamma: float = 1.0
    surrounded: bool = False
    t: float = 0.0

    def __post_init__(self):
        if self.W < -_TOL or self.H < -_TOL:
            raise ValueError("negative box dimensions")
        if any(gi < -_TOL for gi in self.g):
            raise ValueError("negative corner gap")
        if self.lam < 0:
            raise ValueError("negative surfactant mass")
        if not 1.0 / 3.0 < self.k < 1.0:
            raise ValueError("k outside the partial-wetting window")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        g = self.g
        if g[0] + g[3] > self.W + 1e-9 or g[1] + g[2] > self.W + 1e-9 \
                or g[0] + g[1] > self.H + 1e-9 or g[2] + g[3] > self.H + 1e-9:
            raise ValueError("corner gaps exceed box dimensions")

    @classmethod
    def from_lengths(cls, P, D, lam, k, zeta, gamma=1.0,
                     x=0.0, y=0.0, t=0.0, surrounded=False):
        g = tuple(d / SQRT2 for d in D)
        W = P[0] + g[0] + g[3]
        H = P[1] + g[0] + g[1]
        if abs(P[2] - (W - g[1] - g[2])) > 1e-9 \
                or abs(P[3] - (H - g[2] - g[3])) > 1e-9:
            raise ValueError("octagon closure violated: the eight lengths "
                             "do not close up")
        return cls(x, y, W, H, g, lam, k, zeta, gamma, surrounded, t)

    @classmethod
    def from_octagon(cls, geom: OctagonGeom, params: ModelParams,
                     lam: float, surrounded=False, t=0.0):
        eps = params.eps
        return cls(eps * geom.anchor[0], eps * geom.anchor[1],
                   eps * geom.width, eps * geom.height,
                   tuple(eps * c for c in geom.cuts),
                   lam, params.k, params.zeta, params.gamma, surrounded, t)

    @property
    def P(self) -> tuple[float, float, float, float]:
        g = self.g
        return (self.W - g[0] - g[3], self.H - g[0] - g[1],
                self.W - g[1] - g[2], self.H - g[2] - g[3])

    @property
    def D(self) -> tuple[float, float, float, float]:
        return tuple(SQRT2 * gi for gi in self.g)

    def closure_residuals(self) -> tuple[float, float]:
        P, g = self.P, self.g
        r_w = (P[0] + g[0] + g[3]) - (P[2] + g[1] + g[2])
        r_h = (P[1] + g[0] + g[1]) - (P[3] + g[2] + g[3])
        return r_w, r_h

    def area(self) -> float:
        return self.W * self.H - sum(gi * gi for gi in self.g) / 2.0

    def rasterize(self, eps: float) -> OctagonGeom:
        w = max(1, round(self.W / eps))
        h = max(1, round(self.H / eps))
        cuts = tuple(max(0, round(gi / eps)) for gi in self.g)
        return OctagonGeom((round(self.x / eps), round(self.y / eps)),
                           w, h, cuts)

    def to_dict(self) -> dict:
        return {"t": self.t, "P": list(self.P), "D": list(self.D),
                "lam": self.lam, "area": self.area()}


def velocities(state: ContinuumState, selection: str = "floor") -> VelocityLaw:
    """Regime-resolved side velocities; raises where the flow is undefined."""
    z, k = state.zeta, state.k
    P, D = state.P, state.D
    if min(P) <= _TOL:
        raise ValueError("side collapse")

    if state.gamma >= 2.0 and state.surrounded:
        if min(D) <= _TOL:
            raise ValueError("diagonal collapse in surrounded flow")
        n_P = tuple(lower_floor(2.0 * z * (1.0 - k) / p) for p in P)
        n_D = tuple(lower_floor((2.0 * SQRT2 * (1.0 - k) * z - SQRT2) / d)
                    for d in D)
        return VelocityLaw(VelocityTag.GAMMA2_SURROUNDED,
                           tuple(n / z for n in n_P),
                           tuple(SQRT2 * n / (2.0 * z) for n in n_D),
                           n_P, n_D)
    if state.gamma >= 2.0 and state.zeta >= 1.0 / (4.0 * k) - _TOL:
        raise ValueError("gamma2 supercritical flow undefined before "
                         "surrounding")

    sd = sum(state.g)
    if state.lam <= _TOL or state.lam < sd - _TOL:
        tag = (VelocityTag.NEGLIGIBLE_SURF if state.lam <= _TOL
               else VelocityTag.PRE_PINNED)
        n_P = tuple(lower_floor(4.0 * z / p) for p in P)
        zero = (0, 0, 0, 0)
        return VelocityLaw(tag, tuple(n / z for n in n_P),
                           (0.0, 0.0, 0.0, 0.0), n_P, zero)
    if abs(state.lam - sd) <= _TOL:
        raise ValueError("degenerate velocity: lam equals sum D / sqrt2")
    if state.lam < sd + sum(P) - _TOL:
        if min(D) <= _TOL:
            raise ValueError("diagonal collapse")
        pick = lower_floor if selection == "floor" else upper_branch
        n_P = tuple(pick(2.0 * z * (1.0 - k) / p) for p in P)
        n_D = tuple(lower_floor(SQRT2 * z * (1.0 + k) / d) for d in D)
        return VelocityLaw(VelocityTag.SURF_DEPENDENT,
                           tuple(n / z for n in n_P),
                           tuple(SQRT2 * n / (2.0 * z) for n in n_D),
                           n_P, n_D)
    raise ValueError("surfactant exceeds wetting capacity")


def _advance(state: ContinuumState, law: VelocityLaw,
             h: float) -> ContinuumState:
    vP, vD = law.v_P, law.v_D
    g = tuple(max(0.0, state.g[i] + h * (SQRT2 * vD[i] - vP[i]
                                         - vP[(i + 1) % 4]))
              for i in range(4))
    return replace(state,
                   x=state.x + h * vP[1],
                   y=state.y + h * vP[0],
                   W=state.W - h * (vP[1] + vP[3]),
                   H=state.H - h * (vP[0] + vP[2]),
                   g=g,
                   t=state.t + h)


def _signature(state: ContinuumState, selection: str):
    try:
        law = velocities(state, selection)
    except ValueError as e:
        return ("halt", str(e))
    clamps = tuple(gi <= _TOL for gi in state.g)
    return (law.tag, law.n_P, law.n_D, clamps)


def _probe(state: ContinuumState, law: VelocityLaw, h: float,
           selection: str):
    """Signature after a trial step; a state that fails to construct
    (length driven negative) counts as a halt so bisection brackets it."""
    try:
        return _signature(_advance(state, law, h), selection)
    except ValueError as e:
        return ("halt", str(e))


def _describe_event(sig0, sig1) -> str:
    if sig1[0] == "halt":
        return sig1[1]
    if sig0[0] == "halt":
        return "resumed"
    if sig0[0] != sig1[0]:
        return f"regime change {sig0[0].value} -> {sig1[0].value}"
    if sig0[3] != sig1[3]:
        return "diagonal vanished"
    return "velocity floor crossing"


@dataclass(frozen=True)
class ContinuumTrajectory:
    states: list
    laws: list
    events: list
    status: str
    selection: str

    @property
    def final(self) -> ContinuumState:
        return self.states[-1]

    def state_at(self, t: float) -> ContinuumState:
        """Exact state at time t (velocities constant between records)."""
        ts = [s.t for s in self.states]
        if t <= ts[0]:
            return self.states[0]
        if t >= ts[-1]:
            return self.states[-1]
        i = bisect_right(ts, t) - 1
        a, b = self.states[i], self.states[i + 1]
        th = (t - a.t) / (b.t - a.t)
        lerp = lambda u, v: u + th * (v - u)
        return replace(a,
                       x=lerp(a.x, b.x), y=lerp(a.y, b.y),
                       W=lerp(a.W, b.W), H=lerp(a.H, b.H),
                       g=tuple(lerp(ga, gb) for ga, gb in zip(a.g, b.g)),
                       t=t)

    def to_rows(self) -> list[dict]:
        event_times = {round(e["t"], 12): e["kind"] for e in self.events}
        rows = []
        for i, s in enumerate(self.states):
            law = self.laws[min(i, len(self.laws) - 1)] if self.laws else None
            rows.append({
                "t": s.t,
                **{f"P{j + 1}": s.P[j] for j in range(4)},
                **{f"D{j + 1}": s.D[j] for j in range(4)},
                "regime": law.tag.value if law else "none",
                "event": event_times.get(round(s.t, 12), ""),
            })
        return rows


def integrate(state0: ContinuumState, dt: float, t_end: float,
              selection: str = "floor", max_events: int = 20000,
              vanish_tol: float = 1e-3) -> ContinuumTrajectory:
    """Evolve the limit flow with event bisection until t_end or a halt.

    Status values: "ok"; "extinct" (box below vanish_tol, where the
    velocity cascade outruns any fixed resolution and the remaining
    survival time is O(vanish_tol^2)); "indeterminate" (lam hits
    sum D / sqrt2, or wetting capacity is exhausted); the raising
    message for other undefined-flow halts; "event budget exhausted".
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    states = [state0]
    laws: list[VelocityLaw] = []
    events: list[dict] = []
    status = "ok"
    state = state0

    while state.t < t_end - _TOL:
        if min(state.W, state.H) <= vanish_tol:
            status = "extinct"
            break
        try:
            law = velocities(state, selection)
        except ValueError as e:
            msg = str(e)
            status = ("indeterminate"
                      if "degenerate velocity" in msg or "capacity" in msg
                      else msg)
            if not (events and events[-1]["kind"] == msg):
                events.append({"t": state.t, "kind": msg})
            break
        if not law.moving:
            states.append(_advance(state, law, t_end - state.t))
            laws.append(law)
            break
        h = min(dt, t_end - state.t)
        sig0 = _signature(state, selection)
        sig1 = _probe(state, law, h, selection)
        if sig1 != sig0:
            lo, hi = 0.0, h
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if _probe(state, law, mid, selection) == sig0:
                    lo = mid
                else:
                    hi = mid
            nxt = _advance(state, law, hi)
            events.append({"t": nxt.t,
                           "kind": _describe_event(
                               sig0, _signature(nxt, selection))})
        else:
            nxt = _advance(state, law, h)
        rw, rh = nxt.closure_residuals()
        if abs(rw) > 1e-9 or abs(rh) > 1e-9:
            raise AssertionError("octagon closure drifted during a step")
        states.append(nxt)
        laws.append(law)
        state = nxt
        if len(events) >= max_events:
            status = "event budget exhausted"
            break

    return ContinuumTrajectory(states, laws, events, status, selection)


# ----------------------------------------------------------------------
# discrete-to-continuum comparison
# ----------------------------------------------------------------------

def _hausdorff_sets(A: frozenset, B: frozenset) -> int:
    """Chessboard Hausdorff distance via distance transforms, O(area)."""
    if not A or not B:
        raise ValueError("hausdorff needs nonempty sets")
    xs = [p[0] for p in A] + [p[0] for p in B]
    ys = [p[1] for p in A] + [p[1] for p in B]
    x0, y0 = min(xs), min(ys)
    w = max(xs) - x0 + 1
    h = max(ys) - y0 + 1
    mA = np.zeros((w, h), dtype=bool)
    mB = np.zeros((w, h), dtype=bool)
    for (x, y) in A:
        mA[x - x0, y - y0] = True
    for (x, y) in B:
        mB[x - x0, y - y0] = True
    dB = ndimage.distance_transform_cdt(~mB, metric="chessboard")
    dA = ndimage.distance_transform_cdt(~mA, metric="chessboard")
    return int(max(dB[mA].max(), dA[mB].max()))


def convergence_check(state0: ContinuumState, eps_list, t_end: float,
                      dt: Optional[float] = None) -> dict:
    """Compare rasterized lattice facet flows against the limit flow.

    For each eps the initial octagon is state0 rasterized at that scale
    with C = round(lam / eps), stepped by the facet laws; distances are
    measured at that flow's own step times j zeta eps.
    """
    from .facet_law import FacetState, facet_trajectory

    z = state0.zeta
    cont = integrate(state0, dt if dt is not None else z * min(eps_list) / 2,
                     t_end)
    t_cont = cont.final.t
    out = {"eps": list(eps_list), "distances": [], "checkpoints": [],
           "discrete_status": [], "continuum_status": cont.status}
    for eps in eps_list:
        params = ModelParams(eps=eps, k=state0.k, zeta=z, gamma=state0.gamma)
        geom = state0.rasterize(eps)
        C = round(state0.lam / eps)
        fstate = FacetState.from_octagon(geom, C, params, lam=state0.lam,
                                         surrounded=state0.surrounded)
        tau = z * eps
        n_steps = max(1, math.ceil(t_end / tau))
        traj = facet_trajectory(fstate, n_steps)
        disc = [fstate]
        for r in traj:
            if r.status != "ok":
                break
            disc.append(r.state)
        d_max = 0
        n_checked = 0
        for j, fs in enumerate(disc):
            t_j = j * tau
            if t_j > min(t_end, t_cont) + _TOL:
                break
            A = fs.geom.rasterize()
            B = cont.state_at(t_j).rasterize(eps).rasterize()
            d_max = max(d_max, _hausdorff_sets(A, B))
            n_checked += 1
        out["distances"].append(eps * d_max)
        out["checkpoints"].append(n_checked)
        out["discrete_status"].append(
            traj[-1].status if traj else "ok")
    ds = out["distances"]
    es = out["eps"]
    out["bound_4eps"] = [d <= 4.0 * e + 1e-9 for d, e in zip(ds, es)]
    # distances are quantized in units of eps, so the factor-2 decay
    # comparison carries one quantum of additive slack
    out["monotone_within_factor2"] = all(
        ds[i + 1] <= 2.0 * ds[i] + es[i + 1] + 1e-9
        for i in range(len(ds) - 1))
    return out
