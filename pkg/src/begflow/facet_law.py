"""Closed-form displacement laws and regime classification.

Each evolution step of a (quasi-)octagon phase falls into one of a small
number of regimes, determined by the balance between the surfactant
count, the corner capacity, and the mobility.  Within a regime the side
displacements obey explicit floor formulas in the side lengths, up to
small inclusion sets near integer thresholds.  This module computes the
regime tags with their witnessing inequalities, the per-regime step
operations, and a driver that resolves every remaining tie so its
selections agree with the site-level minimizer wherever the law applies.

Side indexing is clockwise from the bottom: parallel sides 1..4 are
bottom, left, top, right; diagonal side i joins parallel sides i and
i+1.  P_i and D_i denote the physical side lengths of the smallest
containing octagon, the tilde variants those of the defect-free core;
for an octagon state the two coincide.  The corner-seat count of the
containing octagon is n_corners = sum_i D_i / (sqrt2 eps).

The scalar behind the sub-quadratic regimes is the reduced step
objective (constant terms dropped, lengths physical)

    G(a, b) = (2k - 2) sum_i a_i - (1 + k) sum_i b_i
              + sum_i P~_i a_i (a_i + 1) / (2 zeta)
              + sum_i D_i b_i (b_i + 1) / (2 sqrt2 zeta).

Its unconstrained integer minimum reproduces the surfactant-dependent
stage-2 velocities; restricted to the corner budget
xi = sum b - 2 sum a <= C - n_corners it yields the nonlocal stage-3
coupling, whose Lagrange points are the displayed fractions minus 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Optional

from .energy import ModelParams, SpinConfig, canonical_surfactant
from .lattice import (
    OctagonGeom,
    QuasiOctagonGeom,
    outer_boundary,
    recognize_octagon,
    smallest_containing_octagon,
)
from .oracle import _candidate_sites, _Evaluator

SQRT2 = math.sqrt(2.0)


class RegimeTag(str, Enum):
    STAGE1_PINNED = "Stage1Pinned"
    STAGE2_SURF = "Stage2SurfDependent"
    STAGE3_NONLOCAL = "Stage3Nonlocal"
    NULL_DIAGONAL = "NullDiagonal"
    COMPLETE_WETTING = "CompleteWetting"
    GAMMA2_SURROUNDED = "Gamma2Surrounded"
    GAMMA2_REDUCE = "Gamma2ReduceToSub2"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class Regime:
    """A regime tag plus the margins of the inequalities that decided it."""

    tag: RegimeTag
    witness: dict = field(default_factory=dict)

    def __eq__(self, other):
        if isinstance(other, Regime):
            return self.tag == other.tag
        if isinstance(other, (RegimeTag, str)):
            return self.tag == other
        return NotImplemented

    def __hash__(self):
        return hash(self.tag)


@dataclass(frozen=True)
class Displacement:
    alpha: tuple[int, int, int, int]
    beta: tuple[int, int, int, int]

    def __post_init__(self):
        if any(v < 0 for v in self.alpha) or any(v < 0 for v in self.beta):
            raise ValueError("displacements must be nonnegative")

    @property
    def xi(self) -> int:
        return sum(self.beta) - 2 * sum(self.alpha)

    def to_dict(self) -> dict:
        return {"alpha": list(self.alpha), "beta": list(self.beta)}


ZERO_DISPLACEMENT = Displacement((0, 0, 0, 0), (0, 0, 0, 0))


@dataclass(frozen=True)
class FacetState:
    """A (quasi-)octagon phase with surfactant count and parameters.

    The surfactant is assumed canonically placed: corner seats first,
    overflow onto the faces, or the full contact ring when surrounded.
    lam optionally carries the limiting surfactant mass lim eps * C for
    the degenerate-velocity check.
    """

    geom: QuasiOctagonGeom
    C: int
    params: ModelParams
    lam: Optional[float] = None
    surrounded: bool = False

    @classmethod
    def from_octagon(cls, geom: OctagonGeom, C: int, params: ModelParams,
                     lam: Optional[float] = None,
                     surrounded: bool = False) -> "FacetState":
        return cls(QuasiOctagonGeom(geom, (None, None, None, None)), C,
                   params, lam, surrounded)

    def config(self) -> SpinConfig:
        I = self.geom.rasterize()
        if self.surrounded:
            return SpinConfig(I, frozenset(outer_boundary(I)))
        if self.C == 0:
            return SpinConfig(I, frozenset())
        return SpinConfig(I, canonical_surfactant(I, self.C))

    def containing(self) -> OctagonGeom:
        return self.geom.containing_octagon()

    @property
    def P(self) -> tuple[float, float, float, float]:
        eps = self.params.eps
        return tuple(eps * p for p in self.containing().lattice_P())

    @property
    def D(self) -> tuple[float, float, float, float]:
        eps = self.params.eps
        return tuple(SQRT2 * eps * c for c in self.containing().cuts)

    @property
    def P_core(self) -> tuple[float, float, float, float]:
        eps = self.params.eps
        return tuple(eps * p for p in self.geom.core.lattice_P())

    @property
    def D_core(self) -> tuple[float, float, float, float]:
        eps = self.params.eps
        return tuple(SQRT2 * eps * c for c in self.geom.core.cuts)

    @property
    def n_corners(self) -> int:
        return sum(self.containing().cuts)

    def eq36_ok(self) -> bool:
        """Running lower bound on the parallel sides (shape hypothesis)."""
        p = self.params
        try:
            ca = c_alpha(self)
        except ValueError:
            return False
        return min(self.P) >= (1.0 - p.k) * p.zeta / (ca + 1)

    def to_dict(self) -> dict:
        return {"geom": self.geom.to_dict(), "C": self.C,
                "P": list(self.P), "D": list(self.D),
                "surrounded": self.surrounded}


# ----------------------------------------------------------------------
# tie arithmetic
# ----------------------------------------------------------------------

def dist_to_naturals(x: float) -> float:
    """Distance from x to the positive integers {1, 2, ...}."""
    if x <= 1.0:
        return 1.0 - x
    lo = math.floor(x)
    return min(x - lo, lo + 1 - x)


def near_tie(x: float, params: ModelParams) -> bool:
    return dist_to_naturals(x) < params.tie_window


def _nearest_natural(x: float) -> int:
    return max(1, round(x))


def floor_set(x: float, params: ModelParams) -> tuple[int, ...]:
    """Law set for a plain floor formula: {floor x}, or {n-1, n} near a
    tie at the natural number n."""
    if near_tie(x, params):
        n = _nearest_natural(x)
        return tuple(v for v in (n - 1, n) if v >= 0)
    return (max(0, math.floor(x)),)


def bracket_set(x: float, params: ModelParams) -> tuple[int, ...]:
    """Law set {floor x, ceil x}, widened to three values near a tie."""
    if near_tie(x, params):
        n = _nearest_natural(x)
        return tuple(v for v in (n - 1, n, n + 1) if v >= 0)
    return tuple(sorted({max(0, math.floor(x)), max(0, math.ceil(x))}))


def alpha_min_value(x: float, params: ModelParams) -> int:
    """Smallest admissible parallel displacement for law fraction x."""
    if near_tie(x, params):
        return max(0, _nearest_natural(x) - 1)
    return max(0, math.floor(x))


def beta_max_value(x: float, params: ModelParams) -> int:
    """Largest admissible diagonal displacement for law fraction x."""
    if near_tie(x, params):
        return _nearest_natural(x)
    return max(0, math.floor(x))


# ----------------------------------------------------------------------
# law fractions and scalar operations
# ----------------------------------------------------------------------

def stage1_fraction(P_i: float, params: ModelParams) -> float:
    return 4.0 * params.zeta / P_i


def stage2_alpha_fraction(P_i: float, params: ModelParams) -> float:
    return 2.0 * params.zeta * (1.0 - params.k) / P_i


def stage2_beta_fraction(D_i: float, params: ModelParams) -> float:
    return SQRT2 * params.zeta * (1.0 + params.k) / D_i


def gamma2_alpha_fraction(P_i: float, params: ModelParams) -> float:
    return 2.0 * params.zeta * (1.0 - params.k) / P_i


def gamma2_beta_fraction(D_i: float, params: ModelParams) -> float:
    return (2.0 * SQRT2 * params.zeta * (1.0 - params.k) - SQRT2) / D_i


def c_alpha(state: FacetState) -> int:
    """Uniform displacement bound: floor(4 zeta / min core side) + 2."""
    pmin = min(state.P_core)
    if pmin <= 0:
        raise ValueError("c_alpha undefined: degenerate parallel side")
    return math.floor(4.0 * state.params.zeta / pmin) + 2


def alpha_min_beta_max(state: FacetState):
    """Conservative per-side bounds used by the regime inequalities."""
    params = state.params
    Pc, Dc = state.P_core, state.D_core
    if min(Pc) <= 0 or min(Dc) <= 0:
        raise ValueError("alpha_min_beta_max undefined on zero-length sides")
    amin = tuple(alpha_min_value(stage2_alpha_fraction(p, params), params)
                 for p in Pc)
    bmax = tuple(beta_max_value(stage2_beta_fraction(d, params), params)
                 for d in Dc)
    return amin, bmax


def stage3_fractions(P_core, D_cont, params: ModelParams, xi: int,
                     double_xi: bool = False):
    """Nonlocal displacement fractions for the corner-tight regime.

    The parallel-side numerator follows the stated law with a single
    xi; the variant with 2 xi (a direct re-derivation of the coupled
    stationarity system) is available behind the flag and coincides
    with it at xi = 0.
    """
    z = params.zeta
    S_D = sum(1.0 / d for d in D_cont)
    S_P = sum(1.0 / p for p in P_core)
    num_a = 4.0 + 4.0 * SQRT2 * z * S_D - (2.0 * xi if double_xi else float(xi))
    den_a = SQRT2 * S_D + 4.0 * S_P
    num_b = float(xi) - 2.0 + 8.0 * z * S_P
    den_b = S_D + 2.0 * SQRT2 * S_P
    fa = tuple(num_a / (den_a * p) for p in P_core)
    fb = tuple(num_b / (den_b * d) for d in D_cont)
    return fa, fb


def reduced_objective(state: FacetState, alpha, beta) -> float:
    """Reduced step objective G; constant terms dropped.

    Valid while every created corner seat can be filled, i.e. while
    n_corners + xi <= C; callers enforce that budget.
    """
    p = state.params
    z, k = p.zeta, p.k
    Pc = state.P_core
    Dc = state.D
    g = (2.0 * k - 2.0) * sum(alpha) - (1.0 + k) * sum(beta)
    g += sum(Pc[i] * alpha[i] * (alpha[i] + 1) for i in range(4)) / (2.0 * z)
    g += sum(Dc[i] * beta[i] * (beta[i] + 1) for i in range(4)) / (2.0 * SQRT2 * z)
    return g


# ----------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------

def classify(state: FacetState) -> Regime:
    """Decide which displacement law governs the next step."""
    params = state.params
    eps, z, k = params.eps, params.zeta, params.k
    I = state.geom.rasterize()
    ring = len(outer_boundary(I))
    C = ring if state.surrounded else state.C
    witness: dict = {"ring": ring, "C": C}

    if params.gamma >= 2.0:
        z_low = 1.0 / (4.0 * k)
        z_mid = 1.0 / (3.0 * k - 1.0)
        z_sur = 1.0 / (2.0 - 2.0 * k)
        witness.update({"z_low": z_low, "z_mid": z_mid, "z_sur": z_sur})
        if z < z_low - 1e-12:
            witness["band"] = "sub-critical"
            return Regime(RegimeTag.GAMMA2_REDUCE, witness)
        if abs(z - z_low) <= 1e-12:
            witness["band"] = "critical"
            witness["tie_policy"] = "count-preserving"
            return Regime(RegimeTag.GAMMA2_REDUCE, witness)
        if state.surrounded:
            if z >= z_sur - 1e-12:
                return Regime(RegimeTag.GAMMA2_SURROUNDED, witness)
            witness["reason"] = "delegated-out-of-scope"
            return Regime(RegimeTag.INDETERMINATE, witness)
        if z >= z_mid - 1e-12:
            witness["action"] = "fill-ring"
            return Regime(RegimeTag.GAMMA2_SURROUNDED, witness)
        witness["band"] = "intermediate"
        return Regime(RegimeTag.GAMMA2_REDUCE, witness)

    if ring <= C:
        return Regime(RegimeTag.COMPLETE_WETTING, witness)

    D_cont = state.D
    # the pre-pinned / surfactant-dependent transition is only ambiguous
    # for a genuinely positive limiting mass
    if state.lam is not None and state.lam > 1e-15:
        lam_gap = state.lam - sum(D_cont) / SQRT2
        witness["lam_gap"] = lam_gap
        if abs(lam_gap) < 1e-12:
            witness["reason"] = "degenerate velocity at lam = sum D / sqrt2"
            return Regime(RegimeTag.INDETERMINATE, witness)

    cuts = state.containing().cuts
    sum_c = sum(cuts)
    try:
        ca = c_alpha(state)
    except ValueError:
        # a parallel side vanished: outside every displayed hypothesis
        witness["reason"] = "degenerate parallel side"
        return Regime(RegimeTag.INDETERMINATE, witness)
    pin_threshold = C + 8 * ca + 2
    witness.update({"sum_cuts": sum_c, "c_alpha": ca,
                    "pin_threshold": pin_threshold})
    # margin of the uncrowded-ring hypothesis, reported but not enforced
    witness["uncrowded_margin"] = ring - 8.0 * eps ** (params.mu - 1.0) - C

    if sum_c >= pin_threshold:
        return Regime(RegimeTag.STAGE1_PINNED, witness)

    if C == 0:
        # no surfactant anywhere: wetting is never profitable, every
        # side follows the bare-mobility floor law
        witness["reason"] = "no surfactant"
        witness["null_threshold"] = max(D_cont)
        return Regime(RegimeTag.NULL_DIAGONAL, witness)

    D_core = state.D_core
    if min(D_core) > 0 and min(state.P_core) > 0:
        amin, bmax = alpha_min_beta_max(state)
        seat_bound = sum_c + sum(bmax) - 2 * sum(amin)
        witness["seat_bound"] = seat_bound
        if seat_bound <= C - 2 and all(d >= params.cbar for d in D_core):
            return Regime(RegimeTag.STAGE2_SURF, witness)
    else:
        amin = tuple(alpha_min_value(stage2_alpha_fraction(p, params), params)
                     for p in state.P_core)
        bmax = tuple(beta_max_value(
            stage2_beta_fraction(max(d, SQRT2 * eps), params), params)
            for d in D_core)

    null_thresh = 0.5 * SQRT2 * z * (1.0 + k) / (8 * ca + 1)
    witness["null_threshold"] = null_thresh
    if C <= sum_c < pin_threshold and min(D_cont) <= null_thresh:
        return Regime(RegimeTag.NULL_DIAGONAL, witness)

    bracket = C - 2 - (sum(bmax) - 2 * sum(amin))
    witness["stage3_bracket"] = bracket
    if bracket < sum_c < pin_threshold and all(d >= params.cbar for d in D_cont):
        return Regime(RegimeTag.STAGE3_NONLOCAL, witness)

    return Regime(RegimeTag.INDETERMINATE, witness)


def _require(state: FacetState, tag: RegimeTag) -> Regime:
    regime = classify(state)
    if regime.tag != tag:
        raise ValueError(f"regime mismatch: state classifies as "
                         f"{regime.tag.value}, not {tag.value}")
    return regime


# ----------------------------------------------------------------------
# tie resolution helpers
# ----------------------------------------------------------------------

def _exact_F(state: FacetState, cand: Displacement,
             ev: Optional[_Evaluator] = None,
             C_next: Optional[int] = None) -> float:
    ev = ev or _Evaluator(state.config(), state.params)
    core = state.geom.core
    I_new = _candidate_sites(core, cand.alpha, cand.beta)
    if not I_new:
        return math.inf
    cx = core.anchor[0] + core.width // 2
    cy = core.anchor[1] + core.height // 2
    parts, _ = ev.F_canonical(I_new, state.C if C_next is None else C_next,
                              (cx, cy))
    return parts["F"]


def _pick_by_exact_F(state: FacetState, cands) -> Displacement:
    """Resolve a small near-tie family by direct objective comparison."""
    ev = _Evaluator(state.config(), state.params)
    scored = []
    for cand in cands:
        scored.append((_exact_F(state, cand, ev),
                       sum(cand.alpha) + sum(cand.beta),
                       cand.alpha, cand.beta, cand))
    scored.sort(key=lambda r: r[:4])
    best_F = scored[0][0]
    ties = [r for r in scored if r[0] <= best_F + 1e-9]
    ties.sort(key=lambda r: r[1:4])
    return ties[0][4]


# ----------------------------------------------------------------------
# step operations
# ----------------------------------------------------------------------

def step_stage1(state: FacetState) -> Displacement:
    """Pinned-diagonal motion: curvature-driven parallel sides only."""
    _require(state, RegimeTag.STAGE1_PINNED)
    params = state.params
    sets_a = [floor_set(stage1_fraction(p, params), params) for p in state.P]
    cands = [Displacement(a, (0, 0, 0, 0)) for a in product(*sets_a)]
    if len(cands) == 1:
        return cands[0]
    return _pick_by_exact_F(state, cands)


def stage2_beta_exact_floor(D_i: float, params: ModelParams) -> int:
    """Largest wetting rate whose exact marginal cost stays profitable.

    The rate fraction sqrt2 zeta (1+k) / D uses the leading-order
    dissipation c b(b+1)/2 per diagonal of lattice depth c; the exact
    sum over the removed wedge is (c+1) b(b+1)/2 + b(b+1)(b-1)/6.  The
    b-th unit is profitable iff zeta (1+k) / eps > (c+1) b + b(b-1)/2.
    For c >= f(f+1)/(2 sqrt eps) both floors agree off ties; below that
    the corrected floor decides, via exact-objective tie resolution.
    """
    p = params
    c = max(1, round(D_i / (SQRT2 * p.eps)))
    x = p.zeta * (1.0 + p.k) / p.eps
    b = 0
    while (c + 1) * (b + 1) + b * (b + 1) / 2.0 < x:
        b += 1
    return b


def step_stage2(state: FacetState) -> Displacement:
    """Surfactant-dependent velocities; ties resolved by exact objective.

    Each parallel side carries the displayed two-element bracket of
    2 zeta (1-k) / P; each diagonal carries the floor of
    sqrt2 zeta (1+k) / D, widened by the near-tie set and by the
    finite-eps corrected floor.  The product family is small and the
    minimizer of the exact one-step objective is returned.
    """
    _require(state, RegimeTag.STAGE2_SURF)
    params = state.params
    sets_a = [bracket_set(stage2_alpha_fraction(p, params), params)
              for p in state.P_core]
    sets_b = []
    for d in state.D_core:
        cand = set(floor_set(stage2_beta_fraction(d, params), params))
        cand.add(stage2_beta_exact_floor(d, params))
        sets_b.append(tuple(sorted(cand)))
    cands = [Displacement(a, b)
             for a in product(*sets_a) for b in product(*sets_b)]
    return _pick_by_exact_F(state, cands)


def step_stage3(state: FacetState) -> tuple[Displacement, int]:
    """Corner-budgeted nonlocal motion.

    For each feasible corner change xi the integer candidates sit within
    one unit of the rounded stationarity points (the displayed
    fractions minus one half); the reduced objective picks the global
    minimizer across xi, and the winner is checked against the
    displayed inclusion sets.
    """
    regime = _require(state, RegimeTag.STAGE3_NONLOCAL)
    params = state.params
    if state.geom.has_defects() and min(state.D_core) < params.cbar:
        raise ValueError("stage3 law undefined: defected state with a "
                         "short diagonal")
    Pc = state.P_core
    Dc = state.D
    ca = c_alpha(state)
    budget = state.C - state.n_corners   # created seats must be fillable
    if budget < 0:
        # Surfactant-deficient states fall outside the corner-tight
        # hypotheses; unfillable seats carry no energy reward, so the
        # motion degrades to the bare curvature law on the parallel
        # sides, resolved by direct objective comparison.
        regime.witness["stage3_fallback"] = "curvature"
        sets_a = [floor_set(stage1_fraction(p, params), params)
                  for p in state.P]
        cands = [Displacement(a, (0, 0, 0, 0)) for a in product(*sets_a)]
        disp = _pick_by_exact_F(state, cands)
        return disp, disp.xi
    xi_lo, xi_hi = -8 * ca, min(8 * ca, budget)
    best = None
    for xi in range(xi_lo, xi_hi + 1):
        fa, fb = stage3_fractions(Pc, Dc, params, xi)
        sa = [sorted({max(0, min(ca, round(x - 0.5) + d))
                      for d in (-1, 0, 1)}) for x in fa]
        sb = [sorted({max(0, round(x - 0.5) + d) for d in (-1, 0, 1)})
              for x in fb]
        for a in product(*sa):
            need = sum(a) * 2 + xi
            for b in product(*sb):
                if sum(b) == need:
                    g = reduced_objective(state, a, b)
                    key = (g, sum(a) + sum(b), a, b)
                    if best is None or key < best:
                        best = key
    if best is None:
        raise ValueError("stage3 infeasible: no integer candidate in range")
    _, _, a, b = best
    disp = Displacement(a, b)
    xi = disp.xi
    fa, fb = stage3_fractions(Pc, Dc, params, xi)
    in_sets = (all(a[i] in bracket_set(fa[i], params) for i in range(4))
               and all(b[i] in bracket_set(fb[i], params) for i in range(4)))
    regime.witness["stage3_in_displayed_sets"] = in_sets
    return disp, xi


def step_null_diagonal(state: FacetState, ell: float) -> Displacement:
    """Motion with one or more degenerate diagonals.

    Parallel sides follow the curvature law; diagonals no shorter than
    16 c_alpha ell stay pinned, and the remaining growth is whatever
    assignment of the displaced corner mass to the short diagonals
    minimizes the objective, within the budget sum beta <= 2 sum alpha.
    """
    _require(state, RegimeTag.NULL_DIAGONAL)
    params = state.params
    z, k = params.zeta, params.k
    ca = c_alpha(state)
    sets_a = [floor_set(stage1_fraction(p, params), params) for p in state.P]
    D = state.D
    free = [i for i in range(4) if D[i] < 16 * ca * ell]

    eps = params.eps
    cuts = state.containing().cuts

    def seats(a, b):
        return sum(max(0, cuts[i] + b[i] - a[i] - a[(i + 1) % 4])
                   for i in range(4))

    def greedy_beta(a):
        # Exchange-optimal assignment: per-side marginals
        # -(1+k) + D_eff (b+1) / (sqrt2 z) are increasing in b (the
        # marched diagonal lengthens by sqrt2 eps per unit), so filling
        # the cheapest diagonal first is exact.  The budget keeps
        # sum(beta) <= 2 sum(alpha) and never seats more corners than
        # the surfactant count allows.
        budget = 2 * sum(a)
        b = [0, 0, 0, 0]
        while budget > 0:
            marg = []
            for i in free:
                d_eff = D[i] + SQRT2 * eps * b[i]
                marg.append((-(1.0 + k) + d_eff * (b[i] + 1) / (SQRT2 * z),
                             D[i], i))
            marg.sort()
            placed = False
            for m, _, i in marg:
                if m >= 0:
                    break
                b[i] += 1
                if seats(a, b) > state.C:
                    b[i] -= 1
                    continue
                placed = True
                budget -= 1
                break
            if not placed:
                break
        return tuple(b)

    cands = [Displacement(a, greedy_beta(a)) for a in product(*sets_a)]
    cands += [Displacement(a, (0, 0, 0, 0)) for a in product(*sets_a)]
    return _pick_by_exact_F(state, cands)


def step_gamma2(state: FacetState) -> Displacement:
    """Quadratic-weight displacement per the mobility table."""
    params = state.params
    regime = classify(state)
    if regime.tag == RegimeTag.GAMMA2_REDUCE:
        sub = ModelParams(eps=params.eps, k=params.k, zeta=params.zeta,
                          gamma=1.0, mu=params.mu, cbar=params.cbar)
        inner = FacetState(state.geom, state.C, sub, state.lam)
        disp, _, _, _ = _dispatch(inner, classify(inner))
        return disp
    if regime.tag != RegimeTag.GAMMA2_SURROUNDED:
        raise ValueError(f"regime mismatch: state classifies as "
                         f"{regime.tag.value}, not Gamma2Surrounded")
    if not state.surrounded:
        # the contact ring fills in place before the surrounded law runs
        return ZERO_DISPLACEMENT
    alpha = tuple(max(0, math.floor(gamma2_alpha_fraction(p, params)))
                  for p in state.P)
    beta = tuple(max(0, math.floor(gamma2_beta_fraction(d, params)))
                 if d > 0 else 0 for d in state.D)
    return Displacement(alpha, beta)


def update_lengths(state: FacetState, d: Displacement) -> FacetState:
    """Advance the geometry by integer side displacements.

    The new lengths satisfy P'_i = P_i + 2 eps a_i - eps (b_i + b_{i-1})
    and D'_i = D_i + sqrt2 eps (b_i - a_i - a_{i+1}); whenever a
    diagonal would go negative the realized set is re-derived from the
    rasterized geometry (the cut clamps at zero), which keeps the new
    set inside the previous one.
    """
    core = state.containing()
    a1, a2, a3, a4 = d.alpha
    b1, b2, b3, b4 = d.beta
    x0, y0 = core.anchor
    c1, c2, c3, c4 = core.cuts
    w = core.width - a2 - a4
    h = core.height - a1 - a3
    if w < 0 or h < 0:
        raise ValueError("degenerate transition: phase would vanish")
    g = OctagonGeom((x0 + a2, y0 + a1), w, h,
                    (max(0, c1 + b1 - a1 - a2), max(0, c2 + b2 - a2 - a3),
                     max(0, c3 + b3 - a3 - a4), max(0, c4 + b4 - a4 - a1)))
    sites = g.rasterize() if g.is_valid() else frozenset()
    if not sites:
        raise ValueError("degenerate transition: sides cross")
    geom = recognize_octagon(sites)
    if geom is None:
        geom = smallest_containing_octagon(sites)
    C = len(outer_boundary(sites)) if state.surrounded else state.C
    return FacetState.from_octagon(geom, C, state.params, state.lam,
                                   state.surrounded)


# ----------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class FacetStepResult:
    state: FacetState
    regime: Regime
    displacement: Optional[Displacement]
    xi: int
    C: int
    F: float
    status: str = "ok"

    @property
    def alpha(self):
        return None if self.displacement is None else self.displacement.alpha

    @property
    def beta(self):
        return None if self.displacement is None else self.displacement.beta

    def to_dict(self) -> dict:
        return {
            "P": list(self.state.P),
            "D": list(self.state.D),
            "C": self.C,
            "regime": self.regime.tag.value,
            "alpha": None if self.displacement is None else list(self.alpha),
            "beta": None if self.displacement is None else list(self.beta),
            "xi": self.xi,
            "status": self.status,
        }


def _dispatch(state: FacetState, regime: Regime):
    """Return (Displacement, xi, C_next, surrounded_next) for one step."""
    tag = regime.tag
    if tag == RegimeTag.STAGE1_PINNED:
        d = step_stage1(state)
        return d, d.xi, state.C, False
    if tag == RegimeTag.STAGE2_SURF:
        d = step_stage2(state)
        return d, d.xi, state.C, False
    if tag == RegimeTag.STAGE3_NONLOCAL:
        d, xi = step_stage3(state)
        return d, xi, state.C, False
    if tag == RegimeTag.NULL_DIAGONAL:
        thresh = regime.witness["null_threshold"]
        short = [dd for dd in state.D if dd <= thresh]
        ell = max(short) if short else min(dd for dd in state.D if dd > 0)
        ell = max(ell, state.params.eps)
        d = step_null_diagonal(state, ell)
        return d, d.xi, state.C, False
    if tag == RegimeTag.GAMMA2_REDUCE:
        d = step_gamma2(state)
        return d, d.xi, state.C, state.surrounded
    if tag == RegimeTag.GAMMA2_SURROUNDED:
        d = step_gamma2(state)
        if not state.surrounded:
            ring = len(outer_boundary(state.geom.rasterize()))
            return d, 0, ring, True
        return d, d.xi, state.C, True
    raise ValueError(f"no step operation for {tag.value}")


def facet_step(state: FacetState) -> FacetStepResult:
    """Classify, dispatch, and advance one facet-level step."""
    regime = classify(state)
    if regime.tag in (RegimeTag.COMPLETE_WETTING, RegimeTag.INDETERMINATE):
        status = ("complete-wetting"
                  if regime.tag == RegimeTag.COMPLETE_WETTING
                  else regime.witness.get("reason", "indeterminate"))
        return FacetStepResult(state, regime, None, 0, state.C,
                               float("nan"), status=status)

    if regime.tag == RegimeTag.GAMMA2_REDUCE:
        # the sub-quadratic analysis governs verbatim with #Z held fixed
        params = state.params
        sub = ModelParams(eps=params.eps, k=params.k, zeta=params.zeta,
                          gamma=1.0, mu=params.mu, cbar=params.cbar)
        inner = facet_step(FacetState(state.geom, state.C, sub, state.lam))
        regime.witness["delegate"] = inner.regime.tag.value
        new_state = FacetState(inner.state.geom, inner.state.C, params,
                               state.lam)
        return FacetStepResult(new_state, regime, inner.displacement,
                               inner.xi, inner.C, inner.F,
                               status=inner.status)

    disp, xi, C_next, surrounded = _dispatch(state, regime)
    F = _exact_F(state, disp, C_next=C_next)
    try:
        new_state = update_lengths(
            FacetState(state.geom, C_next, state.params, state.lam,
                       surrounded),
            disp)
    except ValueError as e:
        if "degenerate transition" in str(e):
            return FacetStepResult(state, regime, disp, xi, state.C,
                                   F, status="collapsed")
        raise
    # xi re-measured from the realized geometry so cut clamps count
    xi_real = new_state.n_corners - state.n_corners
    regime.witness["xi_law"] = xi
    regime.witness["eq36_ok"] = new_state.eq36_ok()
    return FacetStepResult(new_state, regime, disp, xi_real, new_state.C, F)


def facet_trajectory(state0: FacetState, n_steps: int) -> list[FacetStepResult]:
    """Iterate facet_step until n_steps or a terminal status."""
    out: list[FacetStepResult] = []
    state = state0
    for _ in range(n_steps):
        res = facet_step(state)
        out.append(res)
        if res.status != "ok":
            break
        state = res.state
    return out


# ----------------------------------------------------------------------
# oracle comparison
# ----------------------------------------------------------------------

def compare_with_oracle(state: FacetState, budget=None) -> dict:
    """Step the facet law and the site-level minimizer side by side.

    Agreement is measured on the containing-octagon geometry and the
    surfactant count, which is what the laws predict.
    """
    from .oracle import oracle_step

    fres = facet_step(state)
    ores = oracle_step(state.config(), state.params, budget)
    if fres.status != "ok" or ores.status != "ok":
        return {"match": fres.status == ores.status,
                "facet": fres, "oracle": ores}
    fI = fres.state.geom.rasterize()
    o_geom = ores.geom.containing_octagon() if ores.geom else None
    f_geom = fres.state.containing()
    geom_match = (o_geom is not None
                  and o_geom.to_dict() == f_geom.to_dict())
    return {"match": geom_match and fres.C == ores.C,
            "sets_equal": fI == ores.config.I,
            "facet": fres, "oracle": ores,
            "facet_F": fres.F, "oracle_F": ores.F}
