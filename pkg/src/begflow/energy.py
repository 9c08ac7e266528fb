"""Energies, dissipations, and surfactant placement.

Spin configurations take values in {+1, 0, -1}; a configuration is stored
as the set I of +1 sites and the set Z of 0 sites (surfactant), everything
else being -1.  Energies are measured relative to the constant -1 state,
so only bonds meeting I or Z contribute:

    {+1, -1} bond : 2 * eps
    any bond touching a 0 : (1 - k) * eps
    {+1, +1} or {-1, -1} : 0

with the coupling k in (1/3, 1).

The implicit time step couples two dissipations: a bulk one weighting each
flipped phase site by its L1 lattice distance to the old phase boundary,
and a surfactant-count one |#Z' - #Z| entering at order eps^gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.ndimage import distance_transform_cdt

from .lattice import (
    OctagonGeom,
    QuasiOctagonGeom,
    Site,
    bounding_box,
    contact_count,
    neighbors,
    outer_boundary,
)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ModelParams:
    eps: float
    k: float
    zeta: float
    gamma: float = 1.0
    mu: float = 0.2
    cbar: float = 0.2

    def __post_init__(self):
        if not 0 < self.eps:
            raise ValueError("eps must be positive")
        if not (1.0 / 3.0 < self.k < 1.0):
            raise ValueError("k must lie in (1/3, 1)")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")

    @property
    def tau(self) -> float:
        return self.zeta * self.eps

    @property
    def tie_window(self) -> float:
        """Near-integer window below which a displacement count is a tie."""
        return math.sqrt(self.eps)


@dataclass(frozen=True)
class SpinConfig:
    I: frozenset[Site]
    Z: frozenset[Site]

    def __post_init__(self):
        object.__setattr__(self, "I", frozenset(self.I))
        object.__setattr__(self, "Z", frozenset(self.Z))
        if self.I & self.Z:
            raise ValueError("phase and surfactant sets overlap")

    def spin(self, p: Site) -> int:
        if p in self.I:
            return 1
        if p in self.Z:
            return 0
        return -1

    def to_dict(self) -> dict:
        return {"I": sorted(map(list, self.I)), "Z": sorted(map(list, self.Z))}

    @classmethod
    def from_dict(cls, d: dict) -> "SpinConfig":
        return cls(frozenset(map(tuple, d["I"])), frozenset(map(tuple, d["Z"])))


@dataclass(frozen=True)
class EnergyBreakdown:
    n_pm_bonds: int
    n_zero_bonds: int
    eps: float
    k: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total",
            self.eps * (2.0 * self.n_pm_bonds + (1.0 - self.k) * self.n_zero_bonds))


def beg_energy(cfg: SpinConfig, params: ModelParams) -> EnergyBreakdown:
    n_pm = 0
    for p in cfg.I:
        for q in neighbors(p):
            if q not in cfg.I and q not in cfg.Z:
                n_pm += 1
    n_zero = 0
    for p in cfg.Z:
        for q in neighbors(p):
            if q in cfg.Z:
                if q > p:  # each 0-0 bond once
                    n_zero += 1
            else:
                n_zero += 1
    return EnergyBreakdown(n_pm, n_zero, params.eps, params.k)


def perimeter(I: frozenset[Site] | set[Site], eps: float) -> float:
    """eps times the number of exposed unit edges of I."""
    if not I:
        return 0.0
    internal = sum(q in I for p in I for q in neighbors(p))  # counts each bond twice
    return eps * (4 * len(I) - internal)


def surface_tension(nu: tuple[float, float], k: float) -> float:
    """Anisotropy density for a unit outward normal."""
    n = math.hypot(nu[0], nu[1])
    if abs(n - 1.0) > 1e-6:
        raise ValueError("normal must be a unit vector")
    a, b = abs(nu[0]), abs(nu[1])
    return (1.0 - k) * (3.0 * max(a, b) + min(a, b))


# ----------------------------------------------------------------------
# distance fields and dissipations
# ----------------------------------------------------------------------

def distance_grids(I: frozenset[Site] | set[Site], pad: int = 2):
    """Exact L1 step distances around I.

    Returns (inside, outside, x_off, y_off): inside[y - y_off, x - x_off]
    is the distance from a site of I to the complement (boundary row = 1),
    outside is the distance from a site off I to I, zero on the other set.
    """
    if not I:
        raise ValueError("empty set has no distance field")
    x0, y0, w, h = bounding_box(I)
    x_off, y_off = x0 - pad, y0 - pad
    mask = np.zeros((h + 2 * pad + 1, w + 2 * pad + 1), dtype=bool)
    for x, y in I:
        mask[y - y_off, x - x_off] = True
    inside = distance_transform_cdt(mask, metric="taxicab").astype(np.int64)
    outside = distance_transform_cdt(~mask, metric="taxicab").astype(np.int64)
    return inside, outside, x_off, y_off


def dissipation_d1(I_new: frozenset[Site], I_old: frozenset[Site], params: ModelParams) -> float:
    """Bulk dissipation: eps^3 sum of L1 step distances over the symmetric difference.

    Sites of I_old that were kept out are weighted by their depth inside
    I_old; freshly added sites by their distance to I_old.
    """
    diff = I_new ^ I_old
    if not diff:
        return 0.0
    inside, outside, x_off, y_off = distance_grids(I_old, pad=2)
    total = 0
    ny, nx = inside.shape
    for x, y in diff:
        iy, ix = y - y_off, x - x_off
        if 0 <= iy < ny and 0 <= ix < nx:
            total += int(inside[iy, ix]) + int(outside[iy, ix])
        else:
            # outside the padded window: distance to the bounding box is a
            # valid lower bound made exact by direct search
            total += min(abs(x - p[0]) + abs(y - p[1]) for p in I_old)
    return params.eps ** 3 * total


def dissipation_d0(cfg_new: SpinConfig, cfg_old: SpinConfig) -> int:
    return abs(len(cfg_new.Z) - len(cfg_old.Z))


def total_functional(cfg_new: SpinConfig, cfg_old: SpinConfig, params: ModelParams) -> dict:
    """Implicit-step objective: energy plus (1/tau)(D1 + eps^gamma D0)."""
    e = beg_energy(cfg_new, params)
    d1 = dissipation_d1(cfg_new.I, cfg_old.I, params) if cfg_old.I else 0.0
    d0 = dissipation_d0(cfg_new, cfg_old)
    F = e.total + (d1 + params.eps ** params.gamma * d0) / params.tau
    return {"F": F, "energy": e.total, "diss1": d1, "diss0": d0, "breakdown": e}


# ----------------------------------------------------------------------
# canonical surfactant placement
# ----------------------------------------------------------------------

_SIDE_OF_DIR = {(0, 1): 1, (1, 0): 2, (0, -1): 3, (-1, 0): 4}


def canonical_surfactant(target, C: int) -> frozenset[Site]:
    """Deterministic minimal-energy placement of C surfactant sites around I.

    Corner sites (two or more phase neighbours) come first, strongest
    contact then lexicographic.  Overflow goes to the parallel-side faces
    in side order bottom, left, top, right, each face filling as one
    contiguous run from its lexicographically smallest site.  Any excess
    beyond the full first ring accretes by maximal contact with what is
    already placed.
    """
    if C <= 0:
        return frozenset()
    if isinstance(target, (OctagonGeom, QuasiOctagonGeom)):
        I = target.rasterize()
    else:
        I = frozenset(target)
    if not I:
        raise ValueError("cannot place surfactant around an empty phase")

    ring = outer_boundary(I)
    corners = sorted((p for p in ring if contact_count(p, I) >= 2),
                     key=lambda p: (-contact_count(p, I), p))
    placed: list[Site] = corners[:C]
    if len(placed) < C:
        faces: dict[int, list[Site]] = {1: [], 2: [], 3: [], 4: []}
        for p in ring:
            if contact_count(p, I) != 1:
                continue
            q = next(q for q in neighbors(p) if q in I)
            faces[_SIDE_OF_DIR[(q[0] - p[0], q[1] - p[1])]].append(p)
        for i in (1, 2, 3, 4):
            for p in sorted(faces[i]):
                placed.append(p)
                if len(placed) == C:
                    break
            if len(placed) == C:
                break

    while len(placed) < C:
        occupied = I | set(placed)
        frontier = outer_boundary(occupied)
        top = max(contact_count(p, occupied) for p in frontier)
        placed.append(min(p for p in frontier if contact_count(p, occupied) == top))

    return frozenset(placed)
