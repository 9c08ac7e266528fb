"""Run drivers, scenario suite, exporters, and the command line.

Configs carry physical lengths with the lattice spacing separate; the
lattice geometry is derived by rounding, never configured directly.
Trajectory tables share one fixed column order so CSV and JSONL stay
byte-stable for identical inputs.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import click

from .energy import ModelParams, beg_energy, total_functional
from .facet_law import (FacetState, RegimeTag, classify, compare_with_oracle,
                        facet_trajectory)
from .lattice import OctagonGeom, outer_boundary
from .oracle import SearchBudget, minimizing_movement
from .continuum import ContinuumState, integrate

SQRT2 = math.sqrt(2.0)

MODES = ("oracle", "facet", "continuum", "compare", "scenario")

DISCRETE_COLUMNS = [
    "step", "t", "P1", "P2", "P3", "P4", "D1", "D2", "D3", "D4", "C",
    "regime", "alpha1", "alpha2", "alpha3", "alpha4",
    "beta1", "beta2", "beta3", "beta4", "xi", "energy", "diss1", "diss0", "F",
]
CONTINUUM_COLUMNS = ["t", "P1", "P2", "P3", "P4",
                     "D1", "D2", "D3", "D4", "regime", "event"]
COMPARE_COLUMNS = ["step", "verdict", "facet_F", "oracle_F",
                   "facet_geometry", "oracle_geometry"]


class UsageError(ValueError):
    """Invalid run configuration; carries the offending field name."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.fieldname = fieldname


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """One simulation run: model parameters, physical geometry, driver.

    Lengths are physical; the lattice is derived as round(length / eps).
    Exactly one of count / lam fixes the surfactant.
    """

    mode: str
    eps: float = 0.1
    zeta: float = 1.0
    k: float = 0.6
    gamma: float = 1.0
    width: float = 0.0
    height: float = 0.0
    cuts: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    anchor: tuple[float, float] = (0.0, 0.0)
    count: Optional[int] = None
    lam: Optional[float] = None
    steps: Optional[int] = None
    t_end: Optional[float] = None
    seed: int = 0
    budget: Optional[dict] = None
    scenario_name: Optional[str] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError("mode", f"must be one of {', '.join(MODES)}")
        if self.mode == "scenario":
            return
        if (self.count is None) == (self.lam is None):
            raise UsageError("surfactant",
                             "exactly one of count / lambda is required")
        if self.width <= 0 or self.height <= 0:
            raise UsageError("geometry", "width and height must be positive")
        if any(c < 0 for c in self.cuts):
            raise UsageError("geometry", "cuts must be nonnegative")
        if self.mode == "continuum":
            if self.t_end is None:
                raise UsageError("t_end", "required for continuum runs")
        elif self.steps is None:
            raise UsageError("steps", f"required for {self.mode} runs")
        if self.eps <= 0 or self.zeta <= 0:
            raise UsageError("params", "eps and zeta must be positive")
        if not 1.0 / 3.0 < self.k < 1.0:
            raise UsageError("params", "k must lie in (1/3, 1)")

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "RunConfig":
        if not isinstance(data, dict):
            raise UsageError("config", "expected a JSON object")
        geom = data.get("geometry", {})
        surf = data.get("surfactant", {})
        known = {
            "mode": data.get("mode", "facet"),
            "eps": data.get("eps", 0.1),
            "zeta": data.get("zeta", 1.0),
            "k": data.get("k", 0.6),
            "gamma": data.get("gamma", 1.0),
            "width": geom.get("width", 0.0),
            "height": geom.get("height", 0.0),
            "cuts": tuple(geom.get("cuts", (0.0, 0.0, 0.0, 0.0))),
            "anchor": tuple(geom.get("anchor", (0.0, 0.0))),
            "count": surf.get("count"),
            "lam": surf.get("lambda"),
            "steps": data.get("steps"),
            "t_end": data.get("t_end"),
            "seed": data.get("seed", 0),
            "budget": data.get("budget"),
            "scenario_name": data.get("scenario_name"),
            "out": data.get("out"),
        }
        known.update(overrides)
        if len(known["cuts"]) != 4:
            raise UsageError("geometry", "cuts must list four lengths")
        return cls(**known)

    # -- derived objects ----------------------------------------------

    @property
    def params(self) -> ModelParams:
        return ModelParams(eps=self.eps, k=self.k, zeta=self.zeta,
                           gamma=self.gamma)

    @property
    def C(self) -> int:
        if self.count is not None:
            return self.count
        return round(self.lam / self.eps)

    def lattice_geometry(self) -> OctagonGeom:
        e = self.eps
        geom = OctagonGeom((round(self.anchor[0] / e), round(self.anchor[1] / e)),
                           round(self.width / e), round(self.height / e),
                           tuple(round(c / e) for c in self.cuts))
        if not geom.is_valid():
            raise UsageError("geometry", "cuts exceed the box at this eps")
        return geom

    def facet_state(self) -> FacetState:
        return FacetState.from_octagon(self.lattice_geometry(), self.C,
                                       self.params, lam=self.lam)

    def continuum_state(self) -> ContinuumState:
        if self.lam is None:
            raise UsageError("surfactant",
                             "continuum runs need lambda, not a count")
        return ContinuumState(self.anchor[0], self.anchor[1],
                              self.width, self.height,
                              tuple(self.cuts), self.lam, self.k,
                              self.zeta, self.gamma)

    def search_budget(self) -> Optional[SearchBudget]:
        if not self.budget:
            return None
        valid = {f for f in SearchBudget.__dataclass_fields__}
        bad = set(self.budget) - valid
        if bad:
            raise UsageError("budget", f"unknown fields: {sorted(bad)}")
        return SearchBudget(**self.budget)


# ----------------------------------------------------------------------
# trajectory tables
# ----------------------------------------------------------------------

def _blank_row(step: int, t: float) -> dict:
    row = {c: "" for c in DISCRETE_COLUMNS}
    row["step"] = step
    row["t"] = t
    return row


def _fill_lengths(row: dict, P, D) -> None:
    for i in range(4):
        row[f"P{i + 1}"] = P[i]
        row[f"D{i + 1}"] = D[i]


def _fill_displacement(row: dict, alpha, beta, xi) -> None:
    if alpha is not None:
        for i in range(4):
            row[f"alpha{i + 1}"] = alpha[i]
    if beta is not None:
        for i in range(4):
            row[f"beta{i + 1}"] = beta[i]
    row["xi"] = xi


def facet_rows(state0: FacetState, results) -> list[dict]:
    """Discrete trajectory table for a facet-law run."""
    params = state0.params
    tau = params.zeta * params.eps
    prev_cfg = state0.config()
    row = _blank_row(0, 0.0)
    _fill_lengths(row, state0.P, state0.D)
    row["C"] = state0.C
    row["regime"] = classify(state0).tag.value
    row["energy"] = beg_energy(prev_cfg, params).total
    rows = [row]
    for j, r in enumerate(results, start=1):
        row = _blank_row(j, j * tau)
        _fill_lengths(row, r.state.P, r.state.D)
        row["C"] = r.C
        row["regime"] = r.regime.tag.value
        if r.status == "ok":
            cfg = r.state.config()
            tf = total_functional(cfg, prev_cfg, params)
            _fill_displacement(row, r.alpha, r.beta, r.xi)
            row["energy"] = tf["energy"]
            row["diss1"] = tf["diss1"]
            row["diss0"] = tf["diss0"]
            row["F"] = tf["F"]
            prev_cfg = cfg
        else:
            row["regime"] = f"{r.regime.tag.value}:{r.status}"
        rows.append(row)
    return rows


def oracle_rows(cfg0, params: ModelParams, results) -> list[dict]:
    """Discrete trajectory table for a site-level minimizer run."""
    tau = params.zeta * params.eps
    row = _blank_row(0, 0.0)
    from .lattice import smallest_containing_octagon
    g0 = smallest_containing_octagon(cfg0.I)
    _fill_lengths(row, tuple(params.eps * p for p in g0.lattice_P()),
                  tuple(SQRT2 * params.eps * c for c in g0.cuts))
    row["C"] = len(cfg0.Z)
    row["regime"] = "oracle"
    row["energy"] = beg_energy(cfg0, params).total
    rows = [row]
    for j, r in enumerate(results, start=1):
        row = _blank_row(j, j * tau)
        if r.geom is not None:
            g = r.geom.containing_octagon()
            _fill_lengths(row, tuple(params.eps * p for p in g.lattice_P()),
                          tuple(SQRT2 * params.eps * c for c in g.cuts))
        row["C"] = r.C
        row["regime"] = "oracle" if r.status == "ok" else f"oracle:{r.status}"
        if r.status == "ok":
            _fill_displacement(row, r.alpha, r.beta, r.xi)
            row["energy"] = r.energy
            row["diss1"] = r.diss1
            row["diss0"] = r.diss0
            row["F"] = r.F
        rows.append(row)
    return rows


def export_csv(rows: list[dict], path, columns: Optional[list[str]] = None):
    """Write the trajectory table with a fixed column order."""
    if not rows:
        raise ValueError("empty trajectory")
    cols = columns if columns is not None else list(rows[0].keys())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    return path


def export_jsonl(rows: list[dict], path):
    """One JSON object per line, keys sorted; byte-stable per input."""
    if not rows:
        raise ValueError("empty trajectory")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ----------------------------------------------------------------------
# run drivers
# ----------------------------------------------------------------------

@dataclass
class RunReport:
    ok: bool
    summary: dict
    rows: list[dict]
    columns: list[str]
    files: list[Path] = field(default_factory=list)


def _regime_sequence(rows: list[dict]) -> list[str]:
    seq = []
    for row in rows:
        tag = row.get("regime", "")
        if tag and (not seq or seq[-1] != tag):
            seq.append(tag)
    return seq


def _conservation(rows: list[dict]) -> dict:
    """Post-run bookkeeping checks on the trajectory table."""
    f_monotone = True
    prev_energy = None
    count_steps = [r for r in rows if r.get("F", "") != ""]
    for row in rows:
        if row.get("energy", "") == "":
            continue
        if prev_energy is not None and row.get("F", "") != "":
            # the identity displacement is always admissible, so each
            # implicit step can do no worse than staying put
            if row["F"] > prev_energy + 1e-9:
                f_monotone = False
        prev_energy = row["energy"]
    counts = [r["C"] for r in rows if r.get("C", "") != ""]
    return {
        "f_monotone": f_monotone,
        "surfactant_counts": sorted(set(counts)),
        "steps_with_objective": len(count_steps),
    }


def run(config: RunConfig) -> RunReport:
    """Dispatch one configured run and write its artifacts."""
    if config.mode == "facet":
        state0 = config.facet_state()
        results = facet_trajectory(state0, config.steps)
        rows = facet_rows(state0, results)
        cols = DISCRETE_COLUMNS
        status = results[-1].status if results else "ok"
        final = results[-1].state if results else state0
        summary = {
            "mode": "facet",
            "status": status,
            "steps_completed": sum(1 for r in results if r.status == "ok"),
            "regimes": _regime_sequence(rows),
            "conservation": _conservation(rows),
            "final_geometry": final.containing().to_dict(),
            "final_C": final.C,
        }
        ok = True
    elif config.mode == "oracle":
        state0 = config.facet_state()
        cfg0 = state0.config()
        results = minimizing_movement(cfg0, config.params, config.steps,
                                      config.search_budget())
        rows = oracle_rows(cfg0, config.params, results)
        cols = DISCRETE_COLUMNS
        status = results[-1].status if results else "ok"
        summary = {
            "mode": "oracle",
            "status": status,
            "steps_completed": sum(1 for r in results if r.status == "ok"),
            "recognized": all(r.geom is not None for r in results
                              if r.status == "ok"),
            "conservation": _conservation(rows),
            "final_C": results[-1].C if results else state0.C,
        }
        ok = True
    elif config.mode == "continuum":
        state0 = config.continuum_state()
        dt = config.zeta * config.eps / 2.0
        traj = integrate(state0, dt, config.t_end)
        rows = traj.to_rows()
        cols = CONTINUUM_COLUMNS
        summary = {
            "mode": "continuum",
            "status": traj.status,
            "events": traj.events,
            "regimes": _regime_sequence(rows),
            "final": traj.final.to_dict(),
        }
        ok = traj.status in ("ok", "extinct")
    elif config.mode == "compare":
        rows, summary = _compare_run(config)
        cols = COMPARE_COLUMNS
        ok = summary["mismatches"] == 0
    elif config.mode == "scenario":
        name = config.scenario_name
        report = scenario_suite([name] if name else None)
        rows = [{"scenario": r["name"], "passed": r["passed"],
                 "failed_checks": [c[0] for c in r["checks"] if not c[1]]}
                for r in report["scenarios"]]
        summary = {"mode": "scenario", "passed": report["passed"],
                   "scenarios": report["scenarios"]}
        cols = ["scenario", "passed", "failed_checks"]
        ok = report["passed"]
    else:  # pragma: no cover - guarded by RunConfig
        raise UsageError("mode", "unknown mode")

    report = RunReport(ok, summary, rows, cols)
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        report.files.append(export_csv(rows, out / "trajectory.csv", cols))
        report.files.append(export_jsonl(rows, out / "trajectory.jsonl"))
        spath = out / "summary.json"
        spath.write_text(json.dumps(summary, indent=2, sort_keys=True,
                                    default=str) + "\n")
        report.files.append(spath)
    return report


def _compare_run(config: RunConfig):
    """Facet law against the site-level minimizer, one verdict per step."""
    state = config.facet_state()
    budget = config.search_budget()
    rows = []
    mismatches = 0
    for j in range(1, config.steps + 1):
        cmp = compare_with_oracle(state, budget)
        if "facet_F" not in cmp:
            f_status = cmp["facet"].status
            o_status = cmp["oracle"].status
            rows.append({"step": j, "verdict": f"halt:{f_status}/{o_status}",
                         "facet_F": "", "oracle_F": "",
                         "facet_geometry": "", "oracle_geometry": ""})
            break
        if cmp["match"]:
            verdict = "match"
        elif abs(cmp["facet_F"] - cmp["oracle_F"]) <= 1e-9:
            # distinct minimizers of equal objective value: a tie
            verdict = "in-inclusion-set"
        else:
            verdict = "mismatch"
            mismatches += 1
        fgeom = cmp["facet"].state.containing().to_dict()
        og = cmp["oracle"].geom
        ogeom = og.containing_octagon().to_dict() if og is not None else None
        rows.append({"step": j, "verdict": verdict,
                     "facet_F": cmp["facet_F"], "oracle_F": cmp["oracle_F"],
                     "facet_geometry": json.dumps(fgeom, sort_keys=True),
                     "oracle_geometry": json.dumps(ogeom, sort_keys=True)})
        state = cmp["facet"].state
    summary = {"mode": "compare", "steps": len(rows),
               "mismatches": mismatches,
               "verdicts": [r["verdict"] for r in rows]}
    return rows, summary


# ----------------------------------------------------------------------
# scenario suite
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """A named built-in experiment with machine-checkable assertions."""

    name: str
    description: str
    runner: Callable[[], dict]

    def run(self) -> dict:
        try:
            result = self.runner()
        except Exception as exc:  # honest failure, never a crash
            result = {"checks": [("scenario completed", False, repr(exc))],
                      "rows": []}
        checks = result["checks"]
        return {"name": self.name, "description": self.description,
                "passed": all(c[1] for c in checks), "checks": checks,
                "rows": result.get("rows", [])}


def _mk_state(w, h, cuts, C, eps=0.1, zeta=1.0, k=0.6, gamma=1.0):
    return FacetState.from_octagon(
        OctagonGeom((0, 0), w, h, cuts), C,
        ModelParams(eps=eps, k=k, zeta=zeta, gamma=gamma))


def _support_lines(geom: OctagonGeom) -> tuple[int, int, int, int]:
    (x0, y0), w, h = geom.anchor, geom.width, geom.height
    c = geom.cuts
    return (x0 + y0 + c[0], (y0 + h) - x0 - c[1],
            (x0 + w) + (y0 + h) - c[2], (x0 + w) - y0 - c[3])


def _scenario_stage1_pinning() -> dict:
    checks = []
    # crystalline phase: faces advance, diagonal support lines frozen
    s = _mk_state(50, 50, (12, 12, 12, 12), 4)
    traj = facet_trajectory(s, 3)
    lines0 = _support_lines(s.containing())
    checks.append(("three pinned-regime steps",
                   all(r.regime.tag == RegimeTag.STAGE1_PINNED
                       for r in traj), [r.regime.tag.value for r in traj]))
    checks.append(("no wetting in the pinned regime",
                   all(r.beta == (0, 0, 0, 0) for r in traj), None))
    checks.append(("diagonal support lines invariant",
                   all(_support_lines(r.state.containing()) == lines0
                       for r in traj), lines0))
    # sub-threshold mobility: the whole crystal freezes
    s2 = _mk_state(98, 98, (9, 9, 9, 9), 1, zeta=0.52)
    traj2 = facet_trajectory(s2, 3)
    checks.append(("slow-mobility crystal fully pinned",
                   all(r.regime.tag == RegimeTag.STAGE1_PINNED
                       and r.alpha == (0, 0, 0, 0)
                       and r.beta == (0, 0, 0, 0) for r in traj2), None))
    rows = facet_rows(s, traj)
    return {"checks": checks, "rows": rows}


def _scenario_wetting_march() -> dict:
    s = _mk_state(16, 16, (2, 2, 2, 2), 48, zeta=0.55, k=0.5)
    traj = facet_trajectory(s, 8)
    checks = []
    ring = len(outer_boundary(s.geom.rasterize()))
    identity = True
    for r in traj:
        if r.status != "ok":
            break
        ring_next = len(outer_boundary(r.state.geom.rasterize()))
        if ring_next != ring - sum(r.beta):
            identity = False
        ring = ring_next
    checks.append(("contact ring shrinks by the wetting total each step",
                   identity, None))
    checks.append(("march terminates in complete wetting",
                   traj[-1].status == "complete-wetting",
                   traj[-1].status))
    checks.append(("final ring within surfactant count",
                   ring <= s.C, (ring, s.C)))
    return {"checks": checks, "rows": facet_rows(s, traj)}


def _scenario_diagonal_persistence() -> dict:
    s = _mk_state(26, 26, (5, 5, 5, 5), 20)
    traj = facet_trajectory(s, 7)
    ok_steps = [r for r in traj if r.status == "ok"]
    checks = [
        ("nonlocal regime throughout",
         all(r.regime.tag == RegimeTag.STAGE3_NONLOCAL for r in ok_steps),
         [r.regime.tag.value for r in ok_steps]),
        ("many persistent steps", len(ok_steps) >= 6, len(ok_steps)),
        ("occupied corners track the count",
         all(r.state.n_corners in (s.C, s.C - 1) for r in ok_steps),
         [r.state.n_corners for r in ok_steps]),
    ]
    return {"checks": checks, "rows": facet_rows(s, traj)}


def _scenario_degenerate_diagonal() -> dict:
    s = _mk_state(44, 52, (0, 14, 16, 4), 34, zeta=0.55)
    traj = facet_trajectory(s, 5)
    first = traj[0]
    checks = [
        ("degenerate start classified by the null-diagonal law",
         first.regime.tag == RegimeTag.NULL_DIAGONAL,
         first.regime.tag.value),
        ("vanished diagonal regrows",
         first.status == "ok"
         and first.state.containing().cuts[0] > 0,
         first.state.containing().cuts),
        ("flow continues through the nonlocal regime",
         any(r.regime.tag == RegimeTag.STAGE3_NONLOCAL for r in traj[1:]),
         [r.regime.tag.value for r in traj]),
        ("no failures", all(r.status == "ok" for r in traj), None),
    ]
    return {"checks": checks, "rows": facet_rows(s, traj)}


def _scenario_negligible_surfactant() -> dict:
    s = _mk_state(30, 30, (4, 4, 4, 4), 0)
    traj = facet_trajectory(s, 4)
    checks = []
    checks.append(("no wetting without surfactant",
                   all(r.beta == (0, 0, 0, 0) for r in traj
                       if r.status == "ok"), None))
    # support lines hold exactly until the advancing faces consume a
    # diagonal; after that the sharp corner tracks the faces
    lines0 = _support_lines(s.containing())
    cur, lines_ok, checked = s, True, 0
    for r in traj:
        if r.status != "ok":
            break
        cuts = cur.containing().cuts
        unclamped = all(cuts[i] >= r.alpha[i] + r.alpha[(i + 1) % 4]
                        for i in range(4))
        if not unclamped:
            break
        if _support_lines(r.state.containing()) != lines0:
            lines_ok = False
        checked += 1
        cur = r.state
    checks.append(("support lines invariant until diagonals are consumed",
                   lines_ok and checked >= 1, (checked, lines0)))
    # faces follow the bare floor law; verified off ties only
    cur = s
    floors_ok = True
    for r in traj:
        if r.status != "ok":
            break
        for i in range(4):
            frac = 4.0 * cur.params.zeta / cur.P[i]
            if abs(frac - round(frac)) > math.sqrt(cur.params.eps):
                if r.alpha[i] != math.floor(frac):
                    floors_ok = False
        cur = r.state
    checks.append(("faces follow the floor mobility law", floors_ok, None))
    return {"checks": checks, "rows": facet_rows(s, traj)}


def _scenario_gamma2_cells() -> dict:
    from .facet_law import facet_step
    checks = []
    mk = lambda z, g: _mk_state(12, 12, (2, 2, 2, 2), 8, zeta=z, k=0.5,
                                gamma=g)
    # cell 1: sub-critical mobility reduces to the linear-weight step
    r_quad = facet_step(mk(0.4, 2.0))
    r_lin = facet_step(mk(0.4, 1.0))
    checks.append(("sub-critical quadratic weight matches linear weight",
                   r_quad.regime.tag == RegimeTag.GAMMA2_REDUCE
                   and r_quad.alpha == r_lin.alpha
                   and r_quad.beta == r_lin.beta
                   and r_quad.state.containing().to_dict()
                   == r_lin.state.containing().to_dict(), None))
    # cell 2: intermediate band still delegates
    r_mid = facet_step(mk(1.5, 2.0))
    checks.append(("intermediate band delegates",
                   r_mid.regime.tag == RegimeTag.GAMMA2_REDUCE
                   and r_mid.regime.witness.get("band") == "intermediate",
                   r_mid.regime.witness.get("band")))
    # cell 3: fast mobility surrounds the phase in one step
    s3 = mk(2.0, 2.0)
    ring = len(outer_boundary(s3.geom.rasterize()))
    r_sur = facet_step(s3)
    checks.append(("fast mobility fills the contact ring",
                   r_sur.regime.tag == RegimeTag.GAMMA2_SURROUNDED
                   and r_sur.state.surrounded and r_sur.C == ring,
                   (r_sur.C, ring)))
    # cell 4: the surrounded phase then follows the quadratic floor law
    r_next = facet_step(r_sur.state)
    checks.append(("surrounded phase follows the quadratic floor law",
                   r_next.regime.tag == RegimeTag.GAMMA2_SURROUNDED
                   and r_next.alpha == (2, 2, 2, 2)
                   and r_next.beta == (4, 4, 4, 4),
                   (r_next.alpha, r_next.beta)))
    return {"checks": checks, "rows": []}


SCENARIOS: dict[str, ScenarioSpec] = {
    spec.name: spec for spec in [
        ScenarioSpec("stage1-pinning",
                     "diagonals pinned while faces follow the floor law",
                     _scenario_stage1_pinning),
        ScenarioSpec("wetting-march",
                     "surfactant-rich phase wets toward complete coverage",
                     _scenario_wetting_march),
        ScenarioSpec("diagonal-persistence",
                     "surfactant seated on diagonals persists for many steps",
                     _scenario_diagonal_persistence),
        ScenarioSpec("degenerate-diagonal",
                     "a vanished diagonal regrows under saturated surfactant",
                     _scenario_degenerate_diagonal),
        ScenarioSpec("negligible-surfactant",
                     "without surfactant the diagonals never move",
                     _scenario_negligible_surfactant),
        ScenarioSpec("gamma2-cells",
                     "quadratic dissipation weight across its parameter cells",
                     _scenario_gamma2_cells),
    ]
}


def scenario_suite(names: Optional[list[str]] = None,
                   parallel: bool = True) -> dict:
    """Run built-in scenarios; failures are reported, never raised."""
    if names is None:
        picked = list(SCENARIOS.values())
    else:
        unknown = [n for n in names if n not in SCENARIOS]
        if unknown:
            raise UsageError("scenario", f"unknown: {unknown}; "
                             f"known: {sorted(SCENARIOS)}")
        picked = [SCENARIOS[n] for n in names]
    if parallel and len(picked) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(picked))) as pool:
            results = list(pool.map(lambda s: s.run(), picked))
    else:
        results = [s.run() for s in picked]
    return {"passed": all(r["passed"] for r in results),
            "scenarios": results}


# ----------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------

def _load_config(path: str, **overrides) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"config: {exc}")
    try:
        return RunConfig.from_dict(data, **overrides)
    except UsageError as exc:
        raise click.UsageError(str(exc))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"config: {exc}")


def _emit_figures(report: RunReport, out: str) -> list[Path]:
    from .figures import render_figures
    return render_figures(report.rows, Path(out) / "figures")


@click.group()
def main():
    """Minimizing-movement simulator: drivers, scenarios, comparisons."""


@main.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--steps", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--figures", is_flag=True,
              help="also render PNG figures next to the CSV/JSONL output")
def cli_run(config_path, mode, steps, out, seed, figures):
    """Execute one configured run and write its artifacts."""
    overrides = {k: v for k, v in
                 [("mode", mode), ("steps", steps), ("out", out),
                  ("seed", seed)] if v is not None}
    config = _load_config(config_path, **overrides)
    try:
        report = run(config)
    except UsageError as exc:
        raise click.UsageError(str(exc))
    click.echo(json.dumps(report.summary, indent=2, default=str))
    if figures:
        if not config.out:
            raise click.UsageError("out: --figures needs an output directory")
        for p in _emit_figures(report, config.out):
            click.echo(f"figure: {p}")
    sys.exit(0 if report.ok else 1)


@main.command("scenario")
@click.option("--name", "names", multiple=True,
              type=click.Choice(sorted(SCENARIOS)))
@click.option("--all", "run_all", is_flag=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--figures", is_flag=True)
def cli_scenario(names, run_all, out, figures):
    """Run the built-in scenario suite (default: all scenarios)."""
    picked = list(names) if names and not run_all else None
    report = scenario_suite(picked)
    for sc in report["scenarios"]:
        mark = "pass" if sc["passed"] else "FAIL"
        click.echo(f"[{mark}] {sc['name']}: {sc['description']}")
        for label, passed, detail in sc["checks"]:
            if not passed:
                click.echo(f"       failed: {label} ({detail})")
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        for sc in report["scenarios"]:
            if sc["rows"]:
                export_csv(sc["rows"], outdir / f"{sc['name']}.csv",
                           DISCRETE_COLUMNS)
                export_jsonl(sc["rows"], outdir / f"{sc['name']}.jsonl")
                if figures:
                    from .figures import render_figures
                    render_figures(sc["rows"], outdir / "figures",
                                   prefix=sc["name"])
        (outdir / "scenarios.json").write_text(
            json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    sys.exit(0 if report["passed"] else 1)


@main.command("compare")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--eps-list", default=None,
              help="comma-separated lattice spacings, e.g. 0.1,0.05")
@click.option("--steps", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
def cli_compare(config_path, eps_list, steps, out):
    """Facet law against the site-level minimizer at one or more scales."""
    overrides = {"mode": "compare"}
    if steps is not None:
        overrides["steps"] = steps
    base = _load_config(config_path, **overrides)
    eps_values = [base.eps]
    if eps_list:
        try:
            eps_values = [float(t) for t in eps_list.split(",") if t.strip()]
        except ValueError:
            raise click.UsageError("eps-list: expected comma-separated floats")
    any_mismatch = False
    for e in eps_values:
        config = _load_config(config_path, **overrides, eps=e,
                              out=None)
        report = run(config)
        click.echo(f"eps={e}: " + " ".join(
            f"{r['step']}:{r['verdict']}" for r in report.rows))
        if out:
            export_csv(report.rows, Path(out) / f"compare_eps_{e}.csv",
                       COMPARE_COLUMNS)
        if not report.ok:
            any_mismatch = True
    sys.exit(1 if any_mismatch else 0)


if __name__ == "__main__":
    main()
