"""Hazard, information ratio, virtual value, and the assumption checks.

The checks are keyed by short codes:

    A0    signal hazard f/(1-F) weakly increasing in v
    A1    the ratio dH_v(V)/dv over h_v(V) weakly increasing in V
    A2    the same ratio weakly increasing in v
    FOSD  dH_v(V)/dv strictly negative at interior points
    PSI   virtual value weakly increasing in both arguments

A0 is scanned through the inverse hazard (survival over density), which must
be weakly decreasing; near the upper endpoint the inverse form stays finite
where the hazard itself blows up. A1 and A2 are scanned through the
information ratio gamma = -(dH_v/dv)/h_v, which must be weakly decreasing
along the corresponding axis. The FOSD slack is relative to the local
density: a point is flagged only when dHdv >= -slack * h, so thin tails
where both quantities underflow together do not produce spurious hits.

Evaluation failures (density underflow, survival exhausted) are tolerated up
to 1% of the lattice per check and excluded from the scans; past that the
check aborts and names the failing region rather than reporting a verdict
built on holes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DensityUnderflowError,
    DomainError,
    EvaluationError,
    NearEndpointError,
)
from .model_core import (
    GridSpec,
    ScreeningModel,
    ToleranceConfig,
    eval_kernel,
    resolve_config,
)
from .numerics import scan_violations

__all__ = [
    "hazard",
    "gamma",
    "virtual_value",
    "Field2D",
    "compute_field",
    "CheckReport",
    "check_assumption",
    "RegularityReport",
    "regularity_report",
    "CHECK_CODES",
    "FIELD_NAMES",
]

CHECK_CODES = ("A0", "A1", "A2", "FOSD", "PSI")
FIELD_NAMES = ("H", "h", "dHdv", "gamma", "psi")

_SURVIVAL_FLOOR = 1e-15
_DENSITY_FLOOR = 1e-300
_WITNESS_CAP = 64
_FAIL_FRACTION = 0.01


# ---------------------------------------------------------------------------
# pointwise quantities


def hazard(model: ScreeningModel, v: float) -> tuple[float, float]:
    """Signal hazard and its reciprocal at v, as (f/(1-F), (1-F)/f).

    Raises NearEndpointError once survival drops below 1e-15, where neither
    direction of the ratio deserves trust.
    """
    s = model.signal.sf(v)
    f = model.signal.pdf(v)
    if s <= _SURVIVAL_FLOOR:
        raise NearEndpointError(
            f"signal survival {s:.3e} at v={v!r} is too small for a hazard")
    if f < _DENSITY_FLOOR:
        raise DensityUnderflowError(
            f"signal density vanished at v={v!r}")
    return f / s, s / f


def gamma(model: ScreeningModel, v: float, V: float,
          tolerances: ToleranceConfig | None = None) -> float:
    """Information ratio -(dH_v(V)/dv) / h_v(V)."""
    ke = eval_kernel(model, v, V, tolerances)
    if ke.h < _DENSITY_FLOOR:
        raise DensityUnderflowError(
            f"conditional density vanished at v={v!r}, V={V!r}")
    return -ke.dHdv / ke.h


def virtual_value(model: ScreeningModel, v: float, V: float,
                  tolerances: ToleranceConfig | None = None) -> float:
    """psi(v, V) = V - ((1-F)/f) * gamma(v, V)."""
    _, inv = hazard(model, v)
    return V - inv * gamma(model, v, V, tolerances)


# ---------------------------------------------------------------------------
# lattice evaluation


@dataclass
class Field2D:
    """A scalar field sampled on the signal x value lattice.

    ``values[i, j]`` belongs to ``(v[i], V[j])``; failed evaluations hold
    NaN. ``rows()`` yields (v, V, value) in row-major order.
    """

    name: str
    v: np.ndarray
    V: np.ndarray
    values: np.ndarray

    def rows(self):
        for i, vi in enumerate(self.v):
            for j, Vj in enumerate(self.V):
                yield float(vi), float(Vj), float(self.values[i, j])


@dataclass
class _Bundle:
    vs: np.ndarray
    Vs: np.ndarray
    h: np.ndarray
    dHdv: np.ndarray
    gamma: np.ndarray
    psi: np.ndarray
    H: np.ndarray
    inv_hazard: np.ndarray
    kernel_failures: list[tuple[float, float]]
    hazard_failures: list[float]


def _evaluate_bundle(model: ScreeningModel, grid: GridSpec,
                     tol: ToleranceConfig) -> _Bundle:
    vs = model.signal_grid(grid)
    Vs = model.value_grid(grid)
    nv, nV = len(vs), len(Vs)
    h = np.full((nv, nV), np.nan)
    dHdv = np.full((nv, nV), np.nan)
    G = np.full((nv, nV), np.nan)
    psi = np.full((nv, nV), np.nan)
    H = np.full((nv, nV), np.nan)
    inv_haz = np.full(nv, np.nan)
    kernel_failures: list[tuple[float, float]] = []
    hazard_failures: list[float] = []
    for i, v in enumerate(vs):
        v = float(v)
        try:
            _, inv_haz[i] = hazard(model, v)
        except (NearEndpointError, DensityUnderflowError, DomainError):
            hazard_failures.append(v)
        for j, V in enumerate(Vs):
            V = float(V)
            try:
                ke = eval_kernel(model, v, V, tol)
            except (DomainError, EvaluationError):
                kernel_failures.append((v, V))
                continue
            H[i, j] = ke.H
            h[i, j] = ke.h
            dHdv[i, j] = ke.dHdv
            if ke.h >= _DENSITY_FLOOR:
                G[i, j] = -ke.dHdv / ke.h
            else:
                kernel_failures.append((v, V))
    psi[:] = Vs[None, :] - inv_haz[:, None] * G
    return _Bundle(vs=vs, Vs=Vs, h=h, dHdv=dHdv, gamma=G, psi=psi, H=H,
                   inv_hazard=inv_haz, kernel_failures=kernel_failures,
                   hazard_failures=hazard_failures)


def compute_field(model: ScreeningModel, name: str,
                  grid: GridSpec | None = None,
                  tolerances: ToleranceConfig | None = None) -> Field2D:
    """Sample one of H, h, dHdv, gamma, psi on the evaluation lattice."""
    if name not in FIELD_NAMES:
        raise ValueError(f"unknown field {name!r}; choose from {FIELD_NAMES}")
    grid, tol = resolve_config(grid, tolerances)
    b = _evaluate_bundle(model, grid, tol)
    values = {"H": b.H, "h": b.h, "dHdv": b.dHdv, "gamma": b.gamma,
              "psi": b.psi}[name]
    return Field2D(name=name, v=b.vs, V=b.Vs, values=values)


# ---------------------------------------------------------------------------
# check reports


@dataclass
class CheckReport:
    """Outcome of one assumption check on one model."""

    name: str
    passed: bool
    n_violations: int
    worst_violation: float
    witnesses: list[dict] = field(default_factory=list)
    n_evaluated: int = 0
    n_failed: int = 0
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "n_violations": self.n_violations,
            "worst_violation": self.worst_violation,
            "witnesses": self.witnesses,
            "n_evaluated": self.n_evaluated,
            "n_failed": self.n_failed,
            "provenance": self.provenance,
        }


def _abort_if_holey(name: str, n_failed: int, n_total: int,
                    coords: list[tuple[float, float | None]]) -> None:
    if n_failed <= _FAIL_FRACTION * n_total:
        return
    vs = [c[0] for c in coords]
    Vs = [c[1] for c in coords if c[1] is not None]
    box = f"v in [{min(vs):.6g}, {max(vs):.6g}]"
    if Vs:
        box += f", V in [{min(Vs):.6g}, {max(Vs):.6g}]"
    raise EvaluationError(
        f"{name} check aborted: {n_failed} of {n_total} evaluations failed "
        f"inside {box}")


def _provenance(model: ScreeningModel, grid: GridSpec,
                tol: ToleranceConfig) -> dict:
    return {
        "grid": grid.describe(),
        "tolerances": tol.describe(),
        "truncation": model.truncation_info(grid),
    }


def _finish(name: str, hits: list[tuple[float, tuple, dict]],
            n_evaluated: int, n_failed: int, provenance: dict) -> CheckReport:
    """Assemble a report from (magnitude, sort-coords, witness) hits."""
    hits.sort(key=lambda t: (-t[0], t[1]))
    worst = hits[0][0] if hits else 0.0
    return CheckReport(
        name=name,
        passed=not hits,
        n_violations=len(hits),
        worst_violation=worst,
        witnesses=[w for _, _, w in hits[:_WITNESS_CAP]],
        n_evaluated=n_evaluated,
        n_failed=n_failed,
        provenance=provenance,
    )


def _scan_lines(values: np.ndarray, vs: np.ndarray, Vs: np.ndarray,
                axis: str, direction: str, slack: float,
                label: str) -> list[tuple[float, tuple, dict]]:
    """Scan a field for monotonicity along one axis, skipping NaN holes.

    ``axis`` is "V" (scan each row over the value grid) or "v" (scan each
    column over the signal grid).
    """
    hits: list[tuple[float, tuple, dict]] = []
    if axis == "V":
        lines = ((float(vs[i]), Vs, values[i, :]) for i in range(len(vs)))
        fixed_name, free_name = "v", "V"
    else:
        lines = ((float(Vs[j]), vs, values[:, j]) for j in range(len(Vs)))
        fixed_name, free_name = "V", "v"
    for fixed, xs, ys in lines:
        ok = ~np.isnan(ys)
        if ok.sum() < 2:
            continue
        xs_ok = xs[ok]
        ys_ok = ys[ok]
        for mag, x0, x1, y0, y1 in scan_violations(
                xs_ok.tolist(), ys_ok.tolist(), direction, slack):
            witness = {
                fixed_name: fixed,
                f"{free_name}_lo": x0,
                f"{free_name}_hi": x1,
                f"{label}_lo": y0,
                f"{label}_hi": y1,
                "violation": mag,
            }
            sort_coord = (fixed, x0) if axis == "V" else (x0, fixed)
            hits.append((mag, sort_coord, witness))
    return hits


def check_assumption(model: ScreeningModel, which: str,
                     grid: GridSpec | None = None,
                     tolerances: ToleranceConfig | None = None) -> CheckReport:
    """Run one named check (A0, A1, A2, FOSD, or PSI) on the model."""
    code = which.upper()
    if code not in CHECK_CODES:
        raise ValueError(f"unknown check {which!r}; choose from {CHECK_CODES}")
    grid, tol = resolve_config(grid, tolerances)
    prov = _provenance(model, grid, tol)
    slack = tol.monotonicity_slack

    if code == "A0":
        vs = model.signal_grid(grid)
        values = []
        failures = []
        for v in vs:
            v = float(v)
            try:
                _, inv = hazard(model, v)
                values.append((v, inv))
            except (NearEndpointError, DensityUnderflowError, DomainError):
                failures.append((v, None))
        _abort_if_holey("A0", len(failures), len(vs), failures)
        xs = [v for v, _ in values]
        ys = [y for _, y in values]
        hits = [(mag, (x0,), {
            "v_lo": x0, "v_hi": x1,
            "inverse_hazard_lo": y0, "inverse_hazard_hi": y1,
            "violation": mag,
        }) for mag, x0, x1, y0, y1 in scan_violations(
            xs, ys, "decreasing", slack)]
        return _finish("A0", hits, len(vs), len(failures), prov)

    bundle = _evaluate_bundle(model, grid, tol)
    n_total = len(bundle.vs) * len(bundle.Vs)

    if code == "FOSD":
        _abort_if_holey("FOSD", len(bundle.kernel_failures), n_total,
                        bundle.kernel_failures)
        hits = []
        for i, v in enumerate(bundle.vs):
            for j, V in enumerate(bundle.Vs):
                d = bundle.dHdv[i, j]
                hloc = bundle.h[i, j]
                if math.isnan(d) or math.isnan(hloc):
                    continue
                margin = d + slack * hloc
                if d >= -slack * hloc:
                    hits.append((margin, (float(v), float(V)), {
                        "v": float(v), "V": float(V),
                        "dHdv": float(d), "h": float(hloc),
                        "violation": float(margin),
                    }))
        return _finish("FOSD", hits, n_total,
                       len(bundle.kernel_failures), prov)

    if code in ("A1", "A2"):
        _abort_if_holey(code, len(bundle.kernel_failures), n_total,
                        bundle.kernel_failures)
        axis = "V" if code == "A1" else "v"
        hits = _scan_lines(bundle.gamma, bundle.vs, bundle.Vs, axis,
                           "decreasing", slack, "gamma")
        return _finish(code, hits, n_total, len(bundle.kernel_failures), prov)

    # PSI: virtual value must rise along both axes.
    n_failed = int(np.isnan(bundle.psi).sum())
    failed_coords = [(float(bundle.vs[i]), float(bundle.Vs[j]))
                     for i, j in zip(*np.nonzero(np.isnan(bundle.psi)))]
    _abort_if_holey("PSI", n_failed, n_total, failed_coords)
    hits = _scan_lines(bundle.psi, bundle.vs, bundle.Vs, "V",
                       "increasing", slack, "psi")
    hits += _scan_lines(bundle.psi, bundle.vs, bundle.Vs, "v",
                        "increasing", slack, "psi")
    return _finish("PSI", hits, n_total, n_failed, prov)


# ---------------------------------------------------------------------------
# the combined report


@dataclass
class RegularityReport:
    """All five checks on one model, with the two headline verdicts.

    ``classic_regular`` requires A0, A1, and A2 together; ``psi_regular``
    requires only the monotone virtual value. ``fosd_ok`` reports the strict
    ordering check on its own since everything else presumes it.
    """

    model: dict
    checks: dict[str, CheckReport]
    classic_regular: bool
    psi_regular: bool
    fosd_ok: bool
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "checks": {k: r.to_dict() for k, r in self.checks.items()},
            "classic_regular": self.classic_regular,
            "psi_regular": self.psi_regular,
            "fosd_ok": self.fosd_ok,
            "provenance": self.provenance,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def regularity_report(model: ScreeningModel, grid: GridSpec | None = None,
                      tolerances: ToleranceConfig | None = None
                      ) -> RegularityReport:
    """Run every check and fold the verdicts into one report."""
    grid, tol = resolve_config(grid, tolerances)
    checks = {code: check_assumption(model, code, grid, tol)
              for code in CHECK_CODES}
    return RegularityReport(
        model=model.describe(),
        checks=checks,
        classic_regular=(checks["A0"].passed and checks["A1"].passed
                         and checks["A2"].passed),
        psi_regular=checks["PSI"].passed,
        fosd_ok=checks["FOSD"].passed,
        provenance=_provenance(model, grid, tol),
    )
