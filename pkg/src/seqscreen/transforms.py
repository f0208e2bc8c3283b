"""Monotone relabelings of the signal axis and the models they induce.

A relabeling is a strictly increasing map w = phi(v) of the signal. The
relabeled model keeps the value axis untouched: its signal distribution is
the pushforward of the original one and its kernel conditions on phi's
preimage. In consequence the hazard and the information ratio both pick up a
factor 1/phi'(v), while the virtual value does not move at all. Those three
facts are checked numerically on every construction (see apply_relabeling)
so a buggy slope cannot slip through into a verdict.

Available kinds:

    inverse_hazard_integral   phi'(v) = (1-F(v))/f(v); built by cumulative
                              quadrature, fails with IntegrabilityError when
                              the inverse hazard is not integrable
    integrated_hazard         phi(v) = w_lo - log(1-F(v)); the relabeled
                              hazard is identically 1 and the codomain is a
                              half line
    runningmax_hazard         phi'(v) = hazard(v)/g(v) with g the running
                              maximum of the hazard; the relabeled hazard
                              equals g at the preimage, hence weakly
                              increasing, and the codomain stays bounded
    mean                      phi(v) = E[V | v]; the relabeled model is
                              mean-normalized by construction
    affine                    phi(v) = intercept + slope*v with slope > 0

Forward evaluations are memoized both ways, so inverting phi at a point that
was produced by phi costs a dictionary lookup and is exact to the bit; fresh
inversions bracket on the construction lattice and bisect to 1e-12.
"""

from __future__ import annotations

import math
import random

import numpy as np

from .errors import (
    ConstructionError,
    DensityUnderflowError,
    DomainError,
    IntegrabilityError,
    QuadratureError,
    SelfCheckError,
)
from .model_core import (
    ScreeningModel,
    SignalDistribution,
    ValuationKernel,
    conditional_mean,
    conditional_mean_derivative,
)
from .numerics import Interval, differentiate, integrate, invert_monotone
from .regularity import gamma, virtual_value

__all__ = [
    "RELABELING_KINDS",
    "Relabeling",
    "make_relabeling",
    "TransformedModel",
    "apply_relabeling",
    "relabel",
    "transform_section",
    "rebuild_from_section",
]

RELABELING_KINDS = (
    "inverse_hazard_integral",
    "integrated_hazard",
    "runningmax_hazard",
    "mean",
    "affine",
)

_LATTICE_N = 513
_RUNNINGMAX_N = 1025
_TAIL_GAP = 1e-6
_INVERSE_TOL = 1e-12
_SELF_CHECK_POINTS = 32
_SELF_CHECK_TOL = 1e-6
_SELF_CHECK_SEED = 271828182
_TABLE_POINTS = 257


def _sf_over_pdf(signal: SignalDistribution, v: float) -> float:
    f = signal.pdf(v)
    if f < 1e-300:
        raise DensityUnderflowError(f"signal density vanished at v={v!r}")
    return signal.sf(v) / f


def _pdf_over_sf(signal: SignalDistribution, v: float) -> float:
    s = signal.sf(v)
    if s < 1e-300:
        raise DensityUnderflowError(
            f"signal survival vanished at v={v!r}")
    return signal.pdf(v) / s


class Relabeling:
    """A strictly increasing signal map with cached forward/inverse values.

    Construct through make_relabeling. ``phi`` and ``phi_prime`` accept any
    v in the domain; ``inverse`` accepts any w in the codomain and returns
    the exact preimage for w values previously produced by ``phi``.
    """

    def __init__(self, kind: str, domain: Interval, phi_fn, phi_prime_fn,
                 lattice_v: np.ndarray, lattice_w: np.ndarray,
                 w_hi: float, params: dict | None = None):
        self.kind = kind
        self.domain = domain
        self._phi_fn = phi_fn
        self._phi_prime_fn = phi_prime_fn
        self._lat_v = np.asarray(lattice_v, dtype=float)
        self._lat_w = np.asarray(lattice_w, dtype=float)
        self.w_lo = float(lattice_w[0])
        self._w_hi = float(w_hi)
        self.params = dict(params or {})
        self._fwd: dict[float, float] = {}
        self._inv: dict[float, float] = {}
        self._slope: dict[float, float] = {}
        for v, w in zip(self._lat_v, self._lat_w):
            self._fwd[float(v)] = float(w)
            self._inv[float(w)] = float(v)
        if math.isfinite(self._w_hi):
            self._fwd[domain.upper] = self._w_hi
            self._inv[self._w_hi] = domain.upper

    @property
    def codomain(self) -> Interval:
        return Interval(self.w_lo, self._w_hi)

    def _require_domain(self, v: float) -> None:
        if not self.domain.contains(v):
            raise DomainError(
                f"signal value {v!r} outside relabeling domain "
                f"[{self.domain.lower}, {self.domain.upper}]")

    def phi(self, v: float) -> float:
        v = float(v)
        self._require_domain(v)
        w = self._fwd.get(v)
        if w is None:
            w = float(self._phi_fn(v))
            self._fwd[v] = w
            self._inv[w] = v
        return w

    def phi_prime(self, v: float) -> float:
        # Cached per point: some slopes are quadratures (the conditional-
        # mean map), and lattice evaluations revisit the same v constantly.
        v = float(v)
        self._require_domain(v)
        p = self._slope.get(v)
        if p is None:
            p = float(self._phi_prime_fn(v))
            self._slope[v] = p
        return p

    def inverse(self, w: float) -> float:
        w = float(w)
        v = self._inv.get(w)
        if v is not None:
            return v
        if math.isinf(w) and w > 0 and math.isinf(self._w_hi):
            return self.domain.upper
        pad_lo = 1e-9 * max(1.0, abs(self.w_lo))
        pad_hi = (1e-9 * max(1.0, abs(self._w_hi))
                  if math.isfinite(self._w_hi) else 0.0)
        if w < self.w_lo - pad_lo or w > self._w_hi + pad_hi:
            raise DomainError(
                f"value {w!r} outside relabeling codomain "
                f"[{self.w_lo}, {self._w_hi}]")
        w = min(max(w, self.w_lo), self._w_hi)
        k = int(np.searchsorted(self._lat_w, w, side="right")) - 1
        if k >= len(self._lat_w) - 1:
            lo_v, hi_v = float(self._lat_v[-1]), self.domain.upper
            f_lo, f_hi = float(self._lat_w[-1]), self._w_hi
        elif k < 0:
            lo_v, hi_v = self.domain.lower, float(self._lat_v[0])
            f_lo, f_hi = self.w_lo, float(self._lat_w[0])
        else:
            lo_v, hi_v = float(self._lat_v[k]), float(self._lat_v[k + 1])
            f_lo, f_hi = float(self._lat_w[k]), float(self._lat_w[k + 1])
        if lo_v == hi_v:
            v = lo_v
        else:
            v = invert_monotone(self._phi_fn, w, lo_v, hi_v,
                                tol=_INVERSE_TOL, f_lower=f_lo, f_upper=f_hi)
        self._inv[w] = v
        return v

    def table(self, n: int = _TABLE_POINTS) -> list[tuple[float, float, float]]:
        """(v, phi(v), phi'(v)) triples subsampled from the lattice."""
        idx = np.linspace(0, len(self._lat_v) - 1, n).round().astype(int)
        return [(float(self._lat_v[i]), float(self._lat_w[i]),
                 self.phi_prime(float(self._lat_v[i]))) for i in idx]

    def describe(self) -> dict:
        d = {"kind": self.kind, "w_lo": self.w_lo,
             "w_hi": self._w_hi if math.isfinite(self._w_hi) else "inf"}
        d.update(self.params)
        return d


def _kahan_cumulative(phi_prime, nodes: np.ndarray, w_lo: float,
                      context: str) -> np.ndarray:
    ws = [w_lo]
    acc = w_lo
    comp = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        try:
            inc, _ = integrate(phi_prime, (float(a), float(b)),
                               rel_tol=1e-13, abs_tol=1e-16)
        except QuadratureError as exc:
            raise IntegrabilityError(
                f"{context}: slope integral diverged on "
                f"[{a:.6g}, {b:.6g}]") from exc
        if not inc > 0.0:
            raise ConstructionError(
                f"{context}: slope integral is not positive on "
                f"[{a:.6g}, {b:.6g}]")
        y = inc - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
        ws.append(acc)
    return np.asarray(ws)


def _piecewise_phi(phi_prime, lat_v: np.ndarray, lat_w: np.ndarray):
    """phi evaluated as lattice value plus a partial-cell integral."""

    def phi(v: float) -> float:
        k = int(np.searchsorted(lat_v, v, side="right")) - 1
        k = min(max(k, 0), len(lat_v) - 2)
        a = float(lat_v[k])
        if v == a:
            return float(lat_w[k])
        inc, _ = integrate(phi_prime, (a, v), rel_tol=1e-13, abs_tol=1e-16)
        return float(lat_w[k]) + inc

    return phi


def make_relabeling(model: ScreeningModel, kind: str, *, w_lo: float = 0.0,
                    slope: float | None = None,
                    intercept: float | None = None) -> Relabeling:
    """Build a relabeling of the model's signal axis.

    ``w_lo`` anchors the codomain's lower end for the two hazard-integral
    kinds and the running-max kind; the mean and affine kinds define their
    own images and ignore it.
    """
    if kind not in RELABELING_KINDS:
        raise ConstructionError(
            f"unknown relabeling kind {kind!r}; choose from "
            f"{RELABELING_KINDS}")
    signal = model.signal
    dom = signal.support
    lo, hi = dom.as_tuple()
    span = hi - lo

    if kind == "affine":
        a = 1.0 if slope is None else float(slope)
        b = 0.0 if intercept is None else float(intercept)
        if not a > 0:
            raise ConstructionError("affine relabeling needs slope > 0")
        lat_v = np.linspace(lo, hi, _LATTICE_N)
        lat_w = b + a * lat_v
        return Relabeling(kind, dom, lambda v: b + a * v, lambda v: a,
                          lat_v, lat_w, w_hi=b + a * hi,
                          params={"slope": a, "intercept": b})
    if slope is not None or intercept is not None:
        raise ConstructionError(
            f"slope/intercept only apply to the affine kind, not {kind!r}")

    if kind == "mean":
        def phi(v):
            return conditional_mean(model, v)

        def phi_prime(v):
            return conditional_mean_derivative(model, v)

        lat_v = np.linspace(lo, hi, _LATTICE_N)
        lat_w = np.array([phi(float(v)) for v in lat_v])
        if not np.all(np.diff(lat_w) > 0):
            raise ConstructionError(
                "conditional mean is not strictly increasing; the mean "
                "relabeling is undefined for this model")
        return Relabeling(kind, dom, phi, phi_prime, lat_v, lat_w,
                          w_hi=float(lat_w[-1]))

    if kind == "inverse_hazard_integral":
        def phi_prime(v):
            return _sf_over_pdf(signal, v)

        lat_v = np.linspace(lo, hi, _LATTICE_N)
        lat_w = _kahan_cumulative(phi_prime, lat_v, w_lo,
                                  "inverse_hazard_integral")
        phi = _piecewise_phi(phi_prime, lat_v, lat_w)
        return Relabeling(kind, dom, phi, phi_prime, lat_v, lat_w,
                          w_hi=float(lat_w[-1]))

    if kind == "integrated_hazard":
        def phi(v):
            s = signal.sf(v)
            if s <= 0.0:
                return math.inf
            return w_lo - math.log(s)

        def phi_prime(v):
            return _pdf_over_sf(signal, v)

        v_cap = hi - _TAIL_GAP * span
        lat_v = np.linspace(lo, v_cap, _LATTICE_N)
        lat_w = np.array([phi(float(v)) for v in lat_v])
        return Relabeling(kind, dom, phi, phi_prime, lat_v, lat_w,
                          w_hi=phi(hi))

    # runningmax_hazard
    v_cap = hi - _TAIL_GAP * span
    g_nodes = np.linspace(lo, v_cap, _RUNNINGMAX_N)
    haz = np.array([_pdf_over_sf(signal, float(v)) for v in g_nodes])
    g_vals = np.maximum.accumulate(haz)
    g_last = float(g_vals[-1])

    def phi_prime(v):
        if v >= v_cap:
            s = signal.sf(v)
            if s <= 0.0:
                return 1.0
            h = signal.pdf(v) / s
            return 1.0 if h >= g_last else h / g_last
        k = int(np.searchsorted(g_nodes, v, side="right")) - 1
        k = min(max(k, 0), len(g_nodes) - 1)
        return _pdf_over_sf(signal, v) / float(g_vals[k])

    lat_w = _kahan_cumulative(phi_prime, g_nodes, w_lo, "runningmax_hazard")
    phi_body = _piecewise_phi(phi_prime, g_nodes, lat_w)

    def phi(v):
        if v <= v_cap:
            return phi_body(v)
        inc, _ = integrate(phi_prime, (v_cap, v), rel_tol=1e-13,
                           abs_tol=1e-16)
        return float(lat_w[-1]) + inc

    return Relabeling("runningmax_hazard", dom, phi, phi_prime,
                      g_nodes, lat_w, w_hi=phi(hi))


# ---------------------------------------------------------------------------
# the induced model


class _RelabeledSignal(SignalDistribution):
    """Pushforward of the base signal through the relabeling."""

    family = "relabeled"

    def __init__(self, base: SignalDistribution, rel: Relabeling):
        # The codomain may be a half line (integrated hazard), so skip the
        # bounded-support requirement the base class enforces.
        self.base = base
        self.rel = rel
        self.support = rel.codomain

    def cdf(self, w):
        self._require_in_support(w)
        return self.base.cdf(self.rel.inverse(w))

    def sf(self, w):
        self._require_in_support(w)
        return self.base.sf(self.rel.inverse(w))

    def pdf(self, w):
        self._require_in_support(w)
        v = self.rel.inverse(w)
        return self.base.pdf(v) / self.rel.phi_prime(v)

    def params(self):
        return {"relabeling": self.rel.describe(),
                "base": self.base.describe()}


class _RelabeledKernel(ValuationKernel):
    """The base kernel conditioned through the relabeling's preimage."""

    family = "relabeled"

    def __init__(self, base: ValuationKernel, rel: Relabeling):
        super().__init__(base.support)
        self.base = base
        self.rel = rel
        self.analytic_dv = base.analytic_dv

    def check_signal_support(self, support):
        # Constraints on the base signal were enforced when the base model
        # was built; the relabeled axis carries none of its own.
        return None

    def cdf(self, w, V):
        return self.base.cdf(self.rel.inverse(w), V)

    def pdf(self, w, V):
        return self.base.pdf(self.rel.inverse(w), V)

    def cdf_dv(self, w, V):
        v = self.rel.inverse(w)
        d = self.base.cdf_dv(v, V)
        if d is None:
            return None
        return d / self.rel.phi_prime(v)

    def quantile(self, w, p):
        return self.base.quantile(self.rel.inverse(w), p)

    def tail_bound(self, V, v_lo, v_hi):
        return None

    def params(self):
        return {"relabeling": self.rel.describe(),
                "base": self.base.describe()}


class TransformedModel(ScreeningModel):
    """A screening model whose signal axis has been relabeled.

    Presents the ordinary model interface; ``base`` and ``relabeling`` stay
    accessible for identity checks and serialization. The signal grid is the
    image of the base grid, which keeps grid evaluations exact (each grid
    point's preimage is a cache hit) and sidesteps unbounded codomains.
    """

    def __init__(self, base: ScreeningModel, relabeling: Relabeling):
        if relabeling.domain.as_tuple() != base.signal.support.as_tuple():
            raise ConstructionError(
                "relabeling domain does not match the model's signal support")
        super().__init__(signal=_RelabeledSignal(base.signal, relabeling),
                         kernel=_RelabeledKernel(base.kernel, relabeling))
        self.base = base
        self.relabeling = relabeling

    def signal_grid(self, grid=None):
        return np.array([self.relabeling.phi(float(v))
                         for v in self.base.signal_grid(grid)])


def _self_check(base: ScreeningModel, tm: TransformedModel,
                rel: Relabeling) -> None:
    rng = random.Random(_SELF_CHECK_SEED)
    lo, hi = base.signal.support.as_tuple()
    span = hi - lo
    worst = 0.0
    worst_at = None
    n_bad = 0
    for _ in range(_SELF_CHECK_POINTS):
        v = lo + span * (0.02 + 0.96 * rng.random())
        V_lo, V_hi = base.value_range(v)
        V = V_lo + (V_hi - V_lo) * (0.02 + 0.96 * rng.random())
        w = rel.phi(v)
        p = rel.phi_prime(v)
        errs = []
        # The declared slope must be the actual derivative of phi; the
        # scaling identities below cannot see this because the relabeled
        # densities are defined through the same slope. Corner points
        # (running-max maps have them) are skipped via the kink flag.
        est = differentiate(rel.phi, v)
        if not est.nonsmooth:
            slope_tol = max(1e-3, 20.0 * est.error / max(1.0, abs(p)))
            slope_err = abs(est.value - p) / max(1.0, abs(p))
            if slope_err > slope_tol:
                errs.append(slope_err)
        base_haz = _pdf_over_sf(base.signal, v)
        tm_haz = _pdf_over_sf(tm.signal, w)
        want = base_haz / p
        errs.append(abs(tm_haz - want) / max(1.0, abs(want)))
        g_b = gamma(base, v, V)
        g_t = gamma(tm, w, V)
        errs.append(abs(g_t * p - g_b) / max(1.0, abs(g_b)))
        psi_b = virtual_value(base, v, V)
        psi_t = virtual_value(tm, w, V)
        errs.append(abs(psi_t - psi_b) / max(1.0, abs(psi_b)))
        err = max(errs)
        if err > _SELF_CHECK_TOL:
            n_bad += 1
            if err > worst:
                worst, worst_at = err, (v, V)
    if n_bad:
        raise SelfCheckError(
            f"relabeling self-check failed at {n_bad} of "
            f"{_SELF_CHECK_POINTS} probe points; worst relative error "
            f"{worst:.3e} at (v, V) = {worst_at}")


def apply_relabeling(model: ScreeningModel, relabeling: Relabeling,
                     self_check: bool = True) -> TransformedModel:
    """Relabel the model and verify the scaling identities at probe points.

    The probes confirm that the relabeled hazard equals the base hazard over
    phi', the relabeled ratio times phi' equals the base ratio, and the
    virtual value is unchanged. Failure raises SelfCheckError.
    """
    tm = TransformedModel(model, relabeling)
    if self_check:
        _self_check(model, tm, relabeling)
    return tm


def relabel(model: ScreeningModel, kind: str, **kwargs) -> TransformedModel:
    """make_relabeling plus apply_relabeling in one step."""
    return apply_relabeling(model, make_relabeling(model, kind, **kwargs))


# ---------------------------------------------------------------------------
# serialization of derived models


def _fmt(x: float) -> str:
    return repr(float(x))


def transform_section(tm: TransformedModel) -> dict[str, str]:
    """The [transform] section payload describing how tm was derived."""
    rel = tm.relabeling
    out = {"kind": rel.kind, "w_lo": _fmt(rel.w_lo)}
    if rel.kind == "affine":
        out["slope"] = _fmt(rel.params["slope"])
        out["intercept"] = _fmt(rel.params["intercept"])
    hi = rel.codomain.upper
    out["w_support"] = f"{_fmt(rel.codomain.lower)} " + (
        "inf" if math.isinf(hi) else _fmt(hi))
    triples = [f"{_fmt(v)}:{_fmt(w)}:{_fmt(p)}" for v, w, p in rel.table()]
    lines = []
    for i in range(0, len(triples), 3):
        lines.append(" ".join(triples[i:i + 3]))
    out["phi_table"] = "\n".join(lines)
    return out


def rebuild_from_section(base: ScreeningModel,
                         section: dict[str, str]) -> TransformedModel:
    """Reconstruct a relabeled model from its [transform] section.

    The relabeling is rebuilt from its kind and the base model, then the
    stored lattice is replayed against it: every recorded (v, w, phi')
    triple must match the reconstruction, else SelfCheckError. The stored
    numbers are a consistency record, not an alternative definition.
    """
    kind = section.get("kind")
    if kind is None:
        raise ConstructionError("[transform] section is missing 'kind'")
    kwargs: dict = {}
    if "w_lo" in section:
        kwargs["w_lo"] = _parse_float(section["w_lo"], "w_lo")
    if kind == "affine":
        if "slope" in section:
            kwargs["slope"] = _parse_float(section["slope"], "slope")
        if "intercept" in section:
            kwargs["intercept"] = _parse_float(section["intercept"],
                                               "intercept")
    elif "slope" in section or "intercept" in section:
        raise ConstructionError(
            "slope/intercept keys only apply to the affine kind")
    rel = make_relabeling(base, kind, **kwargs)

    if "w_support" in section:
        parts = section["w_support"].split()
        if len(parts) != 2:
            raise ConstructionError("w_support needs exactly two numbers")
        want_lo = _parse_float(parts[0], "w_support")
        want_hi = _parse_float(parts[1], "w_support")
        got_lo, got_hi = rel.codomain.as_tuple()
        if abs(got_lo - want_lo) > 1e-8 * max(1.0, abs(want_lo)):
            raise SelfCheckError(
                f"rebuilt codomain starts at {got_lo!r}, file says "
                f"{want_lo!r}")
        if math.isinf(want_hi) != math.isinf(got_hi) or (
                math.isfinite(want_hi)
                and abs(got_hi - want_hi) > 1e-8 * max(1.0, abs(want_hi))):
            raise SelfCheckError(
                f"rebuilt codomain ends at {got_hi!r}, file says "
                f"{want_hi!r}")

    if "phi_table" in section:
        for tok in section["phi_table"].split():
            pieces = tok.split(":")
            if len(pieces) != 3:
                raise ConstructionError(
                    f"phi_table entries need v:w:slope, got {tok!r}")
            v_k = _parse_float(pieces[0], "phi_table")
            w_k = _parse_float(pieces[1], "phi_table")
            p_k = _parse_float(pieces[2], "phi_table")
            w_got = rel.phi(v_k)
            if abs(w_got - w_k) > 1e-8 * max(1.0, abs(w_k)):
                raise SelfCheckError(
                    f"rebuilt phi({v_k!r}) = {w_got!r} does not match the "
                    f"recorded {w_k!r}")
            p_got = rel.phi_prime(v_k)
            if abs(p_got - p_k) > 1e-6 * max(1.0, abs(p_k)):
                raise SelfCheckError(
                    f"rebuilt phi'({v_k!r}) = {p_got!r} does not match the "
                    f"recorded {p_k!r}")
    return apply_relabeling(base, rel)


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConstructionError(
            f"{key} contains a non-numeric token {text!r}") from None
