"""Shared numeric substrate: adaptive quadrature, finite differences, and
monotone scans with violation witnesses.

Everything here is pure and deterministic. Quadrature refines intervals in a
fixed worst-error-first order and accumulates the final sum in interval
position order, so identical inputs produce bit-identical outputs. Unbounded
domains are mapped onto (-1, 1) by the algebraic substitution
``x = c + t / (1 - t**2)`` before any subdivision happens; the rule used on
each panel is the Gauss-Kronrod (7, 15) pair, whose nodes are all interior,
so integrable endpoint singularities never get evaluated head-on.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ConstructionError, EvaluationError, QuadratureError

__all__ = [
    "Interval",
    "MonotoneVerdict",
    "DerivativeEstimate",
    "integrate",
    "differentiate",
    "monotone_scan",
    "scan_violations",
    "invert_monotone",
]

_EPS = 2.220446049250313e-16


@dataclass(frozen=True)
class Interval:
    """A nonempty open-or-closed interval; either endpoint may be infinite."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ConstructionError("interval endpoints must not be NaN")
        if not lo < hi:
            raise ConstructionError(
                f"interval requires lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float, *, closed: bool = True) -> bool:
        if closed:
            return self.lower <= x <= self.upper
        return self.lower < x < self.upper

    def as_tuple(self) -> tuple[float, float]:
        return (self.lower, self.upper)


# Gauss-Kronrod (7, 15) abscissae and weights on [-1, 1]; positive half of a
# symmetric rule. Odd indices (plus the centre) are the embedded Gauss nodes.
_GK_NODES = (
    0.9914553711208126,
    0.9491079123427585,
    0.8648644233597691,
    0.7415311855993945,
    0.5860872354676911,
    0.4058451513773972,
    0.2077849550078985,
)
_GK_WEIGHTS = (
    0.022935322010529224,
    0.06309209262997855,
    0.10479001032225018,
    0.14065325971552592,
    0.1690047266392679,
    0.19035057806478542,
    0.20443294007529889,
)
_GK_CENTRE_WEIGHT = 0.20948214108472782
_GAUSS_WEIGHTS = {1: 0.1294849661688697, 3: 0.27970539148927664,
                  5: 0.3818300505051189}
_GAUSS_CENTRE_WEIGHT = 0.4179591836734694


def _gk15(f: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    """One Kronrod-15 panel on [a, b]; returns (estimate, error_indicator)."""
    centre = 0.5 * (a + b)
    halfwidth = 0.5 * (b - a)
    fc = f(centre)
    kron = _GK_CENTRE_WEIGHT * fc
    gauss = _GAUSS_CENTRE_WEIGHT * fc
    for i, node in enumerate(_GK_NODES):
        dx = halfwidth * node
        f_hi = f(centre + dx)
        f_lo = f(centre - dx)
        kron += _GK_WEIGHTS[i] * (f_hi + f_lo)
        gw = _GAUSS_WEIGHTS.get(i)
        if gw is not None:
            gauss += gw * (f_hi + f_lo)
    return kron * halfwidth, abs(kron - gauss) * halfwidth


def _unbounded_map(f: Callable[[float], float], lower: float, upper: float):
    """Rewrite an improper integral over the substitution x = c + t/(1-t^2).

    Returns (g, t_lower, t_upper) with g defined on a finite interval. The
    weight blows up only where the substituted integrand has already decayed;
    if f returns an exact zero we short-circuit before touching the weight so
    overflow cannot poison the panel with inf * 0.
    """
    if lower == -math.inf and upper == math.inf:
        centre, t_lo, t_hi = 0.0, -1.0, 1.0
    elif upper == math.inf:
        centre, t_lo, t_hi = lower, 0.0, 1.0
    elif lower == -math.inf:
        centre, t_lo, t_hi = upper, -1.0, 0.0
    else:  # pragma: no cover - guarded by caller
        raise ConstructionError("unbounded map called on a bounded domain")

    def g(t: float) -> float:
        onemt2 = 1.0 - t * t
        if onemt2 <= 0.0:
            # boundary of the compactified axis; the substituted integrand
            # of any integrable f has limit zero here
            return 0.0
        x = centre + t / onemt2
        if not math.isfinite(x):
            return 0.0
        fx = f(x)
        if fx == 0.0:
            return 0.0
        return fx * (1.0 + t * t) / (onemt2 * onemt2)

    return g, t_lo, t_hi


def integrate(f: Callable[[float], float],
              domain: Interval | tuple[float, float],
              rel_tol: float = 1e-10,
              abs_tol: float = 1e-14,
              max_depth: int = 48,
              max_intervals: int = 2048) -> tuple[float, float]:
    """Adaptively integrate ``f`` over ``domain``.

    Returns ``(value, error_estimate)`` with the error estimate satisfying
    ``error_estimate <= max(abs_tol, rel_tol * |value|)`` on success. The
    worst interval is bisected first; an interval that still dominates the
    error after ``max_depth`` bisections, or a refinement that exhausts
    ``max_intervals`` panels, raises :class:`QuadratureError` carrying the
    partial value. Divergent integrands end up on that path.
    """
    if isinstance(domain, Interval):
        lower, upper = domain.lower, domain.upper
    else:
        lower, upper = float(domain[0]), float(domain[1])
    if math.isnan(lower) or math.isnan(upper):
        raise ConstructionError("integration endpoints must not be NaN")
    if lower == upper:
        return 0.0, 0.0
    sign = 1.0
    if lower > upper:
        lower, upper, sign = upper, lower, -1.0
    if math.isinf(lower) or math.isinf(upper):
        f, lower, upper = _unbounded_map(f, lower, upper)

    value, err = _gk15(f, lower, upper)
    heap: list[list] = [[-err, 0, lower, upper, 0, value, err]]
    total_value, total_error = value, err
    seq = 1
    panels = 1
    while total_error > max(abs_tol, rel_tol * abs(total_value)):
        worst = heapq.heappop(heap)
        _, _, a, b, depth, val, perr = worst
        if depth >= max_depth:
            raise QuadratureError(
                f"quadrature did not converge after {max_depth} bisections "
                f"near [{a:.6g}, {b:.6g}]",
                partial=sign * total_value, error_estimate=total_error)
        if panels >= max_intervals:
            raise QuadratureError(
                f"quadrature exceeded {max_intervals} panels",
                partial=sign * total_value, error_estimate=total_error)
        mid = 0.5 * (a + b)
        v1, e1 = _gk15(f, a, mid)
        v2, e2 = _gk15(f, mid, b)
        total_value += (v1 + v2) - val
        total_error += (e1 + e2) - perr
        heapq.heappush(heap, [-e1, seq, a, mid, depth + 1, v1, e1])
        heapq.heappush(heap, [-e2, seq + 1, mid, b, depth + 1, v2, e2])
        seq += 2
        panels += 1

    # Deterministic final accumulation: sum leaves left to right.
    leaves = sorted(heap, key=lambda p: p[2])
    value = math.fsum(p[5] for p in leaves)
    error = math.fsum(p[6] for p in leaves)
    return sign * value, error


@dataclass(frozen=True)
class DerivativeEstimate:
    """A derivative value with an error bar and a nonsmoothness flag."""

    value: float
    error: float
    nonsmooth: bool = False


def _probe(f: Callable[[float], float], x: float) -> float:
    try:
        y = float(f(x))
    except Exception as exc:
        raise EvaluationError(f"stencil evaluation failed at x={x!r}") from exc
    if math.isnan(y):
        raise EvaluationError(f"stencil evaluation returned NaN at x={x!r}")
    return y


def differentiate(f: Callable[[float], float], x: float,
                  step: float | None = None) -> DerivativeEstimate:
    """Central difference with one Richardson refinement.

    The default step follows the policy ``h = max(1e-5, 1e-5 * |x|)``. The
    reported error combines the Richardson defect with a roundoff bound. A
    kink detector compares second differences at two step sizes: for smooth
    functions the scaled second difference halves with the step, while at a
    kink it stalls; a stalled ratio flags the estimate and inflates the error
    to the gap between one-sided slopes.
    """
    h = step if step is not None else max(1e-5, 1e-5 * abs(x))
    if h <= 0:
        raise ConstructionError("differentiation step must be positive")
    f_c = _probe(f, x)
    f_p, f_m = _probe(f, x + h), _probe(f, x - h)
    f_p2, f_m2 = _probe(f, x + 0.5 * h), _probe(f, x - 0.5 * h)

    d_h = (f_p - f_m) / (2.0 * h)
    d_h2 = (f_p2 - f_m2) / h
    value = (4.0 * d_h2 - d_h) / 3.0

    scale = max(abs(f_p), abs(f_m), abs(f_c), 1e-300)
    roundoff = 4.0 * _EPS * scale / h
    error = abs(value - d_h2) + roundoff

    second_h = abs(f_p - 2.0 * f_c + f_m) / h
    second_h2 = abs(f_p2 - 2.0 * f_c + f_m2) / (0.5 * h)
    nonsmooth = (second_h > 64.0 * _EPS * scale / h
                 and second_h2 > 0.7 * second_h)
    if nonsmooth:
        fwd = (f_p2 - f_c) / (0.5 * h)
        bwd = (f_c - f_m2) / (0.5 * h)
        error = max(error, 0.5 * abs(fwd - bwd))
    return DerivativeEstimate(value=value, error=error, nonsmooth=nonsmooth)


@dataclass(frozen=True)
class MonotoneVerdict:
    """Outcome of a monotonicity scan over ordered samples.

    ``worst_violation`` is the largest adjacent-pair move against the
    declared direction (0.0 for perfectly monotone data); the verdict passes
    exactly when it is within slack. ``witness`` is the worst offending pair
    as ``(x_lo, x_hi, y_lo, y_hi)``, present only on failure.
    """

    direction: str
    passed: bool
    worst_violation: float
    witness: tuple[float, float, float, float] | None = None


def scan_violations(xs: Sequence[float], ys: Sequence[float], direction: str,
                    slack: float) -> list[tuple[float, float, float, float, float]]:
    """All adjacent pairs moving against ``direction`` by more than slack.

    Returns ``(magnitude, x_lo, x_hi, y_lo, y_hi)`` tuples in scan order.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError(f"direction must be increasing|decreasing, got {direction!r}")
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    n = len(xs)
    if n != len(ys):
        raise ValueError("abscissae and values must have equal length")
    if n < 2:
        raise ValueError("monotone scan requires at least 2 samples")
    out = []
    for i in range(n - 1):
        x0, x1 = xs[i], xs[i + 1]
        if not x1 > x0:
            raise ValueError("abscissae must be strictly increasing")
        y0, y1 = ys[i], ys[i + 1]
        move = y0 - y1 if direction == "increasing" else y1 - y0
        if move > slack:
            out.append((move, x0, x1, y0, y1))
    return out


def monotone_scan(xs: Sequence[float], ys: Sequence[float], direction: str,
                  slack: float) -> MonotoneVerdict:
    """Check ordered samples for weak monotonicity within an absolute slack."""
    violations = scan_violations(xs, ys, direction, slack)
    # Track the worst move even when it stays under slack, so reports can
    # state how much slack a passing scan actually consumed.
    worst = 0.0
    n = len(xs)
    for i in range(n - 1):
        y0, y1 = ys[i], ys[i + 1]
        move = y0 - y1 if direction == "increasing" else y1 - y0
        if move > worst:
            worst = move
    if not violations:
        return MonotoneVerdict(direction=direction, passed=True,
                               worst_violation=worst, witness=None)
    mag, x0, x1, y0, y1 = max(violations, key=lambda rec: rec[0])
    return MonotoneVerdict(direction=direction, passed=False,
                           worst_violation=mag, witness=(x0, x1, y0, y1))


def invert_monotone(f: Callable[[float], float], target: float,
                    lower: float, upper: float, *, tol: float = 1e-12,
                    f_lower: float | None = None,
                    f_upper: float | None = None) -> float:
    """Solve f(x) = target for nondecreasing f by plain bisection.

    The bracket must be finite and is trusted: ``f(lower) <= target`` and
    ``f(upper) >= target`` up to roundoff. Bisection runs until the bracket
    width drops below ``tol`` (absolute, in x).
    """
    if not (math.isfinite(lower) and math.isfinite(upper) and lower <= upper):
        raise ConstructionError(
            f"invert_monotone needs a finite ordered bracket, got [{lower}, {upper}]")
    lo, hi = lower, upper
    f_lo = f(lo) if f_lower is None else f_lower
    f_hi = f(hi) if f_upper is None else f_upper
    if f_lo > target and not math.isclose(f_lo, target, rel_tol=1e-9, abs_tol=1e-9):
        raise ConstructionError("bracket does not contain the target from below")
    if f_hi < target and not math.isclose(f_hi, target, rel_tol=1e-9, abs_tol=1e-9):
        raise ConstructionError("bracket does not contain the target from above")
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
