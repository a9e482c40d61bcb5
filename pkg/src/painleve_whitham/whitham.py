"""Slow modulation of the elliptic ansatz: Whitham equations for PI and PVI.

PI: along ``y'' = 3y^2 + X`` with slowly varying ``X`` the first integral
``F1 = y'^2 - 2y^3 - 2yX`` obeys ``dF1/dX = -2y`` exactly, so the averaged
equation is ``dF1/dX = -2 <y>`` where ``<y> = 2e1 + 2(e3 - e1)E/K`` is the
mean of ``y = 2 wp`` over its bounded oscillation.

PVI: the genus-one curve ``a p^2 + b(y) p + c(y) = 0`` (``p = y'``) at frozen
``(X, F6)`` has slope discriminant ``w^2 = b^2 - 4ac``, a quartic in ``y``.
Averages are taken over a cycle between two adjacent real roots of ``w^2``
with respect to the uniformizing parameter, ``d tau = 2|a| dy / |w|``; this
reduces to the time average ``dx = dy / |p|`` when ``b = 0``.
"""

import csv
import functools
import io
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import DOP853, quad
from scipy.optimize import brentq

from .elliptic import mean_wp, solve_depressed_cubic
from .errors import (ImplicitDegeneracyError, NoCycleError, PainleveWhithamError,
                     UnsupportedRegimeError)
from .laxpair import curve_coefficients

REGIME_GUARD = 1e-6  # normalized cubic discriminant at which PI runs stop
X_GUARD = 1e-3  # distance from X = 0, 1 (times max(1, |X|)) at which PVI runs stop
COLLAPSE_WIDTH = 1e-10

_EPS13 = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class ModulationState:
    bigX: float
    F: float


@dataclass(frozen=True)
class QuarticCurve:
    """``a p^2 + b(y) p + c(y) = 0`` with ``a`` constant and ``b``, ``c`` polynomials in ``y``."""

    a: float
    b: Polynomial
    c: Polynomial
    bigX: float = math.nan

    @property
    def discriminant(self):
        return self.b * self.b - 4.0 * self.a * self.c

    def residual(self, y, p):
        return self.a * p * p + self.b(y) * p + self.c(y)


@dataclass(frozen=True)
class BranchPoints:
    roots: np.ndarray
    intervals: list  # (lo, hi, sign of the discriminant inside)

    @property
    def positive_ovals(self):
        return [(lo, hi) for lo, hi, s in self.intervals if s > 0]


@dataclass(frozen=True)
class CycleAverages:
    ybar: float
    y2bar: float
    period: float
    lo: float
    hi: float
    sign: int
    degenerate: bool = False


@dataclass
class ModulationTrajectory:
    bigX: np.ndarray
    F: np.ndarray
    ybar: np.ndarray
    y2bar: np.ndarray
    period: np.ndarray
    stop_reason: str
    message: str = ""

    def to_csv(self, target=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["X", "F", "ybar", "y2bar", "period", "stop_reason"])
        n = len(self.bigX)
        for i in range(n):
            row = [repr(float(v)) for v in (self.bigX[i], self.F[i], self.ybar[i], self.y2bar[i], self.period[i])]
            writer.writerow(row + [self.stop_reason if i == n - 1 else ""])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


# --- curves and cycles ---------------------------------------------------------

def pi_curve(bigX, F1):
    """``p^2 = 2y^3 + 2Xy + F1`` in curve form."""
    return QuarticCurve(1.0, Polynomial([0.0]), Polynomial([-F1, -2.0 * bigX, 0.0, -2.0]), bigX)


def build_curve(bigX, F6, params):
    """Genus-one curve relating ``(y', y)`` at frozen ``(X, F6)``."""
    a, b1, b2, c = curve_coefficients(bigX, F6, params)
    return QuarticCurve(a, Polynomial([0.0, b1, b2]), Polynomial(list(c)), bigX)


def _poly_scale(poly, r):
    return float(np.sum(np.abs(poly.coef) * np.abs(r) ** np.arange(len(poly.coef))))


def _polish(poly, r, span):
    """Refine a real root: bracketed Brent when a sign change is found, else Newton."""
    f = poly
    for width in (1e-10, 1e-8, 1e-6, 1e-4):
        d = width * span
        lo, hi = r - d, r + d
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        if (flo < 0.0) != (fhi < 0.0):
            return brentq(f, lo, hi, xtol=4.0 * np.finfo(float).eps * max(1.0, abs(r)), rtol=4.0 * np.finfo(float).eps,
                          maxiter=200)
    df = f.deriv()
    for _ in range(5):
        d = df(r)
        if d == 0.0:
            break
        r_new = r - f(r) / d
        if abs(f(r_new)) >= abs(f(r)):
            break
        r = r_new
    return r


def branch_points(curve, imag_tol=1e-7):
    """Real roots of the slope discriminant, sorted ascending, with the bounded intervals between them.

    Raises
    ------
    NoCycleError
        No bounded interval exists.
    """
    disc = curve.discriminant.trim()
    coef = disc.coef
    if len(coef) < 2 or np.all(coef[1:] == 0.0):
        raise NoCycleError("slope discriminant is constant")
    raw = disc.roots()
    span = max(1.0, float(np.max(np.abs(raw))))
    reals = sorted(float(r.real) for r in raw if abs(r.imag) <= imag_tol * max(1.0, abs(r)))
    roots = np.array([_polish(disc, r, span) for r in reals])
    roots.sort()
    intervals = []
    for lo, hi in zip(roots[:-1], roots[1:]):
        if hi <= lo:
            continue
        mid = disc(0.5 * (lo + hi))
        if mid != 0.0:
            intervals.append((float(lo), float(hi), 1 if mid > 0.0 else -1))
    if not intervals:
        raise NoCycleError(f"no bounded interval between real branch points {roots.tolist()}")
    return BranchPoints(roots, intervals)


def branch_point_residuals(curve, roots):
    disc = curve.discriminant
    return [abs(disc(r)) / max(_poly_scale(disc, r), 1e-300) for r in roots]


def select_cycle(bp, near_y=None, follow=None):
    """Pick a cycle among the bounded intervals.

    ``follow=(lo, hi, sign)`` picks the interval of the same sign that overlaps
    it most (nearest midpoint if none overlaps); ``near_y`` picks the interval
    containing that ordinate; otherwise the rightmost positive oval.
    """
    if follow is not None:
        flo, fhi, fs = follow
        same = [iv for iv in bp.intervals if iv[2] == fs]
        if not same:
            raise NoCycleError(f"no interval of sign {fs} left to follow; intervals {bp.intervals}")
        overlap = [min(hi, fhi) - max(lo, flo) for lo, hi, _ in same]
        best = int(np.argmax(overlap))
        if overlap[best] > 0.0:
            return same[best]
        mid = 0.5 * (flo + fhi)
        return min(same, key=lambda iv: abs(0.5 * (iv[0] + iv[1]) - mid))
    if near_y is not None:
        for lo, hi, sgn in bp.intervals:
            if lo <= near_y <= hi:
                return lo, hi, sgn
        raise NoCycleError(f"no cycle contains y={near_y!r}; intervals {bp.intervals}")
    ovals = [iv for iv in bp.intervals if iv[2] > 0]
    if not ovals:
        raise NoCycleError("no real oval (positive interval) between branch points")
    return ovals[-1]


@functools.lru_cache(maxsize=16)
def _sin2_nodes(n):
    t, wts = np.polynomial.legendre.leggauss(n)
    phi = 0.25 * np.pi * (t + 1.0)
    return np.sin(phi) ** 2, 0.25 * np.pi * wts


def _cycle_integrals(g, lo, hi, tol=1e-13, n0=32, nmax=512):
    """``int y^k dy / sqrt((y-lo)(hi-y)|g(y)|)`` over ``[lo, hi]`` for k = 0, 1, 2.

    Gauss-Legendre in ``y = lo + (hi-lo) sin^2 phi`` (each integral is then
    ``2 int_0^{pi/2} y^k dphi / sqrt|g|``), doubled until stable; adaptive
    Gauss-Jacobi quadrature when a root of ``g`` sits close to the cycle.
    """
    prev = None
    n = n0
    while n <= nmax:
        s2, wts = _sin2_nodes(n)
        y = lo + (hi - lo) * s2
        wgt = 2.0 * wts / np.sqrt(np.abs(g(y)))
        vals = np.array([wgt.sum(), (wgt * y).sum(), (wgt * y * y).sum()])
        if prev is not None and np.all(np.abs(vals - prev) <= tol * np.abs(vals)):
            return vals
        prev = vals
        n *= 2
    return np.array([
        quad(lambda y, k=k: y**k / math.sqrt(abs(g(y))), lo, hi, weight="alg", wvar=(-0.5, -0.5),
             epsabs=0.0, epsrel=tol, limit=200)[0]
        for k in range(3)
    ])


def cycle_averages(curve, near_y=None, interval=None, follow=None):
    """Mean of ``y`` and ``y^2`` over a cycle of the curve, and its period.

    The cycle is ``interval`` when given (``(lo, hi)`` adjacent real branch
    points), else chosen by :func:`select_cycle` from ``near_y``/``follow``. On intervals where the
    discriminant is negative the same construction is applied to ``|w^2|``
    (the vanishing cycle of a near-double root pair).
    """
    if interval is None:
        lo, hi, s = select_cycle(branch_points(curve), near_y, follow)
    else:
        lo, hi = interval[:2]
        s = 1 if curve.discriminant(0.5 * (lo + hi)) > 0 else -1
    disc = curve.discriminant
    two_a = 2.0 * abs(curve.a)
    quotient, _ = divmod(disc, Polynomial([lo * hi, -(lo + hi), 1.0]))
    if hi - lo < COLLAPSE_WIDTH * max(1.0, abs(hi)):
        q = abs(quotient(hi))
        period = 2.0 * two_a * math.pi / math.sqrt(q) if q > 0 else math.inf
        return CycleAverages(hi, hi * hi, period, lo, hi, s, degenerate=True)
    i0, i1, i2 = _cycle_integrals(quotient, lo, hi)
    # dtau = 2|a| dy/|w|, and a full cycle runs the interval twice
    period = 2.0 * two_a * i0
    return CycleAverages(i1 / i0, i2 / i0, period, lo, hi, s)


# --- PI modulation ---------------------------------------------------------------

def pi_mean_y_by_quadrature(bigX, F1):
    """Mean of ``y`` over the bounded PI oscillation by direct cycle quadrature."""
    return cycle_averages(pi_curve(bigX, F1)).ybar


@functools.lru_cache(maxsize=1)
def _pi_sign_convention():
    # <y> from the closed form must equal the quadrature mean; fixes the sign once
    closed = mean_wp(4.0, 0.0)
    quad = pi_mean_y_by_quadrature(-4.0, 0.0)
    if abs(closed - quad) > 1e-8 * max(1.0, abs(quad)):
        if abs(closed + quad) <= 1e-8 * max(1.0, abs(quad)):
            return -1.0
        raise PainleveWhithamError(f"closed-form mean {closed!r} disagrees with quadrature {quad!r}")
    return 1.0


def pi_modulation_rhs(state):
    """``dF1/dX = -2 <y>`` with ``<y>`` from the complete elliptic integrals."""
    g2, g3 = -state.bigX, -state.F / 4.0
    return -2.0 * _pi_sign_convention() * mean_wp(g2, g3)


def pi_regime_margin(state):
    """Normalized cubic discriminant; positive inside the oscillatory regime."""
    g2, g3 = -state.bigX, -state.F / 4.0
    scale = max(abs(g2) ** 3, 27.0 * g3**2)
    if scale == 0.0:
        return 0.0
    return (g2**3 - 27.0 * g3**2) / scale


def _drive(f, x0, y0, x_end, rtol, atol, after_step, max_step=np.inf):
    """Step DOP853 on a scalar ODE; ``after_step(x, y)`` may return a stop reason."""
    solver = DOP853(lambda x, u: np.array([f(x, u[0])]), x0, np.array([y0], dtype=float), x_end,
                    rtol=rtol, atol=atol, max_step=max_step)
    xs, ys = [x0], [y0]
    stop, message = "completed", ""
    while solver.status == "running":
        try:
            msg = solver.step()
        except PainleveWhithamError as exc:
            stop, message = _stop_name(exc), str(exc)
            break
        if solver.status == "failed":
            stop, message = "step_underflow", msg or "step size underflow"
            break
        x, y = float(solver.t), float(solver.y[0])
        verdict = after_step(x, y)
        if verdict is not None:
            stop, message = verdict
            break
        xs.append(x)
        ys.append(y)
    return xs, ys, stop, message


def _stop_name(exc):
    if isinstance(exc, UnsupportedRegimeError):
        return "regime_exit"
    if isinstance(exc, NoCycleError):
        return "no_cycle"
    if isinstance(exc, ImplicitDegeneracyError):
        return "implicit_degeneracy"
    return "error"


def solve_pi_whitham(initial, X_end, rtol=1e-10, atol=1e-12, rhs=None, regime_guard=REGIME_GUARD):
    """Integrate ``dF1/dX`` from ``initial`` to ``X_end``.

    Stops with ``"regime_exit"`` when the normalized cubic discriminant falls
    below ``regime_guard`` (root collision). ``rhs(ModulationState)`` replaces
    the modulation right-hand side (test hook).
    """
    if pi_regime_margin(initial) <= regime_guard:
        raise UnsupportedRegimeError(f"initial state {initial} is outside the oscillatory regime")
    rhs = rhs or pi_modulation_rhs

    def f(X, F):
        return rhs(ModulationState(X, F))

    def after(X, F):
        if pi_regime_margin(ModulationState(X, F)) <= regime_guard:
            return "regime_exit", f"cubic discriminant below {regime_guard:g} at X={X!r}"
        return None

    xs, fs, stop, message = _drive(f, initial.bigX, initial.F, X_end, rtol, atol, after)
    ybar, y2bar, period = [], [], []
    for X, F in zip(xs, fs):
        avg = cycle_averages(pi_curve(X, F))
        ybar.append(mean_wp(-X, -F / 4.0))
        y2bar.append(avg.y2bar)
        period.append(avg.period)
    return ModulationTrajectory(np.array(xs), np.array(fs), np.array(ybar), np.array(y2bar),
                                np.array(period), stop, message)


def pi_turning_point(bigX, F1):
    """Top of the bounded oscillation: ``y = 2 e2`` with ``y' = 0``."""
    roots = solve_depressed_cubic(-bigX, -F1 / 4.0)
    if not roots.all_real:
        raise UnsupportedRegimeError(f"X={bigX!r}, F1={F1!r} has no bounded oscillation")
    return 2.0 * roots.roots[1]


def pi_whitham_vs_direct(x0, x1, F0, rtol=1e-11, atol=1e-12):
    """Compare the modulation prediction with direct integration of ``y'' = 3y^2 + x``.

    The direct run starts at the top of the bounded oscillation at ``x0``. The
    measured ``F1`` is averaged over one local period at each end to remove the
    fast ripple, and the modulation equation is integrated between the two
    window centres. Returns a dict with predicted and measured drifts.
    """
    from .ode import OdeState, integrate, pi_first_integral

    y0 = pi_turning_point(x0, F0)
    traj = integrate("pi", OdeState(x0, y0, 0.0), x1, rtol=rtol, atol=atol)
    if not traj.completed:
        return {"status": traj.stop_reason, "message": traj.message}
    direction = 1.0 if x1 > x0 else -1.0

    def window_mean(x_start, F_guess):
        T = cycle_averages(pi_curve(x_start, F_guess)).period
        xs = np.linspace(x_start, x_start + direction * T, 2001)
        vals = []
        for x in xs:
            y, dy = traj(x)
            vals.append(pi_first_integral(OdeState(x, y, dy), x))
        vals = np.array(vals)
        return float(np.sum(0.5 * (vals[1:] + vals[:-1])) / (len(vals) - 1)), T

    start_mean, T0 = window_mean(x0, F0)
    # each window mean belongs to the window centre
    xa = x0 + 0.5 * direction * T0
    rough = solve_pi_whitham(ModulationState(xa, start_mean), x1, rtol=rtol, atol=atol)
    if rough.stop_reason != "completed":
        return {"status": rough.stop_reason, "message": rough.message}
    T1 = cycle_averages(pi_curve(x1, float(rough.F[-1]))).period
    xb = x1 - 0.5 * direction * T1
    mod = solve_pi_whitham(ModulationState(xa, start_mean), xb, rtol=rtol, atol=atol)
    end_mean, _ = window_mean(x1 - direction * T1, float(mod.F[-1]))
    predicted = float(mod.F[-1]) - start_mean
    measured = end_mean - start_mean
    rel = abs(measured - predicted) / max(abs(predicted), 1e-300)
    return {
        "status": "completed",
        "x0": x0,
        "x1": x1,
        "window_start": xa,
        "window_end": xb,
        "F_start": start_mean,
        "predicted_drift": predicted,
        "measured_drift": measured,
        "relative_error": rel,
        "period_start": float(T0),
        "period_end": float(T1),
    }


# --- PVI modulation -------------------------------------------------------------------

def modulation_terms(bigX, F, ybar, y2bar, dybar, params, printed=False):
    """Right-hand side of the PVI modulation equation with the averages supplied.

    ``printed=True`` reproduces the published formula verbatim. The default
    flips the sign of the ``(k2 - k1)/2 [...]`` half-term inside the ``ybar``
    coefficient and subtracts ``thx (1 - k2)`` so that ``F`` is the curve
    parameter; with those two changes the pointwise version (averages replaced
    by ``y, y^2, y'``) is an exact identity along PVI trajectories.
    """
    X = bigX
    k1, k2 = params.k1, params.k2
    th0, th1, thx = params.theta0, params.theta1, params.thetax
    d = k2 - k1
    half = 0.5 * d * (X * (d - thx) + th0 + thx + 1.0)
    S = (half if printed else -half) - X * (2.0 * k1 * k2 + thx) - k2 * (k1 + k2 + th1) - F
    val = (0.5 * (k1 - k2) * dybar
           + d * (d + 1.0) / (2.0 * X * (X - 1.0)) * y2bar
           + ybar * S / (X * (X - 1.0))
           + (th0 * d + 2.0 * X * (2.0 * k1 * k2 + thx) + 2.0 * k2 * (k1 + k2 + th1) + 2.0 * F) / (2.0 * (X - 1.0))
           - k2 * thx - 2.0 * k1 * k2)
    if not printed:
        val -= thx * (1.0 - k2)
    return val


def ybar_partials(bigX, F, params, follow, hX=None, hF=None):
    """Central differences of the mean over the cycle following ``follow``."""
    hX = hX if hX is not None else _EPS13 * max(1.0, abs(bigX))
    hF = hF if hF is not None else _EPS13 * max(1.0, abs(F))

    def yb(X, FF):
        return cycle_averages(build_curve(X, FF, params), follow=follow).ybar

    dX = (yb(bigX + hX, F) - yb(bigX - hX, F)) / (2.0 * hX)
    dF = (yb(bigX, F + hF) - yb(bigX, F - hF)) / (2.0 * hF)
    return dX, dF


def pvi_modulation_rhs(state, params, near_y=None, printed=False, follow=None, hX=None, hF=None):
    """``dF6/dX`` at ``state``, resolving the implicit ``d<y>/dX`` term.

    ``d<y>/dX = d<y>/dX|_F + d<y>/dF * dF6/dX``, so the equation is linear in
    ``dF6/dX`` once the partials are known. The cycle is chosen as in
    :func:`cycle_averages`.
    """
    X, F = state.bigX, state.F
    avg = cycle_averages(build_curve(X, F, params), near_y=near_y, follow=follow)
    ybX, ybF = ybar_partials(X, F, params, (avg.lo, avg.hi, avg.sign), hX, hF)
    c = 0.5 * (params.k1 - params.k2)
    explicit = modulation_terms(X, F, avg.ybar, avg.y2bar, 0.0, params, printed)
    denom = 1.0 - c * ybF
    if abs(denom) < 1e-12:
        raise ImplicitDegeneracyError(f"1 - (k1-k2)/2 d<y>/dF = {denom!r} at X={X!r}")
    return (explicit + c * ybX) / denom


def solve_pvi_whitham(initial, params, X_end, near_y=None, rtol=1e-8, atol=1e-10, printed=False,
                      max_step=np.inf):
    """Integrate the PVI modulation equation with per-step cycle re-detection.

    The cycle followed starts as the one containing ``near_y`` (default: the
    rightmost positive oval) and is re-identified after every step as the
    same-sign interval overlapping the previous one. Stop reasons: ``"completed"``, ``"oval_collapse"``,
    ``"singular_X"``, ``"no_cycle"``, ``"implicit_degeneracy"``,
    ``"step_underflow"``.
    """
    X0 = initial.bigX
    start = cycle_averages(build_curve(X0, initial.F, params), near_y=near_y)
    tracker = {"cycle": (start.lo, start.hi, start.sign)}
    target = X_end
    singular_stop = False
    for s in (0.0, 1.0):
        guard = X_GUARD * max(1.0, abs(s))
        if min(X0, X_end) < s < max(X0, X_end) or abs(X_end - s) < guard:
            cand = s - math.copysign(guard, X_end - X0)
            if abs(cand - X0) < abs(target - X0):
                target = cand
                singular_stop = True

    rows = [(X0, initial.F, start)]

    def f(X, F):
        return pvi_modulation_rhs(ModulationState(X, F), params, printed=printed, follow=tracker["cycle"])

    def after(X, F):
        avg = cycle_averages(build_curve(X, F, params), follow=tracker["cycle"])
        if avg.degenerate:
            rows.append((X, F, avg))
            return "oval_collapse", f"cycle width {avg.hi - avg.lo:.3e} at X={X!r}"
        tracker["cycle"] = (avg.lo, avg.hi, avg.sign)
        rows.append((X, F, avg))
        return None

    _, _, stop, message = _drive(f, X0, initial.F, target, rtol, atol, after, max_step=max_step)
    if stop == "no_cycle":
        # the followed interval vanished between steps: its branch points merged
        stop = "oval_collapse"
    elif stop == "completed" and singular_stop:
        stop, message = "singular_X", f"stopped at X={rows[-1][0]!r}, within guard of a fixed singularity"
    return ModulationTrajectory(
        np.array([r[0] for r in rows]), np.array([r[1] for r in rows]),
        np.array([r[2].ybar for r in rows]), np.array([r[2].y2bar for r in rows]),
        np.array([r[2].period for r in rows]), stop, message)
