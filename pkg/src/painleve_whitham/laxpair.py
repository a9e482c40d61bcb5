"""Lax matrices for the first and sixth Painleve equations.

PVI uses the Fuchsian system ``dY/dz = A6 Y``, ``dY/dx = L6 Y`` with

    A6(z) = A0/z + A1/(z-1) + Ax/(z-x),   L6(z) = -Ax/(z-x),
    Ai = [[ui + thi, -wi ui], [(ui + thi)/wi, -ui]],

and ``A0 + A1 + Ax = -diag(k1, k2)``. The residue parameters ``ui`` are
rational in ``(x, y, y')`` and the ``wi`` carry a free gauge constant ``k``.

A note on ``F6``. The ``z^3`` coefficient of ``R(z)^2 det A6(z)`` (with
``R(t) = t(t-1)(t-x)``) is

    (k1-k2)(u1 + x ux) - 2 k1 k2 (x+1) - k2 th1 - x k2 thx,

whereas the widely quoted closed form ends in ``- x thx`` instead of
``- x k2 thx``. The genus-one curve relation between ``(y', y)`` is written
in terms of the quoted closed form. :func:`curve_f6` converts between the two;
they coincide when ``thx = 0`` or ``k2 = 1``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import GaugeDegenerateError, LaxConsistencyError, SingularityError, UnsupportedParameterError
from .ode import OdeState, ThetaParams, pi_first_integral, sing_guard

AUX_RTOL = 1e-9
FIT_RTOL = 1e-8


# --- PI -------------------------------------------------------------------

def pi_lax_matrices(state, z, bigX=None):
    """``(L1, A1)`` at spectral parameter ``z``; ``bigX`` defaults to ``state.x``."""
    X = state.x if bigX is None else bigX
    y, p = state.y, state.dy
    L1 = np.array([[0.0, 1.0], [y - z, 0.0]], dtype=complex)
    A1 = np.array([[-p, 2.0 * y + 4.0 * z], [-X - y * y + 2.0 * y * z - 4.0 * z * z, p]], dtype=complex)
    return L1, A1


def det_A1_check(state, bigX, z_samples):
    """Max relative residual of ``det A1(z) - (16 z^3 + 4 X z - F1)`` over ``z_samples``."""
    F1 = pi_first_integral(state, bigX)
    worst = 0.0
    for z in np.atleast_1d(z_samples):
        _, A1 = pi_lax_matrices(state, z, bigX)
        prod1 = A1[0, 0] * A1[1, 1]
        prod2 = A1[0, 1] * A1[1, 0]
        target = 16.0 * z**3 + 4.0 * bigX * z - F1
        scale = max(abs(prod1), abs(prod2), abs(16.0 * z**3), abs(4.0 * bigX * z), abs(F1), 1e-300)
        worst = max(worst, abs(prod1 - prod2 - target) / scale)
    return worst


def pi_zero_curvature_residual(state, z, d2y):
    """Entrywise max of ``dL1/dz - dA1/dx + [L1, A1]`` with ``X = x``.

    ``d2y`` is the second derivative supplied by the caller, so a trajectory
    of ``y'' = 3y^2 + x`` gives zero.
    """
    y, p, x = state.y, state.dy, state.x
    L1, A1 = pi_lax_matrices(state, z, x)
    dLz = np.array([[0.0, 0.0], [-1.0, 0.0]])
    dAx = np.array([[-d2y, 2.0 * p], [-1.0 - 2.0 * y * p + 2.0 * p * z, d2y]])
    return float(np.max(np.abs(dLz - dAx + L1 @ A1 - A1 @ L1)))


# --- PVI auxiliary quantities ---------------------------------------------

@dataclass(frozen=True)
class PViAuxiliary:
    u: float
    uhat: float
    u0: float
    u1: float
    ux: float
    w0: float
    w1: float
    wx: float
    kgauge: float


def _check_state(state):
    x, y = state.x, state.y
    g = sing_guard(x)
    if min(abs(x), abs(x - 1.0)) < g or min(abs(y), abs(y - 1.0), abs(y - x)) < g:
        raise SingularityError(f"singular configuration x={x!r}, y={y!r}")


def u_from_slope(state, params):
    """Invert the slope relation ``y' = R(y)/(x(x-1)) (2u - th0/y - th1/(y-1) - (thx-1)/(y-x))``."""
    _check_state(state)
    x, y, p = state.x, state.y, state.dy
    Ry = y * (y - 1.0) * (y - x)
    return 0.5 * (x * (x - 1.0) * p / Ry + params.theta0 / y + params.theta1 / (y - 1.0)
                  + (params.thetax - 1.0) / (y - x))


def slope_from_u(u, x, y, params):
    Ry = y * (y - 1.0) * (y - x)
    return Ry / (x * (x - 1.0)) * (2.0 * u - params.theta0 / y - params.theta1 / (y - 1.0)
                                   - (params.thetax - 1.0) / (y - x))


def _residue_parameters(x, y, uhat, params):
    # three separate quadratic-in-uhat expressions; their sum must equal k2
    th0, th1, thx, thi = params.theta0, params.theta1, params.thetax, params.thetainf
    k1, k2 = params.k1, params.k2
    Ry = y * (y - 1.0) * (y - x)
    s0 = (Ry * uhat**2
          + (th1 * (y - x) + x * thx * (y - 1.0) - 2.0 * k2 * (y - 1.0) * (y - x)) * uhat
          + k2**2 * (y - x - 1.0) - k2 * (th1 + x * thx))
    s1 = (Ry * uhat**2
          + ((th1 + thi) * (y - x) + x * thx * (y - 1.0) - 2.0 * k2 * (y - 1.0) * (y - x)) * uhat
          + k2**2 * (y - x) - k2 * (th1 + x * thx) - k1 * k2)
    sinf = (Ry * uhat**2
            + (th1 * (y - x) + x * (thx + thi) * (y - 1.0) - 2.0 * k2 * (y - 1.0) * (y - x)) * uhat
            + k2**2 * (y - 1.0) - k2 * (th1 + x * thx) - x * k1 * k2)
    u0 = y / (x * thi) * s0
    u1 = -(y - 1.0) / ((x - 1.0) * thi) * s1
    ux = (y - x) / (x * (x - 1.0) * thi) * sinf
    return u0, u1, ux


def auxiliary_residuals(aux, x, params):
    """Relative residuals of the four linear/bilinear constraints on ``(ui, wi)``."""
    th0, th1, thx = params.theta0, params.theta1, params.thetax
    u0, u1, ux, w0, w1, wx = aux.u0, aux.u1, aux.ux, aux.w0, aux.w1, aux.wx

    def rel(terms, target=0.0):
        scale = max(max(abs(t) for t in terms), abs(target), 1e-300)
        return abs(sum(terms) - target) / scale

    return {
        "sum_u": rel([u0, u1, ux], params.k2),
        "sum_wu": rel([w0 * u0, w1 * u1, wx * ux]),
        "sum_u_over_w": rel([(u0 + th0) / w0, (u1 + th1) / w1, (ux + thx) / wx]),
        "gauge": rel([(x + 1.0) * w0 * u0, x * w1 * u1, wx * ux], aux.kgauge),
    }


def build_auxiliary(state, params, kgauge=1.0, check=True, rtol=AUX_RTOL):
    """Residue parameters ``ui`` and gauge entries ``wi`` at a point of a trajectory."""
    if params.thetainf == 0.0:
        raise UnsupportedParameterError("theta_inf = 0: residue parameters are undefined")
    u = u_from_slope(state, params)
    x, y = state.x, state.y
    uhat = u - params.theta0 / y - params.theta1 / (y - 1.0) - params.thetax / (y - x)
    u0, u1, ux = _residue_parameters(x, y, uhat, params)
    if min(abs(u0), abs(u1), abs(ux)) == 0.0:
        raise GaugeDegenerateError(f"vanishing residue parameter: u = ({u0!r}, {u1!r}, {ux!r})")
    w0 = kgauge * y / (x * u0)
    w1 = -kgauge * (y - 1.0) / ((x - 1.0) * u1)
    wx = kgauge * (y - x) / (x * (x - 1.0) * ux)
    aux = PViAuxiliary(u, uhat, u0, u1, ux, w0, w1, wx, kgauge)
    if check:
        res = auxiliary_residuals(aux, x, params)
        bad = {k: v for k, v in res.items() if not v <= rtol}
        if bad:
            raise LaxConsistencyError(f"auxiliary constraints violated: {bad}")
    return aux


# --- PVI matrices -----------------------------------------------------------

def _residue_matrix(u, theta, w):
    return np.array([[u + theta, -w * u], [(u + theta) / w, -u]])


@dataclass(frozen=True)
class LaxMatrices:
    A0: np.ndarray
    A1: np.ndarray
    Ax: np.ndarray
    Ainf: np.ndarray
    x: float

    def A6(self, z):
        return self.A0 / z + self.A1 / (z - 1.0) + self.Ax / (z - self.x)

    def L6(self, z):
        return -self.Ax / (z - self.x)

    def dL6_dz(self, z):
        return self.Ax / (z - self.x) ** 2

    def det_A6(self, z):
        a = self.A6(z)
        return a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]


def assemble_A6_L6(aux, params, x, check=True, rtol=1e-10):
    A0 = _residue_matrix(aux.u0, params.theta0, aux.w0)
    A1 = _residue_matrix(aux.u1, params.theta1, aux.w1)
    Ax = _residue_matrix(aux.ux, params.thetax, aux.wx)
    Ainf = np.diag([params.k1, params.k2])
    mats = LaxMatrices(A0, A1, Ax, Ainf, float(x))
    if check:
        total = A0 + A1 + Ax + Ainf
        scale = max(np.max(np.abs(A0)), np.max(np.abs(A1)), np.max(np.abs(Ax)), 1.0)
        if np.max(np.abs(total)) > rtol * scale:
            raise LaxConsistencyError(
                f"A0 + A1 + Ax != -diag(k1, k2): max deviation {np.max(np.abs(total)):.3e}")
    return mats


def lax_at(state, params, kgauge=1.0, check=True):
    """Shortcut: auxiliary data and matrices at ``state``."""
    aux = build_auxiliary(state, params, kgauge, check=check)
    return aux, assemble_A6_L6(aux, params, state.x, check=check)


def det_polynomial_fit(matrices, n_samples=9):
    """Least-squares coefficients (ascending) of ``R(z)^2 det A6(z)`` and the fit residual.

    Samples lie on the circle ``|z| = 3 max(1, |x|)``, which encloses the
    poles 0, 1, x. Returns ``(coeffs, relative_residual, radius)``.
    """
    x = matrices.x
    radius = 3.0 * max(1.0, abs(x))
    w = np.exp(2j * np.pi * (np.arange(n_samples) + 0.5) / n_samples)
    z = radius * w
    vals = np.array([(zz * (zz - 1.0) * (zz - x)) ** 2 * matrices.det_A6(zz) for zz in z])
    V = np.vander(w, 5, increasing=True)
    cw, *_ = np.linalg.lstsq(V, vals, rcond=None)
    vmax = np.max(np.abs(vals))
    resid = np.max(np.abs(V @ cw - vals)) / vmax if vmax > 0 else 0.0
    coeffs = np.real(cw) / radius ** np.arange(5)
    return coeffs, resid, radius, vmax


def extract_F6(matrices, params, n_samples=9, rtol=FIT_RTOL):
    """The ``z^3`` coefficient of ``R(z)^2 det A6(z)`` by polynomial fit.

    Checks that the fit is exact to ``rtol`` and the ``z^4`` coefficient is
    ``k1 k2``.
    """
    coeffs, resid, radius, vmax = det_polynomial_fit(matrices, n_samples)
    if resid > rtol:
        raise LaxConsistencyError(f"det A6 is not a degree-4 polynomial times R^-2 (residual {resid:.3e})")
    lead_scale = max(abs(params.k1 * params.k2), vmax / radius**4)
    if abs(coeffs[4] - params.k1 * params.k2) > rtol * lead_scale:
        raise LaxConsistencyError(
            f"leading coefficient {coeffs[4]!r} != k1 k2 = {params.k1 * params.k2!r}")
    return float(coeffs[3])


def f6_closed_form(aux, params, x):
    """The quoted closed form ``(k1-k2)(u1 + x ux) - x(2 k1 k2 + thx) - 2 k1 k2 - k2 th1``.

    This is the convention the genus-one curve relation uses; see the module
    docstring for how it relates to the true ``z^3`` coefficient.
    """
    k1, k2 = params.k1, params.k2
    return ((k1 - k2) * (aux.u1 + x * aux.ux) - x * (2.0 * k1 * k2 + params.thetax)
            - 2.0 * k1 * k2 - k2 * params.theta1)


def f6_coefficient(aux, params, x):
    """Closed form of the actual ``z^3`` coefficient of ``R(z)^2 det A6(z)``."""
    k1, k2 = params.k1, params.k2
    return ((k1 - k2) * (aux.u1 + x * aux.ux) - 2.0 * k1 * k2 * (x + 1.0)
            - k2 * params.theta1 - x * k2 * params.thetax)


def curve_f6(f6_coef, x, params):
    """Convert a ``z^3`` coefficient to the curve-relation convention."""
    return f6_coef - x * params.thetax * (1.0 - params.k2)


# --- genus-one curve relation ------------------------------------------------

def curve_coefficients(x, F6, params):
    """``(a, b1, b2, c0..c4)``: ``a p^2 + (b1 y + b2 y^2) p + sum c_j y^j`` in the curve relation."""
    th0, th1, thx = params.theta0, params.theta1, params.thetax
    k1, k2 = params.k1, params.k2
    C = (x + 1.0) * (k1 + k2) + x * thx + th1
    S = (C * C - 1.0 - 2.0 * x * th0 * (k1 + k2) + 4.0 * k1 * k2 * (x * x + x + 1.0)
         + 4.0 * x * (x + 1.0) * (1.0 - k2) * thx + 4.0 * (x + 1.0) * F6)
    a = x * x * (x - 1.0) ** 2
    b1 = 2.0 * x * (x - 1.0)
    b2 = -2.0 * x * (x - 1.0)
    c = (
        -x * x * th0 * th0,
        2.0 * x * (2.0 * k1 * k2 * (x + 1.0) + 2.0 * x * thx * (1.0 - k2) + 2.0 * F6 - th0 * C),
        -S,
        2.0 * ((k1 + k2) * C - 1.0 + 2.0 * x * thx * (1.0 - k2) + 2.0 * F6),
        1.0 - (k1 - k2) ** 2,
    )
    return a, b1, b2, c


def curve_terms(state, params, F6):
    """The seven monomials of the curve relation evaluated at ``state``."""
    a, b1, b2, c = curve_coefficients(state.x, F6, params)
    y, p = state.y, state.dy
    return np.array([a * p * p, (b1 * y + b2 * y * y) * p] + [cj * y**j for j, cj in enumerate(c)])


def curve_residual(state, params, F6):
    """Value of the curve relation at ``(y', y)``; zero on Lax-consistent data."""
    return float(np.sum(curve_terms(state, params, F6)))


def curve_residual_dF6(state):
    """Partial derivative of :func:`curve_residual` in ``F6``."""
    x, y = state.x, state.y
    return 4.0 * y**3 - 4.0 * (x + 1.0) * y * y + 4.0 * x * y


# --- zero curvature along a trajectory ---------------------------------------

def gauge_log_derivative(state, params):
    """``d log k / dx = (thinf - 1)(y - x) / (x (x - 1))``, keeping ``k`` compatible."""
    x = state.x
    return (params.thetainf - 1.0) * (state.y - x) / (x * (x - 1.0))


@dataclass
class ZeroCurvatureReport:
    h: float
    records: list
    max_residual: float
    order_estimate: float = math.nan

    def to_records(self):
        return list(self.records)


def _log_gauge(trajectory, params, x, x_ref):
    if x == x_ref:
        return 0.0

    def integrand(s):
        y, _ = trajectory(s)
        return (params.thetainf - 1.0) * (y - s) / (s * (s - 1.0))

    val, _ = quad(integrand, x_ref, x, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def _zc_max(trajectory, params, x, zs, h, log_k0, x_ref):
    def mats_at(xx):
        kg = math.exp(log_k0 + _log_gauge(trajectory, params, xx, x_ref))
        return lax_at(trajectory.state_at(xx), params, kg, check=False)[1]

    mp, mm, m0 = mats_at(x + h), mats_at(x - h), mats_at(x)
    out = []
    for z in zs:
        dA = (mp.A6(z) - mm.A6(z)) / (2.0 * h)
        A, L = m0.A6(z), m0.L6(z)
        res = dA - m0.dL6_dz(z) + A @ L - L @ A
        out.append(float(np.max(np.abs(res))))
    return out


def zero_curvature_residual_pvi(trajectory, params, x_samples, z_samples, h=None, kgauge=1.0):
    """Residual of ``dA6/dx - dL6/dz + [A6, L6]`` along an integrated PVI trajectory.

    ``dA6/dx`` is a central difference of step ``h`` (default
    ``eps^(1/3) max(1, |x|)``) using the dense output; the gauge constant is
    transported along the trajectory from ``kgauge`` at its first point.
    Records are ``{x, z_re, z_im, residual_norm}``.
    """
    x_ref = float(trajectory.x[0])
    lo, hi = sorted((x_ref, float(trajectory.x[-1])))
    for x in np.atleast_1d(x_samples):
        hx = h if h is not None else np.finfo(float).eps ** (1.0 / 3.0) * max(1.0, abs(x))
        if not (lo <= x - 2.0 * hx and x + 2.0 * hx <= hi):
            raise ValueError(f"sample x={x!r} (with step) outside trajectory range [{lo!r}, {hi!r}]")
    log_k0 = math.log(kgauge)
    records = []
    worst = 0.0
    for x in np.atleast_1d(x_samples):
        x = float(x)
        hx = h if h is not None else np.finfo(float).eps ** (1.0 / 3.0) * max(1.0, abs(x))
        vals = _zc_max(trajectory, params, x, z_samples, hx, log_k0, x_ref)
        for z, v in zip(z_samples, vals):
            z = complex(z)
            records.append({"x": x, "z_re": z.real, "z_im": z.imag, "residual_norm": v})
            worst = max(worst, v)
    hrep = h if h is not None else math.nan
    order = math.nan
    if h is not None and h > 0:
        coarse = max(max(_zc_max(trajectory, params, float(x), z_samples, 2.0 * h, log_k0, x_ref))
                     for x in np.atleast_1d(x_samples))
        if worst > 0 and coarse > 0:
            order = math.log2(coarse / worst)
            if worst > 1e-8 and not 1.5 <= order <= 2.5:
                warnings.warn(f"finite-difference order degraded to {order:.2f} at h={h:g}", RuntimeWarning)
    return ZeroCurvatureReport(hrep, records, worst, order)
