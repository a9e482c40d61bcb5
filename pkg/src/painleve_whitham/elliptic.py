"""Weierstrass cubic roots, complete elliptic integrals and the real Weierstrass function.

Everything here assumes real invariants ``g2, g3``. The oscillatory regime
(three real roots of ``4t^3 - g2 t - g3``) is the only one supported by the
functions that need a real period; the cubic solver itself also reports the
one-real-root case as a tagged outcome.
"""

import math
from dataclasses import dataclass

from .errors import DomainError, PoleProximityError, UnsupportedRegimeError

POLE_GUARD = 1e-6  # fraction of the real period

_AGM_MAXITER = 64


@dataclass(frozen=True)
class CubicRoots:
    """Roots of ``4t^3 - g2 t - g3``.

    When ``all_real`` the roots are sorted descending. Otherwise ``roots[0]`` is
    the real root and ``roots[1:]`` the conjugate pair (positive imaginary part
    first).
    """

    roots: tuple
    all_real: bool
    discriminant: float


@dataclass(frozen=True)
class WeierstrassData:
    g2: float
    g3: float
    e1: float
    e2: float
    e3: float
    ksq: float
    bigK: float
    bigE: float

    @property
    def half_period(self):
        """Real half-period ``omega = K / sqrt(e1 - e3)``; ``inf`` at the separatrix."""
        span = self.e1 - self.e3
        if span <= 0.0 or math.isinf(self.bigK):
            return math.inf
        return self.bigK / math.sqrt(span)

    @property
    def real_period(self):
        return 2.0 * self.half_period


def _cubic(t, g2, g3):
    return 4.0 * t**3 - g2 * t - g3


def _newton_polish(t, g2, g3, steps=3):
    for _ in range(steps):
        d = 12.0 * t * t - g2
        if d == 0.0:
            break
        step = _cubic(t, g2, g3) / d
        if not math.isfinite(step):
            break
        t_new = t - step
        if abs(_cubic(t_new, g2, g3)) >= abs(_cubic(t, g2, g3)):
            break
        t = t_new
    return t


def solve_depressed_cubic(g2, g3):
    """Roots of the Weierstrass cubic ``4t^3 - g2 t - g3``.

    Uses the trigonometric form when the discriminant ``g2^3 - 27 g3^2`` is
    non-negative and Cardano's formula otherwise, then polishes the real roots
    with Newton steps.
    """
    g2 = float(g2)
    g3 = float(g3)
    disc = g2**3 - 27.0 * g3**2
    disc_scale = max(abs(g2) ** 3, 27.0 * g3**2)
    if disc_scale == 0.0:
        return CubicRoots((0.0, 0.0, 0.0), True, 0.0)
    if abs(disc) <= 1e-13 * disc_scale:
        disc = 0.0

    if disc >= 0.0:
        # three real roots (g2 > 0 necessarily)
        r = math.sqrt(g2 / 12.0)
        arg = 3.0 * g3 / (g2 * 2.0 * r) if r > 0.0 else 0.0
        arg = min(1.0, max(-1.0, arg))
        phi = math.acos(arg) / 3.0
        e1 = 2.0 * r * math.cos(phi)
        e3 = 2.0 * r * math.cos(phi + 2.0 * math.pi / 3.0)
        e1 = _newton_polish(e1, g2, g3)
        e3 = _newton_polish(e3, g2, g3)
        e2 = -(e1 + e3)
        roots = sorted((e1, e2, e3), reverse=True)
        return CubicRoots(tuple(roots), True, disc)

    # one real root, Cardano on t^3 + p t + q with p = -g2/4, q = -g3/4
    p = -g2 / 4.0
    q = -g3 / 4.0
    s = math.sqrt(q * q / 4.0 + p**3 / 27.0)
    real = math.copysign(abs(-q / 2.0 + s) ** (1.0 / 3.0), -q / 2.0 + s)
    other = -q / 2.0 - s
    real += math.copysign(abs(other) ** (1.0 / 3.0), other)
    real = _newton_polish(real, g2, g3)
    # deflate: 4t^3 - g2 t - g3 = 4(t - r)(t^2 + r t + r^2 - g2/4)
    re = -real / 2.0
    im = math.sqrt(max(0.0, 3.0 * real * real - g2)) / 2.0
    return CubicRoots((real, complex(re, im), complex(re, -im)), False, disc)


def _agm_sequence(ksq):
    a, b = 1.0, math.sqrt(1.0 - ksq)
    c_terms = [ksq]  # c_0^2
    for _ in range(_AGM_MAXITER):
        if abs(a - b) <= 1e-16 * a:
            break
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        c_terms.append(c * c)
    return a, c_terms


def complete_K(ksq):
    """Complete elliptic integral of the first kind, parameter ``ksq = k^2``."""
    ksq = float(ksq)
    if not 0.0 <= ksq < 1.0:
        raise DomainError(f"complete_K needs 0 <= ksq < 1, got {ksq!r}")
    a, _ = _agm_sequence(ksq)
    return math.pi / (2.0 * a)


def complete_E(ksq):
    """Complete elliptic integral of the second kind, parameter ``ksq = k^2``."""
    ksq = float(ksq)
    if not 0.0 <= ksq <= 1.0:
        raise DomainError(f"complete_E needs 0 <= ksq <= 1, got {ksq!r}")
    if ksq == 1.0:
        return 1.0
    a, c_terms = _agm_sequence(ksq)
    total = sum(2.0 ** (n - 1) * c2 for n, c2 in enumerate(c_terms))
    return math.pi / (2.0 * a) * (1.0 - total)


def weierstrass_data(g2, g3):
    """Roots, modulus and complete integrals for the real oscillatory regime."""
    cr = solve_depressed_cubic(g2, g3)
    if not cr.all_real:
        raise UnsupportedRegimeError(
            f"g2={g2!r}, g3={g3!r}: discriminant {cr.discriminant:.6g} < 0 (complex root pair)"
        )
    e1, e2, e3 = cr.roots
    span = e1 - e3
    ksq = 0.0 if span <= 0.0 else min(1.0, max(0.0, (e2 - e3) / span))
    bigK = math.inf if ksq == 1.0 else complete_K(ksq)
    return WeierstrassData(float(g2), float(g3), e1, e2, e3, ksq, bigK, complete_E(ksq))


def _laurent_coefficients(g2, g3, nmax=60):
    # wp(z) = z^-2 + sum_{k>=2} c_k z^(2k-2)
    c = [0.0, 0.0, g2 / 20.0, g3 / 28.0]
    for k in range(4, nmax):
        acc = sum(c[m] * c[k - m] for m in range(2, k - 1))
        c.append(3.0 * acc / ((2 * k + 1) * (k - 3)))
    return c


def _wp_series(z, g2, g3):
    z2 = z * z
    wp = 1.0 / z2
    dwp = -2.0 / (z2 * z)
    coeffs = _laurent_coefficients(g2, g3)
    zpow = 1.0  # z^(2k-4) at k = 2
    prev = math.inf
    for k in range(2, len(coeffs)):
        term = coeffs[k] * zpow * z2
        wp += term
        dwp += (2 * k - 2) * coeffs[k] * zpow * z
        # two consecutive small terms: single zeros occur when g2 or g3 vanish
        if max(abs(term), abs(prev)) < 1e-17 * abs(wp):
            break
        prev = term
        zpow *= z2
    return wp, dwp


def _duplicate(wp, dwp, g2):
    d2 = 6.0 * wp * wp - 0.5 * g2
    wp2 = (d2 / (2.0 * dwp)) ** 2 - 2.0 * wp
    dwp2 = d2 * (12.0 * wp * dwp * dwp - d2 * d2) / (4.0 * dwp**3) - dwp
    return wp2, dwp2


def _wp_reduced(t, g2, g3):
    inv_len = max(abs(g2) ** 0.25, abs(g3) ** (1.0 / 6.0))
    n = 0
    z = t
    while z * inv_len > 1.0:
        z *= 0.5
        n += 1
    wp, dwp = _wp_series(z, g2, g3)
    for _ in range(n):
        wp, dwp = _duplicate(wp, dwp, g2)
    return wp, dwp


def weierstrass_p_and_derivative(tau, g2, g3):
    """``(wp(tau), wp'(tau))`` for real ``tau`` in the three-real-roots regime.

    The argument is reduced into ``(0, omega]`` with the real period. On
    ``(0, omega/2]`` the Laurent series is evaluated at ``tau / 2^n`` and
    doubled back with the duplication formulas; on ``(omega/2, omega]`` the
    half-period shift ``wp(omega - s) = e1 + (e1-e2)(e1-e3)/(wp(s) - e1)`` is
    used instead.
    """
    data = weierstrass_data(g2, g3)
    tau = float(tau)
    sign = 1.0
    omega = data.half_period
    if math.isfinite(omega):
        period = 2.0 * omega
        t = math.fmod(tau, period)
        if t < 0.0:
            t += period
        dist = min(t, period - t)
        guard = POLE_GUARD * period
        if dist < guard:
            raise PoleProximityError(dist, guard)
        if t > omega:
            t = period - t
            sign = -1.0
    else:
        t = abs(tau)
        if tau < 0.0:
            sign = -1.0
        scale = max(abs(g2) ** 0.25, abs(g3) ** (1.0 / 6.0), 1e-300)
        guard = POLE_GUARD / scale
        if t < guard:
            raise PoleProximityError(t, guard)

    if math.isfinite(omega) and t > 0.5 * omega:
        s = omega - t
        if s == 0.0:
            return data.e1, 0.0
        prod = (data.e1 - data.e2) * (data.e1 - data.e3)
        ws, dws = _wp_reduced(s, g2, g3)
        gap = ws - data.e1
        return data.e1 + prod / gap, sign * prod * dws / (gap * gap)
    wp, dwp = _wp_reduced(t, g2, g3)
    return wp, sign * dwp


def weierstrass_p(tau, g2, g3):
    """Weierstrass function on the real axis."""
    return weierstrass_p_and_derivative(tau, g2, g3)[0]


def e_over_k(data):
    """``E/K`` with the separatrix limit ``ksq -> 1`` mapped to 0."""
    if data.ksq >= 1.0:
        return 0.0
    return data.bigE / data.bigK


def mean_wp(g2, g3):
    """Twice the mean of ``wp`` over its bounded real oscillation.

    The bounded oscillation is ``wp`` on the line shifted by the imaginary
    half-period; it runs between ``e3`` and ``e2``. Returns
    ``2 e1 + 2 (e3 - e1) E/K``. With ``y = 2 wp`` this is the mean of ``y``.
    """
    data = weierstrass_data(g2, g3)
    return 2.0 * data.e1 + 2.0 * (data.e3 - data.e1) * e_over_k(data)
