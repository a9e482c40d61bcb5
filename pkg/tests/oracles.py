"""Reference computations used by the tests.

Each oracle takes a route independent of the code under test: direct
quadrature of defining integrals, multiprecision transcriptions, bisection,
or time-stepping of the underlying dynamics.
"""

import math

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

from painleve_whitham.ode import ThetaParams


def K_quad(ksq):
    with mp.workdps(30):
        return float(mp.quad(lambda z: 1 / mp.sqrt((1 - z**2) * (1 - ksq * z**2)), [0, 1]))


def E_quad(ksq):
    with mp.workdps(30):
        return float(mp.quad(lambda z: mp.sqrt((1 - ksq * z**2) / (1 - z**2)), [0, 1]))


def cubic_roots_bisection(g2, g3):
    """Real roots of ``4t^3 - g2 t - g3`` by bisection on sign changes of a fine grid."""
    f = lambda t: 4 * t**3 - g2 * t - g3
    R = 1 + max(abs(g2), abs(g3))
    grid = np.linspace(-R, R, 20001)
    vals = f(grid)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            with mp.workdps(40):
                roots.append(float(mp.findroot(lambda t: 4 * t**3 - g2 * t - g3, (a, b), solver="bisect")))
    return sorted(roots, reverse=True)


def wp_reference(t, g2, g3):
    """``wp`` on the real axis from Jacobi ``sn`` at 30 digits."""
    with mp.workdps(30):
        e = sorted([r.real for r in mp.polyroots([4, 0, -g2, -g3])], reverse=True)
        e1, e2, e3 = e
        m = (e2 - e3) / (e1 - e3)
        s = mp.ellipfun("sn", mp.sqrt(e1 - e3) * t, m=m)
        return float(e3 + (e1 - e3) / s**2)


def mean_y_oscillation(g2, g3):
    """Time average of ``2 wp`` over its bounded real oscillation ``e3 <= wp <= e2``.

    With ``wp = e3 + (e2 - e3) sin^2 phi`` the time element is
    ``dphi / sqrt(e1 - wp)``.
    """
    with mp.workdps(30):
        e1, e2, e3 = sorted([r.real for r in mp.polyroots([4, 0, -g2, -g3])], reverse=True)
        wp = lambda phi: e3 + (e2 - e3) * mp.sin(phi) ** 2
        num = mp.quad(lambda phi: 2 * wp(phi) / mp.sqrt(e1 - wp(phi)), [0, mp.pi / 2])
        den = mp.quad(lambda phi: 1 / mp.sqrt(e1 - wp(phi)), [0, mp.pi / 2])
        return float(num / den)


def mean_y_dynamical(bigX, F1):
    """Time average of ``y`` over one oscillation of ``y'' = 3y^2 + X`` started at a turning point."""
    with mp.workdps(30):
        roots = sorted([r.real for r in mp.polyroots([2, 0, 2 * bigX, F1])])
    y_top = float(roots[1])  # 2y^3 + 2Xy + F1 = 0 between the two lower roots
    f = lambda t, u: [u[1], 3 * u[0] ** 2 + bigX, u[0]]
    ev = lambda t, u: u[1]
    ev.direction = -1
    sol = solve_ivp(f, [0, 1e3], [y_top, 0.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-14, events=ev)
    t_ev, u_ev = sol.t_events[0], sol.y_events[0]
    # first event at t = 0 is the start; the next one completes the period
    k = 1 if t_ev[0] < 1e-12 else 0
    return u_ev[k][2] / t_ev[k], t_ev[k]


def pvi_rhs_mp(x, y, p, th):
    """Second derivative of the sixth equation at 40 digits."""
    with mp.workdps(40):
        x, y, p = mp.mpf(x), mp.mpf(y), mp.mpf(p)
        t0, t1, tx, ti = (mp.mpf(v) for v in th)
        a = (ti - 1) ** 2 / 2
        b = -t0**2 / 2
        c = t1**2 / 2
        d = (1 - tx**2) / 2
        val = (p**2 / 2 * (1 / y + 1 / (y - 1) + 1 / (y - x))
               - p * (1 / x + 1 / (x - 1) + 1 / (y - x))
               + y * (y - 1) * (y - x) / (x**2 * (x - 1) ** 2)
               * (a + b * x / y**2 + c * (x - 1) / (y - 1) ** 2 + d * x * (x - 1) / (y - x) ** 2))
        return float(val)


def modulation_printed_mp(X, F, ybar, y2bar, dybar, th):
    """The modulation equation exactly as published, at 40 digits."""
    with mp.workdps(40):
        X, F, ybar, y2bar, dybar = (mp.mpf(v) for v in (X, F, ybar, y2bar, dybar))
        t0, t1, tx, ti = (mp.mpf(v) for v in th)
        k1 = (ti - t0 - t1 - tx) / 2
        k2 = (-ti - t0 - t1 - tx) / 2
        S = ((k2 - k1) / 2 * (X * (k2 - k1 - tx) + t0 + tx + 1)
             - X * (2 * k1 * k2 + tx) - k2 * (k1 + k2 + t1) - F)
        val = ((k1 - k2) / 2 * dybar
               + (k2 - k1) * (k2 - k1 + 1) / (2 * X * (X - 1)) * y2bar
               + ybar / (X * (X - 1)) * S
               + 1 / (2 * (X - 1)) * (t0 * (k2 - k1) + 2 * X * (2 * k1 * k2 + tx) + 2 * k2 * (k1 + k2 + t1) + 2 * F)
               - k2 * tx - 2 * k1 * k2)
        return float(val)


def dynamical_cycle_average(curve, lo, hi, sign):
    """Time averages of ``y`` and ``y^2`` along ``y'' = sign * disc'(y) / (8 a^2)`` over one cycle.

    This flow conserves ``y'^2 = |disc(y)| / (4 a^2)``; the cycle is timed
    between two successive lower turning points.
    """
    disc = curve.discriminant
    ddisc = disc.deriv()
    a = curve.a
    mid = 0.5 * (lo + hi)
    v = math.sqrt(abs(disc(mid))) / (2 * abs(a))
    f = lambda t, u: [u[1], sign * ddisc(u[0]) / (8 * a * a), u[0], u[0] ** 2]
    ev = lambda t, u: u[1]
    ev.direction = 1
    # generous horizon: the period is bounded by a few times the half-width over the speed scale
    horizon = 1.0
    while True:
        sol = solve_ivp(f, [0, horizon], [mid, v, 0.0, 0.0], method="DOP853", rtol=1e-12,
                        atol=1e-13 * max(1.0, abs(hi)), events=ev)
        if sol.t_events[0].size >= 2:
            break
        horizon *= 4
    t_ev, u_ev = sol.t_events[0], sol.y_events[0]
    T = t_ev[1] - t_ev[0]
    return (u_ev[1][2] - u_ev[0][2]) / T, (u_ev[1][3] - u_ev[0][3]) / T, T


def random_theta(rng, thetax=None):
    while True:
        th = rng.uniform(-1.5, 1.5, 4)
        if thetax is not None:
            th[2] = thetax
        if abs(th[3]) > 0.2:
            return ThetaParams(*th)


def random_pvi_point(rng, params=None):
    """A nonsingular ``(x, y, y')`` with parameters; keeps 0.15 away from 0, 1 and ``x``."""
    params = params or random_theta(rng)
    while True:
        x = rng.uniform(-3.0, 5.0)
        y = rng.uniform(-3.0, 5.0)
        if min(abs(x), abs(x - 1)) < 0.15 or min(abs(y), abs(y - 1), abs(y - x)) < 0.15:
            continue
        return x, y, rng.uniform(-3.0, 3.0), params
