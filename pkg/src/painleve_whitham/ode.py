"""Right-hand sides and adaptive integration for the first and sixth Painleve equations.

The first equation is used in the normalization ``y'' = 3 y^2 + X`` (not the
more common ``6 y^2 + x``). With ``X`` frozen it is the autonomous oscillator
solved by ``y = 2 wp(x + Phi; g2=-X, g3=-F1/4)``; with ``X = x`` it is the
full equation.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, OdeSolution

from .errors import SingularityError

SING_GUARD = 1e-8  # times max(1, |x|)
POLE_THRESHOLD = 1e8


def sing_guard(x):
    return SING_GUARD * max(1.0, abs(x))


@dataclass(frozen=True)
class OdeState:
    x: float
    y: float
    dy: float


@dataclass(frozen=True)
class ThetaParams:
    """Monodromy exponents of the sixth Painleve equation and derived constants.

    ``k1 + k2 = -(theta0 + theta1 + thetax)`` and ``k1 - k2 = thetainf``; the
    equation coefficients are ``alpha = (thetainf - 1)^2 / 2``,
    ``beta = -theta0^2 / 2``, ``gamma = theta1^2 / 2``,
    ``delta = (1 - thetax^2) / 2``.
    """

    theta0: float
    theta1: float
    thetax: float
    thetainf: float
    k1: float = field(init=False)
    k2: float = field(init=False)
    alpha: float = field(init=False)
    beta: float = field(init=False)
    gamma: float = field(init=False)
    delta: float = field(init=False)

    def __post_init__(self):
        s = self.theta0 + self.theta1 + self.thetax
        derived = {
            "k1": 0.5 * (self.thetainf - s),
            "k2": 0.5 * (-self.thetainf - s),
            "alpha": 0.5 * (self.thetainf - 1.0) ** 2,
            "beta": -0.5 * self.theta0**2,
            "gamma": 0.5 * self.theta1**2,
            "delta": 0.5 * (1.0 - self.thetax**2),
        }
        for name, value in derived.items():
            object.__setattr__(self, name, float(value))

    @classmethod
    def from_k(cls, theta0, theta1, thetax, k1, k2, tol=1e-12):
        """Build from ``k1, k2``; rejects a pair inconsistent with the thetas."""
        s = theta0 + theta1 + thetax
        if abs(k1 + k2 + s) > tol * max(1.0, abs(k1), abs(k2), abs(s)):
            raise ValueError(
                f"k1 + k2 = {k1 + k2!r} but -(theta0 + theta1 + thetax) = {-s!r}"
            )
        return cls(theta0, theta1, thetax, k1 - k2)

    def as_dict(self):
        return {
            name: getattr(self, name)
            for name in ("theta0", "theta1", "thetax", "thetainf", "k1", "k2",
                         "alpha", "beta", "gamma", "delta")
        }


def pi_rhs(state, bigX):
    """Second derivative ``3 y^2 + X``."""
    return 3.0 * state.y**2 + bigX


def pi_first_integral(state, bigX):
    """``F1 = (y')^2 - 2 y^3 - 2 y X``, conserved when ``X`` is frozen."""
    return state.dy**2 - 2.0 * state.y**3 - 2.0 * state.y * bigX


def _check_pvi_point(x, y):
    gx = sing_guard(x)
    if abs(x) < gx or abs(x - 1.0) < gx:
        raise SingularityError(f"x={x!r} too close to a fixed singularity 0 or 1",
                               min(abs(x), abs(x - 1.0)))
    dist = min(abs(y), abs(y - 1.0), abs(y - x))
    if dist < gx:
        raise SingularityError(f"y={y!r} within {dist:.3e} of 0, 1 or x={x!r}", dist)


def pvi_rhs(state, params):
    """Second derivative from the sixth Painleve equation."""
    x, y, p = state.x, state.y, state.dy
    _check_pvi_point(x, y)
    ym1 = y - 1.0
    ymx = y - x
    xm1 = x - 1.0
    quad = 0.5 * (1.0 / y + 1.0 / ym1 + 1.0 / ymx) * p * p
    lin = (1.0 / x + 1.0 / xm1 + 1.0 / ymx) * p
    coef = y * ym1 * ymx / (x * x * xm1 * xm1)
    bracket = (params.alpha + params.beta * x / (y * y) + params.gamma * xm1 / (ym1 * ym1)
               + params.delta * x * xm1 / (ymx * ymx))
    return quad - lin + coef * bracket


@dataclass
class Trajectory:
    """Accepted steps of an integration plus the solver's dense interpolant."""

    kind: str
    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    stop_reason: str
    message: str = ""
    dense: OdeSolution = None

    def __call__(self, x):
        """``(y, dy)`` at ``x`` from the dense interpolant."""
        if self.dense is None:
            raise ValueError("trajectory has no dense output (fewer than two steps)")
        return self.dense(x)

    def state_at(self, x):
        y, dy = self.dense(x)
        return OdeState(float(x), float(y), float(dy))

    @property
    def final(self):
        return OdeState(float(self.x[-1]), float(self.y[-1]), float(self.dy[-1]))

    @property
    def completed(self):
        return self.stop_reason == "completed"

    def to_csv(self, target=None):
        """Write ``x,y,dy`` rows; returns the text when ``target`` is None."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "dy"])
        for row in zip(self.x, self.y, self.dy):
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="") as fh:
            fh.write(text)
        return text


def _make_rhs(kind, params, bigX, rhs):
    if rhs is not None:
        return lambda x, s: np.array([s[1], rhs(OdeState(x, s[0], s[1]))])
    if kind == "pi":
        if bigX is None:
            return lambda x, s: np.array([s[1], 3.0 * s[0] ** 2 + x])
        return lambda x, s: np.array([s[1], 3.0 * s[0] ** 2 + bigX])
    if kind == "pvi":
        if params is None:
            raise ValueError("kind='pvi' needs ThetaParams")
        return lambda x, s: np.array([s[1], pvi_rhs(OdeState(x, s[0], s[1]), params)])
    raise ValueError(f"unknown rhs kind {kind!r}")


def _crosses(a, b):
    return a == 0.0 or b == 0.0 or (a < 0.0) != (b < 0.0)


def integrate(kind, initial, x_end, params=None, *, bigX=None, rtol=1e-10, atol=1e-12,
              max_step=np.inf, first_step=None, rhs=None, pole_threshold=POLE_THRESHOLD):
    """Integrate a Painleve equation from ``initial`` towards ``x_end``.

    Parameters
    ----------
    kind : {"pi", "pvi"}
    initial : OdeState
    x_end : float
    params : ThetaParams, required for ``"pvi"``
    bigX : float or None
        For ``"pi"``: frozen value of ``X``; ``None`` means ``X = x``.
    rhs : callable, optional
        Replacement second-derivative function ``rhs(OdeState) -> float``
        (used for control runs).

    Returns
    -------
    Trajectory
        ``stop_reason`` is one of ``"completed"``, ``"pole"``,
        ``"singularity"``, ``"step_underflow"``.
    """
    f = _make_rhs(kind, params, bigX, rhs)
    if kind == "pvi":
        _check_pvi_point(initial.x, initial.y)
    kwargs = {"rtol": rtol, "atol": atol, "max_step": max_step}
    if first_step is not None:
        kwargs["first_step"] = first_step
    solver = DOP853(f, initial.x, np.array([initial.y, initial.dy], dtype=float), x_end, **kwargs)

    xs, ys, dys = [initial.x], [initial.y], [initial.dy]
    interpolants = []
    stop, message = "completed", ""
    while solver.status == "running":
        x_prev, y_prev = solver.t, solver.y[0]
        try:
            msg = solver.step()
        except SingularityError as exc:
            stop, message = "singularity", str(exc)
            break
        if solver.status == "failed":
            stop, message = "step_underflow", msg or "step size underflow"
            break
        x_new, (y_new, dy_new) = solver.t, solver.y
        if not (np.isfinite(y_new) and np.isfinite(dy_new)):
            stop, message = "pole", "non-finite state"
            break
        if kind == "pvi":
            # a crossing step is dropped so the trajectory ends on the last good state
            if (_crosses(y_prev, y_new) or _crosses(y_prev - 1.0, y_new - 1.0)
                    or _crosses(y_prev - x_prev, y_new - x_new)):
                stop, message = "singularity", f"y crossed 0, 1 or x between x = {x_prev!r} and {x_new!r}"
                break
            try:
                _check_pvi_point(x_new, y_new)
            except SingularityError as exc:
                stop, message = "singularity", str(exc)
                break
        interpolants.append(solver.dense_output())
        xs.append(x_new)
        ys.append(y_new)
        dys.append(dy_new)
        if abs(y_new) >= pole_threshold * (max(1.0, abs(x_new)) if kind == "pvi" else 1.0):
            stop, message = "pole", f"|y| = {abs(y_new):.3e} at x = {x_new!r}"
            break

    dense = OdeSolution(np.array(xs), interpolants) if interpolants else None
    return Trajectory(kind, np.array(xs), np.array(ys), np.array(dys), stop, message, dense)
