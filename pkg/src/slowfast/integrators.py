"""ODE integration engines.

Two engines cover the non-stiff and stiff regimes:

* an explicit adaptive embedded Runge-Kutta 5(4) pair (Dormand-Prince
  coefficients) with PI step control and cubic-Hermite dense output;
* an A-stable two-stage diagonally implicit Runge-Kutta scheme
  (gamma = 1 - 1/sqrt(2), L-stable, order 2) with an inner Newton
  iteration, for fast/slow systems whose horizon dwarfs the fast rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalError

__all__ = ["Trajectory", "integrate", "dopri5", "sdirk2"]

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference b5 - b4 for the embedded error estimate
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_SDIRK_GAMMA = 1.0 - 1.0 / np.sqrt(2.0)


@dataclass
class Trajectory:
    """Integration result: accepted nodes plus dense samples on request."""

    times: np.ndarray
    states: np.ndarray           # (len(times), dim)
    derivs: np.ndarray           # field values at the nodes (for Hermite)
    stats: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def sample(self, ts: Sequence[float]) -> np.ndarray:
        """Cubic-Hermite dense output at the requested times."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty((len(ts), self.dim))
        idx = np.searchsorted(self.times, ts, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 2)
        for n, (t, i) in enumerate(zip(ts, idx)):
            t0, t1 = self.times[i], self.times[i + 1]
            h = t1 - t0
            if h <= 0:
                out[n] = self.states[i]
                continue
            u = (t - t0) / h
            h00 = (1 + 2 * u) * (1 - u) ** 2
            h10 = u * (1 - u) ** 2
            h01 = u * u * (3 - 2 * u)
            h11 = u * u * (u - 1)
            out[n] = (
                h00 * self.states[i]
                + h10 * h * self.derivs[i]
                + h01 * self.states[i + 1]
                + h11 * h * self.derivs[i + 1]
            )
        return out

    def final(self) -> np.ndarray:
        return self.states[-1]


def _check_state(y, t):
    if not np.all(np.isfinite(y)):
        raise NumericalError(f"non-finite state at t={t:.6g}")


def dopri5(
    f: Callable,
    y0: Sequence[float],
    t_span: tuple[float, float],
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: Optional[float] = None,
    first_step: Optional[float] = None,
) -> Trajectory:
    """Adaptive explicit Dormand-Prince 5(4) integration."""
    t0, t1 = map(float, t_span)
    y = np.array(y0, dtype=float)
    dim = y.size
    span = t1 - t0
    if span <= 0:
        raise NumericalError("t_span must be increasing")
    hmax = max_step if max_step else span
    h = first_step if first_step else min(hmax, span / 10000.0)

    times = [t0]
    states = [y.copy()]
    fy = np.asarray(f(t0, y), dtype=float)
    derivs = [fy.copy()]
    t = t0
    nsteps = nrej = 0
    err_prev = 1.0
    K = np.empty((7, dim))

    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        h = min(h, t1 - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise NumericalError(f"step size underflow at t={t:.6g}")
        K[0] = fy
        for s in range(1, 7):
            K[s] = np.asarray(f(t + _DP_C[s] * h, y + h * (_DP_A[s] @ K[:s])))
        y_new = y + h * (_DP_B5 @ K)
        _check_state(y_new, t + h)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((h * (_DP_E @ K) / scale) ** 2))
        if err <= 1.0:
            t += h
            y = y_new
            fy = K[6].copy()  # FSAL stage equals f(t+h, y_new)
            times.append(t)
            states.append(y.copy())
            derivs.append(fy.copy())
            nsteps += 1
            # PI controller
            fac = 0.9 * err ** -0.14 * err_prev ** 0.08 if err > 0 else 5.0
            err_prev = max(err, 1e-10)
            h = min(hmax, h * min(5.0, max(0.2, fac)))
        else:
            nrej += 1
            h *= max(0.2, 0.9 * err ** -0.2)

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        derivs=np.array(derivs),
        stats={"steps": nsteps, "rejected": nrej, "engine": "explicit",
               "rtol": rtol, "atol": atol},
    )


def _newton_stage(f, M, t, y_base, h, gamma, k_guess, tol):
    """Solve k = f(t, y_base + h*gamma*k) by modified Newton with the frozen
    iteration matrix M = I - h*gamma*J."""
    k = k_guess.copy()
    for _ in range(15):
        r = k - np.asarray(f(t, y_base + h * gamma * k))
        try:
            dk = np.linalg.solve(M, r)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Newton matrix in implicit stage") from exc
        k = k - dk
        if np.max(np.abs(dk) / (1.0 + np.abs(k))) < tol:
            return k
    raise NumericalError(f"implicit stage Newton did not converge at t={t:.6g}")


def _fd_jacobian(f):
    def jac(t, y):
        fy = np.asarray(f(t, y))
        n = y.size
        J = np.empty((n, n))
        for i in range(n):
            step = 1e-7 * max(1.0, abs(y[i]))
            yp = y.copy()
            yp[i] += step
            J[:, i] = (np.asarray(f(t, yp)) - fy) / step
        return J
    return jac


def sdirk2(
    f: Callable,
    y0: Sequence[float],
    t_span: tuple[float, float],
    rtol: float = 1e-8,
    atol: float = 1e-10,
    jac: Optional[Callable] = None,
    max_step: Optional[float] = None,
    first_step: Optional[float] = None,
) -> Trajectory:
    """Adaptive two-stage SDIRK integration (A- and L-stable, order 2)."""
    t0, t1 = map(float, t_span)
    y = np.array(y0, dtype=float)
    span = t1 - t0
    if span <= 0:
        raise NumericalError("t_span must be increasing")
    if jac is None:
        jac = _fd_jacobian(f)
    g = _SDIRK_GAMMA
    hmax = max_step if max_step else span
    h = first_step if first_step else min(hmax, span / 10000.0)

    times = [t0]
    states = [y.copy()]
    fy = np.asarray(f(t0, y), dtype=float)
    derivs = [fy.copy()]
    t = t0
    nsteps = nrej = 0
    I = np.eye(y.size)
    newton_tol = 1e-3 * min(rtol, 1e-2)

    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        h = min(h, t1 - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise NumericalError(f"step size underflow at t={t:.6g}")
        M = I - h * g * np.asarray(jac(t, y))
        try:
            k1 = _newton_stage(f, M, t + g * h, y, h, g, fy, newton_tol)
            k2 = _newton_stage(f, M, t + h, y + h * (1 - g) * k1, h, g, k1, newton_tol)
        except NumericalError:
            h *= 0.25
            nrej += 1
            continue
        y_new = y + h * ((1 - g) * k1 + g * k2)
        _check_state(y_new, t + h)
        # embedded comparison, filtered through the stage matrix so fast
        # components the L-stable step smooths over do not throttle h
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        est = np.linalg.solve(M, h * g * (k2 - k1))
        err = np.sqrt(np.mean((est / scale) ** 2))
        if err <= 1.0:
            t += h
            y = y_new
            fy = np.asarray(f(t, y))
            times.append(t)
            states.append(y.copy())
            derivs.append(fy.copy())
            nsteps += 1
            h = min(hmax, h * min(4.0, max(0.3, 0.9 * err ** -0.5 if err > 0 else 4.0)))
        else:
            nrej += 1
            h *= max(0.2, 0.9 * err ** -0.5)

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        derivs=np.array(derivs),
        stats={"steps": nsteps, "rejected": nrej, "engine": "implicit",
               "rtol": rtol, "atol": atol},
    )


def integrate(
    f: Callable,
    y0: Sequence[float],
    t_span: tuple[float, float],
    rtol: float = 1e-8,
    atol: float = 1e-10,
    engine: str = "explicit",
    jac: Optional[Callable] = None,
    max_step: Optional[float] = None,
) -> Trajectory:
    """Integrate dy/dt = f(t, y) with the selected engine."""
    if engine == "explicit":
        return dopri5(f, y0, t_span, rtol=rtol, atol=atol, max_step=max_step)
    if engine == "implicit":
        return sdirk2(f, y0, t_span, rtol=rtol, atol=atol, jac=jac, max_step=max_step)
    raise NumericalError(f"unknown engine {engine!r}")
