"""Dormand-Prince 5(4) integrator with dense output and event location."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .roots import find_root_bracketed

# Butcher tableau (Dormand & Prince 1980).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A = [np.array(row) for row in _A]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5th order minus embedded 4th order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Continuous extension: y(z + t h) = y + h K^T (P @ [t, t^2, t^3, t^4])
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI controller exponents (Hairer's dopri5 choice).
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA


class IntegrationError(RuntimeError):
    pass


class StepSizeUnderflow(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


class NoEventBeforeZMax(IntegrationError):
    def __init__(self, message: str, trajectory: "Trajectory | None" = None, aborted: bool = False):
        super().__init__(message)
        self.trajectory = trajectory
        self.aborted = aborted


@dataclass
class Trajectory:
    """Accepted steps of an integration with their dense-output polynomials.

    ``z`` has one more entry than there are steps; ``coeffs[k]`` holds the
    (dim, 4) matrix Q with y(z_k + t h_k) = y_k + h_k Q [t, t^2, t^3, t^4].
    """

    z: np.ndarray
    y: np.ndarray
    coeffs: np.ndarray
    nfev: int = 0
    n_rejected: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.z) - 1

    @property
    def z_start(self) -> float:
        return float(self.z[0])

    @property
    def z_end(self) -> float:
        return float(self.z[-1])

    @property
    def direction(self) -> float:
        return 1.0 if self.z[-1] >= self.z[0] else -1.0

    def __call__(self, zq):
        """Dense output at ``zq`` (scalar -> (dim,), array -> (n, dim))."""
        zq_arr = np.atleast_1d(np.asarray(zq, dtype=float))
        if self.n_steps == 0:
            out = np.repeat(self.y[:1], len(zq_arr), axis=0)
            return out[0] if np.ndim(zq) == 0 else out
        if self.direction > 0:
            k = np.searchsorted(self.z, zq_arr, side="right") - 1
        else:
            k = len(self.z) - 1 - np.searchsorted(self.z[::-1], zq_arr, side="left")
        k = np.clip(k, 0, self.n_steps - 1)
        h = self.z[k + 1] - self.z[k]
        t = (zq_arr - self.z[k]) / h
        powers = np.stack([t, t * t, t**3, t**4], axis=-1)
        incr = np.einsum("ndj,nj->nd", self.coeffs[k], powers)
        out = self.y[k] + h[:, None] * incr
        return out[0] if np.ndim(zq) == 0 else out

    def derivative(self, zq):
        """Derivative of the dense-output polynomial in z."""
        zq_arr = np.atleast_1d(np.asarray(zq, dtype=float))
        if self.direction > 0:
            k = np.searchsorted(self.z, zq_arr, side="right") - 1
        else:
            k = len(self.z) - 1 - np.searchsorted(self.z[::-1], zq_arr, side="left")
        k = np.clip(k, 0, self.n_steps - 1)
        h = self.z[k + 1] - self.z[k]
        t = (zq_arr - self.z[k]) / h
        dpow = np.stack([np.ones_like(t), 2 * t, 3 * t * t, 4 * t**3], axis=-1)
        out = np.einsum("ndj,nj->nd", self.coeffs[k], dpow)
        return out[0] if np.ndim(zq) == 0 else out


@dataclass
class _Stepper:
    field: Callable
    z: float
    y: np.ndarray
    z_bound: float
    rel_tol: float
    abs_tol: float
    max_step: float = math.inf
    h: float | None = None
    f: np.ndarray | None = None
    nfev: int = 0
    n_rejected: int = 0
    err_prev: float = 1e-4
    K: np.ndarray = field(init=False)

    def __post_init__(self):
        self.direction = 1.0 if self.z_bound >= self.z else -1.0
        self.y = np.asarray(self.y)
        self.K = np.empty((7, self.y.size), dtype=self.y.dtype)
        self.f = self._eval(self.z, self.y)
        if self.h is None:
            self.h = self._initial_step()

    def _eval(self, z, y):
        out = np.asarray(self.field(z, y))
        self.nfev += 1
        if not np.all(np.isfinite(out)):
            raise NonFiniteState(f"vector field returned non-finite value at z={z}, y={y}")
        return out

    def _initial_step(self) -> float:
        # Hairer-Norsett-Wanner heuristic.
        scale = self.abs_tol + np.abs(self.y) * self.rel_tol
        d0 = _rms(self.y / scale)
        d1 = _rms(self.f / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, abs(self.z_bound - self.z), self.max_step)
        y1 = self.y + self.direction * h0 * self.f
        f1 = self._eval(self.z + self.direction * h0, y1)
        d2 = _rms((f1 - self.f) / scale) / max(h0, 1e-300)
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        return min(100 * h0, h1, abs(self.z_bound - self.z), self.max_step)

    def step(self):
        """Take one accepted step; returns (z_old, y_old, h_signed, Q)."""
        z, y = self.z, self.y
        min_step = 16 * np.spacing(abs(z) + 1.0)
        h = min(self.h, self.max_step)
        while True:
            if h < min_step:
                raise StepSizeUnderflow(f"step size underflow at z={z}")
            remaining = abs(self.z_bound - z)
            last = h >= remaining
            if last:
                h = remaining
            hs = self.direction * h
            K = self.K
            K[0] = self.f
            for s in range(1, 7):
                dy = hs * (_A[s] @ K[:s])
                K[s] = self._eval(z + _C[s] * hs, y + dy)
            y_new = y + hs * (_B[:6] @ K[:6])
            err_vec = hs * (_E @ K)
            scale = self.abs_tol + np.maximum(np.abs(y), np.abs(y_new)) * self.rel_tol
            err = _rms(err_vec / scale)
            if err <= 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * err**-ALPHA * self.err_prev**BETA
                    factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                self.err_prev = max(err, 1e-4)
                Q = K.T @ _P
                z_new = self.z_bound if last else z + hs
                self.z, self.y, self.f = z_new, y_new, K[6].copy()
                self.h = h * factor
                return z, y, hs, Q
            self.n_rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err**-ALPHA)

    @property
    def done(self) -> bool:
        return self.z == self.z_bound


def _rms(x) -> float:
    x = np.abs(x)
    return float(np.sqrt(np.mean(x * x)))


class _Recorder:
    def __init__(self, z0, y0):
        self.z = [z0]
        self.y = [np.array(y0)]
        self.Q = []

    def add(self, z_new, y_new, Q):
        self.z.append(z_new)
        self.y.append(np.array(y_new))
        self.Q.append(Q)

    def build(self, stepper) -> Trajectory:
        dim = self.y[0].size
        coeffs = np.array(self.Q) if self.Q else np.zeros((0, dim, 4))
        return Trajectory(
            np.array(self.z, dtype=float), np.array(self.y), coeffs, stepper.nfev, stepper.n_rejected
        )


def solve_ivp(
    field: Callable,
    y0,
    z_span,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    max_step: float = math.inf,
    max_steps: int = 200_000,
) -> Trajectory:
    """Integrate y' = field(z, y) over ``z_span`` (either direction)."""
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    z0, z1 = float(z_span[0]), float(z_span[1])
    y0 = np.array(y0, dtype=np.result_type(np.asarray(y0).dtype, float))
    if z0 == z1:
        return Trajectory(np.array([z0]), y0[None, :], np.zeros((0, y0.size, 4)))
    st = _Stepper(field, z0, y0, z1, rel_tol, abs_tol, max_step)
    rec = _Recorder(z0, y0)
    for _ in range(max_steps):
        _, _, _, Q = st.step()
        rec.add(st.z, st.y, Q)
        if st.done:
            return rec.build(st)
    raise StepSizeUnderflow(f"exceeded {max_steps} steps before reaching z={z1}")


def integrate_to_event(
    field: Callable,
    y0,
    event: Callable,
    direction: str | int = "any",
    z_max: float = 100.0,
    tol: float = 1e-12,
    z0: float = 0.0,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    count: int = 1,
    accept: Callable | None = None,
    abort: Callable | None = None,
    max_step: float = math.inf,
):
    """Integrate from ``z0`` toward ``z_max`` until ``event`` changes sign.

    ``direction`` is "+" (event increasing along the integration), "-"
    (decreasing) or "any".  ``count`` selects the n-th qualifying crossing,
    ``accept(z, y)`` can veto crossings, and ``abort(z, y)`` stops the
    integration early (reported as :class:`NoEventBeforeZMax` with
    ``aborted=True``).  Returns ``(z_event, y_event, trajectory)`` where the
    trajectory ends exactly at the event.
    """
    sign = {"+": 1, "-": -1, "any": 0, 1: 1, -1: -1, 0: 0}[direction]
    y0 = np.array(y0, dtype=float)
    st = _Stepper(field, float(z0), y0, float(z_max), rel_tol, abs_tol, max_step)
    rec = _Recorder(float(z0), y0)
    e_prev = float(event(z0, y0))
    found = 0
    while not st.done:
        z_old, y_old, hs, Q = st.step()
        z_new, y_new = st.z, st.y
        e_new = float(event(z_new, y_new))
        if abort is not None and abort(z_new, y_new):
            rec.add(z_new, y_new, Q)
            raise NoEventBeforeZMax("integration aborted before event", rec.build(st), aborted=True)
        crossed = (e_prev < 0 <= e_new and sign >= 0) or (e_prev > 0 >= e_new and sign <= 0)
        if crossed:

            def dense(zq):
                t = (zq - z_old) / hs
                return y_old + hs * (Q @ np.array([t, t * t, t**3, t**4]))

            lo, hi = sorted((z_old, z_new))
            if e_new == 0.0:
                z_star = z_new
            else:
                z_star = find_root_bracketed(lambda s: float(event(s, dense(s))), lo, hi, tol=tol)
            y_star = dense(z_star)
            if accept is None or accept(z_star, y_star):
                found += 1
                if found == count:
                    # re-take the final partial step so the trajectory ends at the event
                    tail = _Stepper(field, z_old, y_old, z_star, rel_tol, abs_tol, max_step, h=abs(z_star - z_old))
                    tail.nfev = st.nfev
                    while not tail.done:
                        _, _, _, Qt = tail.step()
                        rec.add(tail.z, tail.y, Qt)
                    traj = rec.build(st)
                    traj.nfev = tail.nfev
                    return z_star, y_star, traj
        rec.add(z_new, y_new, Q)
        e_prev = e_new
    raise NoEventBeforeZMax(f"no event before z={z_max}", rec.build(st))
