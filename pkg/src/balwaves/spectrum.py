"""Spectral problem about a wave: Floquet-Bloch spectrum and Evans functions.

The eigenvalue problem w'' + a1 w' + a0 w = lambda w, with
a1 = c - f'(phi) and a0 = g'(phi) - f''(phi) phi', is written as
W' = A(z, lambda) W, A = [[0, 1], [lambda - a0, -a1]].

Fundamental matrices are propagated with a classical fourth-order
Runge-Kutta scheme on a fixed grid, vectorized over a batch of lambda values;
the number of steps is chosen by step doubling.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import ModelConstants, ModelSpec
from .numerics.linalg import eig2
from .numerics.quad import quad_adaptive
from .numerics.roots import find_root_bracketed, scan_brackets
from .waves import WaveProfile

INSTABILITY_MARGIN = 1e-4


class OutsideConsistentSplitting(ValueError):
    pass


class NoUnstableEigenvalueFound(ArithmeticError):
    pass


class ConvergenceFailure(ArithmeticError):
    pass


@dataclass
class LinearizedCoefficients:
    c: float
    z_min: float
    z_max: float
    periodic: bool
    _profile: WaveProfile = field(repr=False)
    _model: ModelSpec = field(repr=False)
    a1_inf: float = float("nan")
    a0_inf: float = float("nan")
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def period(self) -> float:
        return self.z_max - self.z_min

    def coefficients(self, z):
        z = np.asarray(z, dtype=float)
        s = self._profile.state(z)
        s = np.atleast_2d(s)
        u, v = s[:, 0], s[:, 1]
        fj = self._model.f(u)
        a1 = self.c - np.asarray(fj.v1, dtype=float)
        a0 = np.asarray(self._model.dg(u), dtype=float) - np.asarray(fj.v2, dtype=float) * v
        a1 = np.broadcast_to(a1, u.shape).astype(float)
        a0 = np.broadcast_to(a0, u.shape).astype(float)
        if z.ndim == 0:
            return float(a1[0]), float(a0[0])
        return a1, a0

    def a1(self, z):
        return self.coefficients(z)[0]

    def a0(self, z):
        return self.coefficients(z)[1]

    def table(self, z0: float, z1: float, n: int):
        """Coefficients at the 2n+1 half-step nodes of [z0, z1]."""
        key = (z0, z1, n)
        if key not in self._tables:
            z = np.linspace(z0, z1, 2 * n + 1)
            self._tables[key] = self.coefficients(z)
        return self._tables[key]

    def trace_integral(self, z0: float | None = None, z1: float | None = None) -> float:
        z0 = self.z_min if z0 is None else z0
        z1 = self.z_max if z1 is None else z1
        if z1 == z0:
            return 0.0
        sgn = 1.0 if z1 > z0 else -1.0
        lo, hi = sorted((z0, z1))
        return sgn * quad_adaptive(self.a1, lo, hi, tol=1e-12, strict=False).value


def linearize(m: ModelSpec, w: WaveProfile) -> LinearizedCoefficients:
    return LinearizedCoefficients(
        c=w.c,
        z_min=w.z_min,
        z_max=w.z_max if w.periodic else w.z_max,
        periodic=w.periodic,
        _profile=w,
        _model=m,
        a1_inf=w.c - float(m.df(1.0)),
        a0_inf=float(m.dg(1.0)),
    )


# -- batched RK4 propagation -------------------------------------------------


def _propagate(lc: LinearizedCoefficients, lam, z0: float, z1: float, n: int, Y0, shift=None):
    """Propagate W' = (A(z, lam) - shift I) W from z0 to z1 in n RK4 steps.

    ``lam`` has shape (B,), ``Y0`` shape (B, 2, k); returns the end value.
    """
    a1, a0 = lc.table(z0, z1, n)
    h = (z1 - z0) / n
    lam = np.asarray(lam, dtype=complex)[:, None]
    s = 0.0 if shift is None else np.asarray(shift, dtype=complex)[:, None]
    Y = np.array(Y0, dtype=complex)
    y0, y1 = Y[:, 0, :], Y[:, 1, :]

    def f(j, p, q):
        return -s * p + q, (lam - a0[j]) * p - (a1[j] + s) * q

    for i in range(n):
        j = 2 * i
        k1 = f(j, y0, y1)
        k2 = f(j + 1, y0 + 0.5 * h * k1[0], y1 + 0.5 * h * k1[1])
        k3 = f(j + 1, y0 + 0.5 * h * k2[0], y1 + 0.5 * h * k2[1])
        k4 = f(j + 2, y0 + h * k3[0], y1 + h * k3[1])
        y0 = y0 + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y1 = y1 + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return np.stack([y0, y1], axis=1)


def _identity(batch: int) -> np.ndarray:
    return np.broadcast_to(np.eye(2, dtype=complex), (batch, 2, 2)).copy()


def _det(M) -> np.ndarray:
    return M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]


def _inv(M) -> np.ndarray:
    d = _det(M)[:, None, None]
    out = np.empty_like(M)
    out[:, 0, 0] = M[:, 1, 1]
    out[:, 1, 1] = M[:, 0, 0]
    out[:, 0, 1] = -M[:, 0, 1]
    out[:, 1, 0] = -M[:, 1, 0]
    return out / d


@dataclass
class _HalfPropagators:
    lam: np.ndarray
    fwd: np.ndarray  # F(m, 0)
    bwd: np.ndarray  # F(m, T) = F(T, m)^{-1}
    log_det_tail: float  # log det F(T, m)
    steps: int


class PeriodicOperator:
    """Monodromy and periodic Evans function of a T-periodic coefficient pair."""

    def __init__(self, lc: LinearizedCoefficients, rtol: float = 1e-10, min_steps: int = 64, max_steps: int = 1 << 16):
        if not lc.periodic:
            raise ValueError("periodic coefficients required")
        self.lc = lc
        self.rtol = rtol
        self.min_steps = min_steps
        self.max_steps = max_steps
        self.mid = lc.z_min + 0.5 * lc.period
        self.log_det_tail = -lc.trace_integral(self.mid, lc.z_max)
        self.log_det_full = -lc.trace_integral()
        self._steps_for: dict = {}

    def _halves(self, lam, n: int) -> _HalfPropagators:
        lc = self.lc
        I = _identity(len(lam))
        fwd = _propagate(lc, lam, lc.z_min, self.mid, n, I)
        bwd = _propagate(lc, lam, lc.z_max, self.mid, n, I)
        return _HalfPropagators(lam, fwd, bwd, self.log_det_tail, n)

    def steps(self, lam_scale: float) -> int:
        """Step count (per half period) meeting ``rtol`` for |lambda| up to lam_scale."""
        key = round(math.log2(max(lam_scale, 1.0)) * 4) / 4
        if key in self._steps_for:
            return self._steps_for[key]
        probe = np.array([0.0, lam_scale, 1j * lam_scale, -lam_scale, 0.5 + 0.5j * lam_scale], dtype=complex)
        n = self.min_steps
        prev = self._halves(probe, n)
        while True:
            if 2 * n > self.max_steps:
                raise ConvergenceFailure("monodromy step doubling did not converge")
            cur = self._halves(probe, 2 * n)
            err = max(
                np.max(np.abs(cur.fwd - prev.fwd) / (1 + np.abs(cur.fwd).max())),
                np.max(np.abs(cur.bwd - prev.bwd) / (1 + np.abs(cur.bwd).max())),
            )
            n *= 2
            if err <= self.rtol * 15:
                break
            prev = cur
        self._steps_for[key] = n
        return n

    def halves(self, lam) -> _HalfPropagators:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        n = self.steps(float(np.max(np.abs(lam))) if len(lam) else 1.0)
        return self._halves(lam, n)

    def monodromy(self, lam) -> np.ndarray:
        h = self.halves(lam)
        return _inv(h.bwd) @ h.fwd

    def evans(self, lam, theta) -> np.ndarray:
        """D(lam, theta) = det F(T,m) det(F(m,0) - e^{i theta} F(m,T))."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        theta = np.broadcast_to(np.asarray(theta, dtype=float), lam.shape)
        h = self.halves(lam)
        rho = np.exp(1j * theta)[:, None, None]
        return math.exp(self.log_det_tail) * _det(h.fwd - rho * h.bwd)


@dataclass
class MonodromySample:
    lam: complex
    M: np.ndarray
    floquet_multipliers: tuple[complex, complex]


def monodromy(lc: LinearizedCoefficients, lam: complex, op: PeriodicOperator | None = None) -> MonodromySample:
    op = op or PeriodicOperator(lc)
    M = op.monodromy([lam])[0]
    return MonodromySample(complex(lam), M, eig2(M).values)


@dataclass
class EvansSample:
    lam: complex
    theta: float | None
    value: complex
    normalization: float = 0.0


def periodic_evans(lc: LinearizedCoefficients, lam: complex, theta: float, op: PeriodicOperator | None = None) -> EvansSample:
    if not -math.pi < theta <= math.pi:
        raise ValueError("theta must lie in (-pi, pi]")
    op = op or PeriodicOperator(lc)
    return EvansSample(complex(lam), float(theta), complex(op.evans([lam], [theta])[0]))


# -- Hill's method -------------------------------------------------------------


def _fourier(lc: LinearizedCoefficients, n_modes: int):
    n_fft = 1 << max(8, int(math.ceil(math.log2(8 * (2 * n_modes + 1)))))
    z = lc.z_min + lc.period * np.arange(n_fft) / n_fft
    a1, a0 = lc.coefficients(z)
    return np.fft.fft(a1) / n_fft, np.fft.fft(a0) / n_fft


def hill_matrix(lc: LinearizedCoefficients, theta: float, n_modes: int, coeffs=None) -> np.ndarray:
    c1, c0 = coeffs if coeffs is not None else _fourier(lc, n_modes)
    modes = np.arange(-n_modes, n_modes + 1)
    k = 2 * math.pi * modes / lc.period + theta / lc.period
    diff = modes[:, None] - modes[None, :]
    H = c1[diff] * (1j * k)[None, :] + c0[diff]
    H[np.diag_indices_from(H)] -= k * k
    return H


def hill_eigenvalues(lc: LinearizedCoefficients, theta: float, n_modes: int = 32, coeffs=None) -> np.ndarray:
    if n_modes < 8:
        raise ValueError("n_modes must be at least 8")
    vals = np.linalg.eigvals(hill_matrix(lc, theta, n_modes, coeffs))
    if not np.all(np.isfinite(vals)):
        raise ConvergenceFailure("Hill eigenvalue computation returned non-finite values")
    return vals


def theta_grid(n: int) -> np.ndarray:
    """Uniform grid on (-pi, pi] including pi."""
    return -math.pi + 2 * math.pi * (np.arange(n) + 1) / n


@dataclass
class SpectrumPoint:
    theta: float
    lam: complex
    abs_D: float
    refined: bool
    hill: complex


@dataclass
class FloquetResult:
    points: list[SpectrumPoint]
    window: tuple[float, float, float, float]
    n_theta: int
    n_modes: int
    max_real_part: float
    verdict: str
    monodromy_norm: float = float("nan")

    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points], dtype=complex)

    def to_rows(self) -> list[tuple[float, float, float, float]]:
        return [(p.theta, p.lam.real, p.lam.imag, p.abs_D) for p in self.points]


def _in_window(lam, window) -> np.ndarray:
    re_lo, re_hi, im_lo, im_hi = window
    return (lam.real >= re_lo) & (lam.real <= re_hi) & (lam.imag >= im_lo) & (lam.imag <= im_hi)


def newton_refine(op: PeriodicOperator, lam0, theta, iters: int = 25, tol: float = 1e-13, max_move: float | None = None):
    """Batched complex Newton on D(., theta) with central-difference slopes.

    Returns (lam, |D|, converged) arrays; unconverged entries keep lam0.
    """
    lam0 = np.asarray(lam0, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    lam = lam0.copy()
    active = np.ones(lam.shape, dtype=bool)
    done = np.zeros(lam.shape, dtype=bool)
    for _ in range(iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x = lam[idx]
        h = 1e-6 * (1.0 + np.abs(x))
        th = theta[idx]
        vals = op.evans(np.concatenate([x, x + h, x - h]), np.concatenate([th, th, th]))
        d0, dp, dm = np.split(vals, 3)
        slope = (dp - dm) / (2 * h)
        step = np.where(slope != 0, d0 / np.where(slope != 0, slope, 1), 0)
        lam[idx] = x - step
        small = np.abs(step) <= tol * (1.0 + np.abs(x))
        bad = ~np.isfinite(lam[idx])
        if max_move is not None:
            bad |= np.abs(lam[idx] - lam0[idx]) > max_move
        done[idx[small & ~bad]] = True
        lam[idx[bad]] = lam0[idx[bad]]
        active[idx[small | bad]] = False
    absd = np.abs(op.evans(lam, theta)) if lam.size else np.zeros(0)
    return lam, absd, done


def floquet_spectrum(
    lc: LinearizedCoefficients,
    window=(-0.5, 1.5, -1.0, 1.0),
    n_theta: int = 64,
    n_modes: int = 32,
    refine: bool = True,
    threads: int = 1,
    op: PeriodicOperator | None = None,
) -> FloquetResult:
    thetas = theta_grid(n_theta)
    coeffs = _fourier(lc, n_modes)

    def candidates(th):
        vals = hill_eigenvalues(lc, th, n_modes, coeffs)
        return th, vals[_in_window(vals, window)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            found = list(ex.map(candidates, thetas))
    else:
        found = [candidates(th) for th in thetas]
    th_all = np.concatenate([np.full(len(v), th) for th, v in found]) if found else np.zeros(0)
    lam_hill = np.concatenate([v for _, v in found]) if found else np.zeros(0, dtype=complex)
    mono_norm = float("nan")
    if refine and lam_hill.size:
        op = op or PeriodicOperator(lc)
        span = max(abs(window[0]), abs(window[1]), abs(window[2]), abs(window[3]), 1.0)
        lam, absd, ok = newton_refine(op, lam_hill, th_all, max_move=0.05 * (1.0 + span))
        mono_norm = float(np.linalg.norm(op.monodromy([0.0])[0], 2))
    else:
        lam = lam_hill.copy()
        absd = np.full(lam.shape, np.nan)
        ok = np.zeros(lam.shape, dtype=bool)
    points = [
        SpectrumPoint(float(t), complex(l), float(d), bool(r), complex(h))
        for t, l, d, r, h in zip(th_all, lam, absd, ok, lam_hill)
    ]
    points.sort(key=lambda p: (p.theta, p.lam.real, p.lam.imag))
    max_re = max((p.lam.real for p in points), default=-math.inf)
    verdict = "spectrally_unstable" if max_re > INSTABILITY_MARGIN else "no_instability_found"
    return FloquetResult(points, tuple(window), n_theta, n_modes, max_re, verdict, mono_norm)


# -- homoclinic Evans function -------------------------------------------------


def spatial_eigenvalues(lc: LinearizedCoefficients, lam: complex) -> tuple[complex, complex]:
    """(mu_minus, mu_plus) of A_inf = [[0, 1], [lam - a0_inf, -a1_inf]]."""
    b = lc.a1_inf
    root = cmath.sqrt(b * b + 4.0 * (lam - lc.a0_inf))
    return 0.5 * (-b - root), 0.5 * (-b + root)


class HomoclinicOperator:
    """Evans function D(lam) = det(W-(0), W+(0)) for a pulse."""

    def __init__(self, lc: LinearizedCoefficients, Z: float | None = None, rtol: float = 1e-9, min_steps: int = 256, max_steps: int = 1 << 17):
        if lc.periodic:
            raise ValueError("pulse coefficients required")
        self.lc = lc
        self.Z = lc.z_max if Z is None else Z
        self.rtol = rtol
        self.min_steps = min_steps
        self.max_steps = max_steps
        self._n: int | None = None

    def _raw(self, lam: np.ndarray, n: int):
        lc = self.lc
        if np.any(lam.real <= lc.a0_inf):
            raise OutsideConsistentSplitting(f"Re lambda must exceed g'(1) = {lc.a0_inf}")
        b = lc.a1_inf
        root = np.sqrt(b * b + 4.0 * (lam - lc.a0_inf))
        mu_m, mu_p = 0.5 * (-b - root), 0.5 * (-b + root)
        left = np.stack([np.ones_like(mu_p), mu_p], axis=1)[:, :, None]
        right = np.stack([np.ones_like(mu_m), mu_m], axis=1)[:, :, None]
        wl = _propagate(lc, lam, -self.Z, 0.0, n, left, shift=mu_p)[:, :, 0]
        wr = _propagate(lc, lam, self.Z, 0.0, n, right, shift=mu_m)[:, :, 0]
        D = wl[:, 0] * wr[:, 1] - wl[:, 1] * wr[:, 0]
        norm = (mu_p.real - mu_m.real) * self.Z
        return D, norm, mu_m, mu_p

    def steps(self) -> int:
        if self._n is None:
            probe = np.array([0.0, 1.0, 0.5 + 1j, 4.0], dtype=complex)
            n = self.min_steps
            prev = self._raw(probe, n)[0]
            while True:
                if 2 * n > self.max_steps:
                    raise ConvergenceFailure("Evans step doubling did not converge")
                cur = self._raw(probe, 2 * n)[0]
                n *= 2
                if np.max(np.abs(cur - prev)) <= 15 * self.rtol * np.max(np.abs(cur)):
                    break
                prev = cur
            self._n = n
        return self._n

    def __call__(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        return self._raw(lam, self.steps())[0]

    def sample(self, lam: complex) -> EvansSample:
        lam_arr = np.array([lam], dtype=complex)
        D, norm, _, _ = self._raw(lam_arr, self.steps())
        return EvansSample(complex(lam), None, complex(D[0]), float(norm[0]))

    def scale(self, lam: complex = 0.0) -> float:
        mu_m, mu_p = spatial_eigenvalues(self.lc, lam)
        return abs(mu_m - mu_p)


def homoclinic_evans(lc: LinearizedCoefficients, lam: complex, op: HomoclinicOperator | None = None) -> EvansSample:
    op = op or HomoclinicOperator(lc)
    return op.sample(lam)


@dataclass
class PulseEigenvalue:
    value: float
    derivative: float
    sign_changes: int
    D0: float
    scale: float


def pulse_unstable_eigenvalue(lc: LinearizedCoefficients, g1prime0: float = 1.0, n_scan: int = 400, op: HomoclinicOperator | None = None) -> PulseEigenvalue:
    op = op or HomoclinicOperator(lc)
    lam_max = 4.0 * max(1.0, g1prime0)
    grid = np.linspace(1e-3, lam_max, n_scan)
    vals = op(grid).real
    brackets = scan_brackets(lambda x: vals[int(round((x - grid[0]) / (grid[1] - grid[0])))], list(grid))
    if not brackets:
        raise NoUnstableEigenvalueFound(
            "no sign change of the Evans function on the positive real axis; this contradicts the expected pulse instability"
        )
    a, b = max(brackets, key=lambda ab: ab[0])
    root = find_root_bracketed(lambda x: float(op([x])[0].real), a, b, tol=1e-12)
    h = 1e-6 * (1.0 + root)
    dp, dm = op([root + h, root - h]).real
    return PulseEigenvalue(
        value=root,
        derivative=float((dp - dm) / (2 * h)),
        sign_changes=len(brackets),
        D0=abs(complex(op([0.0])[0])),
        scale=op.scale(0.0),
    )


# -- reports ---------------------------------------------------------------------


def hausdorff_to_point(points: np.ndarray, target: complex) -> float:
    return float(np.max(np.abs(points - target))) if len(points) else float("inf")


def instability_report(m: ModelSpec, w: WaveProfile, fr: FloquetResult, consts: ModelConstants, lambda_bar: float | None = None, radius: float | None = None) -> dict:
    out = {"kind": w.kind, "epsilon": w.epsilon, "verdict": fr.verdict, "max_real_part": fr.max_real_part}
    if w.kind == "periodic_small":
        g0 = float(m.dg(0.0))
        gap = abs(fr.max_real_part - g0)
        out.update({"g'(0)": g0, "gap": gap})
        if w.epsilon > 0:
            out["gap_over_sqrt_eps"] = gap / math.sqrt(w.epsilon)
    elif w.kind == "periodic_large" and lambda_bar is not None:
        lam = fr.lambdas()
        r = radius if radius is not None else 0.5 * lambda_bar
        near = lam[np.abs(lam - lambda_bar) <= r]
        out.update(
            {
                "lambda_bar": lambda_bar,
                "loop_points": int(len(near)),
                "loop_min_real": float(near.real.min()) if len(near) else float("nan"),
                "hausdorff_to_lambda_bar": hausdorff_to_point(near, lambda_bar),
                "box_re": float(np.ptp(near.real)) if len(near) else float("nan"),
                "box_im": float(np.ptp(near.imag)) if len(near) else float("nan"),
            }
        )
    return out
