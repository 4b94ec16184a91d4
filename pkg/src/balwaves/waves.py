"""Traveling-wave profiles: the pulse, the Hopf family and the large-period family.

Profiles solve U' = V, V' = -c V + f'(U) V - g(U), the first-order form of
phi'' + (c - f'(phi)) phi' + g(phi) = 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import ModelConstants, ModelSpec, _integral_g, saddle_eigenvalues
from .numerics.ode import IntegrationError, NoEventBeforeZMax, Trajectory, integrate_to_event, solve_ivp
from .numerics.roots import NoSignChange, find_root_bracketed, scan_brackets


class NoHomoclinicBracket(ArithmeticError):
    pass


class NoLimitCycle(ArithmeticError):
    pass


def vector_field(m: ModelSpec, c: float) -> Callable:
    def field(z, y):
        u, v = y[0], y[1]
        fj = m.f(u)
        return np.array([v, -c * v + fj.v1 * v - m.gv(u)], dtype=float)

    return field


def hamiltonian(m: ModelSpec, U: float, V: float) -> float:
    return 0.5 * V * V + _integral_g(m, 0.0, U, 1e-14)


@dataclass(frozen=True)
class EquilibriumInfo:
    point: tuple[float, float]
    eigenvalues: tuple[complex, complex]
    classification: str


def _classify(l1: complex, l2: complex) -> str:
    if abs(l1.imag) > 0:
        if abs(l1.real) <= 1e-14:
            return "center"
        return "focus_stable" if l1.real < 0 else "focus_unstable"
    a, b = sorted((l1.real, l2.real))
    if a < 0 < b:
        return "saddle"
    return "node_stable" if b < 0 else "node_unstable"


def _linear_eigs(trace: float, det: float) -> tuple[complex, complex]:
    disc = trace * trace - 4.0 * det
    if disc >= 0:
        s = math.sqrt(disc)
        return complex(0.5 * (trace - s)), complex(0.5 * (trace + s))
    s = math.sqrt(-disc)
    return complex(0.5 * trace, -0.5 * s), complex(0.5 * trace, 0.5 * s)


def classify_equilibria(m: ModelSpec, c: float) -> tuple[EquilibriumInfo, EquilibriumInfo]:
    out = []
    for u in (0.0, 1.0):
        # Jacobian [[0, 1], [-g'(u), f'(u) - c]]
        eigs = _linear_eigs(float(m.df(u)) - c, float(m.dg(u)))
        out.append(EquilibriumInfo((u, 0.0), eigs, _classify(*eigs)))
    return out[0], out[1]


# -- profile containers -------------------------------------------------------


@dataclass
class WaveProfile:
    """A computed profile; ``state(z)`` returns rows (U, V)."""

    kind: str
    c: float
    period: float
    epsilon: float
    samples: Trajectory | None
    c_reference: float
    z_min: float
    z_max: float
    amplitude: float = float("nan")
    info: dict = field(default_factory=dict)
    legs: "_PulseLegs | None" = field(default=None, repr=False)

    @property
    def periodic(self) -> bool:
        return self.kind != "pulse"

    def state(self, z):
        z = np.asarray(z, dtype=float)
        if self.legs is not None:
            out = self.legs.evaluate(z)
            return out[0] if z.ndim == 0 else out
        zz = np.mod(z - self.z_min, self.period) + self.z_min
        return self.samples(zz)

    def residual(self, m: ModelSpec, n: int = 50, seed: int = 0) -> float:
        """Max relative ODE residual of the dense output at random interior points."""
        rng = np.random.default_rng(seed)
        z = np.sort(rng.uniform(self.z_min, self.z_max, n))
        h = 1e-4 * max(1.0, self.z_max - self.z_min) * 1e-2
        s = self.state(z)
        dv = (self.state(z + h)[:, 1] - self.state(z - h)[:, 1]) / (2 * h)
        du = (self.state(z + h)[:, 0] - self.state(z - h)[:, 0]) / (2 * h)
        u, v = s[:, 0], s[:, 1]
        res_v = dv - (-self.c * v + m.df(u) * v - m.gv(u))
        res_u = du - v
        return float(max(np.abs(res_v).max(), np.abs(res_u).max()) / (1.0 + np.abs(dv).max()))

    def closure(self) -> float:
        if not self.periodic:
            return float("nan")
        a = self.samples(self.z_min)
        b = self.samples(self.z_min + self.period)
        return float(np.max(np.abs(a - b) / (1.0 + np.abs(a))))

    def summary(self, m: ModelSpec | None = None) -> dict:
        out = {
            "kind": self.kind,
            "c": self.c,
            "c_reference": self.c_reference,
            "epsilon": self.epsilon,
            "period": self.period,
            "z_min": self.z_min,
            "z_max": self.z_max,
            "amplitude": self.amplitude,
        }
        if self.periodic:
            out["closure"] = self.closure()
        if m is not None:
            out["residual"] = self.residual(m)
        out.update(self.info)
        return out


def write_profile_csv(w: WaveProfile, path, n: int = 2001, header: dict | None = None) -> None:
    z = np.linspace(w.z_min, w.z_min + w.period if w.periodic else w.z_max, n)
    s = w.state(z)
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}: {v}\n")
        out = csv.writer(fh)
        out.writerow(["z", "U", "V"])
        for zi, (u, v) in zip(z, s):
            out.writerow([repr(float(zi)), repr(float(u)), repr(float(v))])


# -- pulse --------------------------------------------------------------------


@dataclass
class _PulseLegs:
    c: float
    delta: float
    lam1: float
    lam2: float
    fwd: Trajectory  # from P1 along the unstable direction, z in [0, z_f]
    bwd: Trajectory  # toward P1 along the stable direction, z in [0, -z_b]
    split: float

    @property
    def z_f(self) -> float:
        return self.fwd.z_end

    @property
    def z_b(self) -> float:
        return -self.bwd.z_end

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Profile with z = 0 at the turning point; linear tails beyond the legs."""
        z = np.atleast_1d(z)
        out = np.empty((len(z), 2))
        zf, zb, d = self.z_f, self.z_b, self.delta
        left = z < -zf
        mid_l = (z >= -zf) & (z <= 0)
        mid_r = (z > 0) & (z <= zb)
        right = z > zb
        if left.any():
            e = d * np.exp(self.lam2 * (z[left] + zf))
            out[left] = np.stack([1.0 - e, -self.lam2 * e], axis=1)
        if mid_l.any():
            out[mid_l] = self.fwd(z[mid_l] + zf)
        if mid_r.any():
            out[mid_r] = self.bwd(z[mid_r] - zb)
        if right.any():
            e = d * np.exp(self.lam1 * (z[right] - zb))
            out[right] = np.stack([1.0 - e, -self.lam1 * e], axis=1)
        return out


def _shoot(m: ModelSpec, c: float, delta: float, rel_tol: float, z_max: float = 400.0) -> _PulseLegs:
    lam1, lam2 = saddle_eigenvalues(m, c)
    field = vector_field(m, c)

    def runaway(z, y):
        return not (abs(y[0]) < 1e3 and abs(y[1]) < 1e3)

    def left_of_p1(z, y):
        return y[0] < 1.0 - 10 * delta

    # eigenvectors (1, lam) scaled so U starts at 1 - delta
    _, _, fwd = integrate_to_event(
        field, [1.0 - delta, -delta * lam2], lambda z, y: y[1], "+", z_max,
        rel_tol=rel_tol, abs_tol=rel_tol * 1e-2, accept=left_of_p1, abort=runaway,
    )
    _, _, bwd = integrate_to_event(
        field, [1.0 - delta, -delta * lam1], lambda z, y: y[1], "-", -z_max,
        rel_tol=rel_tol, abs_tol=rel_tol * 1e-2, accept=left_of_p1, abort=runaway,
    )
    split = float(fwd.y[-1, 0] - bwd.y[-1, 0])
    return _PulseLegs(c, delta, lam1, lam2, fwd, bwd, split)


def _split_value(m, c, delta, rel_tol) -> float:
    try:
        return _shoot(m, c, delta, rel_tol).split
    except (NoEventBeforeZMax, IntegrationError):
        return float("nan")


def _refine_speed(m: ModelSpec, c1: float, delta: float, rel_tol: float, tol: float) -> float:
    w = max(0.1 * abs(c1), 0.05)
    lo, hi = c1 - w, c1 + w
    s = lambda c: _split_value(m, c, delta, rel_tol)  # noqa: E731
    try:
        return find_root_bracketed(s, lo, hi, tol=tol)
    except NoSignChange:
        pass
    grid = list(np.linspace(lo, hi, 21))
    brackets = scan_brackets(s, grid)
    if not brackets:
        raise NoHomoclinicBracket(f"split function has no sign change on [{lo:.6g}, {hi:.6g}]")
    # prefer the bracket nearest the predictor
    a, b = min(brackets, key=lambda ab: abs(0.5 * (ab[0] + ab[1]) - c1))
    return find_root_bracketed(s, a, b, tol=tol)


def compute_pulse(
    m: ModelSpec,
    consts: ModelConstants,
    refine: bool = True,
    delta: float | None = None,
    rel_tol: float = 1e-11,
    speed_tol: float = 1e-12,
    richardson: bool = True,
) -> WaveProfile:
    """Homoclinic profile to P1 = (1, 0), z = 0 at the turning point V = 0."""
    scale = abs(1.0 - consts.u_star)
    d = 1e-7 * scale if delta is None else delta
    c = _refine_speed(m, consts.c1, d, rel_tol, speed_tol) if refine else consts.c1
    legs = _shoot(m, c, d, rel_tol)
    info = {
        "c1": consts.c1,
        "c_star": c,
        "speed_gap": c - consts.c1,
        "refined": refine,
        "delta": d,
        "split": legs.split,
        "turning_point": float(legs.fwd.y[-1, 0]),
        "lambda1": legs.lam1,
        "lambda2": legs.lam2,
    }
    if refine and richardson:
        c_half = _refine_speed(m, consts.c1, 0.5 * d, rel_tol, speed_tol)
        info["c_star_half_delta"] = c_half
        info["delta_sensitivity"] = abs(c_half - c)
    # truncation so that the linear tail estimate drops below 1e-9, safety 1.2
    target = 1e-9
    z_left = legs.z_f + math.log(d / target) / legs.lam2
    z_right = legs.z_b + math.log(d / target) / (-legs.lam1)
    Z = 1.2 * max(z_left, z_right)
    info["Z"] = Z
    turning = float(legs.fwd.y[-1, 0])
    return WaveProfile(
        kind="pulse",
        c=c,
        period=2.0 * Z,
        epsilon=abs(c - consts.c1),
        samples=None,
        c_reference=consts.c1,
        z_min=-Z,
        z_max=Z,
        amplitude=1.0 - turning,
        info=info,
        legs=legs,
    )


def tail_slopes(w: WaveProfile, lo: float = 1e-6, hi: float = 1e-3) -> tuple[float, float]:
    """Fitted slopes of log|phi - 1| on the left and right ODE legs."""
    legs = w.legs
    out = []
    for traj, shift in ((legs.fwd, -legs.z_f), (legs.bwd, legs.z_b)):
        z = np.linspace(traj.z_start, traj.z_end, 4001)
        r = np.abs(1.0 - traj(z)[:, 0])
        mask = (r >= lo) & (r <= hi)
        if mask.sum() < 5:
            raise ValueError("too few tail samples for a decay fit")
        slope = np.polyfit(z[mask] + shift, np.log(r[mask]), 1)[0]
        out.append(float(slope))
    return out[0], out[1]


# -- periodic orbits via Poincare sections ----------------------------------------


@dataclass
class _Section:
    m: ModelSpec
    c: float
    side: float  # +1: section {V=0, U>0}, -1: {V=0, U<0}
    direction: str
    z_max: float
    rel_tol: float
    bound: float = 50.0
    escape: float = 1e6

    def returned(self, u0: float):
        field = vector_field(self.m, self.c)
        side = self.side
        bound = self.bound
        return integrate_to_event(
            field, [u0, 0.0], lambda z, y: y[1], self.direction, self.z_max,
            rel_tol=self.rel_tol, abs_tol=self.rel_tol * 1e-2,
            accept=lambda z, y: side * y[0] > 0,
            abort=lambda z, y: abs(y[0]) > bound or abs(y[1]) > bound,
        )

    def displacement(self, u0: float) -> float:
        try:
            _, y, _ = self.returned(u0)
        except (NoEventBeforeZMax, IntegrationError):
            return self.side * self.escape
        return float(y[0] - u0)


def _periodic_profile(sec: _Section, u_star: float, kind: str, epsilon: float, c_ref: float, info: dict) -> WaveProfile:
    z_end, y_end, traj = sec.returned(u_star)
    z = np.linspace(0.0, z_end, 2001)
    amp = float(np.abs(traj(z)).max(axis=0)[0])
    info = dict(info)
    info.update({"section_u": u_star, "return_displacement": float(y_end[0] - u_star)})
    return WaveProfile(
        kind=kind,
        c=sec.c,
        period=float(z_end),
        epsilon=epsilon,
        samples=traj,
        c_reference=c_ref,
        z_min=0.0,
        z_max=float(z_end),
        amplitude=amp,
        info=info,
    )


def _solve_section(sec: _Section, grid, pick) -> tuple[float, list]:
    # escapes count as a large displacement of fixed sign, so a bracket
    # between an escaping start and a returning one still encloses the cycle
    brackets = scan_brackets(sec.displacement, list(grid))
    roots = []
    for a, b in brackets:
        r = find_root_bracketed(sec.displacement, a, b, tol=1e-14)
        if abs(sec.displacement(r)) <= 1e-7 * (1.0 + abs(r)):
            roots.append(r)
    if not roots:
        raise NoLimitCycle(f"no fixed point of the return map at c={sec.c:.12g}")
    return pick(roots), roots


def compute_periodic_small(
    m: ModelSpec,
    consts: ModelConstants,
    epsilon: float,
    direction: str | None = None,
    rel_tol: float = 1e-11,
    max_epsilon: float = 0.05,
) -> WaveProfile:
    """Hopf cycle at c = c0 + eps (c0 - eps if a0_bar < 0) on the section {V=0, U>0}."""
    if not 0 < epsilon <= max_epsilon:
        raise ValueError(f"epsilon must lie in (0, {max_epsilon}]")
    side = direction or ("above" if consts.a0_bar > 0 else "below")
    c = consts.c0 + epsilon if side == "above" else consts.c0 - epsilon
    sec = _Section(m, c, +1.0, "-", z_max=4.0 * consts.T0, rel_tol=rel_tol, bound=5.0)
    # radius predicted by the normal form, in U units
    r_pred = math.sqrt(8.0 * epsilon / max(abs(consts.a0_bar), 1e-12))
    grid = np.geomspace(max(r_pred / 16.0, 1e-4), min(8.0 * r_pred, 0.9), 33)
    u_cycle, roots = _solve_section(sec, grid, pick=lambda rs: min(rs, key=lambda r: abs(r - r_pred)))
    return _periodic_profile(
        sec, u_cycle, "periodic_small", epsilon, consts.c0,
        {"side": side, "predicted_radius": r_pred, "section_roots": roots},
    )


def compute_periodic_large(
    m: ModelSpec,
    consts: ModelConstants,
    epsilon: float,
    pulse: WaveProfile,
    direction: str | None = None,
    rel_tol: float = 1e-11,
    max_epsilon: float = 0.05,
    center: float | None = None,
) -> WaveProfile:
    """Periodic orbit near the homoclinic loop on the section {V=0, U<0}.

    The speed is offset from the pulse speed ``pulse.c`` (or ``center``) by
    eps, below when f'(1) > c1 and above otherwise.
    """
    if not 0 < epsilon <= max_epsilon:
        raise ValueError(f"epsilon must lie in (0, {max_epsilon}]")
    fp1 = float(m.df(1.0))
    side = direction or ("below" if fp1 > consts.c1 else "above")
    c_mid = pulse.c if center is None else center
    c = c_mid - epsilon if side == "below" else c_mid + epsilon
    u_turn = pulse.info["turning_point"]
    span = min(abs(u_turn), 1.0)
    offsets = np.geomspace(1e-10 * span, 0.5 * span, 48)
    grid = np.concatenate([u_turn - offsets[::-1], u_turn + offsets])
    grid = grid[grid < 0]
    z_max = 40.0 * pulse.z_max + 200.0
    sec = _Section(m, c, -1.0, "+", z_max=z_max, rel_tol=rel_tol, bound=max(10.0, 4.0 * abs(u_turn)))
    u_cycle, roots = _solve_section(sec, grid, pick=lambda rs: min(rs, key=lambda r: abs(r - u_turn)))
    return _periodic_profile(
        sec, u_cycle, "periodic_large", epsilon, c_mid,
        {"side": side, "turning_point": u_turn, "section_roots": roots},
    )


def sup_distance_to_pulse(w: WaveProfile, pulse: WaveProfile, n: int = 4001) -> float:
    """Sup-norm gap between a large-period wave and the pulse over [-T/2, T/2]."""
    z = np.linspace(-0.5 * w.period, 0.5 * w.period, n)
    return float(np.abs(w.state(z)[:, 0] - pulse.state(z)[:, 0]).max())


def zero_profile(m: ModelSpec, consts: ModelConstants) -> WaveProfile:
    """The trivial wave phi = 0 at c = c0 with period T0."""
    T = consts.T0
    traj = Trajectory(np.array([0.0, T]), np.zeros((2, 2)), np.zeros((1, 2, 4)))
    return WaveProfile(
        kind="periodic_small", c=consts.c0, period=T, epsilon=0.0, samples=traj,
        c_reference=consts.c0, z_min=0.0, z_max=T, amplitude=0.0, info={"zero_profile": True},
    )


# -- certificate ----------------------------------------------------------------


def nondegeneracy_certificate(m: ModelSpec, pulse: WaveProfile, Z: float | None = None, rel_tol: float = 1e-11) -> float:
    """E = -int chi psi'^2 dz with chi(z) = exp(int_0^z (c - f'(psi)))."""
    Z = pulse.z_max if Z is None else Z
    c = pulse.c

    def rhs(z, y):
        u, v = pulse.state(z)
        return np.array([c - m.df(u), math.exp(y[0]) * v * v])

    total = 0.0
    for end in (Z, -Z):
        tr = solve_ivp(rhs, [0.0, 0.0], [0.0, end], rel_tol=rel_tol, abs_tol=1e-14)
        total += abs(tr.y[-1, 1])
    return -total
