"""Balance-law models u_t + f(u)_x = u_xx + g(u) and their derived constants."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .expr import Expression
from .jet import DomainError, Jet3
from .numerics.quad import quad_adaptive
from .numerics.roots import find_root_bracketed

JetFn = Callable[[object], Jet3]


class ModelError(ValueError):
    """Invalid model definition (bad expression, g(0) or g(1) nonzero, ...)."""


class NoBracketFound(ArithmeticError):
    pass


class OutOfRange(ValueError):
    pass


class NonPositiveGPrime0(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    f: JetFn
    g: JetFn
    source: str = "builtin"
    f_text: str | None = None
    g_text: str | None = None

    def __post_init__(self):
        for u in (0.0, 1.0):
            try:
                value = float(self.g(u).v0)
            except DomainError as exc:
                raise ModelError(f"g is undefined at u={u:g}: {exc}") from None
            if not abs(value) <= 1e-12:
                raise ModelError(f"g({u:g}) = {value!r}, expected 0")

    # derivative shorthands; all accept floats or arrays
    def df(self, u):
        return self.f(u).v1

    def d2f(self, u):
        return self.f(u).v2

    def gv(self, u):
        return self.g(u).v0

    def dg(self, u):
        return self.g(u).v1

    def to_dict(self) -> dict:
        out = {"name": self.name, "source": self.source}
        if self.f_text is not None:
            out["f"] = self.f_text
            out["g"] = self.g_text
        return out


# -- builtin closed forms ----------------------------------------------------


def _bf_flux(u) -> Jet3:
    z = 0.0 * np.asarray(u, dtype=float)
    return Jet3(0.5 * u * u, u + z, 1.0 + z, z)


def _logistic(u) -> Jet3:
    z = 0.0 * np.asarray(u, dtype=float)
    return Jet3(u * (1.0 - u), 1.0 - 2.0 * u + z, -2.0 + z, z)


def _bl_flux(u) -> Jet3:
    d = 1.0 - 2.0 * u + 3.0 * u * u
    return Jet3(
        2.0 * u * u / d,
        4.0 * u * (1.0 - u) / d**2,
        4.0 * (1.0 - 9.0 * u**2 + 6.0 * u**3) / d**3,
        -24.0 * (-1.0 + 6.0 * u - 18.0 * u**3 + 9.0 * u**4) / d**4,
    )


def _mgbf_flux(u) -> Jet3:
    return Jet3(u**4 / 4.0 - u**3 / 3.0, u**3 - u**2, 3.0 * u**2 - 2.0 * u, 6.0 * u - 2.0)


def _mgbf_reaction(u) -> Jet3:
    z = 0.0 * np.asarray(u, dtype=float)
    return Jet3(u - u**4, 1.0 - 4.0 * u**3, -12.0 * u**2 + z, -24.0 * u + z)


BUILTIN_SOURCES = {
    "burgers-fisher": ("0.5*u^2", "u*(1-u)"),
    "buckley-leverett-logistic": ("u^2/(u^2 + 0.5*(1-u)^2)", "u*(1-u)"),
    "modified-gbf": ("u^4/4 - u^3/3", "u - u^4"),
}

_BUILTIN_FNS = {
    "burgers-fisher": (_bf_flux, _logistic),
    "buckley-leverett-logistic": (_bl_flux, _logistic),
    "modified-gbf": (_mgbf_flux, _mgbf_reaction),
}

BUILTIN_NAMES = tuple(_BUILTIN_FNS)


def builtin(name: str) -> ModelSpec:
    try:
        f, g = _BUILTIN_FNS[name]
    except KeyError:
        raise ModelError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
    f_text, g_text = BUILTIN_SOURCES[name]
    return ModelSpec(name, f, g, "builtin", f_text, g_text)


def from_expressions(name: str, f_text: str, g_text: str) -> ModelSpec:
    try:
        f = Expression(f_text)
        g = Expression(g_text)
    except SyntaxError as exc:
        raise ModelError(f"cannot parse model {name!r}: {exc}") from None
    return ModelSpec(name, f, g, "parsed", f_text, g_text)


def load_model(selector: str | Path) -> ModelSpec:
    """A builtin by name, or a JSON file ``{"name", "f", "g"}``."""
    if isinstance(selector, str) and selector in _BUILTIN_FNS:
        return builtin(selector)
    path = Path(selector)
    if not path.is_file():
        raise ModelError(f"{selector!r} is neither a builtin model nor a readable file")
    try:
        data = json.loads(path.read_text())
        return from_expressions(str(data.get("name", path.stem)), str(data["f"]), str(data["g"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ModelError(f"malformed model file {path}: {exc}") from None


# -- integrals of g ----------------------------------------------------------


def _integral_g(m: ModelSpec, a: float, b: float, tol: float) -> float:
    if a == b:
        return 0.0
    if a > b:
        return -_integral_g(m, b, a, tol)
    return quad_adaptive(m.gv, a, b, tol=tol, strict=False).value


def find_ustar(m: ModelSpec, tol: float = 1e-13, quad_tol: float = 1e-14) -> float:
    """The unique u* < 0 with the integral of g over [u*, 1] equal to zero."""
    beta = _integral_g(m, 0.0, 1.0, quad_tol)

    def excess(u):
        return _integral_g(m, 0.0, u, quad_tol) - beta

    hi = -1e-3
    if excess(hi) > 0:
        raise NoBracketFound("integral of g already exceeds beta next to u=0")
    lo = -1.0
    while excess(lo) <= 0:
        hi = lo
        lo *= 2.0
        if lo < -1e6:
            raise NoBracketFound("no u* found in [-1e6, 0)")
    return find_root_bracketed(excess, lo, hi, tol=tol)


@dataclass(frozen=True, eq=False)
class GammaCurve:
    """gamma(u) = sqrt(2 * int_u^1 g) on (u*, 1) together with gamma' = -g/gamma."""

    model: ModelSpec
    u_star: float
    quad_tol: float = 1e-14

    def _tail(self, u: float) -> float:
        # integrate from the nearer endpoint; both integrals agree since int_{u*}^1 g = 0
        if u - self.u_star < 1.0 - u:
            return -_integral_g(self.model, self.u_star, u, self.quad_tol)
        return _integral_g(self.model, u, 1.0, self.quad_tol)

    def value(self, u: float) -> float:
        slack = 1e-12 * (1.0 - self.u_star)
        if not self.u_star - slack <= u <= 1.0 + slack:
            raise OutOfRange(f"u={u!r} outside [{self.u_star}, 1]")
        u = min(max(u, self.u_star), 1.0)
        return math.sqrt(max(2.0 * self._tail(u), 0.0))

    def __call__(self, u):
        if np.ndim(u) == 0:
            return self.value(float(u))
        return np.array([self.value(float(x)) for x in np.ravel(u)]).reshape(np.shape(u))

    def slope(self, u):
        """gamma'(u) = -g(u) / gamma(u), evaluated in closed form."""
        return -np.asarray(self.model.gv(u), dtype=float) / self(u)


def gamma(m: ModelSpec, u: float, u_star: float | None = None) -> float:
    return GammaCurve(m, find_ustar(m) if u_star is None else u_star)(u)


@dataclass(frozen=True)
class MelnikovIntegrals:
    I0: float
    I1: float
    J: float
    L: float


def melnikov_constants(m: ModelSpec, u_star: float | None = None, tol: float = 1e-10) -> MelnikovIntegrals:
    us = find_ustar(m) if u_star is None else u_star
    gam = GammaCurve(m, us)

    def arc(u):
        return np.sqrt(1.0 + gam.slope(u) ** 2)

    i0 = quad_adaptive(gam, us, 1.0, tol=tol, strict=False).value
    i1 = quad_adaptive(lambda u: m.df(u) * gam(u), us, 1.0, tol=tol, strict=False).value
    j = 2.0 * quad_adaptive(lambda u: m.df(u) * arc(u), us, 1.0, tol=tol, singular="both", strict=False).value
    length = 2.0 * quad_adaptive(arc, us, 1.0, tol=tol, singular="both", strict=False).value
    return MelnikovIntegrals(i0, i1, j, length)


def first_lyapunov(fx: dict, gx: dict, omega: float) -> float:
    """First Lyapunov coefficient of x' = -w y + F, y' = w x + G.

    ``fx`` and ``gx`` map partial-derivative labels ("xx", "xy", "yy",
    "xxx", "xxy", "xyy", "yyy") to their values at the origin.
    """
    F = lambda k: fx.get(k, 0.0)  # noqa: E731
    G = lambda k: gx.get(k, 0.0)  # noqa: E731
    cubic = F("xxx") + F("xyy") + G("xxy") + G("yyy")
    quad = (
        F("xy") * (F("xx") + F("yy"))
        - G("xy") * (G("xx") + G("yy"))
        - F("xx") * G("xx")
        + F("yy") * G("yy")
    )
    return (cubic + quad / omega) / 16.0


def lyapunov_coefficient(m: ModelSpec) -> float:
    """Genericity coefficient a0_bar = f'''(0) - f''(0) g''(0) / sqrt(g'(0)).

    16 times ``first_lyapunov`` applied directly to the profile field in
    (U, V) at c = f'(0): F = V, G = (f'(U) - f'(0)) V - g(U) and
    omega = -sqrt(g'(0)).  Its sign picks the side of c0 on which the small
    orbits appear.
    """
    fj = m.f(0.0)
    gj = m.g(0.0)
    if not float(gj.v1) > 0:
        raise NonPositiveGPrime0(f"g'(0) = {gj.v1!r} must be positive")
    w = -math.sqrt(float(gj.v1))
    gx = {"xx": -gj.v2, "xxx": -gj.v3, "xy": fj.v2, "xxy": fj.v3}
    return float(16.0 * first_lyapunov({}, gx, w))


def saddle_eigenvalues(m: ModelSpec, c: float) -> tuple[float, float]:
    """(lambda_1, lambda_2), negative and positive eigenvalue of P1 = (1, 0)."""
    a = float(m.df(1.0)) - c
    d = math.sqrt(a * a - 4.0 * float(m.dg(1.0)))
    return 0.5 * (a - d), 0.5 * (a + d)


@dataclass(frozen=True)
class ModelConstants:
    u_star: float
    beta: float
    I0: float
    I1: float
    J: float
    L: float
    c0: float
    c1: float
    a0_bar: float
    sigma0: float
    T0: float
    kappa: float
    lambda1: float
    lambda2: float
    hopf_direction: str
    homoclinic_direction: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def derive_constants(m: ModelSpec, quad_tol: float = 1e-10) -> ModelConstants:
    us = find_ustar(m)
    beta = _integral_g(m, 0.0, 1.0, 1e-14)
    mel = melnikov_constants(m, us, tol=quad_tol)
    c1 = mel.I1 / mel.I0
    a0 = lyapunov_coefficient(m)
    lam1, lam2 = saddle_eigenvalues(m, c1)
    fp1 = float(m.df(1.0))
    return ModelConstants(
        u_star=us,
        beta=beta,
        I0=mel.I0,
        I1=mel.I1,
        J=mel.J,
        L=mel.L,
        c0=float(m.df(0.0)),
        c1=c1,
        a0_bar=a0,
        sigma0=fp1 - c1,
        T0=2.0 * math.pi / math.sqrt(float(m.dg(0.0))),
        kappa=min(lam2, -lam1),
        lambda1=lam1,
        lambda2=lam2,
        hopf_direction="above_c0" if a0 > 0 else "below_c0",
        homoclinic_direction="below_c1" if fp1 > c1 else "above_c1",
    )


# -- hypotheses --------------------------------------------------------------

HOLDS, FAILS, INDETERMINATE = "holds", "fails", "numerically_indeterminate"


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: dict
    note: str = ""


@dataclass
class HypothesisReport:
    verdicts: dict[str, Verdict] = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return all(v.status == HOLDS for v in self.verdicts.values())

    def failed(self) -> list[str]:
        return [k for k, v in self.verdicts.items() if v.status != HOLDS]

    def to_dict(self) -> dict:
        return {k: {"status": v.status, "witness": v.witness, "note": v.note} for k, v in self.verdicts.items()}


def verify_hypotheses(m: ModelSpec, quad_tol: float = 1e-10) -> HypothesisReport:
    rep = HypothesisReport()
    rep.verdicts["H1"] = Verdict(HOLDS, {"f": m.f_text}, "smooth by construction away from domain errors")

    inner = np.linspace(0.0, 1.0, 10002)[1:-1]
    left = np.linspace(-10.0, 0.0, 10001)[:-1]
    try:
        g_in = np.asarray(m.gv(inner), dtype=float)
        g_left = np.asarray(m.gv(left), dtype=float)
        dg0, dg1 = float(m.dg(0.0)), float(m.dg(1.0))
        w = {
            "min_g_on_(0,1)": float(g_in.min()),
            "max_g_on_(-10,0)": float(g_left.max()),
            "g'(0)": dg0,
            "g'(1)": dg1,
        }
        ok = g_in.min() > 0 and g_left.max() < 0 and dg0 > 0 and dg1 < 0
        rep.verdicts["H2"] = Verdict(HOLDS if ok else FAILS, w, "sign of g not checked for u > 1")
    except DomainError as exc:
        rep.verdicts["H2"] = Verdict(FAILS, {"domain_error": str(exc)})
        return rep

    try:
        us = find_ustar(m)
        rep.verdicts["H3"] = Verdict(HOLDS, {"u_star": us})
    except (NoBracketFound, DomainError) as exc:
        rep.verdicts["H3"] = Verdict(FAILS, {"error": str(exc)})
        return rep

    try:
        a0 = lyapunov_coefficient(m)
        rep.verdicts["H4"] = Verdict(HOLDS if abs(a0) > 1e-8 else FAILS, {"a0_bar": a0})
    except NonPositiveGPrime0 as exc:
        rep.verdicts["H4"] = Verdict(FAILS, {"error": str(exc)})

    mel = melnikov_constants(m, us, tol=quad_tol)
    lhs, rhs = mel.I0 * mel.J, mel.L * mel.I1
    ok5 = abs(lhs - rhs) > 1e-6 * (abs(lhs) + abs(rhs))
    rep.verdicts["H5"] = Verdict(HOLDS if ok5 else FAILS, {"I0*J": lhs, "L*I1": rhs, "gap": abs(lhs - rhs)})

    c1 = mel.I1 / mel.I0
    gap6 = abs(float(m.df(1.0)) - c1)
    rep.verdicts["H6"] = Verdict(HOLDS if gap6 > 1e-8 else FAILS, {"f'(1)": float(m.df(1.0)), "c1": c1, "gap": gap6})
    return rep
