"""Command-line front end: ``balwaves <subcommand> [model] [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .model import (
    BUILTIN_NAMES,
    ModelError,
    derive_constants,
    load_model,
    verify_hypotheses,
)
from .numerics.ode import IntegrationError
from .spectrum import (
    HomoclinicOperator,
    PeriodicOperator,
    floquet_spectrum,
    instability_report,
    linearize,
    pulse_unstable_eigenvalue,
)
from .waves import (
    compute_periodic_large,
    compute_periodic_small,
    compute_pulse,
    nondegeneracy_certificate,
    tail_slopes,
    write_profile_csv,
    zero_profile,
)

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2

# reference constants, (value, absolute tolerance)
GOLDENS = {
    "burgers-fisher": {
        "u_star": (-0.5, 1e-8),
        "I0": (0.6, 1e-8),
        "I1": (0.0857143, 1e-7),
        "L": (4.07339, 5e-5),
        "J": (0.69062, 5e-5),
        "c1": (1.0 / 7.0, 1e-7),
        "a0_bar": (2.0, 1e-8),
        "I0*J": (0.415237, 5e-5),
        "L*I1": (0.349148, 5e-5),
    },
    "buckley-leverett-logistic": {
        "u_star": (-0.5, 1e-8),
        "I0": (0.6, 1e-8),
        "I1": (0.353458, 5e-6),
        "L": (4.07339, 5e-5),
        "J": (1.62723, 5e-5),
        "c1": (0.589097, 1e-5),
        "a0_bar": (32.0, 1e-8),
        "I0*J": (0.976335, 5e-5),
        "L*I1": (1.43977, 5e-5),
    },
    "modified-gbf": {
        "u_star": (-0.72212, 5e-5),
        "I0": (0.979027, 5e-6),
        "I1": (-0.129571, 5e-6),
        "L": (5.02904, 5e-5),
        "J": (-1.27529, 5e-5),
        "c1": (-0.132347, 1e-5),
        "a0_bar": (-2.0, 1e-8),
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# -- deterministic output --------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(x, complex):
        return "[" + _fmt(x.real) + ", " + _fmt(x.imag) + "]"
    if isinstance(x, str):
        return json.dumps(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def to_json(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_fmt(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{to_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (complex, np.complexfloating)):
        return _fmt(complex(obj))
    return _fmt(obj)


def _meta(args, model, **params) -> dict:
    out = {"tool": "balwaves", "version": __version__, "command": args.command, "model": model.to_dict()}
    out["parameters"] = {"tol_ode": args.tol_ode, "tol_quad": args.tol_quad, **params}
    return out


def _write_json(args, name: str, payload: dict) -> Path:
    path = Path(args.out) / name
    text = to_json(payload) + "\n"
    path.write_text(text)
    if args.json:
        sys.stdout.write(text)
    return path


def _csv_header(meta: dict) -> dict:
    flat = {"tool": f"balwaves {meta['version']}", "command": meta["command"], "model": meta["model"]["name"]}
    for k, v in meta["parameters"].items():
        flat[k] = v
    return flat


def _say(args, text: str) -> None:
    if not args.json:
        print(text)


# -- validation -------------------------------------------------------------------


def _positive(name):
    def parse(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}") from None
        if not (math.isfinite(v) and v > 0):
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {s!r}")
        return v

    return parse


def _eps(s):
    v = _positive("--eps")(s)
    if v > 0.05:
        raise argparse.ArgumentTypeError(f"--eps must lie in (0, 0.05], got {s!r}")
    return v


def _count(name, minimum):
    def parse(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {s!r}") from None
        if v < minimum:
            raise argparse.ArgumentTypeError(f"{name} must be at least {minimum}")
        return v

    return parse


def _complex(s):
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {s!r}") from None


# -- shared pipeline pieces -------------------------------------------------------------


def _setup(args):
    selector = args.model_pos or args.model
    if not selector:
        raise UsageError("a model is required (builtin name or JSON file)")
    model = load_model(selector)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    consts = derive_constants(model, quad_tol=args.tol_quad)
    return model, consts


def _wave(args, model, consts):
    if args.family == "small":
        return compute_periodic_small(model, consts, args.eps, rel_tol=args.tol_ode), None
    pulse = compute_pulse(model, consts, refine=True, rel_tol=args.tol_ode, richardson=False)
    center = consts.c1 if getattr(args, "center", "c1") == "c1" else pulse.c
    return compute_periodic_large(model, consts, args.eps, pulse, rel_tol=args.tol_ode, center=center), pulse


# -- subcommands ---------------------------------------------------------------------


def cmd_analyze(args) -> int:
    model, consts = _setup(args)
    report = verify_hypotheses(model, quad_tol=args.tol_quad)
    payload = {
        "meta": _meta(args, model),
        "constants": consts.to_dict(),
        "products": {"I0*J": consts.I0 * consts.J, "L*I1": consts.L * consts.I1},
        "hypotheses": report.to_dict(),
        "all_hold": report.all_hold,
    }
    _write_json(args, "analyze.json", payload)
    _say(args, f"model {model.name}")
    for k, v in consts.to_dict().items():
        _say(args, f"  {k:22s} {v}")
    for k, v in report.verdicts.items():
        _say(args, f"  {k:4s} {v.status}")
    return EXIT_OK if report.all_hold else EXIT_VERDICT


def cmd_pulse(args) -> int:
    model, consts = _setup(args)
    pulse = compute_pulse(model, consts, refine=not args.no_refine, rel_tol=args.tol_ode)
    E = nondegeneracy_certificate(model, pulse)
    left, right = tail_slopes(pulse)
    meta = _meta(args, model, refine=not args.no_refine)
    summary = pulse.summary(model)
    summary.update(
        {
            "c_star": pulse.c,
            "c1": consts.c1,
            "gap": pulse.c - consts.c1,
            "kappa": consts.kappa,
            "E": E,
            "tail_slope_left": left,
            "tail_slope_right": right,
        }
    )
    write_profile_csv(pulse, Path(args.out) / "pulse.csv", n=args.points, header=_csv_header(meta))
    _write_json(args, "pulse.json", {"meta": meta, "pulse": summary})
    _say(args, f"c* = {pulse.c:.12g}  c1 = {consts.c1:.12g}  gap = {pulse.c - consts.c1:.3e}  E = {E:.6g}")
    return EXIT_OK


def cmd_orbit(args) -> int:
    model, consts = _setup(args)
    w, _ = _wave(args, model, consts)
    meta = _meta(args, model, family=args.family, eps=args.eps, center=getattr(args, "center", None))
    write_profile_csv(w, Path(args.out) / f"orbit_{args.family}.csv", n=args.points, header=_csv_header(meta))
    summary = w.summary(model)
    summary["section_roots"] = list(summary.get("section_roots", []))
    _write_json(args, f"orbit_{args.family}.json", {"meta": meta, "orbit": summary})
    _say(args, f"c = {w.c:.12g}  T = {w.period:.12g}  amplitude = {w.amplitude:.6g}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    model, consts = _setup(args)
    window = tuple(args.window)
    lam_bar = None
    if args.zero_profile:
        w = zero_profile(model, consts)
    else:
        w, pulse = _wave(args, model, consts)
        if args.family == "large":
            lam_bar = pulse_unstable_eigenvalue(linearize(model, pulse), float(model.dg(0.0))).value
            if args.window_default:
                r = 0.5 * lam_bar
                window = (lam_bar - r, lam_bar + r, -r, r)
    lc = linearize(model, w)
    fr = floquet_spectrum(lc, window, args.theta, args.modes, threads=args.threads)
    report = instability_report(model, w, fr, consts, lambda_bar=lam_bar)
    if args.zero_profile:
        g0 = float(model.dg(0.0))
        worst = 0.0
        for p in fr.points:
            k = (2 * math.pi * np.arange(-args.modes, args.modes + 1) + p.theta) / w.period
            worst = max(worst, float(np.min(np.abs(p.lam - (g0 - k * k)))))
        report["dispersion_max_error"] = worst
    meta = _meta(args, model, family="zero" if args.zero_profile else args.family, eps=args.eps,
                 window=list(window), theta=args.theta, modes=args.modes)
    with open(Path(args.out) / "spectrum.csv", "w", newline="") as fh:
        for k, v in _csv_header(meta).items():
            fh.write(f"# {k}: {v}\n")
        out = csv.writer(fh)
        out.writerow(["theta", "re_lambda", "im_lambda", "abs_D"])
        for row in fr.to_rows():
            out.writerow([format(x, ".17g") for x in row])
    _write_json(args, "spectrum.json", {"meta": meta, "report": report, "points": len(fr.points)})
    _say(args, f"verdict {fr.verdict}  max Re lambda = {fr.max_real_part:.10g}  points = {len(fr.points)}")
    return EXIT_OK


def cmd_evans(args) -> int:
    model, consts = _setup(args)
    samples = []
    extra = {}
    if args.family == "pulse":
        pulse = compute_pulse(model, consts, refine=True, rel_tol=args.tol_ode, richardson=False)
        lc = linearize(model, pulse)
        op = HomoclinicOperator(lc)
        for lam in args.lam:
            s = op.sample(lam)
            samples.append({"lambda": s.lam, "D": s.value, "normalization": s.normalization})
        if args.find_eigenvalue:
            pe = pulse_unstable_eigenvalue(lc, float(model.dg(0.0)), op=op)
            extra = {"lambda_bar": pe.value, "D_prime": pe.derivative, "sign_changes": pe.sign_changes,
                     "abs_D0": pe.D0, "scale": pe.scale}
    else:
        w, _ = _wave(args, model, consts)
        op = PeriodicOperator(linearize(model, w))
        for lam in args.lam:
            D = op.evans([lam], [args.theta_value])[0]
            samples.append({"lambda": complex(lam), "theta": args.theta_value, "D": complex(D)})
    meta = _meta(args, model, family=args.family)
    _write_json(args, "evans.json", {"meta": meta, "samples": samples, **extra})
    for s in samples:
        _say(args, f"lambda = {s['lambda']}  D = {s['D']}")
    if extra:
        _say(args, f"lambda_bar = {extra['lambda_bar']:.12g}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    model, consts = _setup(args)
    goldens = GOLDENS.get(model.name)
    if goldens is None:
        raise UsageError(f"no stored constants for model {model.name!r}; choose from {', '.join(GOLDENS)}")
    computed = consts.to_dict()
    computed["I0*J"] = consts.I0 * consts.J
    computed["L*I1"] = consts.L * consts.I1
    rows = {}
    for key, (ref, tol) in goldens.items():
        val = computed[key]
        rows[key] = {"computed": val, "reference": ref, "tolerance": tol, "pass": abs(val - ref) <= tol}
    report = verify_hypotheses(model, quad_tol=args.tol_quad)
    ok = all(r["pass"] for r in rows.values())
    payload = {
        "meta": _meta(args, model),
        "checks": rows,
        "hypotheses": report.to_dict(),
        "hopf_direction": consts.hopf_direction,
        "homoclinic_direction": consts.homoclinic_direction,
        "all_pass": ok,
    }
    _write_json(args, "reproduce.json", payload)
    for key, r in rows.items():
        _say(args, f"  {'PASS' if r['pass'] else 'FAIL'}  {key:8s} {r['computed']:.10g}  (ref {r['reference']:.10g} ± {r['tolerance']:.0e})")
    return EXIT_OK if ok and report.all_hold else EXIT_VERDICT


# -- argument parsing -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model_pos", nargs="?", metavar="MODEL", help=f"builtin ({', '.join(BUILTIN_NAMES)}) or model JSON path")
    common.add_argument("--model", help="same as the positional MODEL")
    common.add_argument("--out", default="balwaves-out", help="output directory (default: balwaves-out)")
    common.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    common.add_argument("--tol-ode", type=_positive("--tol-ode"), default=1e-11)
    common.add_argument("--tol-quad", type=_positive("--tol-quad"), default=1e-10)
    common.add_argument("--threads", type=_count("--threads", 1), default=1)

    p = _Parser(prog="balwaves", description="Traveling waves and spectral instability for u_t + f(u)_x = u_xx + g(u).")
    p.add_argument("--version", action="version", version=f"balwaves {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("analyze", parents=[common], help="hypotheses and derived constants")

    sp = sub.add_parser("pulse", parents=[common], help="traveling pulse and certificate")
    sp.add_argument("--no-refine", action="store_true", help="use c = c1 without shooting refinement")
    sp.add_argument("--points", type=_count("--points", 2), default=2001)

    def family_args(sp, pulse_ok=False):
        choices = ["small", "large"] + (["pulse"] if pulse_ok else [])
        sp.add_argument("--family", choices=choices, default="pulse" if pulse_ok else "small")
        sp.add_argument("--eps", type=_eps, default=0.005)
        sp.add_argument("--center", choices=["c1", "refined"], default="c1",
                        help="large family: offset speed from c1 or from the refined pulse speed")

    sp = sub.add_parser("orbit", parents=[common], help="periodic wave of either family")
    family_args(sp)
    sp.add_argument("--points", type=_count("--points", 2), default=2001)

    sp = sub.add_parser("spectrum", parents=[common], help="Floquet spectrum of a periodic wave")
    family_args(sp)
    sp.add_argument("--zero-profile", action="store_true", help="use the trivial wave (dispersion oracle)")
    sp.add_argument("--window", type=float, nargs=4, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"), default=None)
    sp.add_argument("--theta", type=_count("--theta", 1), default=64)
    sp.add_argument("--modes", type=_count("--modes", 8), default=32)

    sp = sub.add_parser("evans", parents=[common], help="evaluate Evans functions")
    family_args(sp, pulse_ok=True)
    sp.add_argument("--lambda", dest="lam", type=_complex, nargs="+", default=[0j])
    sp.add_argument("--theta-value", type=float, default=0.0)
    sp.add_argument("--find-eigenvalue", action="store_true", help="locate the unstable pulse eigenvalue")

    sub.add_parser("reproduce", parents=[common], help="compare constants with stored reference values")
    return p


COMMANDS = {
    "analyze": cmd_analyze,
    "pulse": cmd_pulse,
    "orbit": cmd_orbit,
    "spectrum": cmd_spectrum,
    "evans": cmd_evans,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "spectrum":
        args.window_default = args.window is None
        if args.window is None:
            args.window = [-0.5, 1.5, -1.0, 1.0]
        elif not (args.window[0] < args.window[1] and args.window[2] < args.window[3]):
            print("balwaves: error: --window needs RE_MIN < RE_MAX and IM_MIN < IM_MAX", file=sys.stderr)
            return EXIT_ERROR
    if args.command == "evans" and args.family != "pulse" and not -math.pi < args.theta_value <= math.pi:
        print("balwaves: error: --theta-value must lie in (-pi, pi]", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (ModelError, UsageError) as exc:
        print(f"balwaves: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ArithmeticError, IntegrationError, ValueError) as exc:
        print(f"balwaves: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
