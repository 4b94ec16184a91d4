import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balwaves.model import (
    FAILS,
    HOLDS,
    GammaCurve,
    ModelError,
    NoBracketFound,
    NonPositiveGPrime0,
    OutOfRange,
    builtin,
    derive_constants,
    find_ustar,
    first_lyapunov,
    from_expressions,
    gamma,
    load_model,
    lyapunov_coefficient,
    melnikov_constants,
    saddle_eigenvalues,
    verify_hypotheses,
)

mp.mp.dps = 30

BF, BL, MG = "burgers-fisher", "buckley-leverett-logistic", "modified-gbf"


# -- independent oracles -------------------------------------------------------


def _bf_gamma(u):
    # 2 * int_u^1 s(1-s) ds = (1-u)^2 (1+2u) / 3
    return (1 - u) * mp.sqrt((1 + 2 * u) / 3)


def _mg_ustar():
    return mp.findroot(lambda u: mp.mpf(3) / 10 - u**2 / 2 + u**5 / 5, -0.7)


def _mg_gamma(u):
    return mp.sqrt(2 * (mp.mpf(3) / 10 - u**2 / 2 + u**5 / 5))


def _oracle_integrals(gam, dgam, df, us):
    i0 = mp.quad(gam, [us, 0, 1])
    i1 = mp.quad(lambda u: df(u) * gam(u), [us, 0, 1])
    arc = lambda u: mp.sqrt(1 + dgam(u) ** 2)  # noqa: E731
    return i0, i1, 2 * mp.quad(lambda u: df(u) * arc(u), [us, 0, 1]), 2 * mp.quad(arc, [us, 0, 1])


@pytest.fixture(scope="module")
def bf_oracle():
    # gamma'^2 = 3 u^2 / (1 + 2u), so 1 + gamma'^2 = (1 + 2u + 3u^2) / (1 + 2u)
    arc = lambda u: mp.sqrt((1 + 2 * u + 3 * u**2) / (1 + 2 * u))  # noqa: E731
    us = mp.mpf(-0.5)
    i0 = mp.quad(_bf_gamma, [us, 1])
    i1 = mp.quad(lambda u: u * _bf_gamma(u), [us, 1])
    j = 2 * mp.quad(lambda u: u * arc(u), [us, 0, 1])
    length = 2 * mp.quad(arc, [us, 0, 1])
    return float(i0), float(i1), float(j), float(length)


@pytest.fixture(scope="module")
def mg_oracle():
    us = _mg_ustar()
    # gamma^2 = 2 (1-u) R(u), so gamma' = -u (1+u+u^2) sqrt(1-u) / sqrt(2 R)
    R = lambda u: mp.mpf(3) / 10 * (1 + u) - (u**2 + u**3 + u**4) / 5  # noqa: E731
    dgam = lambda u: -u * (1 + u + u**2) * mp.sqrt(1 - u) / mp.sqrt(2 * R(u))  # noqa: E731
    vals = _oracle_integrals(_mg_gamma, dgam, lambda u: u**3 - u**2, us + mp.mpf("1e-25"))
    return float(us), *(float(v) for v in vals)


# -- find_ustar / gamma -----------------------------------------------------------


def test_ustar_examples():
    assert find_ustar(builtin(BF)) == pytest.approx(-0.5, abs=1e-12)
    assert find_ustar(builtin(BL)) == pytest.approx(-0.5, abs=1e-12)
    assert find_ustar(builtin(MG)) == pytest.approx(float(_mg_ustar()), abs=1e-12)


def test_ustar_far_left_bracket():
    # int_u^1 of 0.01 u (1-u) vanishes at the same u* for any positive scale
    m = from_expressions("slow", "0.5*u^2", "0.01*u*(1-u)")
    assert find_ustar(m) == pytest.approx(-0.5, abs=1e-10)


def test_ustar_no_bracket():
    # g > 0 on both sides of 0 means the integral never balances on the left
    m = from_expressions("nobracket", "0", "u^2*(1-u)")
    with pytest.raises(NoBracketFound):
        find_ustar(m)


def test_gamma_examples():
    m = builtin(BF)
    assert gamma(m, 0.0) == pytest.approx(math.sqrt(1 / 3), abs=1e-12)
    assert gamma(m, 1.0) == pytest.approx(0.0, abs=1e-6)
    assert gamma(m, -0.5) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(OutOfRange):
        gamma(m, 1.5)


@pytest.mark.parametrize("name", [BF, BL, MG])
def test_gamma_positive_inside_and_zero_at_ends(name):
    m = builtin(name)
    curve = GammaCurve(m, find_ustar(m))
    assert curve(curve.u_star) <= 1e-6 and curve(1.0) <= 1e-6
    inner = np.linspace(curve.u_star, 1.0, 202)[1:-1]
    assert np.all(curve(inner) > 0)


def test_gamma_matches_closed_form():
    curve = GammaCurve(builtin(BF), -0.5)
    for u in np.linspace(-0.49, 0.99, 25):
        assert curve(u) == pytest.approx(float(_bf_gamma(mp.mpf(u))), abs=1e-12)
        # slope from -g/gamma agrees with differentiating the closed form
        assert curve.slope(u) == pytest.approx(float(mp.diff(_bf_gamma, mp.mpf(u))), rel=1e-9, abs=1e-12)


# -- Melnikov integrals ---------------------------------------------------------------


def test_burgers_fisher_integrals_vs_oracle(bf_oracle):
    mel = melnikov_constants(builtin(BF))
    i0, i1, j, length = bf_oracle
    assert i0 == pytest.approx(0.6, abs=1e-14)
    assert i1 == pytest.approx(3 / 35, abs=1e-14)
    assert mel.I0 == pytest.approx(i0, abs=1e-8)
    assert mel.I1 == pytest.approx(i1, abs=1e-8)
    assert mel.J == pytest.approx(j, abs=1e-8)
    assert mel.L == pytest.approx(length, abs=1e-8)


def test_modified_gbf_integrals_vs_oracle(mg_oracle):
    us, i0, i1, j, length = mg_oracle
    m = builtin(MG)
    mel = melnikov_constants(m)
    assert find_ustar(m) == pytest.approx(us, abs=1e-12)
    assert mel.I0 == pytest.approx(i0, abs=1e-8)
    assert mel.I1 == pytest.approx(i1, abs=1e-8)
    assert mel.J == pytest.approx(j, abs=1e-7)
    assert mel.L == pytest.approx(length, abs=1e-7)


def test_buckley_leverett_reference_values():
    mel = melnikov_constants(builtin(BL))
    assert mel.I0 == pytest.approx(0.6, abs=1e-8)
    assert mel.I1 == pytest.approx(0.353458, abs=5e-6)
    assert mel.J == pytest.approx(1.62723, abs=5e-5)
    assert mel.L == pytest.approx(4.07339, abs=5e-5)


def test_shared_reaction_models_agree():
    a, b = derive_constants(builtin(BF)), derive_constants(builtin(BL))
    for key in ("u_star", "beta", "I0", "L"):
        assert getattr(a, key) == pytest.approx(getattr(b, key), abs=1e-9)
    ga, gb = GammaCurve(builtin(BF), a.u_star), GammaCurve(builtin(BL), b.u_star)
    for u in (-0.3, 0.0, 0.4, 0.9):
        assert ga(u) == pytest.approx(gb(u), abs=1e-9)


def test_c1_invariant_under_flux_shift():
    base = derive_constants(from_expressions("a", "0.5*u^2", "u*(1-u)"))
    shifted = derive_constants(from_expressions("b", "0.5*u^2 + 3.7", "u*(1-u)"))
    assert shifted.c1 == pytest.approx(base.c1, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.25, 2.0, 9.0])
def test_reaction_scaling(alpha):
    base = derive_constants(builtin(BF))
    k = derive_constants(from_expressions("scaled", "0.5*u^2", f"{alpha}*u*(1-u)"))
    r = math.sqrt(alpha)
    assert k.u_star == pytest.approx(base.u_star, abs=1e-10)
    assert k.beta == pytest.approx(alpha * base.beta, rel=1e-10)
    assert k.I0 == pytest.approx(r * base.I0, rel=1e-8)
    assert k.I1 == pytest.approx(r * base.I1, rel=1e-8)
    assert k.c1 == pytest.approx(base.c1, abs=1e-8)


# -- Lyapunov coefficient ---------------------------------------------------------------


@pytest.mark.parametrize("name, value", [(BF, 2.0), (BL, 32.0), (MG, -2.0)])
def test_lyapunov_examples(name, value):
    assert lyapunov_coefficient(builtin(name)) == pytest.approx(value, abs=1e-8)


def test_lyapunov_needs_positive_gprime():
    m = from_expressions("neg", "0.5*u^2", "-u*(1-u)")
    with pytest.raises(NonPositiveGPrime0):
        lyapunov_coefficient(m)


def test_first_lyapunov_textbook_example():
    # x' = -y - x^3, y' = x: a = (F_xxx)/16 = -6/16
    assert first_lyapunov({"xxx": -6.0}, {}, 1.0) == pytest.approx(-6 / 16)


small = st.floats(-3, 3)


@settings(max_examples=40, deadline=None)
@given(small, small, small, small, st.floats(0.2, 4.0))
def test_lyapunov_matches_closed_form(f2, f3, g2, g3, g1):
    # cubic f and g with the prescribed jets at 0; g(1) = 0 fixes the linear-to-cubic split
    lin = g1
    q, cub = g2 / 2, g3 / 6
    shift = lin + q + cub
    g_text = f"{lin}*u + {q}*u^2 + {cub}*u^3 - ({shift})*u^4"
    f_text = f"{f2 / 2}*u^2 + {f3 / 6}*u^3"
    m = from_expressions("poly", f_text, g_text)
    expected = f3 - f2 * g2 / math.sqrt(g1)
    assert lyapunov_coefficient(m) == pytest.approx(expected, abs=1e-10 * (1 + abs(expected)))


# -- derived constants -----------------------------------------------------------------


def test_burgers_fisher_constants():
    k = derive_constants(builtin(BF))
    assert k.c0 == 0.0
    assert k.c1 == pytest.approx(1 / 7, abs=1e-9)
    assert k.sigma0 == pytest.approx(6 / 7, abs=1e-9)
    assert k.T0 == pytest.approx(2 * math.pi)
    assert k.hopf_direction == "above_c0"
    assert k.homoclinic_direction == "below_c1"
    assert k.kappa == pytest.approx(0.6593961579789007, abs=1e-9)


def test_directions_other_models():
    assert derive_constants(builtin(BL)).homoclinic_direction == "above_c1"
    assert derive_constants(builtin(MG)).hopf_direction == "below_c0"


@pytest.mark.parametrize("name", [BF, BL, MG])
def test_constants_invariants(name):
    k = derive_constants(builtin(name))
    assert k.u_star < 0
    assert k.beta > 0 and k.I0 > 0 and k.T0 > 0 and k.kappa > 0
    assert (k.hopf_direction == "above_c0") == (k.a0_bar > 0)
    assert (k.homoclinic_direction == "below_c1") == (k.sigma0 > 0)
    assert json.loads(json.dumps(k.to_dict()))["c1"] == k.c1


def test_saddle_eigenvalues_closed_form():
    m = builtin(BF)
    c = 1 / 7
    l1, l2 = saddle_eigenvalues(m, c)
    a = 1 - c
    assert l1 == pytest.approx((a - math.sqrt(a * a + 4)) / 2, abs=1e-14)
    assert l2 == pytest.approx((a + math.sqrt(a * a + 4)) / 2, abs=1e-14)
    assert l1 < 0 < l2


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 5.0))
def test_i0_positive_for_scaled_logistic(alpha):
    m = from_expressions("s", "0.5*u^2", f"{alpha}*u*(1-u)")
    assert melnikov_constants(m).I0 > 0


# -- hypotheses -----------------------------------------------------------------------


@pytest.mark.parametrize("name", [BF, BL, MG])
def test_hypotheses_hold_for_builtins(name):
    rep = verify_hypotheses(builtin(name))
    assert rep.all_hold, rep.failed()
    for v in rep.verdicts.values():
        assert v.witness


def test_h5_witnesses():
    bf = verify_hypotheses(builtin(BF)).verdicts["H5"].witness
    assert bf["L*I1"] == pytest.approx(0.349148, abs=5e-6)
    bl = verify_hypotheses(builtin(BL)).verdicts["H5"].witness
    assert bl["I0*J"] == pytest.approx(0.976335, abs=5e-6)
    assert bl["L*I1"] == pytest.approx(1.43977, abs=5e-5)


def test_h4_counterexample():
    rep = verify_hypotheses(from_expressions("flat", "u^4/4", "u*(1-u)"))
    assert rep.verdicts["H4"].status == FAILS
    assert rep.verdicts["H4"].witness["a0_bar"] == 0.0
    assert rep.verdicts["H2"].status == HOLDS
    assert rep.failed() == ["H4"]


def test_h2_failure_is_a_verdict():
    rep = verify_hypotheses(from_expressions("wrongsign", "0.5*u^2", "-u*(1-u)"))
    assert rep.verdicts["H2"].status == FAILS
    assert not rep.all_hold


# -- model construction ----------------------------------------------------------------


def test_reaction_must_vanish_at_equilibria():
    with pytest.raises(ModelError):
        from_expressions("bad", "0.5*u^2", "u*(1-u) + 0.1")


def test_unparseable_model():
    with pytest.raises(ModelError):
        from_expressions("bad", "u*(", "u*(1-u)")


def test_unknown_builtin():
    with pytest.raises(ModelError):
        builtin("kdv")


def test_load_model_json(tmp_path):
    p = tmp_path / "bf.json"
    p.write_text(json.dumps({"name": "mine", "f": "0.5*u^2", "g": "u*(1-u)"}))
    m = load_model(p)
    assert m.name == "mine" and m.source == "parsed"
    assert derive_constants(m).c1 == pytest.approx(1 / 7, abs=1e-9)
    assert load_model(BF).source == "builtin"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(bad)
    with pytest.raises(ModelError):
        load_model(tmp_path / "missing.json")


def test_model_to_dict():
    d = builtin(BL).to_dict()
    assert d["f"] == "u^2/(u^2 + 0.5*(1-u)^2)"
    assert json.dumps(d)
