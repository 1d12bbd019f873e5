import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from fadexp import expansions as ex
from fadexp import fading, mellin, reference
from fadexp.constellations import gaussian, inf_pam, inf_psk, inf_qam, make_psk, make_qam
from fadexp.errors import DomainError, UnsupportedError
from fadexp.expansions import Expansion, ExpansionRangeWarning, Regime, Term

R = fading.rayleigh(1 / math.sqrt(2))
RICE = fading.ricean(math.sqrt(0.9), 1 / (2 * math.sqrt(5)))
NAKA = fading.nakagami(0.5, 1.0)
QPSK, BPSK = make_psk(4), make_psk(2)


def db(x):
    return 10.0 ** (x / 10.0)


def quiet_eval(e, snr):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExpansionRangeWarning)
        return ex.evaluate(e, snr)


def rel_err(e, model, inp, snr):
    ref = reference.avg_mmse_quad(model, inp, snr).value
    return abs(quiet_eval(e, snr) - ref) / ref


def test_rayleigh_qpsk_leading_coefficient():
    e = ex.high_snr_avg_mmse_discrete(R, QPSK, 1)
    (t,) = e.terms
    assert t.snr_pow == -2.0 and t.log_pow == 0
    assert t.coeff == pytest.approx(4.0 * mellin.mellin_mmse_bpsk(1.0).value, rel=1e-12)
    assert e.error_order == 3.0


def test_rayleigh_qpsk_errors_shrink_with_terms():
    snr = db(30)
    errs = [rel_err(ex.high_snr_avg_mmse_discrete(R, QPSK, M), R, QPSK, snr) for M in (1, 2, 3, 4)]
    assert errs[0] < 5e-2
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-8


def test_error_scales_with_reported_order():
    # remainder of the M-term series shrinks like snr^-(error_order - leading)
    e = ex.high_snr_avg_mmse_discrete(R, QPSK, 2)
    lead = -e.terms[0].snr_pow
    r1 = rel_err(e, R, QPSK, db(30))
    r2 = rel_err(e, R, QPSK, db(40))
    assert math.log10(r1 / r2) == pytest.approx(e.error_order - lead, abs=0.15)


def test_nakagami_terms_use_shape_offsets():
    e = ex.high_snr_avg_mmse_discrete(fading.nakagami(2.5, 1.0), QPSK, 3)
    assert [t.snr_pow for t in e.terms] == [-3.5, -4.5, -5.5]
    assert rel_err(ex.high_snr_avg_mmse_discrete(NAKA, QPSK, 1), NAKA, QPSK, db(35)) < 5e-2


def test_mi_expansion_matches_oracle():
    e = ex.high_snr_avg_mi_discrete(R, QPSK, 4)
    assert e.constant == pytest.approx(math.log(4.0))
    snr = 1e3
    ref = reference.avg_mi_quad(R, QPSK, snr).value
    assert quiet_eval(e, snr) == pytest.approx(ref, rel=1e-10)
    assert e.error_order == ex.high_snr_avg_mmse_discrete(R, QPSK, 4).error_order - 1


@given(st.floats(1.5, 6.0))
def test_mi_expansion_derivative_is_mmse_expansion(log_snr):
    mm = ex.general_high_snr(E1_MODEL, QPSK, 3)
    mi = ex.mi_from_mmse(mm, math.log(4.0))
    s = 10 ** log_snr
    h = s * 1e-5
    slope = (quiet_eval(mi, s + h) - quiet_eval(mi, s - h)) / (2 * h)
    assert slope == pytest.approx(quiet_eval(mm, s), rel=1e-5)


# |h|^2 with density E1(t): f(t) = t E1(t), whose small-t series carries t ln t
def _e1_coeffs(n):
    rows = [(1.0, -1.0, 1), (1.0, -np.euler_gamma, 0)]
    for k in range(1, n):
        rows.append((k + 1.0, -((-1) ** k) / (k * math.factorial(k)), 0))
    return rows


E1_MODEL = fading.custom(_e1_coeffs(8), lambda t: t * special.exp1(t),
                         mellin=lambda z: special.gamma(z + 1) / (z + 1), second_moment=0.5, label="t*E1")


def test_custom_kernel_with_log_term():
    e = ex.general_high_snr(E1_MODEL, QPSK, 3)
    assert [(t.snr_pow, t.log_pow) for t in e.terms] == [(-2.0, 1), (-2.0, 0), (-3.0, 0), (-4.0, 0)]
    lead = e.terms[0]
    # -t ln t contributes +M[mmse;2] snr^-2 ln snr
    assert lead.coeff == pytest.approx(mellin.mellin_mmse(QPSK, 1.0).value, rel=1e-12)
    snr = db(35)
    errs = [rel_err(ex.general_high_snr(E1_MODEL, QPSK, M), E1_MODEL, QPSK, snr) for M in (1, 2, 3)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-6


def test_custom_mellin_callback_mass():
    assert fading.mellin_f(E1_MODEL, 0.0) == pytest.approx(1.0)


def test_exponentially_flat_kernel_gives_empty_expansion():
    q = fading.custom([], lambda t: np.exp(-1.0 / t - t), q_nonzero=True)
    e = ex.general_high_snr(q, QPSK, 3)
    assert e.terms == () and e.error_order == math.inf
    assert json_roundtrip(e) == e


def json_roundtrip(e):
    return Expansion.from_dict(e.to_json())


def test_vector_k1_matches_ricean():
    v = fading.vector(1, RICE.sigma, RICE.mu_abs)
    a = ex.high_snr_avg_mmse_discrete(v, QPSK, 4)
    b = ex.high_snr_avg_mmse_discrete(RICE, QPSK, 4)
    for s, t in zip(a.terms, b.terms):
        assert (s.snr_pow, s.log_pow) == (t.snr_pow, t.log_pow)
        assert s.coeff == pytest.approx(t.coeff, rel=1e-10)


def test_gaussian_input_rayleigh_series():
    e = ex.high_snr_avg_mmse_continuous(R, gaussian(), 2)
    got = {(t.snr_pow, t.log_pow): t.coeff for t in e.terms}
    assert got[(-1.0, 0)] == pytest.approx(1.0, rel=1e-9)
    assert got[(-2.0, 1)] == pytest.approx(-1.0, rel=1e-7)
    assert got[(-2.0, 0)] == pytest.approx(np.euler_gamma, rel=1e-6)
    assert e.error_order == 3.0


@pytest.mark.parametrize("model", [R, RICE, NAKA, fading.nakagami(2.5, 0.8), fading.vector(2, 0.6, 0.5)],
                         ids=lambda m: m.label)
def test_gaussian_input_series_converges(model):
    snr = db(30)
    exps = [ex.high_snr_avg_mmse_continuous(model, gaussian(), M) for M in (1, 2, 3)]
    errs = [rel_err(e, model, gaussian(), snr) for e in exps]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # over a decade of snr the relative remainder falls by snr^-(error_order - 1),
    # up to the log factor of a double pole
    drop = math.log10(errs[1] / rel_err(exps[1], model, gaussian(), 10 * snr))
    assert drop == pytest.approx(exps[1].error_order - 1.0, abs=0.2)


@pytest.mark.parametrize("inp,zeta", [(inf_psk(), 0.5), (inf_pam(), 0.5), (inf_qam(), 1.0)],
                         ids=["infpsk", "infpam", "infqam"])
def test_uniform_inputs_leading_term(inp, zeta):
    e = ex.high_snr_avg_mmse_continuous(R, inp, 4)
    (t,) = e.terms
    assert (t.coeff, t.snr_pow) == (pytest.approx(zeta), -1.0)
    assert rel_err(e, R, inp, db(40)) < 3e-2


def test_uniform_input_error_orders():
    assert ex.high_snr_avg_mmse_continuous(R, inf_psk()).error_order == 2.0
    assert ex.high_snr_avg_mmse_continuous(R, inf_pam()).error_order == 1.5
    assert ex.high_snr_avg_mmse_continuous(NAKA, inf_psk()).error_order == 1.5


def test_rayleigh_gaussian_low_snr_coefficients_exact():
    sigma = 0.9
    e = ex.low_snr_avg_mmse(fading.rayleigh(sigma), gaussian(), 5)
    for m, t in enumerate(e.terms):
        assert t.snr_pow == m
        assert t.coeff == pytest.approx((-1) ** m * math.factorial(m + 1) * (2 * sigma ** 2) ** (m + 1),
                                        rel=1e-12)


@pytest.mark.parametrize("model", [R, RICE, NAKA], ids=lambda m: m.label)
@pytest.mark.parametrize("inp", [BPSK, QPSK, gaussian()], ids=["bpsk", "qpsk", "gaussian"])
def test_low_snr_three_terms(model, inp):
    snr = db(-20)
    e = ex.low_snr_avg_mmse(model, inp, 3)
    assert e.error_order == 3.0
    assert rel_err(e, model, inp, snr) < 1e-2
    mi = ex.low_snr_avg_mi(model, inp, 3)
    assert [t.snr_pow for t in mi.terms] == [1.0, 2.0, 3.0]
    ref = reference.avg_mi_quad(model, inp, snr).value
    assert abs(quiet_eval(mi, snr) - ref) / ref < 1e-2


def test_low_snr_term_limits():
    with pytest.raises(DomainError):
        ex.low_snr_avg_mmse(R, QPSK, 7)
    with pytest.raises(DomainError):
        ex.high_snr_avg_mmse_discrete(R, QPSK, 0)


def test_regime_warnings():
    hi = ex.high_snr_avg_mmse_discrete(R, QPSK, 1)
    lo = ex.low_snr_avg_mmse(R, QPSK, 1)
    with pytest.warns(ExpansionRangeWarning):
        ex.evaluate(hi, 1.0)
    with pytest.warns(ExpansionRangeWarning):
        ex.evaluate(lo, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ex.evaluate(hi, 100.0)
        ex.evaluate(lo, 0.01)
    with pytest.raises(DomainError):
        ex.evaluate(hi, 0.0)


def test_expansion_validation_and_serialisation():
    with pytest.raises(DomainError):
        Expansion(0.0, [Term(1.0, -2.0), Term(1.0, -1.0)], Regime.HIGH, 3.0)
    with pytest.raises(DomainError):
        Expansion(0.0, [Term(1.0, 2.0), Term(1.0, 1.0)], Regime.LOW, 3.0)
    with pytest.raises(DomainError):
        Expansion(0.0, [Term(math.nan, -2.0)], Regime.HIGH, 3.0)
    e = ex.general_high_snr(E1_MODEL, QPSK, 3)
    back = json_roundtrip(e)
    assert back == e
    assert e.n_terms == 3
    t = e.truncate(1)
    assert t.n_terms == 1 and len(t.terms) == 2 and t.error_order == 3.0


def test_continuous_dispatch_errors():
    with pytest.raises(DomainError):
        ex.high_snr_avg_mmse_continuous(R, QPSK)
    with pytest.raises(DomainError):
        ex.high_snr_avg_mmse_discrete(R, gaussian())
    with pytest.raises(UnsupportedError):
        ex.high_snr_avg_mmse_continuous(E1_MODEL, gaussian())


def test_qam16_expansion_tracks_oracle():
    e = ex.high_snr_avg_mmse_discrete(R, make_qam(16), 3)
    assert rel_err(e, R, make_qam(16), db(40)) < 1e-2
