import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from fadexp import canonical, fading, reference
from fadexp.constellations import gaussian, inf_psk, make_psk, make_qam
from fadexp.errors import DomainError, UnsupportedError
from fadexp.reference import OracleMethod

R = fading.rayleigh(1 / math.sqrt(2))
QPSK = make_psk(4)


def rayleigh_gaussian_mmse(snr):
    # E[g / (1 + snr g)] with g ~ Exp(1)
    a = 1.0 / snr
    return a * (1.0 - a * math.exp(a) * special.exp1(a))


@pytest.mark.parametrize("snr", [0.1, 1.0, 10.0, 1000.0])
def test_gaussian_input_closed_forms(snr):
    res = reference.avg_mmse_quad(R, gaussian(), snr)
    assert res.method is OracleMethod.QUADRATURE
    assert res.value == pytest.approx(rayleigh_gaussian_mmse(snr), rel=1e-9)
    mi = reference.avg_mi_quad(R, gaussian(), snr).value
    a = 1.0 / snr
    assert mi == pytest.approx(math.exp(a) * special.exp1(a), rel=1e-9)


def test_exponential_integral_value_at_unit_snr():
    v = reference.avg_mmse_quad(R, gaussian(), 1.0).value
    assert v == pytest.approx(1 - math.e * special.exp1(1.0), abs=1e-12)


@pytest.mark.parametrize("snr", [0.5, 20.0])
def test_qpsk_average_against_scipy_gamma_density(snr):
    model = fading.nakagami(2.0, 1.3)
    pdf = lambda g: stats.gamma.pdf(g, 2.0, scale=1.3 / 2.0)  # noqa: E731
    ref, _ = integrate.quad(lambda g: g * pdf(g) * canonical.mmse(QPSK, snr * g), 0, 40,
                            limit=300, epsabs=1e-14, epsrel=1e-11)
    assert reference.avg_mmse_quad(model, QPSK, snr).value == pytest.approx(ref, rel=1e-8)


def test_mi_is_entropy_minus_gap():
    a = reference.avg_mi_quad(R, QPSK, 3.0).value
    b = reference.avg_mi_gap_quad(R, QPSK, 3.0).value
    assert a + b == pytest.approx(math.log(4.0), rel=1e-14)
    with pytest.raises(UnsupportedError):
        reference.avg_mi_quad(R, inf_psk(), 1.0)
    with pytest.raises(DomainError):
        reference.avg_mmse_quad(R, QPSK, -1.0)


@pytest.mark.parametrize("inp", [QPSK, gaussian()], ids=["qpsk", "gaussian"])
def test_immse(inp):
    assert reference.immse_check(R, inp, 1.0) < 1e-5


def test_sampler_moments():
    rng = np.random.default_rng(5)
    for model in (R, fading.ricean(1.0, 0.5), fading.nakagami(0.5, 2.0), fading.vector(3, 0.4, 0.7)):
        g = reference.sample_gain2(model, rng, 400_000)
        m = fading.second_moment(model)
        assert g.mean() == pytest.approx(m, rel=4 * g.std() / m / math.sqrt(g.size) + 1e-12)


@pytest.mark.parametrize("inp,snr", [(QPSK, 2.0), (make_qam(16), 30.0), (gaussian(), 5.0)],
                         ids=["qpsk", "16qam", "gaussian"])
def test_monte_carlo_agrees_with_quadrature(inp, snr):
    q = reference.avg_mmse_quad(R, inp, snr)
    mc = reference.avg_mmse_mc(R, inp, snr, n_samples=200_000, seed=11)
    assert mc.method is OracleMethod.MONTE_CARLO and mc.n_samples == 200_000
    assert abs(q.value - mc.value) <= 3 * (mc.est_abs_error + q.est_abs_error)
    qi = reference.avg_mi_quad(R, inp, snr)
    mi = reference.avg_mi_mc(R, inp, snr, n_samples=200_000, seed=11)
    assert abs(qi.value - mi.value) <= 3 * (mi.est_abs_error + qi.est_abs_error)


def test_monte_carlo_is_reproducible_across_thread_counts():
    a = reference.avg_mmse_mc(R, QPSK, 4.0, n_samples=150_000, seed=3, workers=1)
    b = reference.avg_mmse_mc(R, QPSK, 4.0, n_samples=150_000, seed=3, workers=3)
    c = reference.avg_mmse_mc(R, QPSK, 4.0, n_samples=150_000, seed=4, workers=1)
    assert a.value == b.value
    assert a.value != c.value


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("FADEXP_THREADS", "3")
    assert reference.worker_count() == 3
    monkeypatch.setenv("FADEXP_THREADS", "many")
    with pytest.raises(DomainError):
        reference.worker_count()
