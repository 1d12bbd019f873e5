import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fadexp.constellations import (Kind, entropy, from_json, gaussian, inf_pam, inf_psk, inf_qam,
                                   make_discrete, make_pam, make_psk, make_qam, min_distance,
                                   parse_input, power)
from fadexp.errors import DomainError


@pytest.mark.parametrize("maker,m", [(make_psk, 2), (make_psk, 4), (make_psk, 8), (make_pam, 4),
                                      (make_pam, 8), (make_qam, 16), (make_qam, 64)])
def test_standard_families_have_unit_power(maker, m):
    c = maker(m)
    assert c.size == m
    assert power(c) == pytest.approx(1.0, abs=1e-14)
    assert entropy(c) == pytest.approx(math.log(m), abs=1e-14)


def test_qpsk_is_rotated_square():
    pts = make_psk(4).points
    np.testing.assert_allclose(np.abs(pts.real), 1 / math.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(np.abs(pts.imag), 1 / math.sqrt(2), atol=1e-15)
    key = lambda z: (round(z.real, 9), round(z.imag, 9))  # noqa: E731
    assert sorted(map(complex, pts), key=key) == pytest.approx(
        sorted(map(complex, make_qam(4).points), key=key))


def test_bpsk_is_real():
    assert np.all(make_psk(2).points.imag == 0.0)


def test_min_distances():
    assert min_distance(make_psk(2)) == pytest.approx(2.0)
    assert min_distance(make_pam(4)) == pytest.approx(2 / math.sqrt(5))
    assert min_distance(make_qam(16)) == pytest.approx(2 / math.sqrt(10))


def test_rejects_bad_inputs():
    with pytest.raises(DomainError):
        make_discrete([1.0])
    with pytest.raises(DomainError):
        make_discrete([1.0, 1.0])
    with pytest.raises(DomainError):
        make_discrete([1.0, -1.0], [0.5, 0.6])
    with pytest.raises(DomainError):
        make_discrete([1.0, -1.0], [1.0, 0.0])
    with pytest.raises(DomainError):
        make_qam(8)
    with pytest.raises(DomainError):
        make_psk(1)
    with pytest.raises(DomainError):
        gaussian().size


def test_nonuniform_entropy():
    c = make_discrete([1.0, -1.0, 2.0], [0.5, 0.25, 0.25])
    assert entropy(c) == pytest.approx(1.5 * math.log(2.0))


def test_continuous_kinds():
    for c, k in [(gaussian(), Kind.GAUSSIAN), (inf_psk(), Kind.INF_PSK),
                 (inf_pam(), Kind.INF_PAM), (inf_qam(), Kind.INF_QAM)]:
        assert c.kind is k and not c.is_discrete and power(c) == 1.0


def test_parse_input_names():
    assert parse_input("bpsk") == make_psk(2)
    assert parse_input("QPSK") == make_psk(4)
    assert parse_input("16qam") == make_qam(16)
    assert parse_input("8-pam") == make_pam(8)
    assert parse_input("inf-psk") == inf_psk()
    assert parse_input("gaussian") == gaussian()
    with pytest.raises(DomainError):
        parse_input("fancy")


def test_json_round_trip(tmp_path):
    doc = {"label": "tri", "points": [{"re": 1, "im": 0, "prob": 0.5},
                                      {"re": -1, "im": 0, "prob": 0.25},
                                      {"re": 0, "im": 1, "prob": 0.25}]}
    c = from_json(doc)
    path = tmp_path / "tri.json"
    path.write_text(json.dumps(doc))
    assert parse_input(str(path)) == c
    assert parse_input(json.dumps(doc)) == c
    with pytest.raises(DomainError):
        from_json({"points": [{"re": 1}]})


def test_hash_and_equality():
    assert hash(make_pam(4)) == hash(make_pam(4))
    assert make_pam(4) != make_pam(8)


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=2, max_size=8, unique=True),
       st.data())
def test_random_constellations(points, data):
    pts = np.array(points)
    gaps = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() < 1e-6:
        return
    w = np.array(data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(pts), max_size=len(pts))))
    c = make_discrete(pts, w / w.sum())
    assert 0 < entropy(c) <= math.log(len(pts)) + 1e-12
    assert power(c) == pytest.approx(float(np.dot(w / w.sum(), np.abs(pts) ** 2)))
    assert min_distance(c) == pytest.approx(gaps.min(), rel=1e-12)
