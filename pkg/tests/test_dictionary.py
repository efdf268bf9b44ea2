import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncsq.dictionary import (Family, achieved_rate, build_dictionary, codewords_per_section,
                             covariance_factor, dump_dictionary, load_dictionary, section_scales)
from ncsq.errors import ConfigInvalid, RateOverflow


def test_rate_bookkeeping_reference_values():
    L = codewords_per_section(5, 2, 4.8)
    assert L == 4096
    assert achieved_rate(5, 2, L) == 4.8
    assert codewords_per_section(5, 2, 7.0) == 185364
    assert codewords_per_section(5, 5, 1.0) == 2


def test_rate_is_smallest_sufficient():
    for R in np.arange(4.2, 7.01, 0.2):
        L = codewords_per_section(5, 2, R)
        assert achieved_rate(5, 2, L) >= R - 1e-12
        assert achieved_rate(5, 2, L - 1) < R


@settings(max_examples=100, deadline=None)
@given(N=st.integers(1, 8), M=st.integers(1, 4), L=st.integers(2, 5000))
def test_rate_round_trip_is_idempotent(N, M, L):
    assert codewords_per_section(N, M, achieved_rate(N, M, L)) == L


def test_rate_errors():
    with pytest.raises(ConfigInvalid):
        codewords_per_section(5, 2, 0.0)
    with pytest.raises(RateOverflow):
        codewords_per_section(5, 1, 30.0)


def test_section_scales():
    np.testing.assert_allclose(section_scales(2), [1.0, 0.70710678], rtol=1e-8)
    c = section_scales(4)
    assert c[0] == 1.0
    assert c[3] == pytest.approx(0.35355339, rel=1e-8)
    assert np.all(np.diff(c) < 0)


def test_covariance_factor_reproduces_target():
    rng = np.random.default_rng(3)
    G = rng.standard_normal((5, 5))
    Q = G @ G.T
    S = covariance_factor(Q)
    np.testing.assert_allclose(S @ S.T, Q, atol=1e-10)
    S0 = covariance_factor(np.diag([1.0, 0.0, -1e-14]))
    np.testing.assert_allclose(S0 @ S0.T, np.diag([1.0, 0.0, 0.0]), atol=1e-14)


def test_gr_sample_covariance_matches_target():
    rng = np.random.default_rng(4)
    G = rng.standard_normal((5, 5))
    Q = G @ G.T + np.eye(5)
    d = build_dictionary("GR", 5, 2, 50_000, Q, seed=11)
    emp = d.D @ d.D.T / d.D.shape[1]
    assert np.linalg.norm(emp - Q) / np.linalg.norm(Q) < 0.05


def test_gsr_section_covariance_ratio():
    Q = np.diag([4.0, 3.0, 2.0, 1.0, 0.5])
    d = build_dictionary(Family.GSR, 5, 2, 40_000, Q, seed=5)
    tr = [np.trace(d.section(m) @ d.section(m).T) / d.L for m in range(2)]
    assert tr[0] == pytest.approx(np.trace(Q), rel=0.03)
    assert tr[1] / tr[0] == pytest.approx(0.5, rel=0.03)


def test_iid_entry_variance():
    d = build_dictionary("IID", 5, 2, 20_000, 25.0, seed=1)
    assert np.var(d.D) == pytest.approx(25.0, rel=0.02)
    assert abs(np.mean(d.D)) < 0.1


def test_scale_multiplies_entries():
    Q = np.eye(5)
    for fam in ("IID", "GR", "GSR", "GR2", "GSR2"):
        shape = 25.0 if fam == "IID" else Q
        d1 = build_dictionary(fam, 5, 2, 16, shape, scale=1.0, seed=9)
        d2 = build_dictionary(fam, 5, 2, 16, shape, scale=2.0, seed=9)
        np.testing.assert_allclose(d2.D, 2.0 * d1.D, rtol=0, atol=0)


def test_seeded_determinism():
    a = build_dictionary("GSR", 5, 2, 64, np.eye(5), seed=42)
    b = build_dictionary("GSR", 5, 2, 64, np.eye(5), seed=42)
    c = build_dictionary("GSR", 5, 2, 64, np.eye(5), seed=43)
    np.testing.assert_array_equal(a.D, b.D)
    assert not np.array_equal(a.D, c.D)


def test_dictionary_is_read_only():
    d = build_dictionary("IID", 3, 1, 4, 1.0, seed=0)
    with pytest.raises(ValueError):
        d.D[0, 0] = 1.0


def test_bad_shape_input():
    with pytest.raises(ConfigInvalid):
        build_dictionary("GR", 5, 2, 8, np.eye(4))
    with pytest.raises(ConfigInvalid):
        build_dictionary("IID", 5, 2, 8, 1.0, scale=0.0)


def test_dump_load_round_trip(tmp_path):
    d = build_dictionary("GSR2", 5, 2, 32, np.eye(5), scale=3.0, seed=2 ** 63 + 5)
    path = tmp_path / "d.bin"
    dump_dictionary(d, path)
    assert path.stat().st_size == 44 + 8 * 5 * 64
    e = load_dictionary(path)
    np.testing.assert_array_equal(e.D, d.D)
    assert (e.M, e.L, e.family, e.scale, e.seed) == (2, 32, Family.GSR2, 3.0, 2 ** 63 + 5)
    # column-major payload: first N values are column 0
    raw = np.frombuffer(path.read_bytes()[44:52 + 32], dtype="<f8")
    np.testing.assert_array_equal(raw[:5], d.D[:, 0])


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a dictionary at all, clearly not one....")
    with pytest.raises(ConfigInvalid):
        load_dictionary(path)
    path.write_bytes(b"short")
    with pytest.raises(ConfigInvalid):
        load_dictionary(path)


def test_rate_property():
    d = build_dictionary("IID", 5, 2, 4096, 1.0, seed=0)
    assert d.rate == 4.8
    assert math.isclose(build_dictionary("IID", 5, 2, 185364, 1.0, seed=0).rate,
                        2 * math.log2(185364) / 5)
