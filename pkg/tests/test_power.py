import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudocast.power import (VARIANCE_FLOOR, DegenerateSourceError, GainVector, MetadataError,
                              NoiseEstimate, PacketMeta, allocate_gains, decode_meta, encode_meta,
                              mmse_decode, normalize_packet, scale)
from pseudocast.transform import Chunk

from oracles import optimizer_gains


def test_normalize_packet():
    x, m = normalize_packet([1, 2, 3])
    np.testing.assert_array_equal(x, [-1, 0, 1])
    assert m == 2
    x, m = normalize_packet([-1.0, 1.0])
    assert m == 0 and list(x) == [-1, 1]
    x, m = normalize_packet([7.5] * 5)
    assert m == 7.5 and not np.any(x)
    with pytest.raises(ValueError):
        normalize_packet([])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=200))
def test_normalize_packet_zero_mean(values):
    x, m = normalize_packet(values)
    assert abs(np.mean(x)) <= 1e-12 * max(1.0, np.max(np.abs(values)))
    np.testing.assert_allclose(x + m, values, rtol=1e-12, atol=1e-9)


def test_equal_variances_equal_gains():
    g = allocate_gains([3.0] * 5, [10] * 5, 0.5).gains
    assert np.ptp(g) == 0


def test_two_chunk_example():
    # (1, 0.5) is the closed form for lambda = (1, 16): per-chunk powers 1 and 4.
    # Those sum to 5 over the two chunks; averaged per sample the budget is 2.5.
    g = allocate_gains([1.0, 16.0], [100, 100], 2.5).gains
    np.testing.assert_allclose(g, [1.0, 0.5], rtol=1e-12)


def test_single_chunk_is_sqrt_p_over_lambda():
    g = allocate_gains([9.0], [50], 4.0).gains
    assert g[0] == pytest.approx(np.sqrt(4.0 / 9.0), rel=1e-15)


def test_degenerate_and_invalid():
    with pytest.raises(DegenerateSourceError):
        allocate_gains([0.0, 0.0], [4, 4], 1.0)
    with pytest.raises(ValueError):
        allocate_gains([1.0, -1.0], [4, 4], 1.0)
    with pytest.raises(ValueError):
        allocate_gains([1.0], [4], 0.0)


def test_variance_floor():
    g = allocate_gains([0.0, 1.0], [10, 10], 1.0).gains
    assert g[0] == pytest.approx(g[1] * (1.0 / VARIANCE_FLOOR) ** 0.25)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-3, 1e5), min_size=1, max_size=64),
       st.floats(0.01, 10), st.integers(1, 50))
def test_power_invariant(lams, power, n):
    lengths = [n + i % 3 for i in range(len(lams))]
    g = allocate_gains(lams, lengths, power).gains
    w = np.asarray(lengths) / np.sum(lengths)
    assert np.sum(g ** 2 * np.asarray(lams) * w) == pytest.approx(power, rel=1e-9)
    assert np.all(g > 0)


def test_matches_numerical_optimizer():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        lams = 10 ** rng.uniform(-1, 3, rng.integers(2, 9))
        g = allocate_gains(lams, [1] * lams.size, 1.0).gains
        ref = optimizer_gains(lams, 1.0, 1e-4 * np.min(g ** 2 * lams))
        worst = max(worst, np.max(np.abs(g - ref) / ref))
    assert worst < 1e-3


def test_scale_examples():
    x = np.random.default_rng(0).normal(size=200_000)
    c = [Chunk(0, x, 1.0)]
    np.testing.assert_array_equal(scale(c, GainVector(np.array([1.0]), 1.0)), x)
    assert np.var(scale(c, GainVector(np.array([2.0]), 4.0))) == pytest.approx(4 * np.var(x))
    a = Chunk(0, x, 1.0)
    b = Chunk(1, 4 * np.random.default_rng(1).normal(size=x.size), 16.0)
    gains = allocate_gains([1.0, 16.0], [x.size] * 2, 2.5)
    y = scale([a, b], gains)
    n = x.size
    assert np.mean(y[:n] ** 2) == pytest.approx(1.0, rel=0.02)
    assert np.mean(y[n:] ** 2) == pytest.approx(4.0, rel=0.02)
    assert np.mean(y ** 2) == pytest.approx(2.5, rel=0.02)
    with pytest.raises(ValueError):
        scale([a], gains)


def test_mmse_examples():
    g = GainVector(np.array([1.0]), 1.0)
    out = mmse_decode([2.0], g, [1.0], NoiseEstimate.from_sigma(1.0, 1.0))
    assert out[0].samples[0] == pytest.approx(1.0)
    zf = mmse_decode([3.0], GainVector(np.array([2.0]), 4.0), [1.0], NoiseEstimate.from_sigma(0.0))
    assert zf[0].samples[0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        mmse_decode(np.zeros(5), GainVector(np.ones(2), 1.0), [1.0, 1.0],
                    NoiseEstimate.from_sigma(1.0))


def test_mmse_monte_carlo_one_over_eleven():
    rng = np.random.default_rng(2)
    n = 1_000_000
    x = rng.standard_normal(n)
    gains = allocate_gains([1.0], [n], 10.0)
    y = scale([Chunk(0, x, 1.0)], gains) + rng.standard_normal(n)
    est = mmse_decode(y, gains, [1.0], NoiseEstimate.from_sigma(1.0, 10.0))[0].samples
    assert np.mean((est - x) ** 2) == pytest.approx(1 / 11, rel=0.02)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 100), st.floats(1e-3, 10), st.floats(1e-6, 10), st.integers(0, 1000))
def test_mmse_never_beyond_zero_forcing(lam, g, sigma, seed):
    y = np.random.default_rng(seed).normal(size=32)
    out = mmse_decode(y, GainVector(np.array([g]), 1.0), [lam], NoiseEstimate(sigma, 1.0))
    assert np.all(np.abs(out[0].samples) <= np.abs(y / g) * (1 + 1e-12))


def _meta(k=8, seed=0):
    rng = np.random.default_rng(seed)
    return PacketMeta(3, (4, 144, 176), rng.uniform(0, 1e4, k), rng.normal(0, 5, k), 117.3,
                      0.5, 64, chunk_pad=5, whiten_pad=7, payload_len=101376, carrier_pad=11)


def test_meta_round_trip_is_exact():
    m = _meta()
    assert decode_meta(encode_meta(m)) == m


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 64), st.integers(0, 1000))
def test_meta_round_trip_property(k, seed):
    m = _meta(k, seed)
    bits = encode_meta(m)
    assert decode_meta(bits) == m
    np.testing.assert_array_equal(encode_meta(decode_meta(bits)), bits)


def test_meta_flipped_bit_fails_crc():
    bits = encode_meta(_meta())
    for pos in (0, 77, bits.size - 1):
        bad = bits.copy()
        bad[pos] ^= 1
        with pytest.raises(MetadataError):
            decode_meta(bad)


def test_meta_needs_chunks():
    with pytest.raises(MetadataError):
        encode_meta(PacketMeta(0, (1, 1, 1), [], [], 0.0))


def test_noise_estimate():
    n = NoiseEstimate.from_sigma(0.05, 0.5)
    assert n.gamma == pytest.approx(10.0) and n.snr_db == pytest.approx(10.0)
    assert NoiseEstimate.from_sigma(0.0).gamma == np.inf
    with pytest.raises(ValueError):
        NoiseEstimate.from_sigma(-1.0)
