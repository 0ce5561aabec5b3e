import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudocast.channel import ChannelParams
from pseudocast.digital.chain import (DigitalMeta, DigitalOptions, clean_psnr,
                                      decode_digital_meta, encode_digital,
                                      encode_digital_meta, run_digital_chain)
from pseudocast.digital.fec import CODE, conv_encode, viterbi_decode
from pseudocast.digital.qam import constellation, qam16_demap, qam16_map
from pseudocast.digital.quant import dequantize, quantize
from pseudocast.link import analog_iq_length
from pseudocast.power import MetadataError
from pseudocast.source import compute_psnr, split_gops
from pseudocast.synthetic import synthetic_sequence

# --- quantizer ---


def test_midpoint_within_half_step():
    lo, hi = -3.0, 5.0
    back = dequantize(quantize([1.0], 8, (lo, hi)), 8, (lo, hi))
    assert abs(back[0] - 1.0) <= (hi - lo) / 2 ** 9


def test_clamping():
    bits = quantize([-10.0, 10.0], 4, (0.0, 1.0))
    np.testing.assert_array_equal(bits, [0, 0, 0, 0, 1, 1, 1, 1])
    np.testing.assert_allclose(dequantize(bits, 4, (0.0, 1.0)), [1 / 32, 31 / 32])


def test_quantization_noise_model():
    x = np.random.default_rng(0).normal(size=200_000)
    rng_ = (x.min(), x.max())
    step = (rng_[1] - rng_[0]) / 2 ** 12
    mse = np.mean((dequantize(quantize(x, 12, rng_), 12, rng_) - x) ** 2)
    assert mse <= step ** 2 / 12 * 1.01


@pytest.mark.parametrize("b, r", [(1, (0, 1)), (17, (0, 1)), (8, (1.0, 1.0)), (8, (2.0, 1.0))])
def test_quantizer_rejects(b, r):
    with pytest.raises(ValueError):
        quantize([0.5], b, r)


# --- convolutional code ---


def test_code_shape():
    assert CODE.rate == pytest.approx(1 / 3) and CODE.tail_bits == 6
    assert conv_encode(np.ones(10)).size == CODE.coded_length(10) == 48


def test_all_zero():
    assert not conv_encode(np.zeros(50, np.uint8)).any()
    assert not viterbi_decode(np.zeros(168)).any()


def test_impulse_response_is_generators():
    out = conv_encode([1]).reshape(-1, 3)
    for j, g in enumerate((0o133, 0o171, 0o165)):
        assert int("".join(map(str, out[:, j])), 2) == g


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=400))
def test_noiseless_round_trip(bits):
    np.testing.assert_array_equal(viterbi_decode(conv_encode(bits)), bits)
    soft = 1.0 - 2.0 * conv_encode(bits)
    np.testing.assert_array_equal(viterbi_decode(soft, soft=True), bits)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 300), st.integers(0, 2 ** 32 - 1))
def test_linearity(n, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.integers(0, 2, (2, n))
    np.testing.assert_array_equal(conv_encode(x ^ y), conv_encode(x) ^ conv_encode(y))


def test_every_two_flips_in_300_bits_corrected():
    info = np.random.default_rng(1).integers(0, 2, 94)
    cw = conv_encode(info)
    assert cw.size == 300
    pairs = np.array(list(itertools.combinations(range(300), 2)))
    for block in np.array_split(pairs, 10):
        rx = np.tile(cw, (len(block), 1))
        rows = np.arange(len(block))
        rx[rows, block[:, 0]] ^= 1
        rx[rows, block[:, 1]] ^= 1
        assert (viterbi_decode(rx) == info).all()


def test_viterbi_rejects_bad_length():
    with pytest.raises(ValueError):
        viterbi_decode(np.zeros(10))


# --- 16-QAM ---

# hand-written Gray table: label b0b1b2b3 -> (I, Q) before scaling
GRAY_TABLE = {
    "0000": (-3, -3), "0001": (-3, -1), "0011": (-3, 1), "0010": (-3, 3),
    "0100": (-1, -3), "0101": (-1, -1), "0111": (-1, 1), "0110": (-1, 3),
    "1100": (1, -3), "1101": (1, -1), "1111": (1, 1), "1110": (1, 3),
    "1000": (3, -3), "1001": (3, -1), "1011": (3, 1), "1010": (3, 3),
}


def test_matches_gray_table():
    for label, (i, q) in GRAY_TABLE.items():
        s = qam16_map([int(c) for c in label])[0]
        assert s == pytest.approx((i + 1j * q) / np.sqrt(10), abs=1e-15)
    assert qam16_map([0, 0, 0, 0])[0] == pytest.approx((-3 - 3j) / np.sqrt(10))


def test_unit_energy_and_gray_adjacency():
    pts = constellation()
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-15)
    d_min = 2 / np.sqrt(10)
    for a, b in itertools.combinations(range(16), 2):
        if abs(abs(pts[a] - pts[b]) - d_min) < 1e-9:
            assert bin(a ^ b).count("1") == 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=400).filter(lambda b: len(b) % 4 == 0))
def test_map_demap_identity(bits):
    np.testing.assert_array_equal(qam16_demap(qam16_map(bits)), bits)


def test_map_pads_to_multiple_of_four():
    assert qam16_map([1]).size == 1
    np.testing.assert_array_equal(qam16_demap(qam16_map([1])), [1, 0, 0, 0])


def test_demap_is_minimum_distance():
    rng = np.random.default_rng(3)
    z = rng.normal(size=2000) + 1j * rng.normal(size=2000)
    pts = constellation()
    nearest = np.argmin(np.abs(z[:, None] - pts[None, :]), axis=1)
    labels = ((nearest[:, None] >> np.arange(3, -1, -1)) & 1).ravel()
    np.testing.assert_array_equal(qam16_demap(z), labels)


def test_encoder_decoder_chain_noiseless():
    bits = np.random.default_rng(4).integers(0, 2, 4096)
    coded = conv_encode(bits)
    np.testing.assert_array_equal(viterbi_decode(qam16_demap(qam16_map(coded))[:coded.size]),
                                  bits)


# --- chain ---


@pytest.fixture(scope="module")
def gops():
    return split_gops(synthetic_sequence(300), 4)


def test_meta_round_trip_and_crc():
    m = DigitalMeta(3, (4, 144, 176), 7, 64, (0, 5, 2), ((-1, 1), (-2, 2.5), (0, 3)), 9000,
                    4096, 50000, 101.5)
    bits = encode_digital_meta(m)
    assert decode_digital_meta(bits) == m
    bits[40] ^= 1
    with pytest.raises(MetadataError):
        decode_digital_meta(bits)


def test_bandwidth_parity(gops):
    tx = encode_digital(gops[0])
    analog = analog_iq_length(gops[0].to_array().shape)
    assert abs(tx.meta.iq_length - analog) <= 0.05 * analog
    assert 2 <= tx.meta.bits_per_coeff <= 16


def test_noiseless_ten_bits_over_40db(gops):
    opts = DigitalOptions(bits_per_coeff=10, bandwidth_parity=False)
    for g in gops[:4]:
        out, row = run_digital_chain(g, ChannelParams(), opts)
        assert row["ber"] == 0.0
        assert np.mean([compute_psnr(a, b).psnr_db for a, b in zip(g.frames, out.frames)]) >= 40


def _mean_psnr(gop, out):
    clamp = [type(f)(np.clip(f.pixels, 0, 255)) for f in out.frames]
    return np.mean([compute_psnr(a, b).psnr_db for a, b in zip(gop.frames, clamp)])


def _sweep(gops, snrs):
    res = {}
    for snr in snrs:
        rows = [run_digital_chain(g, ChannelParams(snr, seed=i))
                for i, g in enumerate(gops)]
        res[snr] = (np.mean([_mean_psnr(g, out) for g, (out, _) in zip(gops, rows)]),
                    max(r["ber"] for _, r in rows))
    return res


def test_cliff_collapse(gops):
    subset = gops[:4]
    snrs = np.arange(0.0, 20.1, 2.5)
    res = _sweep(subset, snrs)
    cliff = min(s for s in snrs if all(res[t][1] == 0 for t in snrs if t >= s))
    clean = np.mean([clean_psnr(g) for g in subset])
    below = cliff - 5.0
    assert below in res, "cliff too close to the bottom of the sweep"
    assert clean - res[below][0] >= 10.0


@pytest.mark.slow
def test_no_errors_far_above_cliff(gops):
    # the cliff sits near 7.5 dB on this source; 20 dB leaves a margin above 10 dB
    for i, g in enumerate(gops):
        _, row = run_digital_chain(g, ChannelParams(20.0, seed=1000 + i))
        assert row["ber"] == 0.0 and not row["lost"]
