import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pseudocast.ofdm import (IqPayload, OfdmConfig, allocate_carriers, build_preamble, clip,
                             map_iq, modulate, papr_db, read_iq, symbols_needed, unmap_iq,
                             write_iq)

CFG = OfdmConfig()


def test_default_numerology():
    assert (CFG.fft_size, CFG.cp_len, CFG.n_data, len(CFG.pilot_carriers)) == (64, 16, 48, 4)
    assert set(CFG.pilot_carriers) == {-21, -7, 7, 21}
    assert CFG.subcarrier_spacing == 312_500.0


@pytest.mark.parametrize("kwargs", [
    dict(pilot_carriers=(-21, -7, 7, 1)),          # overlaps a data carrier
    dict(data_carriers=(0, 1, 2)),                 # DC
    dict(data_carriers=tuple(range(1, 33))),       # guard band
    dict(pilot_values=(1.0, 1.0)),
    dict(cp_len=0),
])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        OfdmConfig(**kwargs)


def test_map_iq_examples():
    p = map_iq([0.5, -0.25])
    assert p.symbols[0] == 0.5 - 0.25j and not p.padded
    assert map_iq([]).symbols.size == 0
    p = map_iq([1, 2, 3])
    np.testing.assert_array_equal(p.symbols, [1 + 2j, 3 + 0j])
    assert p.padded and p.real_length == 3
    np.testing.assert_array_equal(unmap_iq(p), [1, 2, 3])
    assert not np.any(unmap_iq(map_iq(np.zeros(6))))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(0, 500), elements=st.floats(-1e6, 1e6)))
def test_iq_round_trip_bit_exact(x):
    p = map_iq(x)
    assert p.symbols.size == -(-x.size // 2)
    np.testing.assert_array_equal(unmap_iq(p), x)


def test_preamble_structure():
    pre = build_preamble(CFG)
    assert pre.size == 160 + 160 == CFG.preamble_len
    sts = pre[:160]
    num = np.abs(np.sum(np.conj(sts[:-16]) * sts[16:]))
    den = np.sum(np.abs(sts[16:]) ** 2)
    assert num / den == pytest.approx(1.0, abs=1e-9)
    lts = pre[160:]
    np.testing.assert_array_equal(lts[32:96], lts[96:])
    np.testing.assert_array_equal(lts[:32], lts[-32:])


def test_allocation_symbol_counts():
    one = allocate_carriers(IqPayload(np.ones(48)), np.zeros(0, np.uint8), CFG)
    assert one.shape == (1, 64)
    two = allocate_carriers(IqPayload(np.ones(49)), np.zeros(0, np.uint8), CFG)
    assert two.shape == (2, 64)
    assert np.sum(two[1, CFG.data_bins] == 0) == 47
    assert symbols_needed(49, CFG) == 2


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 400), st.integers(0, 300), st.integers(0, 1000))
def test_pilots_fixed_and_unused_zero(n_pay, n_bits, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=n_pay) + 1j * rng.normal(size=n_pay)
    bits = rng.integers(0, 2, n_bits).astype(np.uint8)
    grid = allocate_carriers(IqPayload(vals), bits, CFG)
    if grid.shape[0]:
        np.testing.assert_array_equal(grid[:, CFG.pilot_bins], np.broadcast_to(CFG.pilots,
                                                                               (grid.shape[0], 4)))
        unused = np.setdiff1d(np.arange(64), CFG.used_bins)
        assert not np.any(grid[:, unused])
    n_head = symbols_needed(n_bits, CFG)
    np.testing.assert_array_equal(grid[:n_head, CFG.data_bins].ravel()[:n_bits], 1 - 2.0 * bits)
    np.testing.assert_array_equal(grid[n_head:, CFG.data_bins].ravel()[:n_pay], vals)


def test_modulate_impulse_is_exponential():
    k = 5
    freq = np.zeros((1, 64), complex)
    freq[0, k] = 1.0
    body = modulate(freq, CFG).samples[CFG.preamble_len + 16:]
    n = np.arange(64)
    np.testing.assert_allclose(body, np.exp(2j * np.pi * k * n / 64) / 8, atol=1e-9)


def test_cyclic_prefix_and_parseval():
    rng = np.random.default_rng(0)
    freq = rng.normal(size=(3, 64)) + 1j * rng.normal(size=(3, 64))
    frame = modulate(freq, CFG, n_header=1)
    body = frame.samples[CFG.preamble_len:].reshape(3, 80)
    np.testing.assert_array_equal(body[:, :16], body[:, -16:])
    np.testing.assert_allclose(np.sum(np.abs(body[:, 16:]) ** 2, axis=1),
                               np.sum(np.abs(freq) ** 2, axis=1), rtol=1e-9)
    lay = frame.layout
    offsets = [lay[k] for k in ("short_training", "long_training", "header", "payload", "end")]
    assert offsets == sorted(offsets) and offsets[-1] == frame.samples.size
    assert (frame.n_header, frame.n_payload) == (1, 2)
    assert lay["payload"] - lay["header"] == 80


def test_clip_and_papr():
    x = np.array([1.0, 3.0j, -0.5])
    np.testing.assert_allclose(clip(x, 2.0), [1.0, 2.0j, -0.5])
    assert papr_db(np.ones(10)) == 0.0


def test_iq_file_round_trip(tmp_path):
    x = (np.arange(10) + 1j * np.arange(10)[::-1]).astype(np.complex64)
    write_iq(tmp_path / "t.iq", x)
    np.testing.assert_array_equal(read_iq(tmp_path / "t.iq"), x)
