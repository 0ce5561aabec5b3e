"""Rate-1/3, K=7 convolutional code and a batched Viterbi decoder.

Generators are octal 133, 171, 165 with the most significant tap on the
current input bit. Codewords are zero-terminated with K-1 tail bits, and the
three output bits of each step are sent in generator order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConvCode:
    constraint_length: int = 7
    generators: tuple = (0o133, 0o171, 0o165)

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def tail_bits(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << self.tail_bits

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    def coded_length(self, n_info: int) -> int:
        return self.n_out * (n_info + self.tail_bits)

    def taps(self) -> np.ndarray:
        """(n_out, K) 0/1 taps; column i multiplies the input delayed by i."""
        K = self.constraint_length
        return np.array([[(g >> (K - 1 - i)) & 1 for i in range(K)]
                         for g in self.generators], dtype=np.int64)


CODE = ConvCode()


def conv_encode(bits, code: ConvCode = CODE) -> np.ndarray:
    u = np.asarray(bits, dtype=np.int64).ravel()
    if u.size and (u.min() < 0 or u.max() > 1):
        raise ValueError("input must be 0/1 bits")
    padded = np.concatenate([u, np.zeros(code.tail_bits, dtype=np.int64)])
    out = np.empty((padded.size, code.n_out), dtype=np.uint8)
    for j, tap in enumerate(code.taps()):
        out[:, j] = np.convolve(padded, tap)[: padded.size] & 1
    return out.ravel()


def _trellis(code: ConvCode):
    S = code.n_states
    K = code.constraint_length
    nxt = np.arange(S)
    bit = nxt >> (K - 2)
    p0 = (nxt & (S // 2 - 1)) << 1
    outs = []
    taps = code.taps()
    for prev in (p0, p0 | 1):
        reg = (bit << (K - 1)) | prev
        # tap i multiplies register bit (K - 1 - i)
        o = np.zeros(S, dtype=np.int64)
        for j in range(code.n_out):
            par = np.zeros(S, dtype=np.int64)
            for i in range(K):
                if taps[j, i]:
                    par ^= (reg >> (K - 1 - i)) & 1
            o = (o << 1) | par
        outs.append(o)
    return p0, p0 | 1, outs[0], outs[1], bit


def viterbi_decode(received, code: ConvCode = CODE, soft: bool = False) -> np.ndarray:
    """Maximum-likelihood decoding of zero-terminated codewords.

    ``received`` holds hard bits (0/1) by default, or soft values where
    positive means bit 0 when ``soft`` is set. A 2D input decodes one codeword
    per row. Returns the information bits without the tail.
    """
    r = np.asarray(received, dtype=np.float64)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    n = code.n_out
    if r.shape[1] % n or r.shape[1] // n < code.tail_bits:
        raise ValueError(f"codeword length {r.shape[1]} is not 3 x (info + 6)")
    v = r if soft else 1.0 - 2.0 * r
    T = r.shape[1] // n
    B = r.shape[0]
    v = v.reshape(B, T, n)
    p0, p1, o0, o1, _ = _trellis(code)
    signs = 1.0 - 2.0 * ((np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)) & 1)
    bm = v @ signs.T  # (B, T, 2**n) correlation metric per output label
    S = code.n_states
    pm = np.full((B, S), -1e300)
    pm[:, 0] = 0.0
    dec = np.empty((T, B, S), dtype=bool)
    rows = np.arange(B)[:, None]
    for t in range(T):
        m = bm[:, t, :]
        c0 = pm[:, p0] + m[:, o0]
        c1 = pm[:, p1] + m[:, o1]
        d = c1 > c0
        dec[t] = d
        pm = np.where(d, c1, c0)
        if t & 63 == 63:
            pm -= pm.max(axis=1, keepdims=True)
    state = np.zeros(B, dtype=np.int64)
    bits = np.empty((B, T), dtype=np.uint8)
    shift = code.constraint_length - 2
    for t in range(T - 1, -1, -1):
        bits[:, t] = state >> shift
        state = p0[state] | dec[t, rows[:, 0], state]
    out = bits[:, : T - code.tail_bits]
    return out[0] if single else out
