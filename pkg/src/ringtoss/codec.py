"""Prefix-free encoding of the rejection sampling index.

The index ``k`` is coded with a Shannon-Fano-Elias interval code for the
ring toss distribution ``Q(.|z)``: interval ``[F(k-1), F(k))`` with
``F(k) = 1 - prod_{i<=k} (1 - a_i)``, codeword length
``ceil(-log2 Q(k|z)) + 1`` and codeword bits the truncated interval
midpoint.  Interval arithmetic is carried out exactly on the rational
values of the binary64 accept probabilities, so encoder and decoder agree
bit for bit.
"""

from dataclasses import dataclass
from fractions import Fraction
import math
import struct

import numpy as np

from .exceptions import MalformedCodeword, ZeroProbabilityIndex
from .probcore import mutual_information
from .sampler import (RingTossDist, default_k_max, draw_inputs, rejection_index,
                      run_trials, trial_seeds)
from .widthfn import LOG2_E, cross_entropy_oracle, functional_information

MAX_FRAMED_BITS = 0xFFFF


@dataclass(frozen=True)
class Bitstring:
    bits: str

    def __post_init__(self):
        if set(self.bits) - {"0", "1"}:
            raise ValueError("bits must contain only '0' and '1'")

    def __len__(self):
        return len(self.bits)

    @property
    def length(self):
        return len(self.bits)

    def to_bytes(self):
        """Frame as a 16-bit big-endian bit count followed by the packed
        bits, zero padded to a whole byte."""
        n = len(self.bits)
        if n > MAX_FRAMED_BITS:
            raise ValueError(f"codeword of {n} bits does not fit the 16-bit length prefix")
        padded = self.bits + "0" * (-n % 8)
        body = int(padded, 2).to_bytes(len(padded) // 8, "big") if padded else b""
        return struct.pack(">H", n) + body

    @classmethod
    def from_bytes(cls, data):
        if len(data) < 2:
            raise MalformedCodeword("missing 16-bit length prefix")
        (n,) = struct.unpack(">H", data[:2])
        body = data[2:]
        if len(body) != (n + 7) // 8:
            raise MalformedCodeword(f"expected {(n + 7) // 8} payload bytes, got {len(body)}")
        if n == 0:
            return cls("")
        bits = format(int.from_bytes(body, "big"), f"0{len(body) * 8}b")
        return cls(bits[:n])


def _ceil_log2_inverse(q):
    """``ceil(-log2 q)`` for a rational ``0 < q <= 1``."""
    a, d = q.numerator, q.denominator
    t = max(0, d.bit_length() - a.bit_length() - 1)
    while (a << t) < d:
        t += 1
    return t


def _interval(probs):
    """Exact ``(F(k-1), Q(k))`` for the last index of ``probs``."""
    tail = Fraction(1)
    for a in probs[:-1]:
        tail *= 1 - Fraction(a)
    return 1 - tail, Fraction(probs[-1]) * tail


def codeword_length(probs):
    """``ceil(-log2 Q(k|z)) + 1`` given ``a_1..a_k``."""
    _, q = _interval(probs)
    if q <= 0:
        raise ZeroProbabilityIndex("index has zero probability under the coding distribution")
    return _ceil_log2_inverse(q) + 1


def sfe_codeword(probs):
    """Codeword bits for index ``k = len(probs)`` given ``a_1..a_k``."""
    low, q = _interval(probs)
    if q <= 0:
        raise ZeroProbabilityIndex("index has zero probability under the coding distribution")
    length = _ceil_log2_inverse(q) + 1
    mid = low + q / 2
    c = (mid.numerator << length) // mid.denominator
    return format(c, f"0{length}b")


def encode_index(k, z, j):
    dist = RingTossDist(z, j)
    return Bitstring(sfe_codeword(dist.accept_probs(k)))


def encode(x, z, j, k_max=None):
    """Run rejection sampling for ``x`` and return the codeword of its index."""
    res = rejection_index(x, z, j, k_max=k_max)
    return encode_index(res.k, z, j)


def decode(b, z, j, k_max=None):
    """Recover ``(k, y_k)`` from a codeword using only ``(b, z, j)``."""
    bits = b.bits if isinstance(b, Bitstring) else str(b)
    if not bits:
        raise MalformedCodeword("empty codeword")
    length = len(bits)
    value = Fraction(int(bits, 2), 1 << length)
    k_max = default_k_max(j.bound_m) if k_max is None else int(k_max)
    dist = RingTossDist(z, j)
    tail = Fraction(1)
    for k in range(1, k_max + 1):
        a = Fraction(dist.accept_prob(k))
        tail *= 1 - a
        if value < 1 - tail:
            if sfe_codeword(dist.accept_probs(k)) != bits:
                raise MalformedCodeword(f"codeword does not match index {k}")
            return k, z.lookup(k)[0]
    raise MalformedCodeword(f"codeword value lies beyond index k_max={k_max}")


@dataclass(frozen=True)
class RateReport:
    mean_length: float
    cross_entropy_estimate: float
    i_f: float
    mi: float
    bound_ok: bool
    length_stderr: float
    cross_entropy_stderr: float
    cross_entropy_exact: float
    n_trials: int


def _lengths_from_cost(run):
    """Codeword lengths from ``-log2 Q`` values, recomputed exactly where the
    float value sits too close to an integer to round safely."""
    cost = run.neg_log2_q
    lengths = np.ceil(cost).astype(np.int64) + 1
    risky = np.flatnonzero(np.abs(cost - np.round(cost)) < 1e-9)
    memo = {}
    for t in risky:
        probs = tuple(run.accept_probs(t))
        if probs not in memo:
            memo[probs] = codeword_length(probs)
        lengths[t] = memo[probs]
    return lengths


def measure_rate(j, n_trials, seed0, k_max=None):
    """Average codeword length over ``n_trials`` draws ``X ~ px`` with seeds
    ``seed0 + t``.  ``bound_ok`` checks
    ``mean_length <= I_F + log2 e + 2 + 3 * stderr``."""
    if n_trials < 2:
        raise ValueError("n_trials must be at least 2")
    seeds = trial_seeds(seed0, n_trials)
    xs = draw_inputs(j, seeds)
    run = run_trials(j, xs, seeds, k_max=k_max, record=True)
    lengths = _lengths_from_cost(run)
    i_f = functional_information(j)
    mean_len = float(lengths.mean())
    len_se = float(lengths.std(ddof=1) / math.sqrt(n_trials))
    ce = float(run.neg_log2_q.mean())
    ce_se = float(run.neg_log2_q.std(ddof=1) / math.sqrt(n_trials))
    return RateReport(
        mean_length=mean_len,
        cross_entropy_estimate=ce,
        i_f=i_f,
        mi=mutual_information(j),
        bound_ok=bool(mean_len <= i_f + LOG2_E + 2 + 3 * len_se),
        length_stderr=len_se,
        cross_entropy_stderr=ce_se,
        cross_entropy_exact=cross_entropy_oracle(j),
        n_trials=n_trials,
    )


def naive_geometric_length(bound_m):
    """``ceil(log2 M) + 1``: the length budget of coding ``K ~ Geom(1/M)``
    without using the shared randomness."""
    return math.ceil(math.log2(float(bound_m))) + 1
