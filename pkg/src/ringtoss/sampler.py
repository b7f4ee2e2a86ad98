"""Shared randomness, rejection sampling and the ring toss coding
distribution.

The common randomness is counter based: the pair ``(y_i, u_i)`` for index
``i >= 1`` is a pure function of ``(seed, i)``, obtained by hashing
``(seed, i, tag)`` with the SplitMix64 finaliser.  ``y_i`` comes from the
inverse CDF of the proposal distribution applied to one hashed uniform and
``u_i`` is an independent uniform on the open interval (0, 1).

Acceptance at step ``i`` is ``ratio(x, y_i) >= M * u_i`` and the ring toss
accept probability is ``w_{y_i}(M * u_i)`` under the same ``>=`` rule, so
the decoder-side probabilities and the encoder-side decisions always agree.
"""

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from ._validation import check_index
from .exceptions import Exhausted, NotSingular
from .widthfn import width_given_y

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
TAG_MIX = 0xD1B54A32D192ED03
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB

TAG_PROPOSAL = 1
TAG_LEVEL = 2
TAG_INPUT = 3

_INV_2_53 = 2.0 ** -53


def mix64(z):
    """SplitMix64 output finaliser on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def hash64(seed, index, tag):
    """64-bit hash of ``(seed, index, tag)``; the published stream contract."""
    key = mix64((seed & MASK64) ^ ((tag * TAG_MIX) & MASK64))
    return mix64(key + index * GOLDEN_GAMMA)


def _mix64_np(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_B)
    return z ^ (z >> np.uint64(31))


def hash64_array(seeds, indices, tag):
    """Vectorised :func:`hash64`; ``seeds`` and ``indices`` broadcast."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    indices = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _mix64_np(seeds ^ np.uint64((tag * TAG_MIX) & MASK64))
        return _mix64_np(key + indices * np.uint64(GOLDEN_GAMMA))


def to_unit(h):
    """Uniform on [0, 1) from the top 53 bits."""
    if isinstance(h, np.ndarray):
        return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return (h >> 11) * _INV_2_53


def to_open_unit(h):
    """Uniform on the open interval (0, 1): odd multiples of 2**-53."""
    if isinstance(h, np.ndarray):
        return ((h >> np.uint64(12)) * np.uint64(2) + np.uint64(1)).astype(np.float64) * _INV_2_53
    return ((h >> 12) * 2 + 1) * _INV_2_53


class DiscreteProposal:
    """Inverse-CDF sampler for a pmf over ``0..n-1``."""

    def __init__(self, pmf):
        self.exact = isinstance(pmf, np.ndarray) and pmf.dtype == object
        if self.exact:
            cdf, acc = [], Fraction(0)
            for p in pmf:
                acc += p
                cdf.append(acc)
            self.cdf = cdf
        else:
            self.cdf = np.cumsum(np.asarray(pmf, dtype=float))
        self.last = int(max(i for i, p in enumerate(pmf) if p > 0))

    def ppf(self, v):
        if self.exact:
            return min(bisect_right(self.cdf, Fraction(v)), self.last)
        if isinstance(v, np.ndarray):
            return np.minimum(np.searchsorted(self.cdf, v, side="right"), self.last)
        return min(int(np.searchsorted(self.cdf, v, side="right")), self.last)


class CommonRandomness:
    """Seeded stream ``{(y_i, u_i)}_{i>=1}`` shared by encoder and decoder.

    ``proposal`` is either a pmf (inverse-CDF over indices) or any object
    with a vectorisable ``ppf`` method, for continuous proposals.
    """

    def __init__(self, seed, proposal):
        self.seed = int(seed) & MASK64
        if hasattr(proposal, "ppf"):
            self.proposal = proposal
        else:
            self.proposal = DiscreteProposal(proposal)

    @classmethod
    def for_joint(cls, seed, j):
        return cls(seed, j.py)

    def lookup(self, i):
        """Return ``(y_i, u_i)`` for ``i >= 1``."""
        v = to_unit(hash64(self.seed, i, TAG_PROPOSAL))
        u = to_open_unit(hash64(self.seed, i, TAG_LEVEL))
        return self.proposal.ppf(v), u

    def block(self, start, count):
        """Vectorised lookups for indices ``start .. start+count-1``."""
        idx = np.arange(start, start + count, dtype=np.uint64)
        v = to_unit(hash64_array(self.seed, idx, TAG_PROPOSAL))
        u = to_open_unit(hash64_array(self.seed, idx, TAG_LEVEL))
        return self.proposal.ppf(v), u


@dataclass(frozen=True)
class IndexResult:
    k: int
    y_k: object
    steps_examined: int


def default_k_max(bound_m):
    return int(math.ceil(float(bound_m) * 64))


def _level(j, u):
    """``M * u`` in the joint's arithmetic."""
    if j.exact:
        return j.bound_m * Fraction(u)
    return j.bound_m * u


class RingTossDist:
    """The sequential coding distribution
    ``Q(k|z) = a_k * prod_{i<k} (1 - a_i)`` with ``a_i = w_{y_i}(M u_i)``.

    Accept probabilities are computed lazily and memoised per index.
    """

    def __init__(self, z, j):
        self.z = z
        self.j = j
        self._probs = []

    def accept_prob(self, i):
        while len(self._probs) < i:
            y, u = self.z.lookup(len(self._probs) + 1)
            self._probs.append(width_given_y(self.j, y)(_level(self.j, u)))
        return self._probs[i - 1]

    def accept_probs(self, n):
        self.accept_prob(n)
        return list(self._probs[:n])

    def prob(self, k):
        """``Q(k|z)``; the tail product is accumulated left to right."""
        if k < 1:
            return 0 * self.accept_prob(1)
        probs = self.accept_probs(k)
        tail = 1 if self.j.exact else 1.0
        for a in probs[:-1]:
            tail = tail * (1 - a)
        return probs[-1] * tail

    def tail(self, n):
        """``prod_{i<=n} (1 - a_i)``."""
        tail = 1 if self.j.exact else 1.0
        for a in self.accept_probs(n) if n > 0 else []:
            tail = tail * (1 - a)
        return tail

    def partial_sum(self, n):
        """``sum_{k<=n} Q(k|z)`` accumulated term by term."""
        total = 0 if self.j.exact else 0.0
        tail = 1 if self.j.exact else 1.0
        for a in self.accept_probs(n) if n > 0 else []:
            total = total + a * tail
            tail = tail * (1 - a)
        return total


def ring_toss_prob(z, j, k):
    return RingTossDist(z, j).prob(k)


def rejection_index(x, z, j, k_max=None):
    """Smallest ``i`` with ``ratio(x, y_i) >= M u_i``."""
    x = check_index(x, j.n_inputs, "x")
    if not j.px[x] > 0:
        raise ValueError(f"input {x} has zero probability")
    k_max = default_k_max(j.bound_m) if k_max is None else int(k_max)
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    row = j.ratio[x]
    for i in range(1, k_max + 1):
        y, u = z.lookup(i)
        if row[y] >= _level(j, u):
            return IndexResult(k=i, y_k=y, steps_examined=i)
    raise Exhausted(k_max)


def singular_index(x, z, j, report, k_max=None):
    """Pre-filtered search for singular channels: among indices with
    ``M u_i <= g(y_i)`` return the first whose proposal has positive
    likelihood under ``x``."""
    if not report.is_singular:
        raise NotSingular("channel is not singular; use rejection_index")
    x = check_index(x, j.n_inputs, "x")
    if not j.px[x] > 0:
        raise ValueError(f"input {x} has zero probability")
    k_max = default_k_max(j.bound_m) if k_max is None else int(k_max)
    g = report.g
    for i in range(1, k_max + 1):
        y, u = z.lookup(i)
        if _level(j, u) <= g[y] and j.channel[x, y] > 0:
            return IndexResult(k=i, y_k=y, steps_examined=i)
    raise Exhausted(k_max)


@dataclass(frozen=True)
class IndexLaw:
    """``pmf[k-1] = P(K=k | z)`` for ``k <= n`` and the remaining mass."""
    pmf: np.ndarray
    overflow: object


def _mass(px, mask):
    vals = [px[i] for i in np.flatnonzero(mask)]
    if px.dtype == object:
        return sum(vals, Fraction(0))
    return math.fsum(vals)


def acceptance_sets(z, j, n):
    """Boolean matrix ``S[i-1, x] = (x in S_i)`` for ``i <= n``."""
    support = j.input_support
    sets = np.zeros((n, j.n_inputs), dtype=bool)
    for i in range(1, n + 1):
        y, u = z.lookup(i)
        level = _level(j, u)
        sets[i - 1] = support & np.array([r >= level for r in j.ratio[:, y]], dtype=bool)
    return sets


def exact_index_dist(z, j, n):
    """``P(K=k | z) = P_X(S_k minus the union of S_i, i<k)`` for ``k <= n``."""
    sets = acceptance_sets(z, j, n)
    covered = np.zeros(j.n_inputs, dtype=bool)
    pmf = []
    for i in range(n):
        fresh = sets[i] & ~covered
        pmf.append(_mass(j.px, fresh))
        covered |= sets[i]
    overflow = _mass(j.px, j.input_support & ~covered)
    return IndexLaw(pmf=np.array(pmf, dtype=object if j.exact else float), overflow=overflow)


# -- batched simulation ------------------------------------------------------

def _width_tables(j):
    key = ("width_tables",)
    cached = j._cache.get(key)
    if cached is None:
        cached = {int(y): width_given_y(j, y) for y in np.flatnonzero(j.supported)}
        j._cache[key] = cached
    return cached


@dataclass
class BatchRun:
    """Per-trial outcome of :func:`run_trials`."""
    x: np.ndarray
    k: np.ndarray
    y: np.ndarray
    neg_log2_q: np.ndarray
    blocks: list = None

    def accept_probs(self, t):
        """Accept probabilities ``a_1..a_k`` seen by trial ``t`` (requires
        ``record=True``)."""
        out = []
        for rows, a in self.blocks:
            pos = np.searchsorted(rows, t)
            if pos < rows.size and rows[pos] == t:
                out.extend(a[pos].tolist())
        return out[: int(self.k[t])]


def run_trials(j, xs, seeds, k_max=None, block=None, record=False):
    """Vectorised rejection sampling for many ``(x, seed)`` pairs.

    Produces the same ``k`` and ``y`` as :func:`rejection_index` with
    ``CommonRandomness(seed, j.py)`` and also returns ``-log2 Q(k|z)``.
    With ``record=True`` the accept probabilities are kept per block.
    """
    if j.exact:
        raise ValueError("batched simulation runs in binary64 mode only")
    xs = np.asarray(xs, dtype=np.int64)
    seeds = np.asarray(seeds, dtype=np.uint64)
    n = xs.shape[0]
    m = float(j.bound_m)
    k_max = default_k_max(m) if k_max is None else int(k_max)
    block = block or max(4, int(math.ceil(2 * m)))
    proposal = DiscreteProposal(j.py)
    tables = _width_tables(j)

    k = np.zeros(n, dtype=np.int64)
    y_out = np.zeros(n, dtype=np.int64)
    cost = np.zeros(n)
    active = np.arange(n)
    blocks = [] if record else None
    start = 1
    while active.size:
        if start > k_max:
            raise Exhausted(k_max)
        width = min(block, k_max - start + 1)
        idx = np.arange(start, start + width, dtype=np.uint64)
        s = seeds[active][:, None]
        ys = proposal.ppf(to_unit(hash64_array(s, idx[None, :], TAG_PROPOSAL)))
        levels = m * to_open_unit(hash64_array(s, idx[None, :], TAG_LEVEL))
        accept = j.ratio[xs[active][:, None], ys] >= levels

        a = np.empty(levels.shape)
        for yy, w in tables.items():
            sel = ys == yy
            if sel.any():
                a[sel] = w(levels[sel])

        if record:
            blocks.append((active.copy(), a))
        hit = accept.any(axis=1)
        first = np.where(hit, accept.argmax(axis=1), width)
        cols = np.arange(width)[None, :]
        with np.errstate(divide="ignore"):
            reject_cost = np.where(cols < first[:, None], -np.log2(1 - a), 0.0).sum(axis=1)
        cost[active] += reject_cost
        done = active[hit]
        rows = np.flatnonzero(hit)
        k[done] = start + first[hit]
        y_out[done] = ys[rows, first[hit]]
        cost[done] += -np.log2(a[rows, first[hit]])
        active = active[~hit]
        start += width
    return BatchRun(x=xs, k=k, y=y_out, neg_log2_q=cost, blocks=blocks)


def trial_seeds(seed0, n_trials):
    """``seed0 + t`` for ``t < n_trials``, wrapping modulo 2**64."""
    with np.errstate(over="ignore"):
        return np.uint64(int(seed0) & MASK64) + np.arange(n_trials, dtype=np.uint64)


def draw_inputs(j, seeds):
    """Input symbol per trial from ``px``, using a separate stream tag."""
    proposal = DiscreteProposal(j.px)
    return proposal.ppf(to_unit(hash64_array(np.asarray(seeds, dtype=np.uint64), 0, TAG_INPUT)))


@dataclass
class BatchResult:
    y_counts: np.ndarray
    k_counts: dict
    k_mean: float
    k_var: float
    n_trials: int
    run: BatchRun


def simulate_batch(j, x, n_trials, seed0, k_max=None):
    """Simulate ``n_trials`` channel uses from input ``x`` with per-trial
    seeds ``seed0 + t``; returns output counts and index statistics."""
    x = check_index(x, j.n_inputs, "x")
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if not j.px[x] > 0:
        raise ValueError(f"input {x} has zero probability")
    seeds = trial_seeds(seed0, n_trials)
    run = run_trials(j, np.full(n_trials, x), seeds, k_max=k_max)
    y_counts = np.bincount(run.y, minlength=j.n_outputs)
    ks, counts = np.unique(run.k, return_counts=True)
    return BatchResult(
        y_counts=y_counts,
        k_counts=dict(zip(ks.tolist(), counts.tolist())),
        k_mean=float(run.k.mean()),
        k_var=float(run.k.var(ddof=1)) if n_trials > 1 else 0.0,
        n_trials=n_trials,
        run=run,
    )
