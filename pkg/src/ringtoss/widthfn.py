"""Width functions as exact step functions and the information measures
built from them.

A width function ``w(l) = Q(dP/dQ >= l)`` of a finite pair is a
nonincreasing step function of the level ``l`` that integrates to one.
Its differential entropy is the channel simulation divergence.
"""

from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from .exceptions import DimensionMismatch, NotAbsolutelyContinuous, UnsupportedSymbol
from .probcore import RATIO_MERGE_TOL, kl_divergence

LOG2_E = math.log2(math.e)


@dataclass(frozen=True)
class WidthFunction:
    """Step function with breakpoints ``levels`` (ascending) and values
    ``masses``.

    ``masses[0] == 1`` on ``[0, levels[0]]``, ``masses[j]`` on
    ``(levels[j-1], levels[j]]`` and ``masses[-1] == 0`` beyond the last
    level.  Evaluation uses the superlevel convention ``ratio >= l``.
    """

    levels: np.ndarray
    masses: np.ndarray

    @property
    def exact(self):
        return self.levels.dtype == object

    @property
    def max_level(self):
        return self.levels[-1]

    def __call__(self, level):
        if self.exact:
            return self.masses[bisect_left(list(self.levels), level)]
        idx = np.searchsorted(self.levels, level, side="left")
        out = self.masses[idx]
        return float(out) if np.ndim(out) == 0 else out

    def intervals(self):
        """Yield ``(left, right, value)`` for the pieces on ``[0, max_level]``."""
        left = 0 * self.levels[0]
        for right, value in zip(self.levels, self.masses[:-1]):
            yield left, right, value
            left = right

    def integral(self):
        if self.exact:
            return sum(((r - l) * v for l, r, v in self.intervals()), Fraction(0))
        return math.fsum((r - l) * v for l, r, v in self.intervals())


def _from_atoms(values, weights, tol=RATIO_MERGE_TOL):
    """Build the width function of a finite ratio variable taking value
    ``values[i]`` with reference mass ``weights[i]`` (only positive weights
    are kept)."""
    exact = np.asarray(values).dtype == object or np.asarray(weights).dtype == object
    keep = [i for i, wt in enumerate(weights) if wt > 0]
    vals = [values[i] for i in keep]
    wts = [weights[i] for i in keep]
    order = sorted(range(len(vals)), key=lambda i: vals[i])

    levels, groups = [], []
    for i in order:
        v = vals[i]
        if levels and (v == levels[-1] or (not exact and v - levels[-1] <= tol)):
            levels[-1] = v
            groups[-1].append(wts[i])
        else:
            levels.append(v)
            groups.append([wts[i]])

    m = len(levels)
    if exact:
        masses = np.empty(m + 1, dtype=object)
        masses[m] = Fraction(0)
        for jdx in range(m - 1, 0, -1):
            masses[jdx] = masses[jdx + 1] + sum(groups[jdx], Fraction(0))
        masses[0] = Fraction(1)
        return WidthFunction(np.array(levels, dtype=object), masses)

    masses = np.zeros(m + 1)
    for jdx in range(m - 1, 0, -1):
        masses[jdx] = math.fsum([masses[jdx + 1]] + [float(w) for w in groups[jdx]])
    masses[0] = 1.0
    return WidthFunction(np.array(levels, dtype=float), masses)


def width_of_pair(p, q):
    """Width function of ``p`` relative to ``q`` (breakpoints at the
    distinct ratios ``p[i]/q[i]`` over the support of ``q``)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {q.shape} differ")
    if np.any((p > 0) & (q <= 0)):
        raise NotAbsolutelyContinuous("p puts mass where q has none")
    mask = q > 0
    return _from_atoms(p[mask] / q[mask], q[mask])


def width_given_y(j, y):
    """Width of ``P(X|Y=y)`` relative to ``P_X``; breakpoints are the
    distinct values of ``ratio[x, y]`` with masses taken from ``px``.

    Results are memoised on the joint.
    """
    key = ("width", int(y))
    cached = j._cache.get(key)
    if cached is not None:
        return cached
    if not j.supported[y]:
        raise UnsupportedSymbol(f"output symbol {y} has zero probability")
    w = _from_atoms(j.ratio[:, y], j.px)
    j._cache[key] = w
    return w


def _neg_xlogx(v):
    return 0.0 if v <= 0 or v >= 1 else -v * math.log2(v)


def csd(w):
    """Channel simulation divergence ``-int w log2 w`` in bits (exact for a
    step function)."""
    return max(0.0, math.fsum(float(r - l) * _neg_xlogx(float(v)) for l, r, v in w.intervals()))


def functional_information(j):
    """``sum_y py(y) * csd(width_given_y(j, y))`` in bits."""
    return math.fsum(float(j.py[y]) * csd(width_given_y(j, y)) for y in np.flatnonzero(j.supported))


def kl_csd_sandwich_check(p, q, tol=1e-9):
    """Return ``(kl, csd, holds)`` with ``holds`` true when
    ``kl <= csd <= kl + log2(kl + 1) + 1`` up to ``tol``."""
    kl = kl_divergence(p, q)
    c = csd(width_of_pair(p, q))
    holds = kl - tol <= c <= kl + math.log2(kl + 1) + 1 + tol
    return kl, c, holds


def _one_minus_log(v):
    """``(1 - v) log2 (1 - v)``, zero at both ends."""
    v = float(v)
    return 0.0 if v <= 0 or v >= 1 else (1 - v) * math.log2(1 - v)


def wald_term(j):
    """``-sum_y py(y) int_0^M (1 - w_y) log2 (1 - w_y) dl``, the expected
    cost of the rejected proposals (nonnegative, at most log2 e)."""
    parts = []
    for y in np.flatnonzero(j.supported):
        w = width_given_y(j, y)
        inner = math.fsum(float(r - l) * _one_minus_log(v) for l, r, v in w.intervals())
        parts.append(float(j.py[y]) * inner)
    return -math.fsum(parts)


def cross_entropy_oracle(j):
    """Closed form of ``E[-log2 Q(K|Z)]`` for the ring toss code on ``j``."""
    return functional_information(j) + wald_term(j)
