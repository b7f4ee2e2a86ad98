"""Functional information of n-fold i.i.d. product channels.

For the product channel the density ratio of ``(x^n, y^n)`` is the product
of the per-coordinate ratios, so the width function of ``y^n`` is the
survival function of a product of independent ratio variables.  Three
evaluation paths are provided:

* singular bases: every per-output width has a single positive level
  ``g(y)``; the product width has the single level ``prod g(y_i)`` and its
  entropy is ``sum log2 g(y_i)``.  The binary erasure channel with uniform
  input is aggregated by erasure count.
* two-level symmetric bases (e.g. BSC with uniform input): all outputs
  share one two-atom ratio law, so every ``y^n`` has the same width, with
  levels indexed by the number of low-ratio coordinates.  Computed in the
  log domain so that n in the tens of thousands is fine.
* generic enumeration over ``y^n`` and ``x^n``, bounded by a budget and
  used to cross-check the fast paths.
"""

from dataclasses import dataclass
import csv
import itertools
import math

import numpy as np
from scipy.stats import binom

from .exceptions import TooLarge
from .probcore import detect_singular, mutual_information
from .widthfn import _from_atoms, csd, functional_information, width_given_y

GENERIC_BUDGET = 2 ** 20
LN2 = math.log(2.0)


@dataclass(frozen=True)
class ProductChannelSpec:
    base: object
    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be a positive integer")


@dataclass(frozen=True)
class RedundancyPoint:
    n: int
    i_f_n: float
    n_i: float
    redundancy: float
    normalized: float


def _atom_law(j, y):
    """``(levels, masses)`` of the ratio variable ``ratio(X, y)``,
    ``X ~ px``, as float arrays."""
    w = width_given_y(j, y)
    levels = np.asarray(w.levels, dtype=float)
    tails = np.asarray(w.masses, dtype=float)
    masses = tails[:-1] - tails[1:]
    masses[0] = 1.0 - tails[1]
    return levels, masses


def symmetric_law(j, tol=1e-12):
    """The common ratio law when every output shares it, else ``None``."""
    laws = [_atom_law(j, y) for y in np.flatnonzero(j.supported)]
    lv0, ms0 = laws[0]
    for lv, ms in laws[1:]:
        if lv.shape != lv0.shape or np.max(np.abs(lv - lv0)) > tol or np.max(np.abs(ms - ms0)) > tol:
            return None
    return lv0, ms0


def _is_uniform_bec(j):
    if j.n_inputs != 2 or j.n_outputs != 3:
        return False
    ch = np.asarray(j.channel, dtype=float)
    px = np.asarray(j.px, dtype=float)
    eps = ch[0, 2]
    return (np.allclose(px, 0.5, atol=0, rtol=0)
            and np.allclose(ch, [[1 - eps, 0, eps], [0, 1 - eps, eps]], atol=1e-15, rtol=0))


def _bec_path(j, n):
    """Sum over erasure counts ``e`` of ``Binom(n, eps)(e) * (n - e)``: with
    ``n - e`` unerased coordinates the width is ``2**-(n-e)`` on
    ``(0, 2**(n-e)]``."""
    eps = float(j.channel[0, 2])
    e = np.arange(n + 1)
    pmf = binom.pmf(e, n, eps)
    return math.fsum(pmf * (n - e)) / math.fsum(pmf)


def _singular_path(j, n, report):
    per_y = [float(j.py[y]) * math.log2(report.g[y]) for y in np.flatnonzero(j.supported)]
    return n * math.fsum(per_y)


def product_width_csd_log(log_levels, log_masses):
    """Entropy (bits) of the width function of a discrete ratio variable
    given ``log`` levels and ``log`` masses; levels must be distinct."""
    order = np.argsort(log_levels)
    ll = np.asarray(log_levels)[order]
    lm = np.asarray(log_masses)[order]
    # log w_j on (l_{j-1}, l_j]: mass of atoms at or above l_j.
    log_tail = np.logaddexp.accumulate(lm[::-1])[::-1]
    log_tail = np.minimum(log_tail - log_tail[0], 0.0)
    terms = []
    for jdx in range(1, ll.size):
        lw = log_tail[jdx]
        log_len = ll[jdx] + math.log(-math.expm1(ll[jdx - 1] - ll[jdx]))
        terms.append(math.exp(log_len + lw) * (-lw / LN2))
    return math.fsum(terms)


def _two_level_path(law, n):
    levels, masses = law
    (r_lo, r_hi), (m_lo, m_hi) = levels, masses
    d = np.arange(n + 1)  # number of low-ratio coordinates
    log_levels = (n - d) * math.log(r_hi) + d * math.log(r_lo)
    log_masses = binom.logpmf(d, n, m_lo / (m_lo + m_hi))
    return product_width_csd_log(log_levels, log_masses)


def _generic_path(j, n, budget):
    n_x, n_y = j.n_inputs, j.n_outputs
    if float(n_x) ** n * float(n_y) ** n > budget:
        raise TooLarge(f"generic enumeration needs {n_x}^{n} * {n_y}^{n} entries (budget {budget})")
    px = np.asarray(j.px, dtype=float)
    py = np.asarray(j.py, dtype=float)
    ratio = np.asarray(j.ratio, dtype=float)
    px_n = px
    for _ in range(n - 1):
        px_n = np.kron(px_n, px)
    parts = []
    for ys in itertools.product(np.flatnonzero(j.supported), repeat=n):
        r = ratio[:, ys[0]]
        for y in ys[1:]:
            r = np.kron(r, ratio[:, y])
        p_y = math.prod(py[y] for y in ys)
        parts.append(p_y * csd(_from_atoms(r, px_n)))
    return math.fsum(parts)


def product_functional_information(spec, method="auto", budget=GENERIC_BUDGET):
    """``I_F(X^n; Y^n)`` in bits for the n-fold product of ``spec.base``.

    ``method`` is one of ``auto``, ``singular``, ``bec``, ``two-level`` or
    ``generic``.
    """
    j, n = spec.base, int(spec.n)
    if method == "generic":
        return _generic_path(j, n, budget)
    if method in ("auto", "bec") and _is_uniform_bec(j):
        return _bec_path(j, n)
    if method == "bec":
        raise ValueError("base is not a binary erasure channel with uniform input")
    report = detect_singular(j)
    if method in ("auto", "singular") and report.is_singular:
        return _singular_path(j, n, report)
    if method == "singular":
        raise ValueError("base channel is not singular")
    if n == 1:
        return functional_information(j)
    law = symmetric_law(j)
    if law is not None and law[0].size == 2 and law[0][0] > 0:
        return _two_level_path(law, n)
    if method == "two-level":
        raise ValueError("base does not have a shared two-level ratio law")
    return _generic_path(j, n, budget)


def redundancy_curve(base, n_values, method="auto"):
    """``RedundancyPoint`` per ``n``: ``I_F(X^n;Y^n) - n I(X;Y)`` and that
    gap divided by ``log2 n`` (NaN for ``n = 1``)."""
    n_values = [int(n) for n in n_values]
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be strictly ascending")
    mi = mutual_information(base)
    points = []
    for n in n_values:
        i_f_n = product_functional_information(ProductChannelSpec(base, n), method=method)
        n_i = n * mi
        red = i_f_n - n_i
        norm = red / math.log2(n) if n >= 2 else float("nan")
        points.append(RedundancyPoint(n=n, i_f_n=i_f_n, n_i=n_i, redundancy=red, normalized=norm))
    return points


CSV_HEADER = ("n", "i_f", "n_i", "redundancy", "normalized")


def write_redundancy_csv(points, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in points:
        writer.writerow([p.n] + [f"{v:.12g}" for v in (p.i_f_n, p.n_i, p.redundancy, p.normalized)])
