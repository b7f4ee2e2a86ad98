"""Continuous (truncated Gaussian) width functions and the AWGN
rejection-sampling trace.

Width functions of Gaussian pairs are evaluated from the analytic
superlevel sets of the quadratic log-ratio; divergences are integrated
with adaptive Simpson quadrature split at the points where the width
function is not smooth.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr, ndtri

from .exceptions import Exhausted, NotAbsolutelyContinuous, QuadratureFailure, UnboundedRatio
from .sampler import (TAG_LEVEL, TAG_PROPOSAL, CommonRandomness, hash64_array,
                      to_open_unit, to_unit, trial_seeds)

LN2 = math.log(2.0)
SQRT2 = math.sqrt(2.0)


def _phi_cdf(x):
    return 0.5 * math.erfc(-x / SQRT2)


@dataclass(frozen=True)
class Gauss1D:
    """Normal distribution, optionally truncated to ``[-truncation, truncation]``."""

    mean: float
    variance: float
    truncation: float = None

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if self.truncation is not None and not self.truncation > 0:
            raise ValueError("truncation bound must be positive")

    @property
    def std(self):
        return math.sqrt(self.variance)

    @property
    def support(self):
        if self.truncation is None:
            return -math.inf, math.inf
        return -self.truncation, self.truncation

    @property
    def log_norm(self):
        """log of the retained mass of the untruncated normal."""
        if self.truncation is None:
            return 0.0
        lo, hi = self.support
        return math.log(_phi_cdf((hi - self.mean) / self.std) - _phi_cdf((lo - self.mean) / self.std))

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        out = (-0.5 * (z - self.mean) ** 2 / self.variance
               - 0.5 * math.log(2 * math.pi * self.variance) - self.log_norm)
        lo, hi = self.support
        return np.where((z >= lo) & (z <= hi), out, -np.inf)

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def cdf(self, z):
        lo, hi = self.support
        zc = np.clip(np.asarray(z, dtype=float), lo, hi)
        base = ndtr((zc - self.mean) / self.std)
        if self.truncation is None:
            return base
        a = _phi_cdf((lo - self.mean) / self.std)
        return (base - a) / math.exp(self.log_norm)

    def mass(self, a, b):
        """P(a <= Z <= b)."""
        lo, hi = self.support
        a, b = max(a, lo), min(b, hi)
        if b <= a:
            return 0.0
        s = self.std
        za, zb = (a - self.mean) / s, (b - self.mean) / s
        if za > 0:  # upper tail: difference of survival functions
            m = 0.5 * math.erfc(za / SQRT2) - 0.5 * math.erfc(zb / SQRT2)
        else:
            m = _phi_cdf(zb) - _phi_cdf(za)
        return m / math.exp(self.log_norm)

    def ppf(self, v):
        v = np.asarray(v, dtype=float)
        if self.truncation is None:
            return self.mean + self.std * ndtri(v)
        lo, hi = self.support
        a = ndtr((lo - self.mean) / self.std)
        b = ndtr((hi - self.mean) / self.std)
        return np.clip(self.mean + self.std * ndtri(a + v * (b - a)), lo, hi)


def gaussian_kl(p, q):
    """D(p || q) in bits.  Closed form for untruncated pairs, quadrature
    otherwise."""
    lo_p, hi_p = p.support
    lo_q, hi_q = q.support
    if lo_p < lo_q or hi_p > hi_q:
        raise NotAbsolutelyContinuous("p has mass outside the support of q")
    if p.truncation is None and q.truncation is None:
        nats = (math.log(q.std / p.std)
                + (p.variance + (p.mean - q.mean) ** 2) / (2 * q.variance) - 0.5)
        return nats / LN2
    val, _ = integrate.quad(lambda z: float(p.pdf(z) * (p.logpdf(z) - q.logpdf(z))),
                            lo_p, hi_p, epsabs=1e-12, limit=200)
    return val / LN2


# -- adaptive Simpson ---------------------------------------------------------

def adaptive_simpson(f, a, b, tol=1e-6, max_depth=60, max_evals=2_000_000, bound=1.0):
    """Integrate ``f`` on ``[a, b]`` to absolute tolerance ``tol``.

    Uses the Richardson-corrected Simpson estimate on each accepted panel.
    ``bound`` is a bound on ``|f|``; panels narrower than ``1e-4 * tol / bound``
    are accepted as is, which handles algebraic endpoint cusps.  Raises ``QuadratureFailure`` when a panel hits ``max_depth`` without
    meeting its share of the tolerance or the evaluation budget runs out.
    """
    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    evals = 3
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    parts = []
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(0.5 * (lo + mid)), f(0.5 * (mid + hi))
        evals += 2
        left = (mid - lo) / 6 * (flo + 4 * fl + fmid)
        right = (hi - mid) / 6 * (fmid + 4 * fr + fhi)
        delta = left + right - s
        if abs(delta) <= 15 * eps or (hi - lo) * bound <= 1e-4 * tol:
            parts.append(left + right + delta / 15)
        elif depth >= max_depth or evals > max_evals:
            raise QuadratureFailure(
                f"adaptive Simpson did not reach tolerance on [{lo}, {hi}] (depth {depth})")
        else:
            stack.append((lo, mid, flo, fl, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, fr, fhi, right, eps / 2, depth + 1))
    return math.fsum(parts)


def integrate_pieces(f, breakpoints, tol):
    """Adaptive Simpson over consecutive breakpoints.  Half of ``tol`` is
    split evenly between pieces and half in proportion to piece length, so
    short pieces next to a cusp keep a usable tolerance."""
    pts = sorted(set(float(b) for b in breakpoints))
    pieces = [(lo, hi) for lo, hi in zip(pts[:-1], pts[1:]) if hi > lo]
    if not pieces:
        return 0.0
    span = pts[-1] - pts[0]
    return math.fsum(adaptive_simpson(f, lo, hi, 0.5 * tol / len(pieces) + 0.5 * tol * (hi - lo) / span)
                     for lo, hi in pieces)


# -- Gaussian width functions ------------------------------------------------

class NumericWidth:
    """Width function ``l -> Q(p/q >= l)`` of a Gaussian pair."""

    def __init__(self, p, q):
        lo_p, hi_p = p.support
        lo_q, hi_q = q.support
        if lo_p < lo_q or hi_p > hi_q:
            raise NotAbsolutelyContinuous("p has mass outside the support of q")
        # log p(z) - log q(z) = a z^2 + b z + c on the support of p
        self.a = -0.5 / p.variance + 0.5 / q.variance
        self.b = p.mean / p.variance - q.mean / q.variance
        self.c = ((-0.5 * p.mean ** 2 / p.variance - 0.5 * math.log(p.variance) - p.log_norm)
                  - (-0.5 * q.mean ** 2 / q.variance - 0.5 * math.log(q.variance) - q.log_norm))
        self.p, self.q = p, q
        self.lo, self.hi = lo_p, hi_p

        bounded = p.truncation is not None or self.a < 0 or (self.a == 0 and self.b == 0)
        if not bounded:
            raise UnboundedRatio("density ratio is unbounded; truncate both densities")

        candidates = [z for z in (lo_p, hi_p) if math.isfinite(z)]
        self.vertex = -self.b / (2 * self.a) if self.a != 0 else None
        if self.vertex is not None and lo_p <= self.vertex <= hi_p:
            candidates.append(self.vertex)
        if not candidates:  # a == b == 0, unbounded support: constant ratio
            candidates = [0.0]
        log_vals = [self._log_ratio(z) for z in candidates]
        self.log_max = max(log_vals)
        self.max_level = math.exp(self.log_max)
        self.kinks = sorted(math.exp(v) for v in log_vals if v < self.log_max)
        # below the smallest ratio on supp(p) the set is all of supp(p)
        self.floor_mass = q.mass(lo_p, hi_p)

    def _log_ratio(self, z):
        return (self.a * z + self.b) * z + self.c

    def superlevel_set(self, level):
        """Intervals of ``{z in supp(p) : p(z)/q(z) >= level}``."""
        if level <= 0:
            return [(self.lo, self.hi)]
        if level > self.max_level:
            return []
        a, b, c = self.a, self.b, self.c - math.log(level)
        if a == 0:
            if b == 0:
                pieces = [(-math.inf, math.inf)] if c >= 0 else []
            elif b > 0:
                pieces = [(-c / b, math.inf)]
            else:
                pieces = [(-math.inf, -c / b)]
        else:
            disc = b * b - 4 * a * c
            if disc < 0:
                pieces = [] if a < 0 else [(-math.inf, math.inf)]
            else:
                sq = math.sqrt(disc)
                t = -0.5 * (b + math.copysign(sq, b))
                r1 = t / a
                r2 = c / t if t != 0 else r1
                z1, z2 = min(r1, r2), max(r1, r2)
                pieces = [(z1, z2)] if a < 0 else [(-math.inf, z1), (z2, math.inf)]
        out = []
        for lo, hi in pieces:
            lo, hi = max(lo, self.lo), min(hi, self.hi)
            if hi > lo:
                out.append((lo, hi))
        return out

    def eval(self, level):
        if level <= 0:
            return 1.0
        return math.fsum(self.q.mass(lo, hi) for lo, hi in self.superlevel_set(level))

    __call__ = eval

    def breakpoints(self):
        return [0.0] + [k for k in self.kinks if 0 < k < self.max_level] + [self.max_level]


def gaussian_width(p, q):
    return NumericWidth(p, q)


def _neg_xlog2x(v):
    return 0.0 if v <= 0 or v >= 1 else -v * math.log2(v)


def width_integral(w, tol=1e-9):
    """Integral of the width function over ``[0, max_level]`` (should be 1)."""
    return integrate_pieces(w.eval, w.breakpoints(), tol)


def gaussian_csd(p, q, tol=1e-6):
    """Channel simulation divergence of Gaussian ``p`` from ``q`` in bits."""
    w = gaussian_width(p, q)
    return max(0.0, integrate_pieces(lambda l: _neg_xlog2x(w.eval(l)), w.breakpoints(), tol))


def figure1_rows(p, q, grid_points=201):
    """``(level, width)`` on an even grid over ``[0, max_level]``."""
    w = gaussian_width(p, q)
    grid = np.linspace(0.0, w.max_level, int(grid_points))
    return [(float(l), w.eval(float(l))) for l in grid]


# -- truncated AWGN channel --------------------------------------------------

class _Tabulated:
    """CDF of a density on ``[lo, hi]`` tabulated with per-cell
    Gauss-Legendre rules; inverse by linear interpolation."""

    def __init__(self, pdf, lo, hi, cells=1 << 14, order=8):
        nodes, weights = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(lo, hi, cells + 1)
        half = 0.5 * np.diff(edges)
        mids = 0.5 * (edges[:-1] + edges[1:])
        pts = mids[:, None] + half[:, None] * nodes[None, :]
        cell_mass = (pdf(pts) * weights[None, :]).sum(axis=1) * half
        cdf = np.concatenate([[0.0], np.cumsum(cell_mass)])
        self.total = cdf[-1]
        self.edges = edges
        self.table = cdf / cdf[-1]

    def cdf(self, z):
        return np.interp(z, self.edges, self.table)

    def ppf(self, v):
        return np.interp(v, self.table, self.edges)


class AwgnModel:
    """``Y = X + N`` with ``X ~ N(0, var_x)``, ``N ~ N(0, var_n)`` and the
    joint law truncated to the square ``[-B, B]^2`` (renormalised).

    Marginals of the truncated joint are Gaussian densities reweighted by
    conditional retained mass; ``P(Y | X=x)`` is the normal
    ``N(x, var_n)`` truncated to ``[-B, B]``.
    """

    def __init__(self, var_x=0.75, var_n=0.25, bound=4.0):
        self.var_x, self.var_n, self.bound = float(var_x), float(var_n), float(bound)
        self.var_y = self.var_x + self.var_n
        self.rho = self.var_x / self.var_y
        self.s_xy = math.sqrt(self.var_x * self.var_n / self.var_y)
        B = self.bound
        self.norm, _ = integrate.quad(lambda x: float(self._px_unnorm(x)), -B, B,
                                      epsabs=1e-14, epsrel=1e-13, limit=200)
        self.x_marginal = _Tabulated(self.px_pdf, -B, B)
        self.y_marginal = _Tabulated(self.py_pdf, -B, B)
        self.bound_m = self._find_bound()

    def _keep_y(self, x):
        B, s = self.bound, math.sqrt(self.var_n)
        return ndtr((B - x) / s) - ndtr((-B - x) / s)

    def _keep_x(self, y):
        B = self.bound
        return ndtr((B - self.rho * y) / self.s_xy) - ndtr((-B - self.rho * y) / self.s_xy)

    def _px_unnorm(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x / self.var_x) / math.sqrt(2 * math.pi * self.var_x) * self._keep_y(x)

    def px_pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= self.bound
        return np.where(inside, self._px_unnorm(x) / self.norm, 0.0)

    def py_pdf(self, y):
        y = np.asarray(y, dtype=float)
        dens = np.exp(-0.5 * y * y / self.var_y) / math.sqrt(2 * math.pi * self.var_y) * self._keep_x(y)
        return np.where(np.abs(y) <= self.bound, dens / self.norm, 0.0)

    def conditional(self, x):
        """``P(Y | X=x)``."""
        return Gauss1D(mean=float(x), variance=self.var_n, truncation=self.bound)

    def log_ratio(self, y, x):
        """``log dP(Y|X=x)/dP_Y (y)`` on the square."""
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        log_cond = (-0.5 * (y - x) ** 2 / self.var_n - 0.5 * math.log(2 * math.pi * self.var_n)
                    - np.log(self._keep_y(x)))
        return log_cond - np.log(self.py_pdf(y))

    def ratio(self, y, x):
        return np.exp(self.log_ratio(y, x))

    def _find_bound(self):
        B = self.bound
        grid = np.linspace(-B, B, 401)
        vals = self.log_ratio(grid[:, None], grid[None, :])
        iy, ix = np.unravel_index(np.argmax(vals), vals.shape)
        res = optimize.minimize(lambda v: -float(self.log_ratio(v[0], v[1])),
                                x0=[grid[iy], grid[ix]], method="L-BFGS-B",
                                bounds=[(-B, B), (-B, B)], options={"ftol": 1e-15, "gtol": 1e-12})
        best = max(float(vals[iy, ix]), -float(res.fun))
        return math.exp(best) * (1 + 1e-9)

    def row_bound(self, x):
        """An upper bound on ``sup_y ratio(y, x)`` (grid maximum, polished,
        with a relative safety margin)."""
        B = self.bound
        grid = np.linspace(-B, B, 4001)
        vals = self.log_ratio(grid, x)
        y0 = grid[int(np.argmax(vals))]
        res = optimize.minimize_scalar(lambda v: -float(self.log_ratio(v, x)),
                                       bounds=(max(-B, y0 - 0.01), min(B, y0 + 0.01)), method="bounded")
        return math.exp(max(float(vals.max()), -float(res.fun))) * (1 + 1e-6)

    def acceptance_set(self, y, level, grid_points=4001, xtol=1e-12):
        """Intervals of ``{x in [-B, B] : ratio(y, x) >= level}``, located on a
        grid and refined by bisection."""
        B = self.bound
        xs = np.linspace(-B, B, grid_points)
        inside = self.ratio(y, xs) >= level
        f = lambda x: float(self.ratio(y, x)) - level  # noqa: E731
        bounds = []
        for i in np.flatnonzero(inside[1:] != inside[:-1]):
            lo, hi = xs[i], xs[i + 1]
            bounds.append(optimize.bisect(f, lo, hi, xtol=xtol) if f(lo) * f(hi) < 0 else lo)
        edges = ([-B] if inside[0] else []) + bounds + ([B] if inside[-1] else [])
        return list(zip(edges[0::2], edges[1::2]))

    def width(self, y, level):
        """``P_X`` mass of the acceptance set: the ring toss accept probability."""
        total = 0.0
        for lo, hi in self.acceptance_set(y, level):
            val, _ = integrate.quad(lambda x: float(self.px_pdf(x)), lo, hi, epsabs=1e-13, limit=200)
            total += val
        return min(1.0, total)

    def sample_joint(self, rng, n):
        """Exact draws from the truncated joint by rejection from the
        untruncated Gaussian pair."""
        xs, ys = [], []
        need = n
        while need > 0:
            batch = max(1024, int(need * 1.3))
            x = rng.normal(0.0, math.sqrt(self.var_x), batch)
            y = x + rng.normal(0.0, math.sqrt(self.var_n), batch)
            keep = (np.abs(x) <= self.bound) & (np.abs(y) <= self.bound)
            xs.append(x[keep][:need])
            ys.append(y[keep][:need])
            need -= int(min(keep.sum(), need))
        return np.concatenate(xs), np.concatenate(ys)


@dataclass(frozen=True)
class TraceRow:
    i: int
    y: float
    level: float
    accept: bool


def awgn_demo(x, var_x=0.75, var_n=0.25, bound=4.0, seed=0, proposals=None,
              k_max=None, model=None):
    """Rejection sampling trace for input ``x`` on the truncated AWGN
    channel.  ``proposals`` replays explicit ``(y, level)`` pairs instead of
    drawing them from the seeded stream."""
    model = model or AwgnModel(var_x, var_n, bound)
    if abs(x) > model.bound:
        raise ValueError(f"x={x} lies outside [-{model.bound}, {model.bound}]")
    rows = []
    if proposals is not None:
        for i, (y, level) in enumerate(proposals, start=1):
            acc = bool(model.ratio(y, x) >= level)
            rows.append(TraceRow(i, float(y), float(level), acc))
            if acc:
                break
        return rows
    z = CommonRandomness(seed, model.y_marginal)
    k_max = k_max or int(math.ceil(64 * model.bound_m))
    for i in range(1, k_max + 1):
        y, u = z.lookup(i)
        level = model.bound_m * u
        acc = bool(model.ratio(y, x) >= level)
        rows.append(TraceRow(i, float(y), float(level), acc))
        if acc:
            return rows
    raise Exhausted(k_max)


def awgn_simulate(model, x, n_trials, seed0, block=4096):
    """Accepted ``(k, y)`` for ``n_trials`` seeds ``seed0 + t`` at input
    ``x``; same stream as :func:`awgn_demo`.

    A proposal can only be accepted when ``M u <= sup_y ratio(y, x)``, so
    the proposal and the ratio are evaluated only for those indices.
    """
    seeds = trial_seeds(seed0, n_trials)
    k = np.zeros(n_trials, dtype=np.int64)
    y_out = np.zeros(n_trials)
    active = np.arange(n_trials)
    start = 1
    k_max = int(math.ceil(64 * model.bound_m))
    cap = model.row_bound(x)
    while active.size:
        if start > k_max:
            raise Exhausted(k_max)
        idx = np.arange(start, start + block, dtype=np.uint64)[None, :]
        s = seeds[active][:, None]
        levels = model.bound_m * to_open_unit(hash64_array(s, idx, TAG_LEVEL))
        rows, cols = np.nonzero(levels <= cap)
        ys = model.y_marginal.ppf(to_unit(hash64_array(seeds[active][rows], idx[0, cols], TAG_PROPOSAL)))
        ok = model.ratio(ys, x) >= levels[rows, cols]
        accept = np.zeros(levels.shape, dtype=bool)
        accept[rows[ok], cols[ok]] = True
        y_full = np.zeros(levels.shape)
        y_full[rows, cols] = ys
        hit = accept.any(axis=1)
        first = accept.argmax(axis=1)
        done = active[hit]
        k[done] = start + first[hit]
        y_out[done] = y_full[np.flatnonzero(hit), first[hit]]
        active = active[~hit]
        start += block
    return k, y_out


def write_rows_csv(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.12g}" if isinstance(v, float) else
                         (int(v) if isinstance(v, (bool, np.bool_)) else v) for v in row])
