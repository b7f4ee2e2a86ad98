"""Finite-alphabet probability primitives.

Alphabets are index based (``0..n-1``).  A :class:`DiscreteJointSource`
bundles an input distribution with a row-stochastic channel and derives the
output marginal, the density ratio ``channel[x, y] / py[y]`` and its bound.

Every joint can be built in binary64 (default) or in exact rational mode,
where all entries are :class:`fractions.Fraction` stored in object arrays.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from ._validation import check_channel, check_index, check_pmf, to_exact
from .exceptions import DimensionMismatch, NotAbsolutelyContinuous, UnsupportedSymbol

# Ratios closer than this are treated as one level.
RATIO_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteJointSource:
    """Input distribution ``px`` and channel ``channel[x, y] = P(Y=y | X=x)``.

    Derived fields: ``py`` (output marginal), ``ratio`` (density ratio,
    zero in columns where ``py`` vanishes), ``supported`` (mask of outputs
    with ``py > 0``) and ``bound_m`` (largest ratio over inputs with
    ``px > 0``).
    """

    px: np.ndarray
    channel: np.ndarray
    py: np.ndarray
    ratio: np.ndarray
    supported: np.ndarray
    bound_m: object
    exact: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    @property
    def n_inputs(self):
        return self.channel.shape[0]

    @property
    def n_outputs(self):
        return self.channel.shape[1]

    @property
    def input_support(self):
        return np.array([p > 0 for p in self.px], dtype=bool)

    def joint_pmf(self):
        return self.px[:, None] * self.channel


@dataclass(frozen=True)
class SingularityReport:
    is_singular: bool
    g: np.ndarray
    max_deviation: float
    tol: float


def _snap_column(col, tol):
    """Collapse chains of values whose consecutive gaps are <= tol onto the
    largest value in the chain."""
    order = np.argsort(col, kind="stable")
    out = col.copy()
    start = 0
    vals = col[order]
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > tol:
            out[order[start:i]] = vals[i - 1]
            start = i
    return out


def build_joint(px, channel, exact=False):
    """Validate ``px`` and ``channel`` and derive marginals and ratios.

    Raises ``DimensionMismatch`` for inconsistent shapes and
    ``NotStochastic`` when a row (or ``px``) does not sum to one within
    1e-9 (exactly, in exact mode).
    """
    px = check_pmf(px, exact=exact, name="px")
    channel = check_channel(channel, n_inputs=px.shape[0], exact=exact)
    n_x, n_y = channel.shape

    if exact:
        py = np.array([sum((px[x] * channel[x, y] for x in range(n_x)), Fraction(0))
                       for y in range(n_y)], dtype=object)
        supported = np.array([p > 0 for p in py], dtype=bool)
        ratio = np.empty((n_x, n_y), dtype=object)
        for x in range(n_x):
            for y in range(n_y):
                ratio[x, y] = channel[x, y] / py[y] if supported[y] else Fraction(0)
    else:
        py = np.array([math.fsum(px * channel[:, y]) for y in range(n_y)])
        supported = py > 0
        ratio = np.zeros((n_x, n_y))
        ratio[:, supported] = channel[:, supported] / py[supported]
        for y in np.flatnonzero(supported):
            ratio[:, y] = _snap_column(ratio[:, y], RATIO_MERGE_TOL)

    in_support = np.array([p > 0 for p in px], dtype=bool)
    bound_m = max(ratio[x, y] for x in np.flatnonzero(in_support) for y in np.flatnonzero(supported))
    if not exact:
        bound_m = float(bound_m)
    return DiscreteJointSource(px=px, channel=channel, py=py, ratio=ratio,
                               supported=supported, bound_m=bound_m, exact=exact)


def as_exact(j):
    """Rebuild a binary64 joint in exact rational mode (floats converted
    exactly, then rows renormalised so they sum to one exactly)."""
    px = to_exact(j.px)
    px = px / sum(px, Fraction(0))
    ch = to_exact(j.channel)
    for x in range(ch.shape[0]):
        ch[x] = ch[x] / sum(ch[x], Fraction(0))
    return build_joint(px, ch, exact=True)


def _log2_terms(p, r):
    return math.fsum(float(a) * math.log2(float(b)) for a, b in zip(p, r) if a > 0)


def mutual_information(j):
    """I(X;Y) in bits."""
    total = []
    for x in np.flatnonzero(j.input_support):
        for y in np.flatnonzero(j.supported):
            pxy = float(j.px[x]) * float(j.channel[x, y])
            if pxy > 0:
                total.append(pxy * math.log2(float(j.ratio[x, y])))
    return max(0.0, math.fsum(total))


def kl_divergence(p, q):
    """D(p || q) in bits; requires p << q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {q.shape} differ")
    if np.any((p > 0) & (q <= 0)):
        raise NotAbsolutelyContinuous("p puts mass where q has none")
    mask = p > 0
    return max(0.0, _log2_terms(p[mask], p[mask] / q[mask]))


def entropy(p):
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return max(0.0, -math.fsum(p * np.log2(p)))


def detect_singular(j, tol=1e-9):
    """Check whether the density ratio is a function of the output alone.

    For each output with positive probability the ratio must be constant
    (relative tolerance ``tol * max(1, g)``) over inputs ``x`` with
    ``px(x) * channel(x, y) > 0``.  ``g[y]`` holds that constant (the largest
    value on the support), 0 for unsupported outputs.
    """
    g = np.zeros(j.n_outputs)
    worst = 0.0
    in_support = j.input_support
    for y in np.flatnonzero(j.supported):
        mask = in_support & np.array([c > 0 for c in j.channel[:, y]], dtype=bool)
        vals = np.array([float(v) for v in j.ratio[mask, y]])
        gy = vals.max()
        g[y] = gy
        worst = max(worst, float(np.max(np.abs(vals - gy))) / max(1.0, gy))
    return SingularityReport(is_singular=worst <= tol, g=g, max_deviation=worst, tol=tol)


def conditional_input(j, y):
    """P(X | Y=y) as a float vector."""
    if not j.supported[y]:
        raise UnsupportedSymbol(f"output symbol {y} has zero probability")
    return np.array([float(v) for v in j.px * j.ratio[:, y]])


# -- presets ----------------------------------------------------------------

def _num(v, exact):
    return Fraction(v) if exact else float(v)


def bsc(p, exact=False):
    p = _num(p, exact)
    return [[1 - p, p], [p, 1 - p]]


def bec(eps, exact=False):
    """Binary erasure channel; output 2 is the erasure symbol."""
    e = _num(eps, exact)
    return [[1 - e, 0 * e, e], [0 * e, 1 - e, e]]


def identity(k, exact=False):
    one = Fraction(1) if exact else 1.0
    return [[one if x == y else 0 * one for y in range(k)] for x in range(k)]


def uniform_additive(k, w, exact=False):
    """Y = X + N mod k with N uniform on {0, ..., w-1}."""
    if not 1 <= w <= k:
        raise ValueError(f"noise width w={w} must lie in 1..k={k}")
    step = Fraction(1, w) if exact else 1.0 / w
    zero = 0 * step
    return [[step if (y - x) % k < w else zero for y in range(k)] for x in range(k)]


def _uniform(n, exact):
    return [Fraction(1, n)] * n if exact else [1.0 / n] * n


PRESETS = ("bsc", "bec", "identity", "uniform-additive")


def parse_preset(spec):
    """Split ``'bsc:0.11'`` style strings into ``(name, args)``."""
    name, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    expected = {"bsc": 1, "bec": 1, "identity": 1, "uniform-additive": 2}[name]
    if len(args) != expected:
        raise ValueError(f"preset {name!r} takes {expected} parameter(s), got {len(args)}")
    return name, args


def preset_joint(spec, exact=False):
    """Build a joint with uniform input from a preset string such as
    ``bsc:0.11``, ``bec:0.3``, ``identity:4`` or ``uniform-additive:8:3``."""
    name, args = parse_preset(spec)
    if name == "bsc":
        p = Fraction(args[0]) if exact else float(args[0])
        if not 0 <= p <= 1:
            raise ValueError("crossover probability must lie in [0, 1]")
        return build_joint(_uniform(2, exact), bsc(p, exact), exact=exact)
    if name == "bec":
        e = Fraction(args[0]) if exact else float(args[0])
        if not 0 <= e <= 1:
            raise ValueError("erasure probability must lie in [0, 1]")
        return build_joint(_uniform(2, exact), bec(e, exact), exact=exact)
    if name == "identity":
        k = int(args[0])
        if k < 1:
            raise ValueError("alphabet size must be positive")
        return build_joint(_uniform(k, exact), identity(k, exact), exact=exact)
    k, w = int(args[0]), int(args[1])
    return build_joint(_uniform(k, exact), uniform_additive(k, w, exact), exact=exact)


def random_joint(rng, n_inputs, n_outputs, concentration=1.0, exact=False):
    """Random joint with Dirichlet input and channel rows.

    Entries are quantised to multiples of 2**-20 so the same draw can be
    rebuilt exactly in rational mode.
    """
    scale = 2 ** 20

    def quantised(n):
        while True:
            raw = rng.dirichlet(np.full(n, concentration))
            ints = np.floor(raw * scale).astype(np.int64)
            ints[np.argmax(ints)] += scale - ints.sum()
            if ints.min() >= 0:
                return ints

    px = quantised(n_inputs)
    rows = [quantised(n_outputs) for _ in range(n_inputs)]
    if exact:
        return build_joint([Fraction(int(v), scale) for v in px],
                           [[Fraction(int(v), scale) for v in r] for r in rows], exact=True)
    return build_joint(px / scale, np.array(rows) / scale)


__all__ = [
    "DiscreteJointSource", "SingularityReport", "build_joint", "as_exact",
    "mutual_information", "kl_divergence", "entropy", "detect_singular",
    "conditional_input", "bsc", "bec", "identity", "uniform_additive",
    "preset_joint", "parse_preset", "random_joint", "PRESETS", "check_index",
]
