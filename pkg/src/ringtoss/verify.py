"""Invariant suites run by ``ringtoss verify``.

Each check returns ``(ok, detail)``.  ``quick`` checks are exact identities
and small property runs; ``full`` adds the large Monte Carlo runs and the
long product-channel curves.
"""

from dataclasses import dataclass
import math
import time

import numpy as np
from scipy import stats

from .codec import decode, encode, measure_rate
from .gaussbench import AwgnModel, Gauss1D, gaussian_csd, gaussian_kl, gaussian_width, width_integral
from .probcore import detect_singular, kl_divergence, mutual_information, preset_joint, random_joint
from .product import ProductChannelSpec, product_functional_information, redundancy_curve
from .sampler import (CommonRandomness, RingTossDist, exact_index_dist, rejection_index,
                      run_trials, simulate_batch, singular_index, trial_seeds, draw_inputs)
from .widthfn import LOG2_E, cross_entropy_oracle, functional_information, kl_csd_sandwich_check

GOF_ALPHA = 1e-3


def chi_square_pvalue(counts, probs):
    """Pearson goodness-of-fit p-value of ``counts`` against ``probs``.

    Cells with zero expected mass must be empty (otherwise p = 0) and are
    dropped; a single remaining cell gives p = 1.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    zero = probs <= 0
    if np.any(counts[zero] > 0):
        return 0.0
    counts, probs = counts[~zero], probs[~zero]
    if counts.size < 2:
        return 1.0
    expected = probs / probs.sum() * counts.sum()
    return float(stats.chisquare(counts, expected).pvalue)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def _sandwich():
    kl, c, holds = kl_csd_sandwich_check([0.5, 0.5], [0.25, 0.75])
    ok = holds and abs(kl - (1 - 0.5 * math.log2(3))) < 1e-12 and abs(c - 2 / 3) < 1e-12
    return ok, f"kl={kl:.5f} csd={c:.5f}"


def _singular_equality():
    worst = 0.0
    for spec in ("bec:0.1", "bec:0.3", "bec:0.5", "bec:0.9", "identity:2", "identity:4",
                 "identity:8", "uniform-additive:8:3"):
        j = preset_joint(spec)
        worst = max(worst, abs(functional_information(j) - mutual_information(j)))
    gaps = [functional_information(preset_joint(f"bsc:{p}")) - mutual_information(preset_joint(f"bsc:{p}"))
            for p in (0.05, 0.11, 0.3)]
    return worst <= 1e-9 and min(gaps) > 1e-6, f"singular max gap {worst:.2e}, bsc min gap {min(gaps):.4f}"


def _window(n_joints):
    rng = np.random.default_rng(20240101)
    worst_lo, worst_hi = math.inf, -math.inf
    for _ in range(n_joints):
        j = random_joint(rng, int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        gap = cross_entropy_oracle(j) - functional_information(j)
        worst_lo, worst_hi = min(worst_lo, gap), max(worst_hi, gap)
    return worst_lo >= 0 and worst_hi <= LOG2_E + 1e-9, f"gap range [{worst_lo:.4f}, {worst_hi:.4f}]"


def _normalization():
    j = preset_joint("bsc:0.11", exact=True)
    for seed in range(10):
        d = RingTossDist(CommonRandomness.for_joint(seed, j), j)
        for n in (1, 8, 32):
            if d.partial_sum(n) != 1 - d.tail(n):
                return False, f"seed {seed}, n={n}"
    return True, "exact partial sums telescope"


def _index_law():
    rng = np.random.default_rng(7)
    for t in range(5):
        j = random_joint(rng, 3, 4)
        z = CommonRandomness.for_joint(t, j)
        law = exact_index_dist(z, j, 8)
        brute = np.zeros(8)
        for x in range(3):
            if j.px[x] > 0:
                k = rejection_index(x, z, j).k
                if k <= 8:
                    brute[k - 1] += j.px[x]
        if np.max(np.abs(np.asarray(law.pmf, dtype=float) - brute)) > 1e-15:
            return False, f"joint {t}"
    return True, "set differences match enumeration"


def _round_trip(n):
    rng = np.random.default_rng(3)
    specs = ("bsc:0.11", "bec:0.3", "identity:4", "uniform-additive:8:3")
    for t in range(n):
        j = preset_joint(specs[t % len(specs)])
        x = int(rng.integers(j.n_inputs))
        z = CommonRandomness.for_joint(int(rng.integers(2 ** 63)), j)
        b = encode(x, z, j)
        res = rejection_index(x, z, j)
        if decode(b, z, j) != (res.k, res.y_k):
            return False, f"trial {t}"
    return True, f"{n} round trips"


def _equivalence(n_seeds):
    for spec in ("bec:0.3", "uniform-additive:8:3"):
        j = preset_joint(spec)
        rep = detect_singular(j)
        for x in range(j.n_inputs):
            for s in range(n_seeds):
                z = CommonRandomness.for_joint(s, j)
                if singular_index(x, z, j, rep) != rejection_index(x, z, j):
                    return False, f"{spec} x={x} seed={s}"
    return True, f"{n_seeds} seeds per input"


def _product_small():
    worst = 0.0
    for spec, n in (("bsc:0.11", 4), ("bec:0.3", 4), ("identity:2", 3)):
        j = preset_joint(spec)
        fast = product_functional_information(ProductChannelSpec(j, n))
        slow = product_functional_information(ProductChannelSpec(j, n), method="generic")
        worst = max(worst, abs(fast - slow))
    return worst <= 1e-12, f"fast vs generic {worst:.1e}"


def _gauss_small():
    w = gaussian_width(Gauss1D(0.3, 0.25), Gauss1D(0.0, 1.0))
    integral = width_integral(w)
    p, q = Gauss1D(0.3, 0.25), Gauss1D(0.0, 1.0)
    kl, c = gaussian_kl(p, q), gaussian_csd(p, q)
    ok = abs(integral - 1) <= 1e-6 and kl <= c <= kl + math.log2(kl + 1) + 1
    return ok, f"integral={integral:.9f} kl={kl:.4f} csd={c:.4f}"


def _mc_cross_entropy():
    lines, ok = [], True
    rng = np.random.default_rng(11)
    joints = [("bsc:0.11", preset_joint("bsc:0.11"))] + [
        (f"random{i}", random_joint(rng, 4, 5)) for i in range(2)]
    for name, j in joints:
        seeds = trial_seeds(1000, 100_000)
        run = run_trials(j, draw_inputs(j, seeds), seeds)
        est = run.neg_log2_q.mean()
        se = run.neg_log2_q.std(ddof=1) / math.sqrt(run.k.size)
        ref = cross_entropy_oracle(j)
        ok &= abs(est - ref) <= 3 * se
        lines.append(f"{name} {est:.4f}~{ref:.4f}")
    return ok, ", ".join(lines)


def _gof_full():
    worst = 1.0
    for spec in ("bsc:0.11", "bec:0.3", "uniform-additive:8:3"):
        j = preset_joint(spec)
        for x in range(j.n_inputs):
            res = simulate_batch(j, x, 100_000, 500 + 1_000_003 * x)
            worst = min(worst, chi_square_pvalue(res.y_counts, np.asarray(j.channel[x], dtype=float)))
    return worst > GOF_ALPHA, f"min p-value {worst:.4f}"


def _rate_full():
    ok, parts = True, []
    for spec in ("bsc:0.11", "bec:0.3", "identity:4"):
        rep = measure_rate(preset_joint(spec), 100_000, 77)
        ok &= rep.bound_ok
        parts.append(f"{spec} {rep.mean_length:.3f}")
    return ok, ", ".join(parts)


def _scaling_full():
    bec = redundancy_curve(preset_joint("bec:0.3"), [1, 16, 256, 4096, 16384])
    bsc = redundancy_curve(preset_joint("bsc:0.11"), [16, 256, 4096, 16384])
    worst = max(abs(p.redundancy) for p in bec)
    norm = bsc[-1].normalized
    return worst <= 1e-9 and 0.40 <= norm <= 0.60, f"bec max {worst:.1e}, bsc normalized {norm:.4f}"


def _awgn_hits():
    model = AwgnModel()
    rng = np.random.default_rng(5)
    xs, _ = model.sample_joint(rng, 100_000)
    ok, parts = True, []
    for y, level in ((0.3, 1.5), (-0.4, 1.1), (1.2, 0.8)):
        w = model.width(y, level)
        hit = np.zeros(xs.size, dtype=bool)
        for lo, hi in model.acceptance_set(y, level):
            hit |= (xs >= lo) & (xs <= hi)
        se = math.sqrt(max(w * (1 - w), 1e-12) / xs.size)
        ok &= abs(hit.mean() - w) <= 3 * se
        parts.append(f"{hit.mean():.4f}~{w:.4f}")
    return ok, ", ".join(parts)


QUICK = [
    ("kl-csd sandwich", _sandwich),
    ("singular iff I_F = I", _singular_equality),
    ("cross-entropy window", lambda: _window(50)),
    ("exact normalization", _normalization),
    ("exact index law", _index_law),
    ("codec round trip", lambda: _round_trip(200)),
    ("singular pre-filter", lambda: _equivalence(50)),
    ("product fast paths", _product_small),
    ("gaussian width", _gauss_small),
]

FULL = QUICK + [
    ("monte carlo cross-entropy", _mc_cross_entropy),
    ("output goodness of fit", _gof_full),
    ("rate bound", _rate_full),
    ("redundancy dichotomy", _scaling_full),
    ("awgn acceptance sets", _awgn_hits),
]


def run_checks(level="quick"):
    """Yield a :class:`CheckResult` per check; exceptions count as failures."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    for name, fn in (QUICK if level == "quick" else FULL):
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not crash the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
