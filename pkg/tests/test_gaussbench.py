import io
import math

import numpy as np
import pytest
from scipy import integrate, stats

from ringtoss.exceptions import NotAbsolutelyContinuous, UnboundedRatio
from ringtoss.gaussbench import (AwgnModel, Gauss1D, adaptive_simpson, awgn_demo, awgn_simulate,
                                 figure1_rows, gaussian_csd, gaussian_kl, gaussian_width,
                                 width_integral, write_rows_csv)
from ringtoss.verify import chi_square_pvalue


@pytest.fixture(scope="module")
def awgn():
    return AwgnModel()


def _kl_closed_form(mp, vp, mq, vq):
    return 0.5 * (vp / vq + (mp - mq) ** 2 / vq - 1 - math.log(vp / vq)) / math.log(2)


def _random_bounded_pair(rng):
    if rng.random() < 0.5:
        vq = rng.uniform(0.5, 2.0)
        return (Gauss1D(rng.uniform(-1, 1), vq * rng.uniform(0.2, 0.9)),
                Gauss1D(rng.uniform(-1, 1), vq))
    b = rng.uniform(2.0, 5.0)
    return (Gauss1D(rng.uniform(-1, 1), rng.uniform(0.3, 2.0), b),
            Gauss1D(rng.uniform(-1, 1), rng.uniform(0.3, 2.0), b))


def _truncnorm(g):
    s = g.std
    if g.truncation is None:
        return stats.norm(g.mean, s)
    b = g.truncation
    return stats.truncnorm((-b - g.mean) / s, (b - g.mean) / s, loc=g.mean, scale=s)


def test_equal_pair():
    w = gaussian_width(Gauss1D(0.2, 1.3), Gauss1D(0.2, 1.3))
    assert w.eval(0.5) == pytest.approx(1.0) and w.eval(1.0) == pytest.approx(1.0)
    assert w.eval(1.01) == 0.0
    assert gaussian_csd(Gauss1D(0.2, 1.3), Gauss1D(0.2, 1.3)) == pytest.approx(0.0, abs=1e-9)


def test_figure_pair_width_monte_carlo():
    p, q = Gauss1D(0.3, 0.25), Gauss1D(0.0, 1.0)
    n = 10_000_000
    z = np.random.default_rng(2).standard_normal(n)
    ratio = stats.norm.pdf(z, 0.3, 0.5) / stats.norm.pdf(z)
    hits = (ratio >= 1.5).mean()
    w = gaussian_width(p, q).eval(1.5)
    assert abs(hits - w) <= 3 * math.sqrt(w * (1 - w) / n)


def test_superlevel_set_against_grid():
    p, q = Gauss1D(0.3, 0.25), Gauss1D(0.0, 1.0)
    w = gaussian_width(p, q)
    z = np.linspace(-6, 6, 200_001)
    ratio = stats.norm.pdf(z, 0.3, 0.5) / stats.norm.pdf(z)
    for level in (0.2, 1.0, 1.5, 2.0):
        (lo, hi), = w.superlevel_set(level)
        inside = z[ratio >= level]
        assert lo == pytest.approx(inside.min(), abs=1e-4) and hi == pytest.approx(inside.max(), abs=1e-4)


def test_integral_one_random_pairs():
    rng = np.random.default_rng(13)
    for _ in range(20):
        p, q = _random_bounded_pair(rng)
        assert width_integral(gaussian_width(p, q)) == pytest.approx(1.0, abs=1e-6)


def test_monotone_on_grid():
    rng = np.random.default_rng(14)
    for _ in range(5):
        p, q = _random_bounded_pair(rng)
        w = gaussian_width(p, q)
        vals = [w.eval(l) for l in np.linspace(0, w.max_level * 1.05, 1000)]
        assert vals[0] == 1.0
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_csd_sandwich_figure_pair():
    p, q = Gauss1D(0.3, 0.25), Gauss1D(0.0, 1.0)
    kl = (0.5 * (0.25 + 0.09 - 1 - math.log(0.25))) / math.log(2)
    assert gaussian_kl(p, q) == pytest.approx(kl, abs=1e-14)
    c = gaussian_csd(p, q)
    assert kl <= c <= kl + math.log2(kl + 1) + 1


def test_csd_sandwich_random_pairs():
    rng = np.random.default_rng(15)
    for _ in range(100):
        p, q = _random_bounded_pair(rng)
        if p.truncation is None:
            kl = _kl_closed_form(p.mean, p.variance, q.mean, q.variance)
        else:
            tp, tq = _truncnorm(p), _truncnorm(q)
            kl = integrate.quad(lambda z: tp.pdf(z) * (tp.logpdf(z) - tq.logpdf(z)),
                                -p.truncation, p.truncation, limit=200)[0] / math.log(2)
        assert gaussian_kl(p, q) == pytest.approx(kl, abs=1e-8)
        c = gaussian_csd(p, q)
        assert kl - 1e-6 <= c <= kl + math.log2(kl + 1) + 1 + 1e-6


def test_shrinking_perturbation():
    vals = [gaussian_csd(Gauss1D(d, 1.0, 6.0), Gauss1D(0.0, 1.0, 6.0)) for d in (0.4, 0.2, 0.1)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_unbounded_ratio():
    with pytest.raises(UnboundedRatio):
        gaussian_width(Gauss1D(0.0, 1.0), Gauss1D(0.0, 1.0 - 1e-3))
    with pytest.raises(UnboundedRatio):
        gaussian_width(Gauss1D(0.5, 1.0), Gauss1D(0.0, 1.0))
    with pytest.raises(NotAbsolutelyContinuous):
        gaussian_width(Gauss1D(0.0, 1.0, 5.0), Gauss1D(0.0, 1.0, 4.0))


def test_gauss1d_against_scipy():
    g = Gauss1D(0.4, 0.7, 2.0)
    ref = _truncnorm(g)
    z = np.linspace(-2, 2, 11)
    assert np.allclose(g.pdf(z), ref.pdf(z), rtol=1e-12)
    assert np.allclose(g.cdf(z), ref.cdf(z), atol=1e-14)
    assert np.allclose(g.ppf([0.1, 0.5, 0.9]), ref.ppf([0.1, 0.5, 0.9]), atol=1e-12)
    assert g.mass(-1, 1) == pytest.approx(ref.cdf(1) - ref.cdf(-1), abs=1e-14)


def test_adaptive_simpson():
    assert adaptive_simpson(math.sin, 0, math.pi, 1e-10) == pytest.approx(2.0, abs=1e-10)
    assert adaptive_simpson(math.sqrt, 0, 1, 1e-8) == pytest.approx(2 / 3, abs=1e-8)


def test_awgn_marginals(awgn):
    b = awgn.bound
    assert integrate.quad(lambda x: float(awgn.px_pdf(x)), -b, b)[0] == pytest.approx(1.0, abs=1e-10)
    assert integrate.quad(lambda y: float(awgn.py_pdf(y)), -b, b)[0] == pytest.approx(1.0, abs=1e-10)
    xs, ys = awgn.sample_joint(np.random.default_rng(4), 20_000)
    assert stats.kstest(ys, awgn.y_marginal.cdf).pvalue > 1e-3
    assert stats.kstest(xs, awgn.x_marginal.cdf).pvalue > 1e-3


def test_awgn_bound(awgn):
    g = np.linspace(-awgn.bound, awgn.bound, 801)
    assert awgn.ratio(g[:, None], g[None, :]).max() <= awgn.bound_m


def test_awgn_worked_example(awgn):
    rows = awgn_demo(-0.5, model=awgn, proposals=[(0.3, 1.5), (-0.4, 1.1)])
    assert [(r.i, r.y, r.level, r.accept) for r in rows] == [(1, 0.3, 1.5, False), (2, -0.4, 1.1, True)]


def test_awgn_symmetric_accept(awgn):
    r0 = float(awgn.ratio(0.0, 0.0))
    rows = awgn_demo(0.0, model=awgn, proposals=[(0.0, 0.5 * r0)])
    assert len(rows) == 1 and rows[0].accept


def test_awgn_seeded_trace_is_deterministic(awgn):
    a = awgn_demo(0.8, model=awgn, seed=9)
    k, y = awgn_simulate(awgn, 0.8, 1, 9)
    assert a[-1].accept and not any(r.accept for r in a[:-1])
    assert (a[-1].i, a[-1].y) == (k[0], y[0])


def test_awgn_output_goodness_of_fit(awgn):
    x = 0.7
    _, ys = awgn_simulate(awgn, x, 10_000, 31)
    ref = _truncnorm(Gauss1D(x, 0.25, awgn.bound))
    edges = ref.ppf(np.linspace(0, 1, 21))
    counts = np.histogram(ys, bins=edges)[0]
    assert chi_square_pvalue(counts, np.full(20, 0.05)) > 1e-3


def test_acceptance_set_hits(awgn):
    xs, _ = awgn.sample_joint(np.random.default_rng(6), 100_000)
    for y, level in ((0.3, 1.5), (-1.0, 3.0)):
        w = awgn.width(y, level)
        hit = np.zeros(xs.size, dtype=bool)
        for lo, hi in awgn.acceptance_set(y, level):
            hit |= (xs >= lo) & (xs <= hi)
        assert abs(hit.mean() - w) <= 3 * math.sqrt(w * (1 - w) / xs.size)
        direct = awgn.ratio(y, xs) >= level
        assert np.mean(direct != hit) < 1e-4


def test_csv_rows():
    rows = figure1_rows(Gauss1D(0.3, 0.25), Gauss1D(0.0, 1.0), grid_points=5)
    assert rows[0] == (0.0, 1.0) and rows[-1][1] == pytest.approx(0.0, abs=1e-9)
    fh = io.StringIO()
    write_rows_csv(fh, ("i", "y", "level", "accept"), [(1, 0.3, 1.5, False), (2, -0.4, 1.1, True)])
    assert fh.getvalue() == "i,y,level,accept\n1,0.3,1.5,0\n2,-0.4,1.1,1\n"
