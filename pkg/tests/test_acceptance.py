"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line and records it for the
summary printed at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from conftest import ACCEPTANCE_LINES
from gmclab.chaos import (chaos_pairings, indicator, scaling_pair_samples, smooth_bump, wick_density,
                          wick_exponential)
from gmclab.field import GridSpec, mode_variance_sum, render, sample_field, sample_values
from gmclab.montecarlo import ExperimentPlan, collect_pairings, ks_complex, no_tail_below, run_plan, tail_index
from gmclab.regions import besov_threshold, in_Ea, in_Eap
from gmclab.wavelets import (SHIPPED_FILTERS, WaveletBasis, chaos_level_sums, default_basis, default_window,
                             dwt_forward, dwt_inverse, get_basis, regularity_estimate, stats_from_sums,
                             synthesize_wavelet, wavelet_moment_scaling)
from gmclab.rng import generator

pytestmark = pytest.mark.slow

# H_4096 in 30-digit arithmetic
H4096 = 8.89510389696632287193669194727


def record(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def hull_contains(hull: ConvexHull, q: np.ndarray) -> np.ndarray:
    """Membership in a 2-d hull containing the origin, by angular bisection over its vertices."""
    v = hull.points[hull.vertices]
    v = v[np.argsort(np.arctan2(v[:, 1], v[:, 0]))]
    ang = np.arctan2(v[:, 1], v[:, 0])
    i = np.searchsorted(ang, np.arctan2(q[:, 1], q[:, 0])) % len(v)
    a, b = v[i - 1], v[i]
    cross = (b[:, 0] - a[:, 0]) * (q[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (q[:, 0] - a[:, 0])
    return cross > 0


def test_criterion_01_region_geometry():
    t0 = time.perf_counter()
    rng = generator(1001)
    hulls = {}
    for d in (1, 2, 3):
        t = np.linspace(0, 2 * np.pi, 200000, endpoint=False)
        circle = np.column_stack([np.cos(t), np.sin(t)]) * math.sqrt(d)
        hull = ConvexHull(np.vstack([circle, [[math.sqrt(2 * d), 0], [-math.sqrt(2 * d), 0]]]))
        hulls[d] = hull
    ds = rng.integers(1, 4, 100000)
    pts = rng.uniform(-1.6, 1.6, (100000, 2)) * np.sqrt(ds)[:, None]
    bad = 0
    for d in (1, 2, 3):
        sel = pts[ds == d]
        hull = hulls[d]
        inside = hull_contains(hull, sel)
        got = np.array([in_Ea(complex(x, y), d) for x, y in sel])
        # a disagreement only counts when the point is not within 1e-9 of the hull boundary
        for q in sel[got != inside]:
            margin = np.max(hull.equations[:, :2] @ q + hull.equations[:, 2])
            bad += int(abs(margin) > 1e-9)
    worst = 0.0
    for _ in range(10000):
        d = int(rng.integers(1, 4))
        p = float(rng.uniform(1, 10))
        x = math.sqrt(2 * d) / p
        ymax = math.sqrt(2 * d) - x if x >= math.sqrt(d / 2) else math.sqrt(d - x * x)
        y = float(rng.uniform(0, 0.999)) * ymax * float(rng.choice([-1, 1]))
        left = besov_threshold(complex(x, y), p, d)
        right = besov_threshold(complex(math.nextafter(x, 10.0), y), p, d)
        worst = max(worst, abs(left - right))
    elapsed = time.perf_counter() - t0
    record(1, bad == 0 and worst < 1e-12 and elapsed < 10,
           f"{bad} hull disagreements off the boundary in 1e5 points, branch gap {worst:.1e}, {elapsed:.1f}s")


def test_criterion_02_field_law():
    grid = GridSpec(1, 14)
    N, M = 2**12, 20000
    lags = np.array([0, 1, 2, 3, 4, 6, 8, 12, 16, 32, 64, 128, 256, 512, 1024, 2048, 3000, 4096, 6000, 8192])
    acc = np.zeros(grid.n)
    for start in range(0, M, 500):
        X = sample_values(grid, N, [(2002, i) for i in range(start, start + 500)])
        F = np.fft.rfft(X, axis=1)
        acc += np.fft.irfft(np.abs(F) ** 2, n=grid.n, axis=1).sum(axis=0)
    # average over realizations and base points (stationarity)
    emp = acc[lags] / (M * grid.n)
    k = np.arange(1, N + 1)
    oracle = np.array([np.sum(np.cos(2 * np.pi * k * L / grid.n) / k) for L in lags])
    gap = float(np.max(np.abs(emp - oracle)))
    sig_err = abs(mode_variance_sum(1, N) - H4096)
    record(2, gap < 0.03 and sig_err < 1e-10,
           f"max covariance gap {gap:.4f} over 20 lags (tol 0.03), |sigma_N^2 - H_N| = {sig_err:.1e}")


def test_criterion_03_scaling_relation():
    betas = [0.5j, 1.0j, 0.5 + 0.5j]
    n_tests = 3 * len(betas)
    level = 0.01 / n_tests
    pmin = 1.0
    parts = []
    for b in betas:
        # |beta| = 1 is the boundary of E_a for d = 1; the finite-cutoff sampler is still defined there
        sp = scaling_pair_samples(b, 1 / 16, 0.25, 256, 5000, 3003, allow_boundary=True)
        for name, (_, pv) in ks_complex(sp.lhs, sp.rhs).items():
            pmin = min(pmin, pv)
            parts.append(f"{b}:{name}={pv:.3f}")
    record(3, pmin > level, f"min KS p-value {pmin:.4f} > {level:.4f} (Bonferroni over {n_tests})")


def test_criterion_04_imaginary_moments():
    grid = GridSpec(1, 12)
    f = smooth_bump(grid, 0.5, 0.25)
    vals = collect_pairings(grid, 1024, [0.8j], [f], 40000, 4004)[0, 0]
    a = np.abs(vals)
    changes = {}
    for p in (2, 4, 6):
        small, big = np.mean(a[:10000] ** p), np.mean(a**p)
        changes[p] = abs(big - small) / big
        assert in_Eap(0.8j, p, 1)
    tail = tail_index(a, n_boot=200, seed=4)
    ok = max(changes.values()) < 0.10 and no_tail_below(tail, 10)
    record(4, ok, "M-change " + ", ".join(f"p={p}: {c:.3f}" for p, c in changes.items())
           + f"; tail detector: {tail.message}")


def test_criterion_05_real_moment_cutoff():
    grid = GridSpec(1, 13)
    M = 100000
    vals = collect_pairings(grid, 2**12, [1.0], [indicator(grid)], M, 5005, chunk_size=1000)[0, 0]
    tail = tail_index(vals.real, M // 100, n_boot=300, seed=5)
    sens = ", ".join(f"k={k}: {v:.2f}" for k, v in tail.sensitivity.items())
    ok = 1.7 <= tail.alpha_hat <= 2.3 and tail.plateau
    record(5, ok, f"Hill {tail.alpha_hat:.3f} CI [{tail.ci[0]:.2f}, {tail.ci[1]:.2f}], plateau {tail.plateau} ({sens})")


def besov_run(beta, d, m, N, M, seed):
    grid = GridSpec(d, m)
    basis = default_basis(d)
    J = basis.max_levels(m)
    res = chaos_level_sums(grid, N, beta, [(seed, i) for i in range(M)], (2.0,), basis, J, batch=8)
    sums = {j: res[2.0][:, c] for c, j in enumerate(res["levels"])}
    return regularity_estimate(stats_from_sums(sums, 2.0, 0.0, d), 2.0, d, default_window(m, J))


def test_criterion_06_besov_exponent():
    b2 = 1j / math.sqrt(2)
    est2 = besov_run(b2, 2, 9, 128, 200, 6006)
    target2 = besov_threshold(b2, 2, 2)
    # same grid-to-cutoff ratio in d = 1
    est1 = besov_run(0.8j, 1, 12, 1024, 200, 6007)
    target1 = besov_threshold(0.8j, 2, 1)
    ok = abs(est2.s_hat - target2) <= 0.15 and abs(est1.s_hat - target1) <= 0.15
    record(6, ok, f"d=2: s_hat {est2.s_hat:.3f} vs {target2:.3f}; d=1: s_hat {est1.s_hat:.3f} vs {target1:.3f}")


def test_criterion_07_moment_scaling():
    out = []
    ok = True
    for beta, seed in ((0.8j, 7007), (0.5, 7008)):
        fit = wavelet_moment_scaling(beta, 2.0, d=1, m=15, N=2**14, M=1000, seed=seed, window=(4, 10))
        ok &= abs(fit.slope - fit.predicted) <= 0.1
        out.append(f"beta={beta}: slope {fit.slope:.3f} vs {fit.predicted:.3f}")
    record(7, ok, "; ".join(out))


def test_criterion_08_wick_and_conjugation():
    t0 = time.perf_counter()
    rng = generator(8008)
    grid = GridSpec(1, 10)
    N, M = 256, 4000
    worst = 0.0
    n = 0
    while n < 10:
        beta = complex(*rng.uniform(-1.4, 1.4, 2))
        if not (in_Ea(beta, 1) and in_Eap(beta, 2, 1)):
            continue
        center, radius = float(rng.uniform(0, 1)), float(rng.uniform(0.05, 0.45))
        f = smooth_bump(grid, center, radius) if n % 2 == 0 else indicator(grid, center, radius)
        vals = chaos_pairings(grid, N, beta, f, [(8008, n, i) for i in range(M)])
        se = math.sqrt(np.var(vals.real, ddof=1) / M + np.var(vals.imag, ddof=1) / M)
        worst = max(worst, abs(np.mean(vals) - f.integral) / se)
        n += 1
    fr = render(sample_field(grid, N, 8))
    conj = np.array_equal(wick_exponential(fr, fr.sigma2, 0.3 - 0.7j).values,
                          np.conj(wick_exponential(fr, fr.sigma2, 0.3 + 0.7j).values))
    target = math.exp(0.81 * fr.sigma2 / 2)
    mod = float(np.max(np.abs(np.abs(wick_density(fr.values, fr.sigma2, 0.9j)) - target)) / target)
    elapsed = time.perf_counter() - t0
    ok = worst < 3 and conj and mod < 1e-12 and elapsed < 60
    record(8, ok, f"max |mean - int f| = {worst:.2f} sigma over 10 (beta, f); conjugation exact {conj}; "
                  f"modulus error {mod:.1e}; {elapsed:.1f}s")


def test_criterion_09_transforms():
    rng = generator(9009)
    worst = 0.0
    for name in SHIPPED_FILTERS:
        basis = get_basis(name)
        for d, m, j, k in ((1, 11, 6, 13), (2, 7, 5, (7, 21))):
            x = rng.standard_normal((2**m,) * d) + 1j * rng.standard_normal((2**m,) * d)
            dec = dwt_forward(x, basis, d=d)
            energy = np.sum(np.abs(x) ** 2) * 2.0 ** (-m * d)
            worst = max(worst, float(np.max(np.abs(dwt_inverse(dec) - x))), abs(dec.energy() - energy) / energy)
            grid = GridSpec(d, m)
            for i, nu in enumerate(WaveletBasis.orientations(d)):
                vals, _ = synthesize_wavelet(grid, j, k, nu, name)
                single = dwt_forward(vals, basis, J=m - j, d=d)
                idx = (i, *np.atleast_1d(k))
                c = single.details[j][idx]
                single.details[j][idx] = 0
                others = max(np.max(np.abs(a)) for a in single.details.values())
                worst = max(worst, abs(c - 1), others, float(np.max(np.abs(single.coarse))))
    record(9, worst < 1e-9, f"max reconstruction/Parseval/delta error {worst:.1e} over {len(SHIPPED_FILTERS)} filters, d=1,2")


def test_criterion_10_reproducibility(tmp_path):
    specs = [dict(kind="moments", betas=[0.6j, 0.4 + 0.3j], m=10, N=256, M=2000, p_list=[2.0, 4.0]),
             dict(kind="scaling", betas=[0.5j], m=10, N=128, M=600),
             dict(kind="besov", betas=[0.7j], m=10, N=256, M=24, chunk_size=6)]
    identical = True
    for i, spec in enumerate(specs):
        outs = []
        for w in (1, 4, 8):
            spec_full = dict(seed=10010, chunk_size=100, out_dir=str(tmp_path / f"{i}_{w}"))
            spec_full.update(spec)
            paths = run_plan(ExperimentPlan(**spec_full), workers=w)
            outs.append({k: sorted(v.read_text().splitlines()) for k, v in paths.items()
                         if k not in ("report", "manifest")})
        identical &= bool(outs[0]) and outs[0] == outs[1] == outs[2]
    record(10, identical, "canonical-sorted data files identical for 1, 4 and 8 workers (moments, scaling, besov)")
