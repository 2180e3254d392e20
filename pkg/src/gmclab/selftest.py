"""Fast property checks run by ``gmclab selftest``."""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .chaos import wick_density
from .field import GridSpec, mode_variance_sum, sample_values
from .montecarlo import ExperimentPlan, run_plan
from .regions import in_Ea
from .rng import child, generator
from .wavelets import SHIPPED_FILTERS, dwt_forward, dwt_inverse, get_basis

Result = tuple[str, bool, str]


def _hull_oracle(d: int, n_circle: int = 4096) -> ConvexHull:
    t = np.linspace(0, 2 * np.pi, n_circle, endpoint=False)
    pts = np.column_stack([np.cos(t), np.sin(t)]) * math.sqrt(d)
    tips = np.array([[math.sqrt(2 * d), 0.0], [-math.sqrt(2 * d), 0.0]])
    return ConvexHull(np.vstack([pts, tips]))


def check_regions(seed: int, n: int = 4000) -> Result:
    rng = generator(child(seed, 101))
    bad = 0
    for d in (1, 2, 3):
        hull = _hull_oracle(d)
        pts = rng.uniform(-1.6, 1.6, size=(n, 2)) * math.sqrt(d)
        margin = pts @ hull.equations[:, :2].T + hull.equations[:, 2]
        worst = margin.max(axis=1)
        # the inscribed polygon sits inside the circle by at most r (1 - cos(pi/n))
        clear = np.abs(worst) > 1e-5 * math.sqrt(d)
        inside = worst < 0
        got = np.array([in_Ea(complex(x, y), d) for x, y in pts])
        bad += int(np.sum((got != inside) & clear))
    return "regions oracle", bad == 0, f"{bad} disagreements away from the boundary"


def check_transforms(seed: int) -> Result:
    rng = generator(child(seed, 102))
    worst = 0.0
    for name in SHIPPED_FILTERS:
        basis = get_basis(name)
        for d, m in ((1, 10), (2, 6)):
            x = rng.standard_normal((2**m,) * d) + 1j * rng.standard_normal((2**m,) * d)
            dec = dwt_forward(x, basis, d=d)
            energy = np.sum(np.abs(x) ** 2) * (1.0 / 2**m) ** d
            worst = max(worst, abs(dec.energy() - energy) / energy,
                        float(np.max(np.abs(dwt_inverse(dec) - x))))
    return "Parseval and reconstruction", worst < 1e-9, f"max error {worst:.2e}"


def check_wick(seed: int, M: int = 4000) -> Result:
    grid = GridSpec(1, 8)
    N = 64
    sigma2 = mode_variance_sum(1, N)
    X = sample_values(grid, N, [child(seed, 103, i) for i in range(M)])
    worst = 0.0
    for beta in (0.5, 0.6j, 0.3 + 0.4j):
        vals = wick_density(X[:, 0], sigma2, beta)
        se = np.sqrt(np.var(vals.real, ddof=1) / M + np.var(vals.imag, ddof=1) / M)
        worst = max(worst, abs(np.mean(vals) - 1.0) / se)
    conj_ok = np.array_equal(wick_density(X[:8], sigma2, 0.3 - 0.4j), np.conj(wick_density(X[:8], sigma2, 0.3 + 0.4j)))
    ok = worst < 4.5 and conj_ok
    return "Wick normalisation", ok, f"max |mean - 1| = {worst:.2f} standard errors, conjugation exact: {conj_ok}"


def check_determinism(seed: int) -> Result:
    with tempfile.TemporaryDirectory() as tmp:
        texts = []
        for w in (1, 2):
            plan = ExperimentPlan(kind="moments", betas=[0.5j, 0.4], d=1, m=8, N=32, M=120, seed=seed,
                                  chunk_size=30, out_dir=str(Path(tmp) / f"w{w}"))
            texts.append(Path(run_plan(plan, workers=w)["samples"]).read_bytes())
    same = texts[0] == texts[1]
    return "worker determinism", same, "identical samples for 1 and 2 workers" if same else "outputs differ"


def run_selftest(seed: int = 0) -> list[Result]:
    return [check(seed) for check in (check_regions, check_transforms, check_wick, check_determinism)]
