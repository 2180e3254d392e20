"""Reproducible parallel Monte Carlo experiments and their estimators.

Realization ``i`` of an experiment with master seed ``s`` uses the field
stream keyed by (s, i). Work is cut into fixed chunks of realization
indices; chunk results depend on the indices only, so the output does not
depend on the number of workers. Completed chunks are recorded in a
manifest and skipped when a run is resumed.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .chaos import (TestFunction, indicator, pair_values, rescaled_bump, smooth_bump,
                    wavelet_function, wick_density)
from .field import GridSpec, VALID_RADIUS, dyadic_exponent, mode_variance_sum, sample_values
from .regions import ComplexParam, in_Ea, in_Eap
from .rng import Seed, child, derive_seed, generator, normals
from .wavelets import (chaos_level_sums, default_basis, default_window, get_basis,
                       regularity_estimate, stats_from_sums, write_level_stats_csv)

THREADS_ENV = "GMCLAB_THREADS"
BOOTSTRAP_RESAMPLES = 1000
CI_LEVEL = 0.95
PLATEAU_TOL = 0.15


class PlanValidationError(ValueError):
    """An experiment plan is malformed or asks for parameters outside E_a."""


class InsufficientSamplesError(ValueError):
    pass


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


# ---------------------------------------------------------------------------
# plans


def _beta_from(obj) -> complex:
    if isinstance(obj, (list, tuple)):
        return complex(float(obj[0]), float(obj[1]))
    if isinstance(obj, str):
        return complex(obj.replace(" ", "").replace("i", "j"))
    return complex(obj)


@dataclass
class ExperimentPlan:
    """Everything needed to reproduce one experiment."""

    kind: str
    betas: list[complex]
    d: int = 1
    m: int = 12
    N: int = 1024
    M: int = 1000
    seed: int = 0
    test_function: dict = dc_field(default_factory=lambda: {"kind": "SmoothBump", "center": 0.5,
                                                            "radius": 0.25})
    p_list: list[float] = dc_field(default_factory=lambda: [2.0])
    filter_id: str | None = None
    window: tuple[int, int] | None = None
    epsilon: float = 0.25
    phi_radius: float = 1 / 16
    chunk_size: int = 250
    out_dir: str = "out"

    KINDS = ("moments", "besov", "scaling")

    def __post_init__(self):
        self.betas = [_beta_from(b) for b in self.betas]
        self.p_list = [float(p) for p in self.p_list]
        if self.window is not None:
            self.window = tuple(int(w) for w in self.window)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.d, self.m)

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise PlanValidationError(f"unknown experiment kind {self.kind!r}")
        try:
            grid = self.grid
        except ValueError as exc:
            raise PlanValidationError(str(exc)) from None
        # moment and scaling estimates carry bootstrap CIs; the regression only needs one realization
        if self.kind != "besov" and self.M < 30:
            raise PlanValidationError("M must be >= 30 for any CI-bearing estimator")
        if self.M < 1:
            raise PlanValidationError("M must be positive")
        if not self.betas:
            raise PlanValidationError("no beta values given")
        for b in self.betas:
            if not in_Ea(b, self.d):
                raise PlanValidationError(region_diagnostic(b, self.d))
        n_fine = self.N
        if self.kind == "scaling":
            try:
                n_fine = self.N * 2 ** dyadic_exponent(self.epsilon)
            except ValueError as exc:
                raise PlanValidationError(str(exc)) from None
            if self.M < 100:
                raise PlanValidationError("scaling tests need M >= 100")
            if not 0 < self.phi_radius < VALID_RADIUS:
                raise PlanValidationError(f"phi_radius must lie in (0, {VALID_RADIUS})")
        if not 1 <= n_fine <= grid.n // 2:
            raise PlanValidationError(f"cutoff {n_fine} exceeds the Nyquist frequency {grid.n // 2}")
        if any(p < 1 for p in self.p_list):
            raise PlanValidationError("moment orders must be >= 1")
        if self.chunk_size < 1:
            raise PlanValidationError("chunk_size must be positive")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["betas"] = [[b.real, b.imag] for b in self.betas]
        out["window"] = list(self.window) if self.window else None
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = set(data) - set(known)
        if unknown:
            raise PlanValidationError(f"unknown plan fields: {sorted(unknown)}")
        return cls(**known)

    def digest(self) -> str:
        """Hash of everything that affects results (not the output path)."""
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def load_plan(path) -> ExperimentPlan:
    """Read a plan from a JSON or TOML document."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    return ExperimentPlan.from_dict(data)


def region_diagnostic(beta, d: int) -> str:
    b = ComplexParam.of(beta)
    r = math.hypot(b.re, b.im)
    return (f"beta={b.re:+.4g}{b.im:+.4g}i is outside E_a for d={d}: |beta|={r:.4g} "
            f"(disk radius sqrt(d)={math.sqrt(d):.4g}), |Re|+|Im|={abs(b.re) + abs(b.im):.4g} "
            f"(limit sqrt(2d)={math.sqrt(2 * d):.4g})")


def make_test_function(grid: GridSpec, spec: dict) -> TestFunction:
    kind = spec.get("kind", "SmoothBump")
    center = spec.get("center", 0.5)
    if kind == "SmoothBump":
        return smooth_bump(grid, center, spec.get("radius", 0.25))
    if kind == "Indicator":
        return indicator(grid, center, spec.get("radius"))
    if kind == "RescaledBump":
        return rescaled_bump(grid, spec["epsilon"], center, spec.get("radius", 0.25))
    if kind == "Wavelet":
        return wavelet_function(grid, spec["j"], spec.get("k", 0), spec.get("nu"), spec.get("filter"))
    raise PlanValidationError(f"unknown test function kind {kind!r}")


# ---------------------------------------------------------------------------
# statistics


@dataclass
class EstimateReport:
    estimate: float
    ci: tuple[float, float]
    M: int
    seed: object
    wall_time: float = 0.0
    meta: dict = dc_field(default_factory=dict)

    @property
    def ci_width(self) -> float:
        return self.ci[1] - self.ci[0]

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "ci": list(self.ci), "M": self.M, "seed": self.seed,
                "meta": self.meta, "timing": {"wall_time": self.wall_time}}


def bootstrap_ci(values: np.ndarray, statistic: Callable = np.mean, n_resamples: int = BOOTSTRAP_RESAMPLES,
                 level: float = CI_LEVEL, seed=0) -> tuple[float, float]:
    """Percentile bootstrap confidence interval."""
    x = np.asarray(values)
    n = len(x)
    rng = generator(seed)
    reps = np.empty(n_resamples)
    block = max(1, min(n_resamples, 2_000_000 // max(n, 1)))
    for start in range(0, n_resamples, block):
        stop = min(n_resamples, start + block)
        idx = rng.integers(0, n, size=(stop - start, n))
        reps[start:stop] = statistic(x[idx], axis=1)
    lo, hi = np.quantile(reps, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def abs_moment_report(values: np.ndarray, p: float, seed=0, meta: dict | None = None) -> EstimateReport:
    """Mean of |values|^p with bootstrap CI."""
    t0 = time.perf_counter()
    a = np.abs(np.asarray(values)) ** p
    est = float(np.mean(a))
    ci = (est, est) if np.ptp(a) == 0 else bootstrap_ci(a, seed=seed)
    return EstimateReport(est, ci, len(a), seed, time.perf_counter() - t0, dict(meta or {}))


def hill(values: np.ndarray, k: int) -> float:
    """Hill estimate of the tail index from the top ``k`` order statistics."""
    x = np.asarray(values, dtype=float)
    top = np.partition(x, len(x) - k - 1)[len(x) - k - 1:]
    top.sort()
    ref = top[0]
    if ref <= 0:
        raise ValueError("Hill estimator needs positive order statistics")
    return float(k / np.sum(np.log(top[1:] / ref)))


@dataclass
class TailIndexReport:
    alpha_hat: float
    ci: tuple[float, float]
    k: int
    M: int
    sensitivity: dict[int, float]
    plateau: bool
    message: str

    @property
    def finite_tail(self) -> bool:
        return self.plateau

    def to_dict(self) -> dict:
        return {"alpha_hat": self.alpha_hat, "ci": list(self.ci), "k": self.k, "M": self.M,
                "sensitivity": {str(k): v for k, v in self.sensitivity.items()},
                "plateau": self.plateau, "message": self.message}


def tail_index(samples, k: int | None = None, n_boot: int = BOOTSTRAP_RESAMPLES, seed=0,
               plateau_tol: float = PLATEAU_TOL) -> TailIndexReport:
    """Hill estimator with bootstrap CI and a k-sensitivity report.

    Hill estimates at k in {M/100, M/50, M/20} form a plateau when their
    spread is within ``plateau_tol`` of the median. Without a plateau the
    estimates drift with k and no finite tail index is reported.
    """
    x = np.abs(np.asarray(samples)).astype(float)
    M = len(x)
    k = M // 100 if k is None else int(k)
    if k < 50 or k > M // 10:
        raise InsufficientSamplesError(f"need 50 <= k <= M/10, got k={k}, M={M}")
    alpha = hill(x, k)
    rng = generator(seed)
    reps = np.array([hill(x[rng.integers(0, M, M)], k) for _ in range(n_boot)])
    ci = tuple(float(v) for v in np.quantile(reps, [(1 - CI_LEVEL) / 2, (1 + CI_LEVEL) / 2]))
    ks = sorted({max(1, M // 100), max(1, M // 50), max(1, M // 20)})
    sens = {kk: hill(x, kk) for kk in ks}
    vals = np.array(list(sens.values()))
    spread = float((vals.max() - vals.min()) / np.median(vals))
    plateau = spread <= plateau_tol
    if plateau:
        msg = f"tail index {alpha:.3g} (plateau spread {spread:.2f})"
    else:
        trend = "rises" if sens[ks[0]] > sens[ks[-1]] else "falls"
        msg = (f"no finite tail index detected (Hill estimate {trend} toward the extreme tail, "
               f"spread {spread:.2f})")
    return TailIndexReport(alpha, ci, k, M, sens, plateau, msg)


def no_tail_below(report: TailIndexReport, threshold: float) -> bool:
    """True when the detector reports no finite tail index below ``threshold``."""
    return not report.plateau or report.alpha_hat >= threshold


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 100 or len(b) < 100:
        raise InsufficientSamplesError("KS test needs at least 100 samples per side")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("degenerate constant sample")
    res = stats.ks_2samp(a, b, method="auto")
    return float(res.statistic), float(res.pvalue)


def ks_complex(a, b) -> dict[str, tuple[float, float]]:
    """KS tests on real part, imaginary part and modulus.

    A component that is constant on both sides (e.g. the imaginary part for
    real beta) is reported as (0, 1).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    out = {}
    for name, fn in (("re", np.real), ("im", np.imag), ("abs", np.abs)):
        x, y = fn(a), fn(b)
        if np.ptp(x) == 0 and np.ptp(y) == 0 and np.all(x == y[0]):
            out[name] = (0.0, 1.0)
        else:
            out[name] = ks_two_sample(x, y)
    return out


# ---------------------------------------------------------------------------
# chunk kernels (module level so that they pickle)


def _pairings_chunk(grid: GridSpec, N: int, betas: list[complex], fs: list[TestFunction],
                    seed: Seed, indices: Sequence[int]) -> np.ndarray:
    """(n_betas, n_f, len(indices)) pairings; the field is shared across betas."""
    sigma2 = mode_variance_sum(grid.d, N)
    X = sample_values(grid, N, [child(seed, i) for i in indices])
    out = np.empty((len(betas), len(fs), len(indices)), dtype=complex)
    for a, b in enumerate(betas):
        dens = wick_density(X, sigma2, b)
        for c, f in enumerate(fs):
            out[a, c] = pair_values(dens, f)
    return out


def _besov_chunk(grid: GridSpec, N: int, betas: list[complex], powers: tuple[float, ...],
                 filter_id: str, seed: int, indices: Sequence[int]) -> np.ndarray:
    basis = get_basis(filter_id)
    seeds = [derive_seed(seed, i) for i in indices]
    rows = []
    for b in betas:
        res = chaos_level_sums(grid, N, b, seeds, powers, basis, batch=16)
        rows.append(np.stack([res[p] for p in powers]))
    return np.stack(rows)  # (n_betas, n_powers, n_idx, n_levels)


def _scaling_chunk(grid: GridSpec, N: int, betas: list[complex], phi_radius: float, epsilon: float,
                   seed: int, indices: Sequence[int]) -> np.ndarray:
    """(n_betas, 3, len(indices)): lhs, rhs, z per realization."""
    ell = dyadic_exponent(epsilon)
    N_fine = N * 2**ell
    phi = smooth_bump(grid, 0.0, phi_radius)
    phi_eps = rescaled_bump(grid, epsilon, 0.0, phi_radius)
    left = _pairings_chunk(grid, N_fine, betas, [phi_eps], derive_seed(seed, 0), indices)[:, 0]
    right = _pairings_chunk(grid, N, betas, [phi], derive_seed(seed, 1), indices)[:, 0]
    var_z = ell * math.log(2.0)
    z = math.sqrt(var_z) * normals(derive_seed(seed, 2), max(indices) + 1)[list(indices)]
    out = np.empty((len(betas), 3, len(indices)), dtype=complex)
    for a, b in enumerate(betas):
        factor = epsilon**grid.d * np.exp(b * z - b * b * var_z / 2)
        out[a, 0] = left[a]
        out[a, 1] = factor * right[a]
        out[a, 2] = z
    return out


def chunk_ranges(M: int, chunk_size: int) -> list[range]:
    return [range(s, min(M, s + chunk_size)) for s in range(0, M, chunk_size)]


def parallel_map(fn: Callable, chunks: list, workers: int | None = None) -> list:
    """Apply ``fn`` to every chunk; results come back in chunk order."""
    w = worker_count(workers)
    if w == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, chunks))


def collect_pairings(grid: GridSpec, N: int, betas: list[complex], fs: list[TestFunction], M: int,
                     seed: int, workers: int | None = None, chunk_size: int = 250) -> np.ndarray:
    """Pairings of M realizations, shape (n_betas, n_f, M)."""
    fn = partial(_pairings_chunk, grid, N, list(betas), list(fs), seed)
    parts = parallel_map(fn, chunk_ranges(M, chunk_size), workers)
    return np.concatenate(parts, axis=-1)


# ---------------------------------------------------------------------------
# estimators


def estimate_abs_moment(beta, p: float, f: TestFunction, plan: ExperimentPlan,
                        workers: int | None = None, values: np.ndarray | None = None) -> EstimateReport:
    """E|<mu_N, f>|^p with bootstrap CI, plus stability under halving N.

    Outside E_{a,p} the estimate is still computed and flagged
    ``divergence_expected``.
    """
    t0 = time.perf_counter()
    grid = plan.grid
    b = complex(beta)
    if values is None:
        values = collect_pairings(grid, plan.N, [b], [f], plan.M, plan.seed, workers,
                                  plan.chunk_size)[0, 0]
    rep = abs_moment_report(values, p, seed=derive_seed(plan.seed, 7))
    meta = {"beta": [b.real, b.imag], "p": p, "N": plan.N, "d": plan.d,
            "in_Eap": in_Eap(b, p, plan.d), "sup_norm_f": f.sup_norm}
    meta["divergence_expected"] = not meta["in_Eap"]
    if plan.N >= 2:
        coarse = collect_pairings(grid, plan.N // 2, [b], [f], plan.M, plan.seed, workers,
                                  plan.chunk_size)[0, 0]
        est_half = float(np.mean(np.abs(coarse) ** p))
        meta["estimate_half_N"] = est_half
        meta["relative_change_N"] = abs(rep.estimate - est_half) / max(abs(rep.estimate), 1e-300)
    rep.meta.update(meta)
    rep.seed = plan.seed
    rep.wall_time = time.perf_counter() - t0
    return rep


def m_stability(values: np.ndarray, p: float, m_small: int) -> float:
    """Relative change of the |.|^p mean between the first ``m_small`` samples and all."""
    a = np.abs(np.asarray(values)) ** p
    big = float(np.mean(a))
    small = float(np.mean(a[:m_small]))
    return abs(big - small) / big


# ---------------------------------------------------------------------------
# plan runner


def _fmt(x: float) -> str:
    return repr(float(x))


def _beta_tag(b: complex) -> str:
    return f"{b.real:+.6g}{b.imag:+.6g}i"


class _ChunkStore:
    """Chunk results on disk plus a manifest of completed chunk ids."""

    def __init__(self, root: Path, digest: str, resume: bool):
        self.root = root / "chunks"
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = root / "manifest.json"
        self.completed: set[int] = set()
        if resume and self.manifest.exists():
            data = json.loads(self.manifest.read_text())
            if data.get("plan_digest") == digest:
                self.completed = set(data["completed"])
        self.digest = digest
        self._write_manifest()

    def path(self, cid: int) -> Path:
        return self.root / f"chunk_{cid:06d}.npy"

    def save(self, cid: int, arr: np.ndarray) -> None:
        tmp = self.path(cid).with_suffix(".tmp.npy")
        np.save(tmp, arr)
        tmp.replace(self.path(cid))
        self.completed.add(cid)
        self._write_manifest()

    def load(self, cid: int) -> np.ndarray:
        return np.load(self.path(cid))

    def _write_manifest(self) -> None:
        self.manifest.write_text(json.dumps({"plan_digest": self.digest,
                                             "completed": sorted(self.completed)}))


def _chunk_kernel(plan: ExperimentPlan) -> Callable:
    grid = plan.grid
    if plan.kind == "moments":
        f = make_test_function(grid, plan.test_function)
        return partial(_pairings_chunk, grid, plan.N, plan.betas, [f], plan.seed)
    if plan.kind == "besov":
        fid = plan.filter_id or default_basis(plan.d).name
        return partial(_besov_chunk, grid, plan.N, plan.betas, tuple(plan.p_list), fid, plan.seed)
    return partial(_scaling_chunk, grid, plan.N, plan.betas, plan.phi_radius, plan.epsilon, plan.seed)


def run_plan(plan: ExperimentPlan, workers: int | None = None, resume: bool = True,
             max_chunks: int | None = None, config: dict | None = None) -> dict[str, Path]:
    """Execute a plan and write its data files and report.

    ``max_chunks`` stops after that many new chunks (used to exercise
    resumption); the function then returns without final outputs.
    """
    plan.validate()
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = _ChunkStore(out, plan.digest(), resume)
    chunks = chunk_ranges(plan.M, plan.chunk_size)
    todo = [i for i in range(len(chunks)) if i not in store.completed]
    if max_chunks is not None:
        todo = todo[:max_chunks]
    kernel = _chunk_kernel(plan)
    t0 = time.perf_counter()
    w = worker_count(workers)
    # process chunks in waves so the manifest advances while running
    wave = max(1, w)
    for start in range(0, len(todo), wave):
        ids = todo[start:start + wave]
        for cid, res in zip(ids, parallel_map(kernel, [chunks[i] for i in ids], w)):
            store.save(cid, res)
    if len(store.completed) < len(chunks):
        return {"manifest": store.manifest}
    data = np.concatenate([store.load(i) for i in range(len(chunks))], axis=-2 if plan.kind == "besov" else -1)
    # the output location does not affect results, so it stays out of embedded provenance
    plan_dict = plan.to_dict()
    plan_dict.pop("out_dir")
    cfg = {k: v for k, v in (config or {}).items() if k not in ("out_dir", "threads")}
    header = {"plan": plan_dict, "config": cfg, "version": __version__}
    writer = {"moments": _finish_moments, "besov": _finish_besov, "scaling": _finish_scaling}[plan.kind]
    paths = writer(plan, data, out, header)
    paths["manifest"] = store.manifest
    report_path = paths["report"]
    report = json.loads(report_path.read_text())
    report["timing"] = {"wall_time": time.perf_counter() - t0, "workers": w}
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True))
    return paths


def _csv_header(header: dict) -> str:
    return "# " + json.dumps(header, sort_keys=True) + "\n"


def _finish_moments(plan: ExperimentPlan, data: np.ndarray, out: Path, header: dict) -> dict:
    samples = out / "samples.csv"
    with open(samples, "w") as fh:
        fh.write(_csv_header(header))
        fh.write("beta_re,beta_im,index,seed,re,im\n")
        for a, b in enumerate(plan.betas):
            for i, v in enumerate(data[a, 0]):
                fh.write(f"{_fmt(b.real)},{_fmt(b.imag)},{i},{plan.seed}:{i},{_fmt(v.real)},{_fmt(v.imag)}\n")
    f = make_test_function(plan.grid, plan.test_function)
    results = []
    for a, b in enumerate(plan.betas):
        vals = data[a, 0]
        # Hill needs k = M/100 >= 50 top order statistics
        tail = tail_index(vals, n_boot=200, seed=derive_seed(plan.seed, 8)) if plan.M >= 5000 else None
        for p in plan.p_list:
            rep = abs_moment_report(vals, p, seed=derive_seed(plan.seed, 7))
            entry = {"beta": [b.real, b.imag], "p": p, "estimate": rep.estimate, "ci": list(rep.ci),
                     "M": rep.M, "in_Eap": in_Eap(b, p, plan.d), "sup_norm_f": f.sup_norm}
            if tail is not None:
                entry["tail_index"] = tail.to_dict()
            results.append(entry)
    report = out / "report.json"
    report.write_text(json.dumps({"header": header, "results": results}, indent=2, sort_keys=True))
    return {"samples": samples, "report": report}


def _finish_besov(plan: ExperimentPlan, data: np.ndarray, out: Path, header: dict) -> dict:
    from .regions import besov_threshold

    basis = get_basis(plan.filter_id) if plan.filter_id else default_basis(plan.d)
    J = basis.max_levels(plan.m)
    levels = list(range(plan.m - J, plan.m))
    window = plan.window or default_window(plan.m, J)
    results = []
    paths = {}
    for a, b in enumerate(plan.betas):
        for q, p in enumerate(plan.p_list):
            sums = {j: data[a, q, :, c] for c, j in enumerate(levels)}
            rows = stats_from_sums(sums, p, 0.0, plan.d)
            path = out / f"levels_{_beta_tag(b)}_p{p:g}.csv"
            write_level_stats_csv(path, rows)
            paths[path.stem] = path
            est = regularity_estimate(rows, p, plan.d, window)
            results.append({"beta": [b.real, b.imag], "p": p, "s_hat": est.s_hat, "stderr": est.stderr,
                            "s_predicted": besov_threshold(b, p, plan.d), "window": list(est.window),
                            "note": est.note, "filter": basis.metadata(), "grid": plan.grid.to_dict(),
                            "N": plan.N, "seed": plan.seed})
    report = out / "report.json"
    report.write_text(json.dumps({"header": header, "results": results}, indent=2, sort_keys=True))
    paths["report"] = report
    return paths


def _finish_scaling(plan: ExperimentPlan, data: np.ndarray, out: Path, header: dict) -> dict:
    samples = out / "scaling_samples.csv"
    with open(samples, "w") as fh:
        fh.write(_csv_header(header))
        fh.write("beta_re,beta_im,index,lhs_re,lhs_im,rhs_re,rhs_im,z\n")
        for a, b in enumerate(plan.betas):
            for i in range(plan.M):
                lhs, rhs, z = data[a, :, i]
                fh.write(f"{_fmt(b.real)},{_fmt(b.imag)},{i},{_fmt(lhs.real)},{_fmt(lhs.imag)},"
                         f"{_fmt(rhs.real)},{_fmt(rhs.imag)},{_fmt(z.real)}\n")
    results = []
    for a, b in enumerate(plan.betas):
        tests = ks_complex(data[a, 0], data[a, 1])
        results.append({"beta": [b.real, b.imag],
                        "ks": {k: {"statistic": s, "p_value": pv} for k, (s, pv) in tests.items()}})
    report = out / "report.json"
    report.write_text(json.dumps({"header": header, "results": results}, indent=2, sort_keys=True))
    return {"samples": samples, "report": report}


def canonical_lines(path) -> list[str]:
    """Data lines of a CSV sorted canonically (header comment and column line first)."""
    lines = Path(path).read_text().splitlines()
    head = [ln for ln in lines[:2]]
    return head + sorted(lines[2:])
