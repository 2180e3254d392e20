"""Periodic orthonormal wavelet analysis on the torus.

Coefficients are indexed by level ``j`` (2**j shifts per axis), orientation
``nu`` (2**d - 1 of them) and shift ``k``. The finest scaling coefficients
are grid samples times h**(d/2), so the transform is an orthogonal map of
the sampled L2 inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from itertools import product

import mpmath
import numpy as np
from scipy import stats

from .field import GridSpec
from .regions import ComplexParam, gamma_exponent, in_Eap, optimal_r

# Hölder exponents of the Daubechies scaling functions (Daubechies 1992,
# Table 7.2), rounded down; used as the declared smoothness R.
_HOLDER = {2: 0.55, 3: 1.08, 4: 1.61, 5: 1.96, 6: 2.18, 7: 2.46, 8: 2.76, 9: 3.07, 10: 3.36}

SHIPPED_FILTERS = ("db4", "db6", "db8", "db10")


@lru_cache(maxsize=None)
def daubechies_filter(n_vanishing: int) -> np.ndarray:
    """Minimum-phase Daubechies low-pass filter with ``n_vanishing`` moments.

    Spectral factorisation of the half-band polynomial in 50-digit
    arithmetic; the taps sum to sqrt(2).
    """
    N = n_vanishing
    if N < 1:
        raise ValueError("need at least one vanishing moment")
    if N == 1:
        return np.array([1.0, 1.0]) / math.sqrt(2.0)
    with mpmath.workdps(50):
        # P(y) = sum_k C(N-1+k, k) y^k with y = -(z-1)^2 / (4z); times z^(N-1)
        coeffs = [mpmath.mpf(0)] * (2 * N - 1)
        for k in range(N):
            c = mpmath.binomial(N - 1 + k, k) * mpmath.mpf(-0.25) ** k
            # (z - 1)^(2k) z^(N-1-k)
            for i in range(2 * k + 1):
                coeffs[N - 1 - k + i] += c * mpmath.binomial(2 * k, i) * (-1) ** (2 * k - i)
        roots = mpmath.polyroots(coeffs[::-1], maxsteps=500, extraprec=200)
        inside = [r for r in roots if abs(r) < 1]
        poly = [mpmath.mpf(1)]
        for r in inside:
            poly = [a - r * b for a, b in zip(poly + [0], [0] + poly)]
        for _ in range(N):
            poly = [a + b for a, b in zip(poly + [0], [0] + poly)]
        poly = [mpmath.re(c) for c in poly]
        s = mpmath.fsum(poly)
        h = [c * mpmath.sqrt(2) / s for c in poly]
    out = np.array([float(c) for c in h])
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class WaveletBasis:
    """An orthonormal compactly supported filter pair."""

    name: str
    h: np.ndarray
    R: float
    vanishing_moments: int

    @property
    def g(self) -> np.ndarray:
        L = len(self.h)
        return np.array([(-1) ** k * self.h[L - 1 - k] for k in range(L)])

    @property
    def length(self) -> int:
        return len(self.h)

    @property
    def support(self) -> int:
        """Support diameter K of phi and psi in units of the level spacing."""
        return len(self.h) - 1

    @staticmethod
    def orientations(d: int) -> list[tuple[int, ...]]:
        return [nu for nu in product((0, 1), repeat=d) if any(nu)]

    def max_levels(self, m: int) -> int:
        return m - math.ceil(math.log2(self.support))

    def metadata(self) -> dict:
        return {"filter": self.name, "length": self.length, "R": self.R,
                "vanishing_moments": self.vanishing_moments}


_REGISTRY: dict[str, WaveletBasis] = {}


def get_basis(name: str) -> WaveletBasis:
    if name in _REGISTRY:
        return _REGISTRY[name]
    if not name.startswith("db") or not name[2:].isdigit():
        raise ValueError(f"unknown filter {name!r}")
    n = int(name[2:])
    if n not in _HOLDER:
        raise ValueError(f"unknown filter {name!r}")
    basis = WaveletBasis(name, daubechies_filter(n), _HOLDER[n], n)
    _REGISTRY[name] = basis
    return basis


def default_basis(d: int) -> WaveletBasis:
    """Smallest shipped filter with declared regularity R > d and R >= 2."""
    for name in SHIPPED_FILTERS:
        b = get_basis(name)
        if b.R > d and b.R >= 2:
            return b
    raise ValueError(f"no shipped filter is smooth enough for d={d}")


# ---------------------------------------------------------------------------
# transforms


@dataclass
class WaveletDecomposition:
    """Periodic wavelet coefficients over the last ``d`` axes of the input.

    ``details[j]`` has shape (*batch, 2**d - 1, 2**j, ..., 2**j); the
    orientation axis follows ``WaveletBasis.orientations(d)``. ``coarse``
    holds the scaling coefficients at level ``m - J``.
    """

    coarse: np.ndarray
    details: dict[int, np.ndarray]
    basis: WaveletBasis
    d: int
    m: int
    J: int
    meta: dict = dc_field(default_factory=dict)

    @property
    def levels(self) -> list[int]:
        return sorted(self.details)

    def energy(self) -> np.ndarray:
        ax = tuple(range(-self.d, 0))
        e = np.sum(np.abs(self.coarse) ** 2, axis=ax)
        for j, a in self.details.items():
            e = e + np.sum(np.abs(a) ** 2, axis=ax + (-self.d - 1,))
        return e


def _analysis_step(c: np.ndarray, axis: int, h: np.ndarray, g: np.ndarray):
    n = c.shape[axis]
    half = 2 * np.arange(n // 2)
    lo = 0
    hi = 0
    for k in range(len(h)):
        taken = np.take(c, (half + k) % n, axis=axis)
        lo = lo + h[k] * taken
        hi = hi + g[k] * taken
    return lo, hi


def _synthesis_step(lo: np.ndarray, hi: np.ndarray, axis: int, h: np.ndarray, g: np.ndarray):
    axis = axis % lo.ndim
    n = 2 * lo.shape[axis]
    shape = list(lo.shape)
    shape[axis] = n
    out = np.zeros(shape, dtype=np.result_type(lo, hi, h))
    half = 2 * np.arange(n // 2)
    index = [slice(None)] * lo.ndim
    for k in range(len(h)):
        index[axis] = (half + k) % n
        out[tuple(index)] += h[k] * lo + g[k] * hi
    return out


def _split(c: np.ndarray, d: int, h, g) -> tuple[np.ndarray, list[np.ndarray]]:
    """One level over the last d axes: (scaling, [detail per orientation])."""
    bands = {(): c}
    for ax in range(d):
        nxt = {}
        for key, arr in bands.items():
            lo, hi = _analysis_step(arr, ax - d, h, g)
            nxt[key + (0,)] = lo
            nxt[key + (1,)] = hi
        bands = nxt
    scaling = bands[(0,) * d]
    return scaling, [bands[nu] for nu in WaveletBasis.orientations(d)]


def _merge(scaling: np.ndarray, details: np.ndarray, d: int, h, g) -> np.ndarray:
    bands = {(0,) * d: scaling}
    for i, nu in enumerate(WaveletBasis.orientations(d)):
        bands[nu] = np.take(details, i, axis=-d - 1)
    for ax in reversed(range(d)):
        nxt = {}
        for key in {k[:ax] for k in bands}:
            nxt[key] = _synthesis_step(bands[key + (0,)], bands[key + (1,)], ax - d, h, g)
        bands = nxt
    return bands[()]


def dwt_forward(samples: np.ndarray, basis: WaveletBasis | str | None = None, J: int | None = None,
                d: int | None = None, sample_scaling: bool = True) -> WaveletDecomposition:
    """Periodic orthonormal DWT over the last ``d`` axes.

    ``samples`` has shape (*batch, 2**m, ..., 2**m). With ``sample_scaling``
    the finest scaling coefficients are samples * h**(d/2). Complex input is
    transformed componentwise (the filters are real).
    """
    x = np.asarray(samples)
    if d is None:
        d = x.ndim
    if isinstance(basis, str):
        basis = get_basis(basis)
    elif basis is None:
        basis = default_basis(d)
    n = x.shape[-1]
    m = int(round(math.log2(n)))
    if 2**m != n or any(s != n for s in x.shape[-d:]):
        raise ValueError(f"grid must be 2**m points per axis, got {x.shape[-d:]}")
    jmax = basis.max_levels(m)
    if J is None:
        J = jmax
    if not 1 <= J <= jmax:
        raise ValueError(f"J={J} levels exceed the limit {jmax} for filter {basis.name} on 2**{m} points")
    c = x * (2.0 ** (-m * d / 2)) if sample_scaling else x
    h, g = basis.h, basis.g
    details = {}
    for j in range(m - 1, m - J - 1, -1):
        c, bands = _split(c, d, h, g)
        details[j] = np.stack(bands, axis=-d - 1)
    return WaveletDecomposition(c, details, basis, d, m, J,
                                meta={"sample_scaling": sample_scaling})


def dwt_inverse(dec: WaveletDecomposition) -> np.ndarray:
    """Inverse of :func:`dwt_forward`, returning grid samples."""
    h, g = dec.basis.h, dec.basis.g
    c = dec.coarse
    for j in range(dec.m - dec.J, dec.m):
        c = _merge(c, dec.details[j], dec.d, h, g)
    if dec.meta.get("sample_scaling", True):
        c = c * (2.0 ** (dec.m * dec.d / 2))
    return c


def zero_decomposition(grid: GridSpec, basis: WaveletBasis, J: int) -> WaveletDecomposition:
    d, m = grid.d, grid.m
    coarse = np.zeros((2 ** (m - J),) * d)
    no = 2**d - 1
    details = {j: np.zeros((no, *(2**j,) * d)) for j in range(m - J, m)}
    return WaveletDecomposition(coarse, details, basis, d, m, J, meta={"sample_scaling": True})


def synthesize_wavelet(grid: GridSpec, j: int, k, nu=None, filter_id: str | None = None):
    """Grid samples of the periodised wavelet psi_{j,k}^{nu}."""
    basis = get_basis(filter_id) if filter_id else default_basis(grid.d)
    J = grid.m - j
    if not 1 <= J <= basis.max_levels(grid.m):
        raise ValueError(f"level {j} not representable with {basis.name} on 2**{grid.m} points")
    orients = WaveletBasis.orientations(grid.d)
    nu = orients[-1] if nu is None else tuple(nu)
    dec = zero_decomposition(grid, basis, J)
    kk = tuple(int(v) % 2**j for v in np.atleast_1d(k))
    dec.details[j][(orients.index(nu), *kk)] = 1.0
    return dwt_inverse(dec), basis


# ---------------------------------------------------------------------------
# level statistics and estimators


@dataclass(frozen=True)
class LevelStats:
    j: int
    count: int
    S: float
    A: float
    p: float
    s: float


def level_power_sums(dec: WaveletDecomposition, p: float) -> dict[int, np.ndarray]:
    """sum_lambda |alpha|^p per level (max |alpha| for p = inf), per batch item."""
    out = {}
    for j, a in dec.details.items():
        flat = np.abs(a).reshape(*a.shape[: a.ndim - dec.d - 1], -1)
        out[j] = np.max(flat, axis=-1) if math.isinf(p) else np.sum(flat**p, axis=-1)
    return out


def stats_from_sums(sums: dict[int, np.ndarray], p: float, s: float, d: int) -> list[LevelStats]:
    """Level statistics from per-realization power sums pooled by their mean."""
    rows = []
    for j in sorted(sums):
        pooled = float(np.mean(sums[j]))
        S = pooled if math.isinf(p) else pooled ** (1.0 / p)
        inv_p = 0.0 if math.isinf(p) else 1.0 / p
        A = 2.0 ** (d * j * (0.5 - inv_p)) * 2.0 ** (j * s) * S
        rows.append(LevelStats(j, (2**d - 1) * 2 ** (j * d), S, A, p, s))
    return rows


def level_stats(dec: WaveletDecomposition, p: float, s: float = 0.0) -> list[LevelStats]:
    """S_j and A_j per level; batched decompositions are pooled over the batch."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    return stats_from_sums(level_power_sums(dec, p), p, s, dec.d)


def default_window(m: int, J: int) -> tuple[int, int]:
    """Regression levels: drop levels 0 and 1, levels below the transform depth, and the finest."""
    return max(2, m - J), m - 2


@dataclass(frozen=True)
class RegularityEstimate:
    s_hat: float
    stderr: float
    slope: float
    window: tuple[int, int]
    note: str = ""


def regularity_estimate(rows: list[LevelStats], p: float, d: int,
                        window: tuple[int, int] | None = None) -> RegularityEstimate:
    """Largest s keeping A_j bounded, from the slope of log2 S_j against j."""
    sel = [r for r in rows if window is None or window[0] <= r.j <= window[1]]
    if len(sel) < 4:
        raise ValueError(f"need >= 4 levels in the regression window, got {len(sel)}")
    win = (sel[0].j, sel[-1].j)
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    S = np.array([r.S for r in sel])
    if np.all(S < 1e-10):
        return RegularityEstimate(math.inf, 0.0, -math.inf, win, "smooth input")
    j = np.array([r.j for r in sel], dtype=float)
    fit = stats.linregress(j, np.log2(S))
    return RegularityEstimate(-(d * (0.5 - inv_p) + fit.slope), float(fit.stderr), float(fit.slope), win)


def predicted_moment_slope(beta, r: float, d: int) -> float:
    """Exponent rho(r) of 2^j in the bound on E|alpha(lambda)|^r."""
    b = ComplexParam.of(beta)
    return r * (r - 1) * b.re**2 / 2 + r * b.im**2 / 2 - d * r / 2


def predicted_level_exponent(beta, p: float, s: float, d: int) -> float:
    """r * gamma at the optimal moment order r; negative means A_j is summable."""
    r = optimal_r(beta, p, d)
    return r * gamma_exponent(r, s, p, beta, d)


@dataclass(frozen=True)
class MomentScaling:
    slope: float
    stderr: float
    predicted: float
    levels: tuple[int, ...]
    log2_moments: tuple[float, ...]


def fit_moment_scaling(moments: dict[int, float], beta, r: float, d: int,
                       window: tuple[int, int]) -> MomentScaling:
    """Slope of log2 E|alpha|^r over the window."""
    js = [j for j in sorted(moments) if window[0] <= j <= window[1]]
    if len(js) < 4:
        raise ValueError("need >= 4 levels in the regression window")
    y = np.log2([moments[j] for j in js])
    fit = stats.linregress(js, y)
    return MomentScaling(float(fit.slope), float(fit.stderr), predicted_moment_slope(beta, r, d),
                         tuple(js), tuple(float(v) for v in y))


def check_moment_order(beta, r: float, d: int) -> None:
    if not in_Eap(beta, r, d):
        raise ValueError(f"r={r} is outside the finite-moment region for beta={complex(ComplexParam.of(beta))}"
                         " (estimate would be tail-dominated)")


def write_level_stats_csv(path, rows: list[LevelStats]) -> None:
    with open(path, "w") as fh:
        fh.write("j,count,S_j,A_j,p,s\n")
        for r in rows:
            fh.write(f"{r.j},{r.count},{r.S!r},{r.A!r},{r.p!r},{r.s!r}\n")


def chaos_level_sums(grid: GridSpec, N: int, beta, seeds: list, powers: tuple[float, ...],
                     basis: WaveletBasis, J: int | None = None, batch: int = 32) -> dict:
    """Per-realization level power sums of chaos wavelet coefficients.

    Returns ``{p: array (len(seeds), n_levels)}`` plus ``"levels"``; rows
    follow ``seeds`` so that any later reduction is order independent.
    """
    from .chaos import wick_density
    from .field import mode_variance_sum, sample_values

    sigma2 = mode_variance_sum(grid.d, N)
    J = basis.max_levels(grid.m) if J is None else J
    levels = list(range(grid.m - J, grid.m))
    out = {p: np.empty((len(seeds), len(levels))) for p in powers}
    for start in range(0, len(seeds), batch):
        chunk = seeds[start:start + batch]
        dens = wick_density(sample_values(grid, N, chunk), sigma2, beta)
        dec = dwt_forward(dens, basis, J, d=grid.d)
        for p in powers:
            sums = level_power_sums(dec, p)
            out[p][start:start + len(chunk)] = np.column_stack([sums[j] for j in levels])
    out["levels"] = levels
    return out


def wavelet_moment_scaling(beta, r: float, d: int = 1, m: int = 12, N: int | None = None,
                           M: int = 200, seed: int = 0, window: tuple[int, int] | None = None,
                           filter_id: str | None = None) -> MomentScaling:
    """Monte Carlo slope of log2 E|alpha(lambda)|^r against the level j.

    E|alpha|^r is averaged over all coefficients of a level and over M
    chaos realizations at cutoff N (default 2**(m-2)).
    """
    from .rng import derive_seed

    check_moment_order(beta, r, d)
    grid = GridSpec(d, m)
    N = 2 ** (m - 2) if N is None else N
    basis = get_basis(filter_id) if filter_id else default_basis(d)
    J = basis.max_levels(m)
    res = chaos_level_sums(grid, N, beta, [derive_seed(seed, i) for i in range(M)], (r,), basis, J)
    counts = np.array([(2**d - 1) * 2 ** (j * d) for j in res["levels"]])
    mean = res[r].mean(axis=0) / counts
    moments = dict(zip(res["levels"], mean.tolist()))
    return fit_moment_scaling(moments, beta, r, d, window or default_window(m, J))
