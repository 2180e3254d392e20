"""Log-correlated Gaussian fields on the unit torus by random Fourier series.

A field at cutoff ``N`` is

    X_N(x) = sum_k amp_k (A_k cos 2 pi k.x + B_k sin 2 pi k.x)

over one representative ``k`` of each pair {k, -k} of non-zero lattice
frequencies with |k| <= N, with A_k, B_k i.i.d. standard normal. For
d = 1, amp_k^2 = 1/k and the covariance tends to -log(2 sin(pi|x-y|)).
For d = 2, amp_k^2 = 2 c/|k|^2 with c = 1/(2 pi), the normalisation of
the torus Green's function, so that the covariance is log(1/|x-y|) plus a
smooth remainder.

Modes are enumerated in a fixed order (by |k|^2) and mode ``i`` uses the
i-th normal pair of the stream keyed by ``seed``. Raising the cutoff with
the same seed therefore only appends modes: X_{N'} - X_N is independent of
X_N.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .rng import Seed, derive_seed, normal_pairs, normals

#: normalisation of the d=2 mode variances, see scripts/calibrate_c2.py
C2 = 1.0 / (2.0 * math.pi)

_M_LIMITS = {1: (4, 24), 2: (4, 12)}


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``2**m`` points per axis on the torus [0, 1)^d."""

    d: int
    m: int

    def __post_init__(self):
        if self.d not in _M_LIMITS:
            raise ValueError(f"samplers exist for d in (1, 2), got d={self.d}")
        lo, hi = _M_LIMITS[self.d]
        if not lo <= self.m <= hi:
            raise ValueError(f"m={self.m} outside [{lo}, {hi}] for d={self.d}")

    @property
    def n(self) -> int:
        return 2**self.m

    @property
    def h(self) -> float:
        return 2.0**-self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def coords(self) -> list[np.ndarray]:
        """Per-axis coordinate arrays broadcastable to ``shape``."""
        x = np.arange(self.n) * self.h
        if self.d == 1:
            return [x]
        return [x[:, None], x[None, :]]

    def to_dict(self) -> dict:
        return {"d": self.d, "m": self.m}


@dataclass(frozen=True)
class CovarianceModel:
    """Torus model: log(1/dist) plus a smooth remainder near the diagonal."""

    d: int
    kind: str = "ExactScalingTorus"

    @property
    def remainder(self) -> str:
        if self.d == 1:
            return "g(t) = -log(2 sin(pi t) / t), smooth for |t| < 1/2, g(0) = -log(2 pi)"
        return "g = 2 pi c * (torus Green's function) - log(1/|t|), smooth near 0, c = 1/(2 pi)"


@lru_cache(maxsize=32)
def mode_table(d: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Half-lattice frequencies with 0 < |k| <= N and their amplitudes.

    Returns ``(k, amp)`` with ``k`` of shape (n_modes, d). The order is
    prefix-stable in ``N``.
    """
    if N < 1:
        raise ValueError("cutoff N must be >= 1")
    if d == 1:
        k = np.arange(1, N + 1, dtype=np.int64)[:, None]
        amp = 1.0 / np.sqrt(k[:, 0].astype(float))
    elif d == 2:
        r = np.arange(-N, N + 1, dtype=np.int64)
        k1, k2 = np.meshgrid(r, r, indexing="ij")
        k1, k2 = k1.ravel(), k2.ravel()
        norm2 = k1 * k1 + k2 * k2
        half = (k2 > 0) | ((k2 == 0) & (k1 > 0))
        keep = half & (norm2 <= N * N)
        k1, k2, norm2 = k1[keep], k2[keep], norm2[keep]
        order = np.lexsort((k1, k2, norm2))
        k = np.column_stack([k1[order], k2[order]])
        amp = np.sqrt(2.0 * C2 / norm2[order].astype(float))
    else:
        raise ValueError(f"samplers exist for d in (1, 2), got d={d}")
    k.setflags(write=False)
    amp.setflags(write=False)
    return k, amp


def mode_variance_sum(d: int, N: int) -> float:
    """sigma_N^2 = E X_N(x)^2, summed analytically over the retained modes."""
    _, amp = mode_table(d, N)
    return math.fsum((amp * amp).tolist())


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Mode coefficients of one realization at cutoff ``N``."""

    grid: GridSpec
    N: int
    seed: Seed
    A: np.ndarray
    B: np.ndarray
    sigma2: float

    @property
    def k(self) -> np.ndarray:
        return mode_table(self.grid.d, self.N)[0]

    @property
    def amp(self) -> np.ndarray:
        return mode_table(self.grid.d, self.N)[1]

    @property
    def modes(self) -> np.ndarray:
        """Complex coefficient a_k of e^{2 pi i k.x} for the half-lattice ``k``.

        The coefficient of -k is the conjugate, so the field is real.
        """
        return 0.5 * self.amp * (self.A - 1j * self.B)

    def truncate(self, N: int) -> "SpectralField":
        """The same realization at a lower cutoff."""
        if N > self.N:
            raise ValueError("can only truncate to a lower cutoff")
        n = len(mode_table(self.grid.d, N)[0])
        return SpectralField(self.grid, N, self.seed, self.A[:n], self.B[:n],
                             mode_variance_sum(self.grid.d, N))


@dataclass(frozen=True, eq=False)
class FieldRealization:
    """Real grid values of a field plus provenance."""

    values: np.ndarray
    grid: GridSpec
    N: int
    seed: Seed
    sigma2: float
    imag_residue: float = 0.0
    meta: dict = dc_field(default_factory=dict)


def _check_cutoff(grid: GridSpec, N: int) -> None:
    if not 1 <= N <= grid.n // 2:
        raise ValueError(f"cutoff N={N} outside [1, {grid.n // 2}] (Nyquist) for m={grid.m}")


def sample_field(grid: GridSpec, N: int, seed: Seed) -> SpectralField:
    """Draw the modes of one realization; deterministic in (grid, N, seed)."""
    _check_cutoff(grid, N)
    k, _ = mode_table(grid.d, N)
    A, B = normal_pairs(seed, len(k))
    return SpectralField(grid, N, seed, A, B, mode_variance_sum(grid.d, N))


def _spectrum(grid: GridSpec, k: np.ndarray, a: np.ndarray, batch: int | None = None) -> np.ndarray:
    shape = grid.shape if batch is None else (batch, *grid.shape)
    F = np.zeros(shape, dtype=complex)
    pos = tuple(np.mod(k[:, i], grid.n) for i in range(grid.d))
    neg = tuple(np.mod(-k[:, i], grid.n) for i in range(grid.d))
    if batch is None:
        np.add.at(F, pos, a)
        np.add.at(F, neg, np.conj(a))
    else:
        rows = np.arange(batch)[:, None]
        # positions are distinct except at Nyquist, where -k aliases onto k
        F[(rows, *(p[None, :] for p in pos))] += a
        F[(rows, *(q[None, :] for q in neg))] += np.conj(a)
    return F


def render(fld: SpectralField) -> FieldRealization:
    """Synthesise grid values by inverse FFT."""
    F = _spectrum(fld.grid, fld.k, fld.modes)
    z = np.fft.ifftn(F, norm="forward")
    resid = float(np.max(np.abs(z.imag))) if z.size else 0.0
    return FieldRealization(np.ascontiguousarray(z.real), fld.grid, fld.N, fld.seed,
                            fld.sigma2, imag_residue=resid)


def render_modes(grid: GridSpec, N: int, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Grid values for explicit mode coefficients (batched over a leading axis)."""
    k, amp = mode_table(grid.d, N)
    a = 0.5 * amp * (np.asarray(A) - 1j * np.asarray(B))
    batch = None if a.ndim == 1 else a.shape[0]
    F = _spectrum(grid, k, a, batch)
    axes = tuple(range(-grid.d, 0))
    return np.fft.ifftn(F, axes=axes, norm="forward").real


def sample_values(grid: GridSpec, N: int, seeds: list[Seed]) -> np.ndarray:
    """Grid values for several seeds at once, shape ``(len(seeds), *grid.shape)``.

    Identical to rendering each ``sample_field(grid, N, seed)`` separately.
    """
    _check_cutoff(grid, N)
    n_modes = len(mode_table(grid.d, N)[0])
    A = np.empty((len(seeds), n_modes))
    B = np.empty((len(seeds), n_modes))
    for i, s in enumerate(seeds):
        A[i], B[i] = normal_pairs(s, n_modes)
    return render_modes(grid, N, A, B)


def analyze_modes(values: np.ndarray, grid: GridSpec, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Recover (A, B) from grid values; requires N < n/2 so no mode aliases."""
    if N >= grid.n // 2:
        raise ValueError("mode analysis needs N below the Nyquist frequency")
    k, amp = mode_table(grid.d, N)
    F = np.fft.fftn(values, norm="forward")
    a = F[tuple(np.mod(k[:, i], grid.n) for i in range(grid.d))]
    return 2 * a.real / amp, -2 * a.imag / amp


def evaluate_at(grid_d: int, N: int, A: np.ndarray, B: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the Fourier series directly at arbitrary points.

    ``A``/``B`` may carry a leading batch axis; ``points`` has shape
    (n_points, d). Returns (batch, n_points) or (n_points,).
    """
    k, amp = mode_table(grid_d, N)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid_d:
        pts = pts.reshape(-1, grid_d)
    phase = 2 * np.pi * (pts @ k.T.astype(float))  # (n_points, n_modes)
    c, s = np.cos(phase) * amp, np.sin(phase) * amp
    return np.asarray(A) @ c.T + np.asarray(B) @ s.T


def covariance_oracle(x, y, N: int | None, model: CovarianceModel) -> float:
    """Exact E X_N(x) X_N(y) by direct mode summation.

    ``N=None`` gives the d=1 infinite-cutoff closed form -log(2 sin(pi|t|)).
    """
    t = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if N is None:
        if model.d != 1:
            raise ValueError("closed-form limit only available for d=1")
        u = abs(float(t[0])) % 1.0
        if u == 0:
            raise ValueError("infinite-cutoff covariance diverges on the diagonal")
        return -math.log(2 * math.sin(math.pi * u))
    k, amp = mode_table(model.d, N)
    terms = amp * amp * np.cos(2 * np.pi * (k @ t))
    return math.fsum(terms.tolist())


def covariance_row(lags: np.ndarray, N: int, d: int = 1) -> np.ndarray:
    """Vectorised oracle over lags (1-D lags along the first axis for d=2)."""
    k, amp = mode_table(d, N)
    lags = np.asarray(lags, dtype=float)
    return np.cos(2 * np.pi * np.outer(lags, k[:, 0])) @ (amp * amp)


# ---------------------------------------------------------------------------
# scaling decomposition and positive-definiteness probes


def dyadic_exponent(epsilon) -> int:
    """ell with epsilon = 2**-ell; rejects non-dyadic or out-of-range values."""
    eps = Fraction(epsilon).limit_denominator(1 << 40)
    if abs(float(eps) - float(epsilon)) > 1e-15 or eps <= 0 or eps > 1:
        raise ValueError(f"epsilon must be a dyadic 2**-l in (0, 1], got {epsilon}")
    if eps.numerator != 1 or eps.denominator & (eps.denominator - 1):
        raise ValueError(f"epsilon must be a dyadic 2**-l in (0, 1], got {epsilon}")
    return eps.denominator.bit_length() - 1


VALID_RADIUS = 0.25


@dataclass
class ScalingSamples:
    """Matched marginals of X(eps x) and X(x) + Z at a point set."""

    points: np.ndarray
    epsilon: float
    left: np.ndarray
    right: np.ndarray
    z_var: float
    cov_left: np.ndarray
    cov_right: np.ndarray

    @property
    def max_cov_gap(self) -> float:
        return float(np.max(np.abs(self.cov_left - self.cov_right)))

    def report(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "z_var": self.z_var,
            "max_cov_gap": self.max_cov_gap,
            "n_points": len(self.points),
            "M": len(self.left),
        }


def scaling_decomposition_check(epsilon: float, N: int, seed: int, points=None, M: int = 1000,
                                d: int = 1) -> ScalingSamples:
    """Samples of X_{N/eps}(eps x) and X_N(x) + Z with Z ~ N(0, log(1/eps)).

    Both sides are evaluated at ``points`` (default: 8 points in [-0.2, 0.2]^d).
    The covariance matrices of both sides come from the mode-sum oracle;
    their gap is the smooth-remainder mismatch g(eps x, eps y) - g(x, y)
    plus cutoff effects.
    """
    ell = dyadic_exponent(epsilon)
    if points is None:
        base = np.linspace(-0.2, 0.2, 8)
        points = base[:, None] if d == 1 else np.column_stack([base, base[::-1] / 2])
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != d:
        points = points.reshape(-1, d)
    if np.any(np.linalg.norm(points, axis=1) >= VALID_RADIUS):
        raise ValueError(f"points must lie in the ball of radius {VALID_RADIUS}")
    N_fine = N * 2**ell
    k_c, _ = mode_table(d, N)
    k_f, _ = mode_table(d, N_fine)
    left = np.empty((M, len(points)))
    right = np.empty((M, len(points)))
    for i in range(M):
        A, B = normal_pairs(derive_seed(seed, 0, i), len(k_f))
        left[i] = evaluate_at(d, N_fine, A, B, points * epsilon)
        A, B = normal_pairs(derive_seed(seed, 1, i), len(k_c))
        right[i] = evaluate_at(d, N, A, B, points)
    z_var = ell * math.log(2.0)
    right += math.sqrt(z_var) * normals(derive_seed(seed, 2), M)[:, None]

    model = CovarianceModel(d)
    n = len(points)
    cov_l = np.empty((n, n))
    cov_r = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            cov_l[a, b] = covariance_oracle(points[a] * epsilon, points[b] * epsilon, N_fine, model)
            cov_r[a, b] = covariance_oracle(points[a], points[b], N, model) + z_var
    return ScalingSamples(points, float(epsilon), left, right, z_var, cov_l, cov_r)


def pd_radius_probe(points, N: int | None = None, diagonal: float | None = None) -> float:
    """Smallest eigenvalue of the Gram matrix of log(1/|x - y|).

    The diagonal, where the kernel diverges, is replaced by the mollified
    variance sigma_N^2 of the torus model (or by ``diagonal`` directly).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) > 2000:
        raise ValueError("at most 2000 points")
    if diagonal is None:
        if N is None:
            raise ValueError("give either the cutoff N or an explicit diagonal")
        diagonal = mode_variance_sum(pts.shape[1], N)
    diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0):
        raise ValueError("duplicate points")
    gram = -np.log(diff)
    np.fill_diagonal(gram, diagonal)
    return float(np.linalg.eigvalsh(gram)[0])


# ---------------------------------------------------------------------------
# export


def write_binary(path, values: np.ndarray, sidecar: dict) -> tuple[Path, Path]:
    """Flat little-endian float64 row-major data plus a JSON sidecar.

    Complex arrays are written as interleaved (re, im) pairs.
    """
    path = Path(path)
    arr = np.ascontiguousarray(values)
    meta = dict(sidecar)
    meta["shape"] = list(arr.shape)
    if np.iscomplexobj(arr):
        meta["dtype"] = "complex128-interleaved"
        data = arr.astype("<c16").view("<f8")
    else:
        meta["dtype"] = "float64"
        data = arr.astype("<f8")
    meta["byte_order"] = "little"
    meta["layout"] = "row-major"
    path.write_bytes(data.tobytes(order="C"))
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable))
    return path, side


def read_binary(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    if meta["dtype"] == "complex128-interleaved":
        raw = raw.view("<c16")
    return raw.reshape(meta["shape"]), meta


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def export_field(fr: FieldRealization, path) -> tuple[Path, Path]:
    meta = {"grid": fr.grid.to_dict(), "N": fr.N, "seed": fr.seed, "sigma2": fr.sigma2}
    return write_binary(path, fr.values, meta)
