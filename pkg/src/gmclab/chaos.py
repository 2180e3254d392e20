"""Regularised complex chaos densities and their pairings with test functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as fieldmod
from .field import FieldRealization, GridSpec, mode_variance_sum, sample_values
from .regions import ComplexParam, in_Ea
from .rng import Seed, child, derive_seed, normals

# exp overflows just above 709.78
_EXP_LIMIT = 709.0
LOG_SPACE_TRIGGER = 600.0


class ChaosOverflowError(FloatingPointError):
    """The Wick exponent leaves the double-precision range."""


@dataclass(frozen=True, eq=False)
class ChaosRealization:
    """Grid values of exp(beta X_N - beta^2 sigma_N^2 / 2)."""

    values: np.ndarray
    beta: complex
    grid: GridSpec
    N: int
    seed: Seed
    meta: dict = dc_field(default_factory=dict)


def wick_exponent(X: np.ndarray, sigma2: float, beta) -> tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts of beta X - beta^2 sigma2 / 2.

    Written out componentwise so that conjugating beta conjugates the
    result bit for bit.
    """
    b = ComplexParam.of(beta)
    a, c = b.re, b.im
    re = a * X - (a * a - c * c) * sigma2 / 2
    im = c * X - a * c * sigma2
    return re, im


def wick_density(X: np.ndarray, sigma2: float, beta) -> np.ndarray:
    """Pointwise Wick exponential of grid values ``X`` (any shape)."""
    b = ComplexParam.of(beta)
    X = np.asarray(X, dtype=float)
    re, im = wick_exponent(X, sigma2, b)
    top = float(np.max(re)) if re.size else 0.0
    if top > _EXP_LIMIT:
        xmax = float(np.max(np.abs(X)))
        raise ChaosOverflowError(
            f"Wick exponent {top:.1f} overflows (Re beta * X up to {abs(b.re) * xmax:.1f})")
    # Re beta * max X > LOG_SPACE_TRIGGER: the exponent above already has the
    # Wick term subtracted, which is the log-space evaluation
    mod = np.exp(re)
    out = np.empty(X.shape, dtype=complex)
    out.real = mod * np.cos(im)
    out.imag = mod * np.sin(im)
    return out


def wick_exponential(fld: FieldRealization, sigma2: float, beta) -> ChaosRealization:
    """Regularised chaos density of a field realization."""
    if not math.isclose(sigma2, fld.sigma2, rel_tol=1e-12):
        raise ValueError(f"sigma2={sigma2} does not match the field cutoff (sigma_N^2={fld.sigma2})")
    b = ComplexParam.of(beta)
    vals = wick_density(fld.values, sigma2, b)
    return ChaosRealization(vals, complex(b), fld.grid, fld.N, fld.seed,
                            meta={"sigma2": sigma2})


# ---------------------------------------------------------------------------
# test functions


def _periodic_offset(x: np.ndarray, c: float) -> np.ndarray:
    return (x - c + 0.5) % 1.0 - 0.5


def bump(r: np.ndarray) -> np.ndarray:
    """Standard C_c^infty bump exp(-1/(1-r^2)) normalised to sup 1, on |r| < 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Grid samples of a test function with its support and sup norm."""

    __test__ = False  # not a pytest class

    kind: str
    samples: np.ndarray
    grid: GridSpec
    center: tuple[float, ...]
    radius: float
    params: dict = dc_field(default_factory=dict)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))

    @property
    def integral(self) -> complex:
        """Midpoint-rule integral, the Wick-normalised mean of every pairing."""
        return complex(np.sum(self.samples) * self.grid.h**self.grid.d)

    def scaled(self, c) -> "TestFunction":
        return TestFunction(self.kind, c * self.samples, self.grid, self.center, self.radius,
                            dict(self.params, factor=c))

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        return TestFunction("Sum", self.samples + other.samples, self.grid, self.center,
                            max(self.radius, other.radius))


def _radial(grid: GridSpec, center) -> np.ndarray:
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.d,))
    axes = grid.coords()
    sq = sum(_periodic_offset(ax, c) ** 2 for ax, c in zip(axes, center))
    return np.sqrt(np.broadcast_to(sq, grid.shape))


def _check_radius(radius: float) -> None:
    if not 0 < radius < 0.5:
        raise ValueError(f"support radius {radius} must lie in (0, 1/2) on the unit torus")


def smooth_bump(grid: GridSpec, center=0.0, radius: float = 0.25) -> TestFunction:
    _check_radius(radius)
    c = tuple(np.broadcast_to(np.asarray(center, dtype=float), (grid.d,)).tolist())
    return TestFunction("SmoothBump", bump(_radial(grid, c) / radius), grid, c, radius)


def indicator(grid: GridSpec, center=0.0, radius: float | None = None) -> TestFunction:
    """Indicator of a periodic ball; ``radius=None`` is the whole torus."""
    c = tuple(np.broadcast_to(np.asarray(center, dtype=float), (grid.d,)).tolist())
    if radius is None:
        return TestFunction("Indicator", np.ones(grid.shape), grid, c, math.inf)
    _check_radius(radius)
    return TestFunction("Indicator", (_radial(grid, c) < radius).astype(float), grid, c, radius)


def rescaled_bump(grid: GridSpec, epsilon: float, center=0.0, radius: float = 0.25) -> TestFunction:
    """phi(x / epsilon) for the smooth bump phi of the given radius around ``center``."""
    base = smooth_bump(grid, center, radius * epsilon)
    return TestFunction("RescaledBump", base.samples, grid, base.center, base.radius,
                        {"epsilon": epsilon, "base_radius": radius})


def wavelet_function(grid: GridSpec, j: int, k, nu=None, filter_id: str | None = None) -> TestFunction:
    """Samples of the periodised L2-normalised wavelet psi_lambda."""
    from .wavelets import synthesize_wavelet

    vals, basis = synthesize_wavelet(grid, j, k, nu, filter_id)
    c = tuple(float(v) for v in np.atleast_1d(np.asarray(k, dtype=float)) * 2.0**-j)
    return TestFunction("Wavelet", vals, grid, c, basis.support / 2**j,
                        {"j": j, "k": k, "nu": nu, "filter": basis.name})


# ---------------------------------------------------------------------------
# pairing and smooth corrections


def pair(chaos: ChaosRealization, f: TestFunction) -> complex:
    """Midpoint-rule pairing <mu, f>."""
    if f.grid != chaos.grid:
        raise ValueError("test function and chaos live on different grids")
    return complex(np.sum(chaos.values * f.samples) * chaos.grid.h**chaos.grid.d)


def pair_values(densities: np.ndarray, f: TestFunction) -> np.ndarray:
    """Pairings of a batch of densities, shape (batch, *grid.shape) -> (batch,)."""
    axes = tuple(range(1, densities.ndim))
    return np.sum(densities * f.samples, axis=axes) * f.grid.h**f.grid.d


@dataclass(frozen=True, eq=False)
class SmoothCorrection:
    """Samples of a smooth field G and of its variance g(x, x)."""

    G: np.ndarray
    g_diag: np.ndarray

    def h(self, beta) -> np.ndarray:
        """Multiplier exp(beta G - beta^2 g(x,x)/2)."""
        b = ComplexParam.of(beta)
        a, c = b.re, b.im
        re = a * self.G - (a * a - c * c) * self.g_diag / 2
        im = c * self.G - a * c * self.g_diag
        return np.exp(re) * (np.cos(im) + 1j * np.sin(im))

    def inverse(self) -> "SmoothCorrection":
        """Correction whose multiplier is 1/h for every beta."""
        return SmoothCorrection(-self.G, -self.g_diag)


def smooth_correction(grid: GridSpec, seed: Seed, scale: float = 4.0, n_modes: int = 6) -> SmoothCorrection:
    """A smooth stationary Gaussian G with mode variances exp(-|k|/scale)."""
    k, _ = fieldmod.mode_table(grid.d, n_modes)
    var = np.exp(-np.linalg.norm(k, axis=1) / scale)
    A, B = normals(child(seed, 0), len(k)), normals(child(seed, 1), len(k))
    amp = np.sqrt(var)
    coords = np.meshgrid(*[np.arange(grid.n) * grid.h] * grid.d, indexing="ij")
    phase = sum(np.multiply.outer(ax, 2 * np.pi * k[:, i]) for i, ax in enumerate(coords))
    G = np.cos(phase) @ (amp * A) + np.sin(phase) @ (amp * B)
    return SmoothCorrection(G, np.full(grid.shape, float(var.sum())))


def apply_correction(chaos: ChaosRealization, corr: SmoothCorrection) -> ChaosRealization:
    """Multiply the density by h_beta."""
    if corr.G.shape != chaos.values.shape:
        raise ValueError(f"grid mismatch: {corr.G.shape} vs {chaos.values.shape}")
    return ChaosRealization(chaos.values * corr.h(chaos.beta), chaos.beta, chaos.grid, chaos.N,
                            chaos.seed, dict(chaos.meta, corrected=True))


# ---------------------------------------------------------------------------
# scaling relation


@dataclass
class ScalingPairs:
    """Samples of both sides of the distributional scaling relation."""

    beta: complex
    epsilon: float
    lhs: np.ndarray
    rhs: np.ndarray
    z: np.ndarray
    N: int
    grid: GridSpec


def chaos_pairings(grid: GridSpec, N: int, beta, f: TestFunction, seeds: list[Seed],
                   batch: int = 256) -> np.ndarray:
    """<mu_N, f> for one realization per seed."""
    sigma2 = mode_variance_sum(grid.d, N)
    out = np.empty(len(seeds), dtype=complex)
    for start in range(0, len(seeds), batch):
        chunk = seeds[start:start + batch]
        X = sample_values(grid, N, chunk)
        out[start:start + len(chunk)] = pair_values(wick_density(X, sigma2, beta), f)
    return out


def scaling_pair_samples(beta, phi_radius: float, epsilon: float, N: int, M: int, seed: int,
                         grid: GridSpec | None = None, allow_boundary: bool = False) -> ScalingPairs:
    """Both sides of <mu, phi(./eps)> ~ eps^d e^{beta Z - beta^2 E Z^2/2} <mu, phi>.

    ``phi`` is the smooth bump of radius ``phi_radius`` centred at 0. The
    left side pairs the rescaled bump with the chaos at cutoff N/eps, the
    right side pairs phi with an independent chaos at cutoff N. ``grid``
    defaults to the coarsest grid resolving the cutoff N/eps.

    At a finite cutoff both sides are defined for any beta; ``allow_boundary``
    admits points on the boundary of E_a (e.g. |beta| = sqrt(d) on the
    imaginary axis), where no non-trivial limit exists.
    """
    b = ComplexParam.of(beta)
    ell = fieldmod.dyadic_exponent(epsilon)
    if M < 100:
        raise ValueError("M must be >= 100")
    N_fine = N * 2**ell
    if grid is None:
        grid = GridSpec(1, max(4, int(math.ceil(math.log2(N_fine))) + 1))
    d = grid.d
    inside = in_Ea(b, d) or (allow_boundary and in_Ea(complex(b) * (1 - 1e-12), d))
    if not inside:
        raise ValueError(f"beta={complex(b)} lies outside E_a (d={d})")
    if phi_radius >= fieldmod.VALID_RADIUS:
        raise ValueError(f"phi must be supported in the ball of radius {fieldmod.VALID_RADIUS}")
    phi = smooth_bump(grid, 0.0, phi_radius)
    phi_eps = rescaled_bump(grid, epsilon, 0.0, phi_radius)

    lhs = chaos_pairings(grid, N_fine, b, phi_eps, [derive_seed(seed, 0, i) for i in range(M)])
    rhs_core = chaos_pairings(grid, N, b, phi, [derive_seed(seed, 1, i) for i in range(M)])
    var_z = ell * math.log(2.0)
    z = math.sqrt(var_z) * normals(derive_seed(seed, 2), M)
    bz = complex(b)
    factor = epsilon**d * np.exp(bz * z - bz * bz * var_z / 2)
    return ScalingPairs(complex(b), float(epsilon), lhs, factor * rhs_core, z, N, grid)


def export_chaos(chaos: ChaosRealization, path):
    meta = {"grid": chaos.grid.to_dict(), "N": chaos.N, "seed": chaos.seed,
            "beta": [chaos.beta.real, chaos.beta.imag], **chaos.meta}
    return fieldmod.write_binary(path, chaos.values, meta)


def write_pairings_csv(path, seeds: list, values: np.ndarray) -> None:
    """Paired values as CSV rows (seed, re, im)."""
    with open(path, "w") as fh:
        fh.write("seed,re,im\n")
        for s, v in zip(seeds, values):
            key = ":".join(map(str, s)) if isinstance(s, tuple) else str(s)
            fh.write(f"{key},{float(v.real)!r},{float(v.imag)!r}\n")
