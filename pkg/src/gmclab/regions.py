"""Parameter-plane geometry for complex multiplicative chaos.

All regions are open: a point on a boundary curve is reported as outside.
``beta`` arguments accept anything convertible to ``complex``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class ComplexParam:
    """A point of the complex parameter plane."""

    re: float
    im: float

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError(f"non-finite parameter ({self.re}, {self.im})")

    @classmethod
    def of(cls, beta) -> "ComplexParam":
        if isinstance(beta, cls):
            return beta
        z = complex(beta)
        return cls(z.real, z.imag)

    def __complex__(self):
        return complex(self.re, self.im)

    def conjugate(self) -> "ComplexParam":
        return ComplexParam(self.re, -self.im)


def _parts(beta) -> tuple[float, float]:
    b = ComplexParam.of(beta)
    return abs(b.re), abs(b.im)


def _check_d(d) -> int:
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be an integer >= 1, got {d!r}")
    return int(d)


def _check_p(p) -> float:
    if not p >= 1:
        raise ValueError(f"moment order must be >= 1, got {p!r}")
    return float(p)


def in_Ea(beta, d: int) -> bool:
    """Membership in the open eye-shaped subcritical domain.

    The domain is the interior of the convex hull of the closed disk of
    radius sqrt(d) and the two points +-sqrt(2d). The tangents from
    sqrt(2d) touch the circle at 45 degrees, so the hull is the disk plus
    the two triangles cut out by |Re| + |Im| < sqrt(2d), |Re| >= sqrt(d/2).
    """
    d = _check_d(d)
    x, y = _parts(beta)
    if x * x + y * y < d:
        return True
    return x >= math.sqrt(d / 2) and x + y < math.sqrt(2 * d)


def in_Eap(beta, p: float, d: int) -> bool:
    """Membership in the region where the p-th absolute moment is bounded."""
    d = _check_d(d)
    p = _check_p(p)
    if not in_Ea(beta, d):
        return False
    x, y = _parts(beta)
    strip = x < math.sqrt(2 * d) / p
    ellipse = (p - 1) * x * x + y * y < 2 * d * (p - 1) / p
    return strip or ellipse


def _threshold_branch1(x: float, y: float, p: float) -> float:
    return -((p - 1) * x * x + y * y) / 2


def _threshold_branch2(x: float, y: float, p: float, d: int) -> float:
    return d / p - math.sqrt(2 * d) * x + (x * x - y * y) / 2


def besov_threshold(beta, p: float, d: int) -> float:
    """Critical smoothness s* such that the chaos lies in B^s_{p,q,loc} for s < s*."""
    d = _check_d(d)
    p = _check_p(p)
    if not in_Ea(beta, d):
        raise ValueError(f"beta={complex(ComplexParam.of(beta))} lies outside E_a (d={d})")
    x, y = _parts(beta)
    if x <= math.sqrt(2 * d) / p:
        return _threshold_branch1(x, y, p)
    return _threshold_branch2(x, y, p, d)


def real_moment_cutoff(beta_real: float, d: int) -> float:
    """Moment order 2d/beta^2 above which real chaos has infinite moments."""
    d = _check_d(d)
    if not 0 < beta_real < math.sqrt(2 * d):
        raise ValueError(f"real beta must lie in (0, sqrt(2d)), got {beta_real}")
    return 2 * d / beta_real**2


def gamma_exponent(r: float, s: float, p: float, beta, d: int) -> float:
    """Per-level growth exponent of E A_j^r divided by r."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    x, y = _parts(beta)
    return -d / p + s + d / r + ((r - 1) * x * x + y * y) / 2


def optimal_r(beta, p: float, d: int) -> float:
    """Moment order minimising the level exponent, capped at p."""
    x, _ = _parts(beta)
    if x == 0:
        return float(p)
    return min(float(p), math.sqrt(2 * d) / x)


# ---------------------------------------------------------------------------
# boundary polylines

Region = Literal["Ea", "Eap", "L2circle"]


def _radius_Ea(theta: np.ndarray, d: int) -> np.ndarray:
    c, s = np.abs(np.cos(theta)), np.abs(np.sin(theta))
    kite = math.sqrt(2 * d) / (c + s)
    return np.where(s <= c, kite, math.sqrt(d))


def _radius_strip(theta: np.ndarray, p: float, d: int) -> np.ndarray:
    c = np.abs(np.cos(theta))
    with np.errstate(divide="ignore"):
        return np.where(c > 0, math.sqrt(2 * d) / (p * c), np.inf)


def _radius_ellipse(theta: np.ndarray, p: float, d: int) -> np.ndarray:
    if p == 1:
        return np.zeros_like(theta)
    c, s = np.cos(theta), np.sin(theta)
    return np.sqrt(2 * d * (p - 1) / p / ((p - 1) * c * c + s * s))


def _radius_Eap(theta: np.ndarray, p: float, d: int) -> np.ndarray:
    outer = np.maximum(_radius_strip(theta, p, d), _radius_ellipse(theta, p, d))
    return np.minimum(_radius_Ea(theta, d), outer)


def _active_piece(theta: np.ndarray, region: str, p: float, d: int) -> np.ndarray:
    """Integer label of the boundary curve realising the radius at each angle."""
    if region == "L2circle":
        return np.zeros(theta.shape, dtype=int)
    c, s = np.abs(np.cos(theta)), np.abs(np.sin(theta))
    # label the Ea pieces by quadrant so that corner angles are split too
    quadrant = np.floor(np.mod(theta, 2 * np.pi) / (np.pi / 2)).astype(int)
    ea_piece = np.where(s <= c, 1, 2) + 10 * quadrant
    if region == "Ea":
        return ea_piece
    r_ea = _radius_Ea(theta, d)
    r_strip = _radius_strip(theta, p, d)
    r_ell = _radius_ellipse(theta, p, d)
    inner = np.where(r_strip >= r_ell, 3, 4) + 10 * quadrant
    return np.where(r_ea <= np.maximum(r_strip, r_ell), ea_piece, inner)


def _radius(theta, region: str, p: float, d: int):
    theta = np.asarray(theta, dtype=float)
    if region == "Ea":
        return _radius_Ea(theta, d)
    if region == "Eap":
        return _radius_Eap(theta, p, d)
    return np.full(theta.shape, math.sqrt(d))


def region_boundary_polyline(region: Region, p: float | None, d: int, n_points: int) -> np.ndarray:
    """Closed counterclockwise boundary polyline, shape ``(n, 2)``.

    ``L2circle`` is the circle |beta| = sqrt(d) bounding the region of
    finite second moments. Corners where the active boundary curve changes
    are located by root finding and inserted as exact vertices. The first
    vertex is repeated at the end.
    """
    d = _check_d(d)
    if region not in ("Ea", "Eap", "L2circle"):
        raise ValueError(f"unknown region {region!r}")
    if n_points < 8:
        raise ValueError("n_points must be >= 8")
    p = 1.0 if p is None else _check_p(p)

    theta = np.linspace(0.0, 2 * np.pi, n_points, endpoint=False)
    # quadrant boundaries and the 45-degree tangent points are always corners
    fixed = np.pi / 4 * np.arange(8)
    theta = np.union1d(theta, fixed)

    labels = _active_piece(theta, region, p, d)
    extra = []
    closed = np.append(theta, 2 * np.pi)
    closed_labels = np.append(labels, labels[0])
    for a, b, la, lb in zip(closed[:-1], closed[1:], closed_labels[:-1], closed_labels[1:]):
        if la == lb:
            continue
        lo, hi = a, b

        def switch(t, la=la):
            return 0.5 if _active_piece(np.array([t]), region, p, d)[0] == la else -0.5

        # bisection on the label change; brentq only needs a sign change
        t = brentq(switch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if min(t - a, b - t) > 1e-9:
            extra.append(t)
    if extra:
        theta = np.union1d(theta, np.mod(extra, 2 * np.pi))

    rad = _radius(theta, region, p, d)
    pts = np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
    pts = _snap_corners(pts, region, p, d)
    return np.vstack([pts, pts[:1]])


def _snap_corners(pts: np.ndarray, region: str, p: float, d: int) -> np.ndarray:
    """Replace vertices that sit within rounding of an analytic corner by the corner."""
    corners = [(math.sqrt(2 * d), 0.0)]
    corners.append((math.sqrt(d / 2), math.sqrt(d / 2)))
    if region == "Eap" and p > 1:
        corners.append((math.sqrt(2 * d) / p, math.sqrt(2 * d) * (p - 1) / p))
    full = set()
    for x, y in corners:
        for sx in (1, -1):
            for sy in (1, -1):
                full.add((sx * x, sy * y))
    out = pts.copy()
    for cx, cy in full:
        dist = np.hypot(out[:, 0] - cx, out[:, 1] - cy)
        i = int(np.argmin(dist))
        if dist[i] < 1e-9:
            out[i] = (cx, cy)
    return out


def boundary_residual(pt, region: Region, p: float | None, d: int) -> float:
    """Smallest residual of ``pt`` against the defining boundary equations."""
    x, y = abs(pt[0]), abs(pt[1])
    p = 1.0 if p is None else p
    res = [abs(math.hypot(x, y) - math.sqrt(d))]
    if region == "L2circle":
        return res[0]
    res.append(abs(x + y - math.sqrt(2 * d)))
    if region == "Eap":
        res.append(abs(x - math.sqrt(2 * d) / p))
        if p > 1:
            rhs = 2 * d * (p - 1) / p
            res.append(abs((p - 1) * x * x + y * y - rhs))
    return min(res)
