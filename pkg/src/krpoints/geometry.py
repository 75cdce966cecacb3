"""Planar domains, boundary sampling, containment, and distance queries.

Domains come in three flavors: disks, the near-circular ellipse family
x1^2 (1+a1 d)^2 + x2^2 (1+a2 d)^2 < 1, and smooth closed curves given by
a periodic sample table.  A punctured domain removes a small disk
B(P, eps) from any of these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

__all__ = [
    "Point2",
    "Disk",
    "Ellipse",
    "Curve",
    "PuncturedDomain",
    "DomainSpec",
    "contains",
    "boundary_points",
    "boundary_components",
    "dist_to_boundary",
    "diameter",
    "domain_from_config",
    "as_point",
]


def as_point(p: "PointLike") -> FloatArray:
    """Coerce a point-like object to a finite float array of shape (2,)."""
    if isinstance(p, Point2):
        a = np.array([p.x1, p.x2], dtype=float)
    else:
        a = np.asarray(p, dtype=float).reshape(-1)
    if a.shape != (2,):
        raise ValueError(f"expected a planar point, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("point components must be finite")
    return a


@dataclass(frozen=True)
class Point2:
    """A point in the plane."""

    x1: float
    x2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise ValueError("point components must be finite")

    def as_array(self) -> FloatArray:
        return np.array([self.x1, self.x2], dtype=float)

    @staticmethod
    def from_array(a: "PointLike") -> "Point2":
        v = as_point(a)
        return Point2(float(v[0]), float(v[1]))


PointLike = Union[Point2, tuple, list, FloatArray]


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self) -> None:
        c = as_point(self.center)
        object.__setattr__(self, "center", (float(c[0]), float(c[1])))
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class Ellipse:
    """The domain x1^2 (1+alpha1 delta)^2 + x2^2 (1+alpha2 delta)^2 < 1.

    delta=0 reduces to the unit disk.  Semi-axes are 1/(1+alpha_i delta).
    """

    delta: float = 0.0
    alpha1: float = 0.0
    alpha2: float = 0.0

    def __post_init__(self) -> None:
        if self.delta < 0.0 or self.alpha1 < 0.0 or self.alpha2 < 0.0:
            raise ValueError("ellipse parameters must be nonnegative")

    @property
    def semi_axes(self) -> tuple[float, float]:
        return (1.0 / (1.0 + self.alpha1 * self.delta),
                1.0 / (1.0 + self.alpha2 * self.delta))


class Curve:
    """A smooth closed curve given by a periodic table of boundary samples.

    Samples are assumed uniform in an (unknown) smooth parameter and are
    interpolated trigonometrically, so queries converge spectrally for
    analytic boundaries.  The stored orientation is normalized to be
    counterclockwise.
    """

    def __init__(self, samples: FloatArray):
        pts = np.asarray(samples, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 16:
            raise ValueError("curve needs an (n,2) sample table with n >= 16")
        if not np.all(np.isfinite(pts)):
            raise ValueError("curve samples must be finite")
        if np.hypot(*(pts[0] - pts[-1])) < 1e-12 * (1.0 + np.abs(pts).max()):
            pts = pts[:-1]
        # signed area via the shoelace formula fixes the orientation
        x, y = pts[:, 0], pts[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area < 0.0:
            pts = pts[::-1].copy()
        self.samples = pts
        self._coef = np.fft.fft(pts, axis=0)
        n = pts.shape[0]
        self._freq = np.fft.fftfreq(n, d=1.0 / n)  # integer wavenumbers
        if n % 2 == 0:
            # drop the unpaired Nyquist mode so derivatives stay real-symmetric
            self._coef[n // 2] = 0.0

    def point(self, t: FloatArray) -> FloatArray:
        """Evaluate the interpolated boundary at parameters t in [0,1)."""
        return self._eval(t, 0)

    def tangent(self, t: FloatArray) -> FloatArray:
        return self._eval(t, 1)

    def second(self, t: FloatArray) -> FloatArray:
        return self._eval(t, 2)

    def _eval(self, t: FloatArray, order: int) -> FloatArray:
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        n = self.samples.shape[0]
        phase = np.exp(2j * np.pi * np.outer(tt, self._freq))
        coef = self._coef * (2j * np.pi * self._freq[:, None]) ** order
        vals = phase @ coef / n
        out = vals.real
        return out if np.ndim(t) else out[0]

    def _dense_polygon(self, n: int = 4096) -> FloatArray:
        cache = getattr(self, "_poly_cache", None)
        if cache is None or cache.shape[0] != n:
            t = np.arange(n) / n
            cache = self.point(t)
            self._poly_cache = cache
        return cache


DomainSpec = Union[Disk, Ellipse, Curve]


@dataclass(frozen=True)
class PuncturedDomain:
    """outer \\ closure(B(P, eps)); the hole must sit strictly inside."""

    outer: Union[DomainSpec, "PuncturedDomain"]
    P: tuple[float, float]
    eps: float
    safety_fraction: float = 0.5

    def __post_init__(self) -> None:
        p = as_point(self.P)
        object.__setattr__(self, "P", (float(p[0]), float(p[1])))
        if not (math.isfinite(self.eps) and self.eps > 0.0):
            raise ValueError("hole radius must be positive")
        if not contains(self.outer, p):
            raise ValueError("hole center lies outside the outer domain")
        d, _ = dist_to_boundary(self.outer, p)
        if self.eps >= self.safety_fraction * d:
            raise ValueError(
                f"hole radius {self.eps:g} exceeds safety bound "
                f"{self.safety_fraction:g}*dist(P,boundary)={self.safety_fraction * d:g}")


def contains(dom, p: PointLike) -> bool:
    """True iff p lies in the open domain (outside the hole when punctured)."""
    q = as_point(p)
    if isinstance(dom, Disk):
        c = np.asarray(dom.center)
        return bool(np.hypot(*(q - c)) < dom.radius)
    if isinstance(dom, Ellipse):
        a1, a2 = dom.semi_axes
        return bool((q[0] / a1) ** 2 + (q[1] / a2) ** 2 < 1.0)
    if isinstance(dom, Curve):
        return _winding_number(dom, q) != 0
    if isinstance(dom, PuncturedDomain):
        P = np.asarray(dom.P)
        return contains(dom.outer, q) and bool(np.hypot(*(q - P)) > dom.eps)
    raise TypeError(f"unsupported domain {type(dom).__name__}")


def _winding_number(curve: Curve, q: FloatArray) -> int:
    pts = curve._dense_polygon()
    rel = pts - q
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    dang = np.diff(np.concatenate([ang, ang[:1]]))
    dang = (dang + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(dang.sum() / (2.0 * np.pi)))


def boundary_points(dom, n: int) -> tuple[FloatArray, FloatArray]:
    """n equispaced-in-parameter boundary points with outward unit normals.

    Returns arrays of shape (n, 2).  For punctured domains the components
    are concatenated (outer first, then the hole circle whose outward
    normal points into the hole); use boundary_components for per-piece
    access.
    """
    if n < 16:
        raise ValueError("need n >= 16 boundary points")
    if isinstance(dom, Disk):
        th = 2.0 * np.pi * np.arange(n) / n
        nrm = np.column_stack([np.cos(th), np.sin(th)])
        pts = np.asarray(dom.center) + dom.radius * nrm
        return pts, nrm
    if isinstance(dom, Ellipse):
        a1, a2 = dom.semi_axes
        th = 2.0 * np.pi * np.arange(n) / n
        pts = np.column_stack([a1 * np.cos(th), a2 * np.sin(th)])
        nrm = np.column_stack([pts[:, 0] / a1 ** 2, pts[:, 1] / a2 ** 2])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        return pts, nrm
    if isinstance(dom, Curve):
        t = np.arange(n) / n
        pts = dom.point(t)
        tan = dom.tangent(t)
        speed = np.linalg.norm(tan, axis=1)
        if speed.min() <= 0.0:
            raise ValueError("degenerate curve tangent")
        nrm = np.column_stack([tan[:, 1], -tan[:, 0]]) / speed[:, None]
        return pts, nrm
    if isinstance(dom, PuncturedDomain):
        parts = boundary_components(dom, n)
        pts = np.concatenate([p for p, _ in parts])
        nrm = np.concatenate([v for _, v in parts])
        return pts, nrm
    raise TypeError(f"unsupported domain {type(dom).__name__}")


def boundary_components(dom, n: int) -> list[tuple[FloatArray, FloatArray]]:
    """Boundary pieces of a domain as (points, outward normals) pairs.

    Outward means out of the fluid region, so hole-circle normals point
    toward the hole center.
    """
    if isinstance(dom, PuncturedDomain):
        parts = boundary_components(dom.outer, n)
        th = 2.0 * np.pi * np.arange(n) / n
        circ = np.column_stack([np.cos(th), np.sin(th)])
        pts = np.asarray(dom.P) + dom.eps * circ
        parts.append((pts, -circ))
        return parts
    return [boundary_points(dom, n)]


def dist_to_boundary(dom, p: PointLike) -> tuple[float, FloatArray]:
    """Distance from an interior point to the boundary and the nearest point."""
    q = as_point(p)
    if not contains(dom, q):
        raise ValueError("exterior point")
    if isinstance(dom, Disk):
        c = np.asarray(dom.center)
        rho = np.hypot(*(q - c))
        if rho == 0.0:
            return dom.radius, c + np.array([dom.radius, 0.0])
        return dom.radius - rho, c + (q - c) * (dom.radius / rho)
    if isinstance(dom, Ellipse):
        return _ellipse_nearest(dom, q)
    if isinstance(dom, Curve):
        return _curve_nearest(dom, q)
    if isinstance(dom, PuncturedDomain):
        d_out, p_out = dist_to_boundary(dom.outer, q)
        P = np.asarray(dom.P)
        rho = np.hypot(*(q - P))
        d_hole = rho - dom.eps
        if d_hole < d_out:
            return d_hole, P + (q - P) * (dom.eps / rho)
        return d_out, p_out
    raise TypeError(f"unsupported domain {type(dom).__name__}")


def _ellipse_nearest(dom: Ellipse, q: FloatArray) -> tuple[float, FloatArray]:
    a1, a2 = dom.semi_axes
    if a1 == a2:
        return dist_to_boundary(Disk((0.0, 0.0), a1), q)

    def dist2(th: FloatArray) -> FloatArray:
        return (a1 * np.cos(th) - q[0]) ** 2 + (a2 * np.sin(th) - q[1]) ** 2

    def d1(th: float) -> float:
        return (-2.0 * a1 * np.sin(th) * (a1 * np.cos(th) - q[0])
                + 2.0 * a2 * np.cos(th) * (a2 * np.sin(th) - q[1]))

    def d2(th: float) -> float:
        return (-2.0 * a1 * np.cos(th) * (a1 * np.cos(th) - q[0])
                + 2.0 * a1 ** 2 * np.sin(th) ** 2
                - 2.0 * a2 * np.sin(th) * (a2 * np.sin(th) - q[1])
                + 2.0 * a2 ** 2 * np.cos(th) ** 2)

    starts = 2.0 * np.pi * np.arange(64) / 64.0
    starts = starts[np.argsort(dist2(starts))][:8]
    best_th, best_d2 = None, np.inf
    for th in starts:
        th = float(th)
        for _ in range(60):
            g, h = d1(th), d2(th)
            step = -g / h if h > 0.0 else -np.sign(g) * 0.1
            # damping keeps the iteration inside the attracting basin
            while abs(step) > 1e-300 and dist2(np.array(th + step)) > dist2(np.array(th)):
                step *= 0.5
            th += step
            if abs(g) < 1e-14 * (a1 + a2) ** 2:
                break
        val = float(dist2(np.array(th)))
        if val < best_d2:
            best_th, best_d2 = th, val
    pp = np.array([a1 * np.cos(best_th), a2 * np.sin(best_th)])
    return math.sqrt(best_d2), pp


def _curve_nearest(dom: Curve, q: FloatArray) -> tuple[float, FloatArray]:
    m = max(1024, dom.samples.shape[0] * 4)
    tg = np.arange(m) / m
    pg = dom.point(tg)
    i = int(np.argmin(np.sum((pg - q) ** 2, axis=1)))
    t = float(tg[i])
    for _ in range(60):
        c = dom.point(np.array([t]))[0]
        dc = dom.tangent(np.array([t]))[0]
        d2c = dom.second(np.array([t]))[0]
        g = 2.0 * np.dot(c - q, dc)
        h = 2.0 * (np.dot(dc, dc) + np.dot(c - q, d2c))
        if h <= 0.0:
            break
        step = -g / h
        t = (t + step) % 1.0
        if abs(g) < 1e-14:
            break
    pp = dom.point(np.array([t]))[0]
    return float(np.hypot(*(pp - q))), pp


def diameter(dom) -> float:
    """Diameter of the solid domain (the hole does not shrink it)."""
    if isinstance(dom, Disk):
        return 2.0 * dom.radius
    if isinstance(dom, Ellipse):
        return 2.0 * max(dom.semi_axes)
    if isinstance(dom, Curve):
        pts = dom._dense_polygon(512)
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))
    if isinstance(dom, PuncturedDomain):
        return diameter(dom.outer)
    raise TypeError(f"unsupported domain {type(dom).__name__}")


def domain_from_config(cfg: dict, base_dir: str = ".") -> Union[DomainSpec, PuncturedDomain]:
    """Build a domain from a parsed config mapping.

    Recognized keys: kind (disk|ellipse|curve), center, radius, delta,
    alpha, curve.samples (two-column text file), and the optional hole
    table {center, eps} which wraps the result in a PuncturedDomain.
    """
    kind = str(cfg.get("kind", "disk")).lower()
    if kind == "disk":
        dom: Union[DomainSpec, PuncturedDomain] = Disk(
            tuple(cfg.get("center", (0.0, 0.0))), float(cfg.get("radius", 1.0)))
    elif kind == "ellipse":
        alpha = cfg.get("alpha", (0.0, 0.0))
        dom = Ellipse(float(cfg.get("delta", 0.0)), float(alpha[0]), float(alpha[1]))
    elif kind == "curve":
        path = cfg.get("curve", {}).get("samples") if "curve" in cfg else cfg.get("samples")
        if path is None:
            raise ValueError("curve domain needs a curve.samples file path")
        import os

        table = np.loadtxt(os.path.join(base_dir, str(path)))
        dom = Curve(table)
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    hole = cfg.get("hole")
    if hole is not None:
        dom = PuncturedDomain(dom, tuple(hole["center"]), float(hole["eps"]))
    return dom
