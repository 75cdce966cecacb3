"""Dirichlet Green functions: disk closed forms and fitted numeric models.

Everything here follows the sign convention G = S - H with S the free-space
fundamental solution, so the Robin function R(x) = H(x,x) tends to +infinity
at the boundary and its gradient points toward the nearest wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .geometry import (
    Curve,
    Disk,
    Ellipse,
    FloatArray,
    PuncturedDomain,
    as_point,
    contains,
    diameter,
    dist_to_boundary,
)

__all__ = [
    "MFSConfig",
    "GreenModel",
    "GreenValues",
    "RobinData",
    "fundamental_solution",
    "disk_green",
    "disk_model",
    "exterior_disk_model",
    "mfs_fit",
    "green_eval",
    "robin",
    "green_dump",
]

TWO_PI = 2.0 * math.pi


def fundamental_solution(x, y) -> float:
    """S(x,y) = -(1/2pi) ln|x-y|."""
    xa, ya = as_point(x), as_point(y)
    r = math.hypot(xa[0] - ya[0], xa[1] - ya[1])
    if r == 0.0:
        raise ValueError("diagonal singularity")
    return -math.log(r) / TWO_PI


def _s_grad_x(x: FloatArray, y: FloatArray) -> FloatArray:
    d = x - y
    return -d / (TWO_PI * float(d @ d))


def _s_hess_xx(x: FloatArray, y: FloatArray) -> FloatArray:
    d = x - y
    r2 = float(d @ d)
    return -(np.eye(2) / r2 - 2.0 * np.outer(d, d) / r2 ** 2) / TWO_PI


# ---------------------------------------------------------------------------
# closed-form disk kernel
#
# With u=(x-Q)/r, v=(y-Q)/r and N(u,v)=|u|^2|v|^2-2u.v+1 the regular part is
# H = -(1/4pi) ln N - (1/2pi) ln r.  The same rational expressions continue
# analytically to the exterior of a small disk (r -> hole radius), where
# 1-|u|^2 simply changes sign.
# ---------------------------------------------------------------------------


class _DiskKernel:
    def __init__(self, center, radius: float):
        self.center = as_point(center)
        self.radius = float(radius)

    def _uv(self, x: FloatArray, y: FloatArray) -> tuple[FloatArray, FloatArray, float]:
        u = (x - self.center) / self.radius
        v = (y - self.center) / self.radius
        n = float((u @ u) * (v @ v) - 2.0 * (u @ v) + 1.0)
        return u, v, n

    def H(self, x: FloatArray, y: FloatArray) -> float:
        _, _, n = self._uv(x, y)
        return -math.log(n) / (2.0 * TWO_PI) - math.log(self.radius) / TWO_PI

    def dH_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        u, v, n = self._uv(x, y)
        return -(u * float(v @ v) - v) / (TWO_PI * self.radius * n)

    def dH_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self.dH_x(y, x)

    def d2H_xx(self, x: FloatArray, y: FloatArray) -> FloatArray:
        u, v, n = self._uv(x, y)
        v2 = float(v @ v)
        w = u * v2 - v
        mat = np.eye(2) * (v2 / n) - 2.0 * np.outer(w, w) / n ** 2
        return -mat / (TWO_PI * self.radius ** 2)

    def d2H_yy(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self.d2H_xx(y, x)

    def d2H_xy(self, x: FloatArray, y: FloatArray) -> FloatArray:
        u, v, n = self._uv(x, y)
        w_u = u * float(v @ v) - v
        w_v = v * float(u @ u) - u
        mat = (2.0 * np.outer(u, v) - np.eye(2)) / n - 2.0 * np.outer(w_u, w_v) / n ** 2
        return -mat / (TWO_PI * self.radius ** 2)

    # diagonal quantities; s = 1-|u|^2 is negative on the exterior branch
    def R(self, x: FloatArray) -> float:
        u = (x - self.center) / self.radius
        s = 1.0 - float(u @ u)
        return -math.log(self.radius * abs(s)) / TWO_PI

    def gradR(self, x: FloatArray) -> FloatArray:
        u = (x - self.center) / self.radius
        s = 1.0 - float(u @ u)
        return u / (math.pi * self.radius * s)

    def hessR(self, x: FloatArray) -> FloatArray:
        u = (x - self.center) / self.radius
        s = 1.0 - float(u @ u)
        r2 = self.radius ** 2
        return np.eye(2) / (math.pi * r2 * s) + 2.0 * np.outer(u, u) / (math.pi * r2 * s ** 2)

    def hessH_xx_diag(self, x: FloatArray) -> FloatArray:
        u = (x - self.center) / self.radius
        u2 = float(u @ u)
        s = 1.0 - u2
        if u2 == 0.0:
            return np.zeros((2, 2))
        uhat = np.outer(u, u) / u2
        return u2 * (2.0 * uhat - np.eye(2)) / (TWO_PI * self.radius ** 2 * s ** 2)

    def hessH_xy_diag(self, x: FloatArray) -> FloatArray:
        u = (x - self.center) / self.radius
        s = 1.0 - float(u @ u)
        return np.eye(2) / (TWO_PI * self.radius ** 2 * s ** 2)


def disk_green(Q, r: float, x, y) -> tuple[float, float]:
    """(G, H) of the disk B(Q, r) at an interior pair x != y."""
    k = _DiskKernel(Q, r)
    h = k.H(as_point(x), as_point(y))
    return fundamental_solution(x, y) - h, h


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass
class MFSConfig:
    # 32 hole sources resolve every harmonic the tiny circle carries; larger
    # rings only add near-dependent columns whose least-squares weights
    # amplify rounding noise at held-out nodes.
    n_sources_outer: int = 128
    n_sources_hole: int = 32
    offset_fraction: float = 0.15
    collocation_factor: int = 2
    svd_rtol: float = 1e-13
    cache_limit: int = 20000


@dataclass
class _MFSData:
    sources: FloatArray
    bnodes: FloatArray
    holdout: FloatArray
    pinv: FloatArray
    rank: int
    cache_limit: int
    pinv_hi: Optional[np.ndarray] = None

    def pinv_extended(self) -> np.ndarray:
        # the pseudoinverse can reach 1e13 in norm; accumulating the
        # charge solve in double precision leaves O(1e-7) roughness in
        # downstream gradients, which stalls Newton refinement
        if self.pinv_hi is None:
            self.pinv_hi = self.pinv.astype(np.longdouble)
        return self.pinv_hi


@dataclass
class GreenModel:
    """Evaluator state for one domain.

    kind is one of closed_form_disk, closed_form_exterior_disk, mfs_numeric.
    charges caches the fitted per-y coefficient tables (mfs only).
    """

    domain: object
    kind: str
    source_points: FloatArray
    fit_residual: float = 0.0
    charges: dict = field(default_factory=dict, repr=False)
    mfs_config: Optional["MFSConfig"] = field(default=None, repr=False)
    _mfs: Optional[_MFSData] = field(default=None, repr=False)
    _kernel: Optional[_DiskKernel] = field(default=None, repr=False)


@dataclass
class GreenValues:
    H: float
    G: Optional[float] = None
    dH_x: Optional[FloatArray] = None
    dH_y: Optional[FloatArray] = None
    dG_x: Optional[FloatArray] = None
    dG_y: Optional[FloatArray] = None
    d2H_xx: Optional[FloatArray] = None
    d2H_xy: Optional[FloatArray] = None
    d2H_yy: Optional[FloatArray] = None


@dataclass
class RobinData:
    R: float
    gradR: FloatArray
    hessH_xx: FloatArray
    hessH_xy: FloatArray
    near_boundary: bool = False


def disk_model(disk: Disk) -> GreenModel:
    return GreenModel(disk, "closed_form_disk", np.zeros((0, 2)),
                      _kernel=_DiskKernel(disk.center, disk.radius))


def exterior_disk_model(P, eps: float) -> GreenModel:
    """Green model of the exterior of B(P, eps)."""
    if eps <= 0.0:
        raise ValueError("hole radius must be positive")
    hole = Disk(tuple(as_point(P)), eps)
    return GreenModel(hole, "closed_form_exterior_disk", np.zeros((0, 2)),
                      _kernel=_DiskKernel(P, eps))


# ---------------------------------------------------------------------------
# MFS fitting
# ---------------------------------------------------------------------------


def _param_ring(dom, n: int, offset: float) -> tuple[FloatArray, FloatArray]:
    """Boundary points and outward normals at parameters (k+offset)/n."""
    t = (np.arange(n) + offset) / n
    if isinstance(dom, Disk):
        th = TWO_PI * t
        nrm = np.column_stack([np.cos(th), np.sin(th)])
        return np.asarray(dom.center) + dom.radius * nrm, nrm
    if isinstance(dom, Ellipse):
        a1, a2 = dom.semi_axes
        th = TWO_PI * t
        pts = np.column_stack([a1 * np.cos(th), a2 * np.sin(th)])
        nrm = np.column_stack([pts[:, 0] / a1 ** 2, pts[:, 1] / a2 ** 2])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        return pts, nrm
    if isinstance(dom, Curve):
        pts = dom.point(t)
        tan = dom.tangent(t)
        nrm = np.column_stack([tan[:, 1], -tan[:, 0]])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        return pts, nrm
    raise TypeError(f"unsupported boundary component {type(dom).__name__}")


def _feature_scale(dom) -> float:
    if isinstance(dom, Disk):
        return dom.radius
    if isinstance(dom, Ellipse):
        return min(dom.semi_axes)
    if isinstance(dom, Curve):
        pts = dom._dense_polygon(1024)
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        return float(seg.sum() / TWO_PI)
    raise TypeError(f"unsupported boundary component {type(dom).__name__}")


def _flatten_components(dom) -> tuple[list, list[tuple]]:
    """Outer pieces and hole descriptions (P, eps) of a possibly nested domain."""
    outers: list = []
    holes: list[tuple] = []
    d = dom
    while isinstance(d, PuncturedDomain):
        holes.append((np.asarray(d.P), d.eps))
        d = d.outer
    outers.append(d)
    return outers, holes


def _log_rows(targets: FloatArray, sources: FloatArray, order: int = 0):
    """Tables of S(t,s) and target derivatives, shapes (nt,ns[,2[,2]])."""
    d = targets[:, None, :] - sources[None, :, :]
    r2 = np.einsum("tsi,tsi->ts", d, d)
    phi = -np.log(r2) / (2.0 * TWO_PI)
    if order == 0:
        return (phi,)
    dphi = -d / (TWO_PI * r2[:, :, None])
    if order == 1:
        return phi, dphi
    eye = np.eye(2)
    d2 = (-(eye[None, None] / r2[:, :, None, None]
            - 2.0 * d[:, :, :, None] * d[:, :, None, :] / r2[:, :, None, None] ** 2)
          / TWO_PI)
    return phi, dphi, d2


def mfs_fit(dom, cfg: Optional[MFSConfig] = None) -> GreenModel:
    """Fit a fundamental-solution model of the regular part H on dom.

    Charges live on rings offset outward from each outer boundary piece and
    on a ring of radius eps/2 inside each hole; the linear map from boundary
    data to charges is a truncated-SVD pseudoinverse shared by every y.
    """
    cfg = cfg or MFSConfig()
    outers, holes = _flatten_components(dom)
    src, col, hold = [], [], []
    for piece in outers:
        m = cfg.n_sources_outer
        nc = cfg.collocation_factor * m
        pts, nrm = _param_ring(piece, m, 0.0)
        src.append(pts + cfg.offset_fraction * _feature_scale(piece) * nrm)
        col.append(_param_ring(piece, nc, 0.0)[0])
        hold.append(_param_ring(piece, nc, 0.5)[0])
    for P, eps in holes:
        m = cfg.n_sources_hole
        nc = cfg.collocation_factor * m
        th = TWO_PI * np.arange(m) / m
        src.append(P + 0.5 * eps * np.column_stack([np.cos(th), np.sin(th)]))
        th = TWO_PI * np.arange(nc) / nc
        col.append(P + eps * np.column_stack([np.cos(th), np.sin(th)]))
        th = TWO_PI * (np.arange(nc) + 0.5) / nc
        hold.append(P + eps * np.column_stack([np.cos(th), np.sin(th)]))
    sources = np.concatenate(src)
    bnodes = np.concatenate(col)
    holdout = np.concatenate(hold)

    (amat,) = _log_rows(bnodes, sources)
    colw = np.linalg.norm(amat, axis=0)
    u, s, vt = np.linalg.svd(amat / colw, full_matrices=False)
    keep = s > cfg.svd_rtol * s[0]
    rank = int(keep.sum())
    if rank < 8:
        raise ValueError("mfs conditioning")
    pinv = ((vt[keep].T / s[keep]) @ u[:, keep].T) / colw[:, None]

    model = GreenModel(dom, "mfs_numeric", sources, mfs_config=cfg,
                       _mfs=_MFSData(sources, bnodes, holdout, pinv, rank,
                                     cfg.cache_limit))
    model.fit_residual = _validation_residual(model)
    return model


def _probe_points(dom, n: int = 6) -> FloatArray:
    outers, holes = _flatten_components(dom)
    pts, _ = _param_ring(outers[0], max(n, 6), 0.25)
    centroid = pts.mean(axis=0)
    probes = centroid + 0.55 * (pts[: n] - centroid)
    for P, eps in holes:
        d = np.linalg.norm(probes - P, axis=1)
        bad = d <= 3.0 * eps
        if np.any(bad):
            shift = probes[bad] - P
            unit = np.where(d[bad][:, None] > 0.0, shift / d[bad][:, None],
                            np.array([1.0, 0.0]))
            probes[bad] = P + 4.0 * eps * unit
    return probes


def _validation_residual(model: GreenModel) -> float:
    mfs = model._mfs
    worst = 0.0
    (phi_hold,) = _log_rows(mfs.holdout, mfs.sources)
    for y in _probe_points(model.domain):
        c, _ = _charges(model, y, order=0)
        target = -0.5 * np.log(np.sum((mfs.holdout - y) ** 2, axis=1)) / TWO_PI
        worst = max(worst, float(np.abs(phi_hold @ c - target).max()))
    return worst


def _charges(model: GreenModel, y: FloatArray, order: int = 1):
    """Fitted charge vector for H(., y) and, if asked, its y-derivatives."""
    mfs = model._mfs
    # exact keys: quantized keys would make the cached field piecewise
    # constant in y, which stalls Newton iterations near convergence
    key = (float(y[0]), float(y[1]))
    hit = model.charges.get(key)
    if hit is not None and (order == 0 or hit[1] is not None):
        return hit
    d = mfs.bnodes - y
    r2 = np.sum(d * d, axis=1)
    if np.any(r2 <= 0.0):
        raise ValueError("source point on the boundary")
    pinv = mfs.pinv_extended()
    d = d.astype(np.longdouble)
    r2 = np.sum(d * d, axis=1)
    b = -0.5 * np.log(r2) / TWO_PI
    c = (pinv @ b).astype(float)
    dc = None
    if order >= 1:
        db = d / (TWO_PI * r2[:, None])
        dc = (pinv @ db).astype(float)
    if len(model.charges) >= mfs.cache_limit:
        model.charges.clear()
    model.charges[key] = (c, dc)
    return c, dc


def charges_many(model: GreenModel, ys: FloatArray, chunk: int = 2048) -> FloatArray:
    """Charge tables for many y at once, shape (n, n_sources)."""
    mfs = model._mfs
    out = np.empty((ys.shape[0], mfs.sources.shape[0]))
    for lo in range(0, ys.shape[0], chunk):
        part = ys[lo:lo + chunk]
        d = part[:, None, :] - mfs.bnodes[None, :, :]
        r2 = np.einsum("yci,yci->yc", d, d)
        b = -np.log(r2) / (2.0 * TWO_PI)
        out[lo:lo + chunk] = b @ mfs.pinv.T
    return out


def potential_rows(model: GreenModel, xs: FloatArray, order: int = 1):
    """Source potentials Phi(x - s_k) and x-derivatives for many x."""
    return _log_rows(xs, model._mfs.sources, order)


def green_eval(model: GreenModel, x, y, order: int = 0) -> GreenValues:
    """Evaluate G/H and derivatives at a pair; x=y is allowed for the H parts."""
    xa, ya = as_point(x), as_point(y)
    on_diag = bool(np.all(xa == ya))
    if model.kind in ("closed_form_disk", "closed_form_exterior_disk"):
        k = model._kernel
        out = GreenValues(H=k.H(xa, ya) if not on_diag else k.R(xa))
        if order >= 1:
            out.dH_x = k.dH_x(xa, ya)
            out.dH_y = k.dH_y(xa, ya)
        if order >= 2:
            out.d2H_xx = k.d2H_xx(xa, ya)
            out.d2H_xy = k.d2H_xy(xa, ya)
            out.d2H_yy = k.d2H_yy(xa, ya)
    elif model.kind == "mfs_numeric":
        cy, dcy = _charges(model, ya, order=min(order, 1))
        rows = _log_rows(xa[None, :], model._mfs.sources, order=min(order, 2))
        phi_x = rows[0][0]
        out = GreenValues(H=float(phi_x @ cy))
        if order >= 1:
            dphi_x = rows[1][0]
            cx, _ = _charges(model, xa, order=0)
            rows_y = _log_rows(ya[None, :], model._mfs.sources, order=min(order, 2))
            out.dH_x = dphi_x.T @ cy
            out.dH_y = rows_y[1][0].T @ cx
            if order >= 2:
                out.d2H_xx = np.einsum("mij,m->ij", rows[2][0], cy)
                out.d2H_yy = np.einsum("mij,m->ij", rows_y[2][0], cx)
                out.d2H_xy = np.einsum("mi,mj->ij", dphi_x, dcy)
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    if not on_diag:
        out.G = fundamental_solution(xa, ya) - out.H
        if order >= 1:
            ds = _s_grad_x(xa, ya)
            out.dG_x = ds - out.dH_x
            out.dG_y = -ds - out.dH_y
    return out


def robin(model: GreenModel, x) -> RobinData:
    """Robin value, gradient, and diagonal H-Hessian blocks at x.

    gradR is twice the x-gradient of H on the diagonal; hessH_xy is the
    mixed block, symmetric there.
    """
    xa = as_point(x)
    if model.kind == "closed_form_disk" or model.kind == "closed_form_exterior_disk":
        k = model._kernel
        data = RobinData(k.R(xa), k.gradR(xa), k.hessH_xx_diag(xa), k.hessH_xy_diag(xa))
    elif model.kind == "mfs_numeric":
        c, dc = _charges(model, xa, order=1)
        phi, dphi, d2phi = _log_rows(xa[None, :], model._mfs.sources, order=2)
        xy = np.einsum("mi,mj->ij", dphi[0], dc)
        data = RobinData(
            R=float(phi[0] @ c),
            gradR=2.0 * dphi[0].T @ c,
            hessH_xx=np.einsum("mij,m->ij", d2phi[0], c),
            hessH_xy=0.5 * (xy + xy.T),
        )
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    data.near_boundary = _near_boundary(model, xa)
    return data


def _near_boundary(model: GreenModel, xa: FloatArray) -> bool:
    if model.kind == "closed_form_exterior_disk":
        hole: Disk = model.domain
        d = np.hypot(*(xa - np.asarray(hole.center))) - hole.radius
        return d < 0.05 * hole.radius
    try:
        d, _ = dist_to_boundary(model.domain, xa)
    except ValueError:
        return True
    return d < 0.025 * diameter(model.domain)


def green_dump(model: GreenModel, y=None) -> dict:
    """JSON-ready description of a model, with charges for one y if given."""
    out = {
        "kind": model.kind,
        "fit_residual": model.fit_residual,
        "n_sources": int(model.source_points.shape[0]),
        "sources": model.source_points.tolist(),
    }
    if model.kind == "mfs_numeric":
        out["rank"] = model._mfs.rank
        out["n_collocation"] = int(model._mfs.bnodes.shape[0])
        if y is not None:
            c, _ = _charges(model, as_point(y), order=0)
            out["y"] = list(map(float, as_point(y)))
            out["charges"] = c.tolist()
    return out
