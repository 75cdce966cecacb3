"""Locating and certifying critical points of the interaction energy.

A damped Newton iteration refines seeds produced by a stratified scan:
a coarse product grid over admissible pairs, rings around the hole at
the collapse scale, and far-vortex equilibrium seeds for the
one-vortex-collapses family.  Converged points are certified through
the Hessian spectrum and classified by their distances to the hole.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from . import asymptotics
from .geometry import (
    Disk,
    Point2,
    PuncturedDomain,
    as_point,
    contains,
    diameter,
    dist_to_boundary,
)
from .greens import GreenModel, charges_many, disk_model, mfs_fit, potential_rows, robin
from .kr import KREvaluator, VortexConfig, kr_grad, kr_hess

FloatArray = NDArray[np.float64]

_DEGENERACY_REL = 1e-6


class RefineError(RuntimeError):
    """Newton refinement failed; reason is one of escaped, singular, maxiter."""

    def __init__(self, reason: str, message: str = ""):
        super().__init__(message or reason)
        self.reason = reason


@dataclass
class ClassifyThresholds:
    """Distance thresholds used by the type classifier.

    delta0 separates hole-scale from domain-scale distances; the band
    factors bracket the predicted collapse radius.
    """

    delta0: float = 0.2
    c_lo: float = 0.2
    c_hi: float = 5.0

    def __post_init__(self) -> None:
        if not 0.0 < self.c_lo < 1.0 < self.c_hi:
            raise ValueError("band factors must satisfy 0 < c_lo < 1 < c_hi")
        if not self.delta0 > 0.0:
            raise ValueError("delta0 must be positive")


@dataclass
class SearchConfig:
    grid_res: int = 16
    newton_tol: float = 1e-10
    max_iter: int = 60
    dedup_radius: float = 0.0
    deflation: bool = False
    thresholds: ClassifyThresholds = field(default_factory=ClassifyThresholds)
    ring_angles: int = 24
    ring_radii: tuple[float, ...] = (0.5, 1.0, 2.0)
    seed_keep: int = 48
    threads: int = 1

    def __post_init__(self) -> None:
        if self.grid_res < 4:
            raise ValueError("grid_res must be at least 4")
        if self.newton_tol <= 0.0 or self.max_iter < 1:
            raise ValueError("newton_tol and max_iter must be positive")
        if self.dedup_radius > 0.0 and self.dedup_radius <= 10.0 * self.newton_tol:
            raise ValueError("dedup_radius must exceed 10 * newton_tol")


@dataclass
class CriticalPoint:
    """One certified critical point of the two-vortex interaction energy."""

    x: Point2
    y: Point2
    grad_norm: float
    hess_eigs: tuple[float, float, float, float]
    morse_index: int
    nondegenerate: bool
    local_index: int
    type: str = "unclassified"
    gauge: float | None = None
    pair_id: int | None = None
    radial_nondegenerate: bool | None = None
    seed: tuple | None = None
    iterations: int = 0

    def as_vector(self) -> FloatArray:
        return np.array([self.x.x1, self.x.x2, self.y.x1, self.y.x2])

    def as_record(self) -> dict:
        return {
            "x": [self.x.x1, self.x.x2],
            "y": [self.y.x1, self.y.x2],
            "grad_norm": self.grad_norm,
            "hess_eigs": list(self.hess_eigs),
            "morse_index": self.morse_index,
            "nondegenerate": self.nondegenerate,
            "local_index": self.local_index,
            "type": self.type,
            "gauge": self.gauge,
            "pair_id": self.pair_id,
            "radial_nondegenerate": self.radial_nondegenerate,
            "seed": list(self.seed) if self.seed is not None else None,
            "iterations": self.iterations,
        }


def gradient_tolerance(ev: KREvaluator, lambda1: float, lambda2: float,
                       newton_tol: float) -> float:
    """Absolute sup-norm tolerance on the gradient.

    Nondimensionalized by the weaker vortex's self-interaction scale
    over the domain diameter, so the same newton_tol means the same
    relative accuracy across domains and strengths.
    """
    lam = min(lambda1, lambda2)
    return newton_tol * lam * lam / (math.pi * diameter(ev.green.domain))


def _admissible(dom, z: FloatArray) -> bool:
    if not (contains(dom, z[:2]) and contains(dom, z[2:])):
        return False
    return float(np.hypot(z[0] - z[2], z[1] - z[3])) > 1e-13


def _grad_at(ev: KREvaluator, z: FloatArray, l1: float, l2: float) -> FloatArray:
    return kr_grad(ev, VortexConfig(x=z[:2], y=z[2:], lambda1=l1, lambda2=l2))


def _hess_at(ev: KREvaluator, z: FloatArray, l1: float, l2: float) -> FloatArray:
    return kr_hess(ev, VortexConfig(x=z[:2], y=z[2:], lambda1=l1, lambda2=l2))


def _newton_core(grad, hess, z0: FloatArray, tol: float, max_iter: int,
                 admissible, diam: float) -> tuple[FloatArray, int]:
    """Damped Newton on a 4-dim gradient field.

    Step halving keeps iterates admissible and the gradient sup-norm
    decreasing; a singular or wildly scaled Hessian step falls back to
    scaled descent.  Raises RefineError on failure.
    """
    z = np.array(z0, dtype=float)
    g = grad(z)
    gn = float(np.max(np.abs(g)))
    if gn < tol:
        return z, 0
    for it in range(1, max_iter + 1):
        step = None
        try:
            h = hess(z)
            cand = np.linalg.solve(h, -g)
            if np.all(np.isfinite(cand)) and float(np.linalg.norm(cand)) <= diam:
                step = cand
        except np.linalg.LinAlgError:
            step = None
        tried_descent = False
        if step is None:
            step = -g / (np.linalg.norm(g) + 1e-300) * min(0.02 * diam, gn)
            tried_descent = True
        while True:
            alpha = 1.0
            accepted = None
            saw_admissible = False
            while alpha >= 2.0 ** -30:
                znew = z + alpha * step
                if admissible(znew):
                    saw_admissible = True
                    gnew = grad(znew)
                    gnnew = float(np.max(np.abs(gnew)))
                    if gnnew < gn or gnnew < tol:
                        accepted = (znew, gnew, gnnew)
                        break
                alpha *= 0.5
            if accepted is not None:
                break
            if not saw_admissible:
                raise RefineError("escaped", "iterate left the admissible set")
            if tried_descent:
                raise RefineError("singular",
                                  "no descent direction decreases the gradient")
            step = -g / (np.linalg.norm(g) + 1e-300) * min(0.02 * diam, gn)
            tried_descent = True
        z, g, gn = accepted
        if gn < tol:
            return z, it
    raise RefineError("maxiter", f"no convergence in {max_iter} iterations")


def _certify(ev: KREvaluator, z: FloatArray, l1: float, l2: float,
             iterations: int, seed_vec) -> CriticalPoint:
    g = _grad_at(ev, z, l1, l2)
    h = _hess_at(ev, z, l1, l2)
    eigs = np.linalg.eigvalsh(0.5 * (h + h.T))
    scale = float(np.max(np.abs(eigs)))
    nondeg = bool(np.min(np.abs(eigs)) > _DEGENERACY_REL * scale) if scale > 0 else False
    morse = int(np.sum(eigs < 0.0))
    local = int(math.copysign(1.0, np.prod(np.sign(eigs)))) if nondeg else 0
    return CriticalPoint(
        x=Point2(float(z[0]), float(z[1])),
        y=Point2(float(z[2]), float(z[3])),
        grad_norm=float(np.max(np.abs(g))),
        hess_eigs=tuple(float(v) for v in eigs),
        morse_index=morse,
        nondegenerate=nondeg,
        local_index=local,
        seed=tuple(float(v) for v in seed_vec) if seed_vec is not None else None,
        iterations=iterations,
    )


def newton_refine(ev: KREvaluator, seed: VortexConfig, cfg: SearchConfig,
                  deflate_at: list[FloatArray] | None = None) -> CriticalPoint:
    """Refine one seed to a certified critical point.

    deflate_at holds previously found points to repel from when the
    deflation option is active.
    """
    z0 = np.array([*seed.x, *seed.y], dtype=float)
    if np.hypot(z0[0] - z0[2], z0[1] - z0[3]) <= 1e-13:
        raise ValueError("seed has coincident vortices")
    dom = ev.green.domain
    if not _admissible(dom, z0):
        raise ValueError("seed is not admissible")
    l1, l2 = seed.lambda1, seed.lambda2
    tol = gradient_tolerance(ev, l1, l2, cfg.newton_tol)
    diam = diameter(dom)

    if cfg.deflation and deflate_at:
        anchors = [np.array(a, dtype=float) for a in deflate_at]

        def grad(z: FloatArray) -> FloatArray:
            m = 1.0
            for a in anchors:
                m *= 1.0 / float(np.sum((z - a) ** 2)) + 1.0
            return m * _grad_at(ev, z, l1, l2)

        def hess(z: FloatArray) -> FloatArray:
            m = 1.0
            dm = np.zeros(4)
            for a in anchors:
                r2 = float(np.sum((z - a) ** 2))
                f = 1.0 / r2 + 1.0
                m *= f
                dm += (-2.0 * (z - a) / r2 ** 2) / f
            dm *= m
            g = _grad_at(ev, z, l1, l2)
            return m * _hess_at(ev, z, l1, l2) + np.outer(g, dm)
    else:
        def grad(z: FloatArray) -> FloatArray:
            return _grad_at(ev, z, l1, l2)

        def hess(z: FloatArray) -> FloatArray:
            return _hess_at(ev, z, l1, l2)

    z, iters = _newton_core(grad, hess, z0, tol,
                            cfg.max_iter, lambda w: _admissible(dom, w), diam)
    return _certify(ev, z, l1, l2, iters, z0)


# ---------------------------------------------------------------------------
# seeding


def _interior_nodes(dom, res: int, margin: float) -> FloatArray:
    if isinstance(dom, PuncturedDomain):
        lo, hi = _bounding_box(dom.outer)
    else:
        lo, hi = _bounding_box(dom)
    xs = np.linspace(lo[0], hi[0], res)
    ys = np.linspace(lo[1], hi[1], res)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = []
    for p in pts:
        if not contains(dom, p):
            continue
        d, _ = dist_to_boundary(dom, p)
        if d > margin:
            keep.append(p)
    return np.array(keep) if keep else np.empty((0, 2))


def _bounding_box(dom) -> tuple[FloatArray, FloatArray]:
    if isinstance(dom, Disk):
        c = np.asarray(dom.center)
        r = dom.radius
        return c - r, c + r
    if isinstance(dom, PuncturedDomain):
        return _bounding_box(dom.outer)
    if hasattr(dom, "semi_axes"):
        a, b = dom.semi_axes
        return np.array([-a, -b]), np.array([a, b])
    if hasattr(dom, "samples"):
        pts = np.asarray(dom.samples)
        return pts.min(axis=0), pts.max(axis=0)
    raise TypeError(f"unsupported domain {type(dom).__name__}")


def _pair_gradient_table(model: GreenModel, nodes: FloatArray,
                         l1: float, l2: float) -> FloatArray:
    """Sup-norm of the interaction gradient for every node pair.

    Vectorized over the full product grid; the closed-form path expands
    the disk kernel directly and the fitted path contracts the charge
    tables against the source potentials.
    """
    n = nodes.shape[0]
    d = nodes[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, 1.0)
    sx = -d / (2.0 * math.pi * r2[:, :, None])

    if model.kind in ("closed_form_disk", "closed_form_exterior_disk"):
        k = model._kernel
        u = (nodes - k.center) / k.radius
        u2 = np.einsum("ik,ik->i", u, u)
        nmat = u2[:, None] * u2[None, :] - 2.0 * (u @ u.T) + 1.0
        w = u[:, None, :] * u2[None, :, None] - u[None, :, :]
        dhx = -w / (2.0 * math.pi * k.radius * nmat[:, :, None])
        dhy = np.transpose(dhx, (1, 0, 2))
        s = 1.0 - u2
        grad_r = u / (math.pi * k.radius * s[:, None])
    else:
        c = charges_many(model, nodes)
        _, dphi = potential_rows(model, nodes, order=1)
        dhx = np.einsum("isk,js->ijk", dphi, c)
        dhy = np.einsum("jsk,is->ijk", dphi, c)
        grad_r = 2.0 * np.einsum("isk,is->ik", dphi, c)

    gx = l1 * l1 * grad_r[:, None, :] - 2.0 * l1 * l2 * (sx - dhx)
    gy = l2 * l2 * grad_r[None, :, :] - 2.0 * l1 * l2 * (-sx - dhy)
    out = np.maximum(np.max(np.abs(gx), axis=2), np.max(np.abs(gy), axis=2))
    np.fill_diagonal(out, np.inf)
    return out


def _grid_seeds(ev: KREvaluator, cfg: SearchConfig, l1: float, l2: float) -> list[FloatArray]:
    dom = ev.green.domain
    diam = diameter(dom)
    nodes = _interior_nodes(dom, cfg.grid_res, 0.01 * diam)
    if nodes.shape[0] < 2:
        return []
    table = _pair_gradient_table(ev.green, nodes, l1, l2)
    cell = diam / cfg.grid_res
    d = nodes[:, None, :] - nodes[None, :, :]
    rr = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    table = np.where(rr > 0.5 * cell, table, np.inf)
    order = np.argsort(table, axis=None)
    seeds: list[FloatArray] = []
    for flat in order:
        if len(seeds) >= cfg.seed_keep:
            break
        i, j = np.unravel_index(flat, table.shape)
        if not np.isfinite(table[i, j]):
            break
        z = np.concatenate([nodes[i], nodes[j]])
        if all(np.linalg.norm(z - s) > cell for s in seeds):
            seeds.append(z)
    return seeds


def _ring_seeds(dom: PuncturedDomain, cfg: SearchConfig, tau: float,
                c_tau: float) -> list[FloatArray]:
    P = np.asarray(dom.P)
    beta = tau / (1.0 + tau) ** 2
    base = c_tau * dom.eps ** beta
    seeds = []
    for fac in cfg.ring_radii:
        r = fac * base
        if r <= dom.eps:
            continue
        for kth in range(cfg.ring_angles):
            th = 2.0 * math.pi * kth / cfg.ring_angles
            e = np.array([math.cos(th), math.sin(th)])
            z = np.concatenate([P + r * e, P - (r / tau) * e])
            if _admissible(dom, z):
                seeds.append(z)
    return seeds


def _far_equilibria(outer_model: GreenModel, P: FloatArray, pinned: float,
                    far: float, res: int = 12) -> list[FloatArray]:
    """Zeros of the far-vortex equilibrium field with one vortex pinned at P."""
    from .greens import green_eval, _s_hess_xx

    dom = outer_model.domain
    diam = diameter(dom)

    def fval(y: FloatArray) -> FloatArray:
        gv = green_eval(outer_model, P, y, order=1)
        rb = robin(outer_model, y)
        return far * far * rb.gradR - 2.0 * pinned * far * gv.dG_y

    def fjac(y: FloatArray) -> FloatArray:
        gv = green_eval(outer_model, P, y, order=2)
        rb = robin(outer_model, y)
        hess_r = 2.0 * (rb.hessH_xx + rb.hessH_xy)
        gyy = _s_hess_xx(P, y) - gv.d2H_yy
        return far * far * hess_r - 2.0 * pinned * far * gyy

    nodes = list(_interior_nodes(dom, res, 0.03 * diam))
    # equilibria pinned against the wall by a nearby hole sit inside the
    # grid margin, so holes of a punctured outer domain get their own
    # rings of starting points
    inner = dom
    while isinstance(inner, PuncturedDomain):
        c = np.asarray(inner.P)
        for fac in (0.01, 0.02, 0.04):
            r = fac * diam
            if r <= 2.0 * inner.eps:
                continue
            for kth in range(16):
                th = 2.0 * math.pi * kth / 16.0
                q = c + r * np.array([math.cos(th), math.sin(th)])
                if contains(dom, q):
                    nodes.append(q)
        inner = inner.outer
    roots: list[FloatArray] = []
    for y0 in nodes:
        if np.hypot(*(y0 - P)) < 0.1 * diam:
            continue
        y = np.array(y0, dtype=float)
        fy = fval(y)
        ok = False
        for _ in range(40):
            if np.max(np.abs(fy)) < 1e-11 * far * far / diam:
                ok = True
                break
            try:
                step = np.linalg.solve(fjac(y), -fy)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 0.5 * diam:
                step *= 0.5 * diam / np.linalg.norm(step)
            ynew = y + step
            tries = 0
            while not contains(dom, ynew) and tries < 20:
                step *= 0.5
                ynew = y + step
                tries += 1
            if tries == 20:
                break
            fnew = fval(ynew)
            halved = 0
            while (np.max(np.abs(fnew)) > np.max(np.abs(fy))
                   and halved < 8):
                step *= 0.5
                ynew = y + step
                fnew = fval(ynew)
                halved += 1
            if halved == 8 and np.max(np.abs(fnew)) > np.max(np.abs(fy)):
                break
            y, fy = ynew, fnew
        if ok and np.hypot(*(y - P)) > 1e-3 * diam:
            if all(np.linalg.norm(y - r) > 1e-7 * diam for r in roots):
                roots.append(y)
    return roots


def _collapse_seeds(ev: KREvaluator, dom: PuncturedDomain,
                    outer_model: GreenModel, l1: float, l2: float) -> list[FloatArray]:
    """Seeds for the one-vortex-collapses family, both role assignments."""
    from .greens import green_eval

    P = np.asarray(dom.P)
    seeds: list[FloatArray] = []
    rbp = robin(outer_model, P)
    ev_out = KREvaluator(outer_model)
    for pinned, far, collapse_first in ((l1, l2, True), (l2, l1, False)):
        for y0 in _far_equilibria(outer_model, P, pinned, far):
            gv = green_eval(outer_model, P, y0, order=1)
            gvec = pinned * pinned * rbp.gradR - 2.0 * pinned * far * gv.dG_x
            gnorm = float(np.linalg.norm(gvec))
            if gnorm > 1e-6:
                try:
                    s_off = asymptotics.type2_heps_root(
                        gnorm, pinned, dom.eps).root
                except ValueError:
                    continue
                # the logarithmic radius law is slow; near a wall the
                # actual offset can sit well inside it and the far
                # vortex drifts toward the hole, so bracket both
                for mu in (0.0, 0.3, 0.6):
                    y_far = y0 + mu * (P - y0)
                    for scale in (0.5, 1.0, 2.0):
                        for sign in (1.0, -1.0):
                            near = P + sign * scale * s_off * gvec / gnorm
                            z = (np.concatenate([near, y_far])
                                 if collapse_first
                                 else np.concatenate([y_far, near]))
                            if _admissible(dom, z):
                                seeds.append(z)
                continue
            # the force at the hole center vanishes, so the offset law
            # is quadratic: radii come from the reduced-Hessian
            # eigenvalues along the matching eigenvector directions
            seeds += _second_order_seeds(ev_out, dom, P, y0, pinned, far,
                                         collapse_first)
    return seeds


def _second_order_seeds(ev_out: KREvaluator, dom: PuncturedDomain,
                        P: FloatArray, y0: FloatArray, pinned: float,
                        far: float, collapse_first: bool) -> list[FloatArray]:
    if collapse_first:
        cfg0 = VortexConfig(x=P, y=y0, lambda1=pinned, lambda2=far)
        hess = kr_hess(ev_out, cfg0)
    else:
        cfg0 = VortexConfig(x=y0, y=P, lambda1=far, lambda2=pinned)
        perm = [2, 3, 0, 1]
        hess = kr_hess(ev_out, cfg0)[np.ix_(perm, perm)]
    aff = hess[2:, 2:]
    try:
        shift = np.linalg.solve(aff, hess[2:, :2])
        m0 = asymptotics.matrix_M0(hess)
    except (np.linalg.LinAlgError, ValueError):
        return []
    vals, vecs = asymptotics.eig2(m0)
    seeds: list[FloatArray] = []
    for lam, eta in zip(vals, vecs.T):
        if lam <= 0.0:
            continue
        try:
            r = asymptotics.type2_r_eps(lam, pinned, dom.eps)
        except ValueError:
            continue
        for scale in (0.7, 1.0, 1.4):
            for sign in (1.0, -1.0):
                dx = sign * scale * r * eta
                y_far = y0 - shift @ dx
                near = P + dx
                z = (np.concatenate([near, y_far]) if collapse_first
                     else np.concatenate([y_far, near]))
                if _admissible(dom, z):
                    seeds.append(z)
    return seeds


def _outer_green(dom: PuncturedDomain,
                 like: GreenModel | None = None) -> GreenModel:
    if isinstance(dom.outer, Disk):
        return disk_model(dom.outer)
    cfg = like.mfs_config if like is not None else None
    return mfs_fit(dom.outer, cfg)


def _is_centered_annulus(dom) -> bool:
    return (isinstance(dom, PuncturedDomain) and isinstance(dom.outer, Disk)
            and math.hypot(dom.P[0] - dom.outer.center[0],
                           dom.P[1] - dom.outer.center[1]) < 1e-14)


def _rotation_mode(z: FloatArray, center: FloatArray) -> FloatArray:
    dx = z[:2] - center
    dy = z[2:] - center
    return np.array([-dx[1], dx[0], -dy[1], dy[0]])


def _radial_nondegenerate(hess: FloatArray, z: FloatArray, center: FloatArray) -> bool:
    """Spectral test on the complement of the rotational zero mode."""
    v = _rotation_mode(z, center)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return False
    v = v / nv
    basis = np.linalg.svd(v[None, :])[2][1:]
    reduced = basis @ hess @ basis.T
    eigs = np.linalg.eigvalsh(0.5 * (reduced + reduced.T))
    scale = float(np.max(np.abs(np.linalg.eigvalsh(hess))))
    return bool(np.min(np.abs(eigs)) > _DEGENERACY_REL * scale)


def gauge_fix_annulus(cp: CriticalPoint, center=(0.0, 0.0)) -> CriticalPoint:
    """Rotate a rotational-orbit point so x lies on the positive first axis."""
    c = as_point(center)
    dx = np.array([cp.x.x1 - c[0], cp.x.x2 - c[1]])
    r = float(np.hypot(*dx))
    if r == 0.0:
        raise ValueError("cannot gauge a point at the rotation center")
    ang = math.atan2(dx[1], dx[0])
    ca, sa = math.cos(-ang), math.sin(-ang)
    rot = np.array([[ca, -sa], [sa, ca]])
    nx = rot @ dx + c
    ny = rot @ np.array([cp.y.x1 - c[0], cp.y.x2 - c[1]]) + c
    return replace(cp, x=Point2(float(nx[0]), float(nx[1])),
                   y=Point2(float(ny[0]), float(ny[1])), gauge=ang)


def classify_type(cp: CriticalPoint, P, eps: float, beta: float,
                  cfg: SearchConfig, c_tau: float = 1.0, tau: float = 1.0,
                  scale: float = 1.0) -> str:
    """Distance-based type label relative to the hole at P.

    Both distances inside the collapse band: both vortices collapse.
    Exactly one distance below delta0: one collapses.  Both at domain
    scale: neither does.  Anything else stays unclassified.  delta0 is
    expressed in units of the domain radius, so scale carries the
    half-diameter of the outer domain.
    """
    pa = as_point(P)
    th = cfg.thresholds
    dist_x = math.hypot(cp.x.x1 - pa[0], cp.x.x2 - pa[1])
    dist_y = math.hypot(cp.y.x1 - pa[0], cp.y.x2 - pa[1])
    tau_adj = max(tau, 1.0 / tau)
    base = c_tau * eps ** beta
    lo = th.c_lo * base / tau_adj
    hi = th.c_hi * base * tau_adj
    delta0 = th.delta0 * scale
    in_band_x = lo <= dist_x <= hi
    in_band_y = lo <= dist_y <= hi
    if in_band_x and in_band_y:
        label = "III"
    elif (dist_x < delta0) != (dist_y < delta0):
        label = "II"
    elif dist_x >= delta0 and dist_y >= delta0:
        label = "I"
    else:
        label = "unclassified"
    cp.type = label
    return label


def _dedup(points: list[CriticalPoint], radius: float) -> list[CriticalPoint]:
    kept: list[CriticalPoint] = []
    for cp in sorted(points, key=lambda c: c.grad_norm):
        if all(np.linalg.norm(cp.as_vector() - k.as_vector()) > radius for k in kept):
            kept.append(cp)
    return kept


def _mark_swap_pairs(points: list[CriticalPoint], radius: float) -> None:
    pair = 0
    for i, a in enumerate(points):
        if a.pair_id is not None:
            continue
        va = a.as_vector()
        swapped = np.concatenate([va[2:], va[:2]])
        if np.linalg.norm(va - swapped) <= radius:
            continue
        for b in points[i + 1:]:
            if b.pair_id is None and np.linalg.norm(b.as_vector() - swapped) <= radius:
                a.pair_id = b.pair_id = pair
                pair += 1
                break


def enumerate_critical_points(ev: KREvaluator, cfg: SearchConfig, *,
                              lambda1: float = 1.0,
                              lambda2: float = 1.0) -> list[CriticalPoint]:
    """Stratified global search over the admissible pair set.

    Returns deduplicated certified points.  On a rotationally invariant
    punctured disk the rotational gauge is fixed before deduplication,
    so each orbit contributes one record with a radial nondegeneracy
    verdict in place of the full-spectrum one.
    """
    dom = ev.green.domain
    tau = lambda1 / lambda2
    seeds = _grid_seeds(ev, cfg, lambda1, lambda2)
    c_tau = 1.0
    beta = tau / (1.0 + tau) ** 2
    outer_model = None
    if isinstance(dom, PuncturedDomain):
        outer_model = _outer_green(dom, ev.green)
        rb = robin(outer_model, dom.P)
        c_tau = asymptotics.constants(tau, rb.R).c_tau
        seeds += _ring_seeds(dom, cfg, tau, c_tau)
        seeds += _collapse_seeds(ev, dom, outer_model, lambda1, lambda2)

    found: list[CriticalPoint] = []
    anchors: list[FloatArray] = []

    def refine(z: FloatArray) -> CriticalPoint | None:
        seed_cfg = VortexConfig(x=z[:2], y=z[2:], lambda1=lambda1, lambda2=lambda2)
        try:
            return newton_refine(ev, seed_cfg, cfg,
                                 deflate_at=anchors if cfg.deflation else None)
        except (RefineError, ValueError):
            return None

    if cfg.threads > 1 and not cfg.deflation:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(refine, seeds))
        found = [r for r in results if r is not None]
    else:
        for z in seeds:
            r = refine(z)
            if r is not None:
                found.append(r)
                if cfg.deflation:
                    anchors.append(r.as_vector())

    centered = _is_centered_annulus(dom)
    if centered:
        center = np.asarray(dom.P)
        gauged = []
        for cp in found:
            try:
                gauged.append(gauge_fix_annulus(cp, center))
            except ValueError:
                continue
        found = gauged

    if cfg.dedup_radius > 0.0:
        radius = cfg.dedup_radius
    elif isinstance(dom, PuncturedDomain):
        radius = max(1e-6, 0.05 * dom.eps ** beta)
    else:
        radius = max(1e-6, 1e-5 * diameter(dom))
    tol = gradient_tolerance(ev, lambda1, lambda2, cfg.newton_tol)
    if radius <= 10.0 * tol:
        raise ValueError("dedup radius must exceed 10 * gradient tolerance")
    found = _dedup(found, radius)

    if centered:
        center = np.asarray(dom.P)
        for cp in found:
            h = _hess_at(ev, cp.as_vector(), lambda1, lambda2)
            cp.radial_nondegenerate = _radial_nondegenerate(h, cp.as_vector(), center)

    if abs(lambda1 - lambda2) <= 1e-12 and not centered:
        extra = []
        for cp in found:
            v = cp.as_vector()
            swapped = np.concatenate([v[2:], v[:2]])
            if np.linalg.norm(v - swapped) <= radius:
                continue
            if any(np.linalg.norm(swapped - o.as_vector()) <= radius
                   for o in found + extra):
                continue
            r = refine(swapped)
            if r is not None and np.linalg.norm(r.as_vector() - swapped) <= radius:
                extra.append(r)
        found += extra
        _mark_swap_pairs(found, radius)

    if isinstance(dom, PuncturedDomain):
        half_diam = 0.5 * diameter(dom)
        for cp in found:
            classify_type(cp, dom.P, dom.eps, beta, cfg, c_tau=c_tau, tau=tau,
                          scale=half_diam)
    found.sort(key=lambda c: (c.x.x1, c.x.x2, c.y.x1, c.y.x2))
    return found


# ---------------------------------------------------------------------------
# local degree


@dataclass
class DegreeReport:
    degree: int | None
    status: str
    boundary_min: float
    zeros: list[CriticalPoint]


def _box_boundary_samples(box, n_boundary: int) -> FloatArray:
    (xr, yr) = box
    lows = np.array([xr[0][0], xr[1][0], yr[0][0], yr[1][0]], dtype=float)
    highs = np.array([xr[0][1], xr[1][1], yr[0][1], yr[1][1]], dtype=float)
    if np.any(highs <= lows):
        raise ValueError("box intervals must have positive length")
    m = max(2, int(round(n_boundary ** (1.0 / 3.0))))
    axes = [np.linspace(lows[k], highs[k], m) for k in range(4)]
    samples = []
    for k in range(4):
        others = [axes[j] for j in range(4) if j != k]
        mesh = np.stack(np.meshgrid(*others, indexing="ij"), axis=-1).reshape(-1, 3)
        for val in (lows[k], highs[k]):
            block = np.empty((mesh.shape[0], 4))
            block[:, k] = val
            block[:, [j for j in range(4) if j != k]] = mesh
            samples.append(block)
    return np.vstack(samples)


def _box_interior_seeds(box, res: int = 5) -> FloatArray:
    (xr, yr) = box
    lows = np.array([xr[0][0], xr[1][0], yr[0][0], yr[1][0]], dtype=float)
    highs = np.array([xr[0][1], xr[1][1], yr[0][1], yr[1][1]], dtype=float)
    axes = [np.linspace(lows[k], highs[k], res + 2)[1:-1] for k in range(4)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)


def _inside_box(box, z: FloatArray) -> bool:
    (xr, yr) = box
    return bool(
        xr[0][0] < z[0] < xr[0][1] and xr[1][0] < z[1] < xr[1][1]
        and yr[0][0] < z[2] < yr[0][1] and yr[1][0] < z[3] < yr[1][1]
    )


def local_degree_box(ev: KREvaluator, box, n_boundary: int = 125, *,
                     lambda1: float = 1.0, lambda2: float = 1.0,
                     cfg: SearchConfig | None = None) -> DegreeReport:
    """Topological degree of the gradient over a product box.

    The degree is assembled as the index sum of the zeros found inside;
    degenerate zero sets are handled by a small constant perturbation of
    the field, which cannot change the degree while the perturbation
    stays below the boundary minimum.
    """
    cfg = cfg or SearchConfig()
    dom = ev.green.domain
    samples = _box_boundary_samples(box, n_boundary)
    for z in samples:
        if not _admissible(dom, z):
            raise ValueError("box boundary leaves the admissible set")
    norms = np.array([np.max(np.abs(_grad_at(ev, z, lambda1, lambda2)))
                      for z in samples])
    bmin = float(norms.min())
    tol = gradient_tolerance(ev, lambda1, lambda2, cfg.newton_tol)
    if bmin < 100.0 * tol:
        raise ValueError("zero on boundary")

    def collect(shift: FloatArray | None) -> list[CriticalPoint] | None:
        def grad(z: FloatArray) -> FloatArray:
            g = _grad_at(ev, z, lambda1, lambda2)
            return g if shift is None else g - shift

        def hess(z: FloatArray) -> FloatArray:
            return _hess_at(ev, z, lambda1, lambda2)

        seeds = _box_interior_seeds(box)
        seeds = [z for z in seeds if _admissible(dom, z)]
        ranked = sorted(seeds, key=lambda z: float(np.max(np.abs(grad(z)))))
        zeros: list[CriticalPoint] = []
        for z0 in ranked[:40]:
            try:
                z, iters = _newton_core(grad, hess, z0, tol, cfg.max_iter,
                                        lambda w: _admissible(dom, w),
                                        diameter(dom))
            except RefineError:
                continue
            if not _inside_box(box, z):
                continue
            cp = _certify(ev, z, lambda1, lambda2, iters, z0)
            if shift is not None:
                cp.grad_norm = float(np.max(np.abs(grad(z))))
            if all(np.linalg.norm(cp.as_vector() - o.as_vector()) > 1e-7
                   for o in zeros):
                zeros.append(cp)
        if any(not cp.nondegenerate for cp in zeros):
            return None
        return zeros

    zeros = collect(None)
    if zeros is not None:
        return DegreeReport(degree=sum(c.local_index for c in zeros), status="ok",
                            boundary_min=bmin, zeros=zeros)

    direction = np.array([0.62, 0.33, -0.57, 0.43])
    direction /= np.linalg.norm(direction)
    shift = 0.5 * bmin * direction
    zeros = collect(shift)
    if zeros is not None:
        return DegreeReport(degree=sum(c.local_index for c in zeros),
                            status="perturbed", boundary_min=bmin, zeros=zeros)
    return DegreeReport(degree=None, status="unverified",
                        boundary_min=bmin, zeros=[])


def annulus_orbit_degree(ev: KREvaluator, r_x: float, r_y: float, *,
                         width: float | None = None, n_theta: int = 48,
                         lambda1: float = 1.0, lambda2: float = 1.0,
                         cfg: SearchConfig | None = None) -> DegreeReport:
    """Degree of the gradient over a tube around a rotational orbit.

    The orbit is the circle (r_x e^{i t}, -r_y e^{i t}) produced by a
    hole at the center of a disk.  Every point of it is a zero with a
    rotational null direction, so the degree is read off a constant
    small perturbation of the field, whose zeros inside the tube are
    isolated; the perturbation stays below the boundary minimum, which
    pins the degree during the homotopy.
    """
    cfg = cfg or SearchConfig()
    dom = ev.green.domain
    if width is None:
        width = 0.5 * min(r_x, r_y)

    def orbit(t: float) -> FloatArray:
        c, s = math.cos(t), math.sin(t)
        return np.array([r_x * c, r_x * s, -r_y * c, -r_y * s])

    thetas = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    rng = np.random.default_rng(7)
    bmin = math.inf
    for t in thetas:
        z0 = orbit(t)
        for _ in range(6):
            u = rng.standard_normal(4)
            u /= np.linalg.norm(u)
            z = z0 + width * u
            if _admissible(dom, z):
                g = _grad_at(ev, z, lambda1, lambda2)
                bmin = min(bmin, float(np.max(np.abs(g))))
    tol = gradient_tolerance(ev, lambda1, lambda2, cfg.newton_tol)
    if not math.isfinite(bmin) or bmin < 100.0 * tol:
        raise ValueError("zero on tube boundary")

    def in_tube(z: FloatArray) -> bool:
        t = math.atan2(z[1], z[0])
        return bool(np.linalg.norm(z - orbit(t)) < width)

    for trial in range(3):
        u = rng.standard_normal(4)
        u /= np.linalg.norm(u)
        # small against the boundary minimum so the homotopy to the
        # unshifted field cannot cross zero on the tube boundary, and
        # small against the soft transverse stiffness so the perturbed
        # zeros stay well inside the tube
        shift = 0.15 * bmin * u

        def grad(z: FloatArray) -> FloatArray:
            return _grad_at(ev, z, lambda1, lambda2) - shift

        zeros: list[CriticalPoint] = []
        degenerate = False
        for t in thetas:
            z = _clipped_newton(ev, grad, orbit(t), tol, dom, lambda1,
                                lambda2)
            if z is None or not in_tube(z):
                continue
            cp = _certify(ev, z, lambda1, lambda2, 0, orbit(t))
            cp.grad_norm = float(np.max(np.abs(grad(z))))
            if not cp.nondegenerate:
                degenerate = True
                break
            if all(np.linalg.norm(cp.as_vector() - o.as_vector()) > 1e-7
                   for o in zeros):
                zeros.append(cp)
        if degenerate or not zeros:
            continue
        return DegreeReport(degree=sum(c.local_index for c in zeros),
                            status="perturbed", boundary_min=bmin,
                            zeros=zeros)
    return DegreeReport(degree=None, status="unverified",
                        boundary_min=bmin, zeros=[])


def _clipped_newton(ev: KREvaluator, grad, z0: FloatArray, tol: float,
                    dom, lambda1: float, lambda2: float,
                    max_iter: int = 80) -> FloatArray | None:
    """Newton flow that damps steps along near-null Hessian directions.

    Seeds on a rotational orbit face an exactly singular Hessian, so the
    plain solve is replaced by an eigenvalue-clipped inverse.
    """
    z = np.array(z0, dtype=float)
    g = grad(z)
    gn = float(np.max(np.abs(g)))
    for _ in range(max_iter):
        if gn < tol:
            return z
        h = _hess_at(ev, z, lambda1, lambda2)
        w, v = np.linalg.eigh(0.5 * (h + h.T))
        floor = 1e-2 * float(np.max(np.abs(w)))
        if floor == 0.0:
            return None
        wc = np.where(np.abs(w) < floor, np.copysign(floor, w + 1e-300), w)
        step = -v @ ((v.T @ g) / wc)
        accepted = False
        for _ in range(30):
            znew = z + step
            if _admissible(dom, znew):
                gnew = grad(znew)
                nnew = float(np.max(np.abs(gnew)))
                if nnew < gn:
                    z, g, gn = znew, gnew, nnew
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            return None
    return z if gn < tol else None
