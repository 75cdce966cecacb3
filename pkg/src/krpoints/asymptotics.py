"""Closed-form objects on the theorem side of the comparison.

Scaling constants, the 2x2 structure matrices, the one-dimensional root
problems governing near-hole radii, the unit-disk analysis of the
one-vortex-collapses regime, and the blown-up limit system for the
both-vortices-collapse regime.  Everything here is cheap and exact; the
numerical brute force lives in ``kr`` and ``critical``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .geometry import Point2, as_point, diameter
from .greens import GreenModel, RobinData, robin
from .kr import KREvaluator, VortexConfig, kr_grad, kr_hess

FloatArray = NDArray[np.float64]

_GRAD_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class Constants:
    """Scaling data attached to a strength ratio and a Robin value.

    beta is the radius exponent, c_tau the leading radius coefficient,
    d_tau the signed gap controlling which vortex sits closer to the hole.
    """

    tau: float
    beta: float
    c_tau: float
    d_tau: float
    r_p: float

    def __post_init__(self) -> None:
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.beta <= 0.25 + 1e-15:
            raise ValueError("beta out of range (0, 1/4]")
        if not self.c_tau > 0.0:
            raise ValueError("c_tau must be positive")


def constants(tau: float, r_p: float) -> Constants:
    """Assemble the scaling constants for strength ratio tau and Robin value r_p."""
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    beta = tau / (1.0 + tau) ** 2
    c_tau = tau ** (1.0 / (1.0 + tau)) * math.exp(
        -2.0 * math.pi * r_p * (tau * tau + tau + 1.0) / (1.0 + tau) ** 2
    )
    d_tau = (tau ** 3 - 1.0) / ((1.0 + tau) * tau)
    return Constants(tau=tau, beta=beta, c_tau=c_tau, d_tau=d_tau, r_p=r_p)


def k_of_r(r: float, tau: float, r_p: float) -> float:
    """Radial balance function; vanishes exactly at r = c_tau."""
    if not r > 0.0:
        raise ValueError("r must be positive")
    beta = tau / (1.0 + tau) ** 2
    return (1.0 + tau) * (math.log(r) + 2.0 * (1.0 - beta) * math.pi * r_p) - math.log(tau)


# ---------------------------------------------------------------------------
# unit-disk analysis of the one-vortex-collapses regime


def type2_disk_h(s: float, t: float, lambda1: float, lambda2: float) -> float:
    """Scalar balance for the far vortex at (t,0) with the hole at (s,0).

    Zeros in t are the admissible far-vortex positions on the symmetry
    axis of the unit disk.
    """
    if not 0.0 <= s < 1.0:
        raise ValueError("s must lie in [0, 1)")
    if not -1.0 < t < 1.0:
        raise ValueError("t must lie in (-1, 1)")
    if t == s:
        raise ValueError("pole at t = s")
    return (
        lambda2 * t / (1.0 - t * t)
        + lambda1 / (t - s)
        + lambda1 * s / (1.0 - s * t)
    )


def _type2_disk_dh(s: float, t: float, lambda1: float, lambda2: float) -> float:
    return (
        lambda2 * (1.0 + t * t) / (1.0 - t * t) ** 2
        - lambda1 / (t - s) ** 2
        + lambda1 * s * s / (1.0 - s * t) ** 2
    )


@dataclass(frozen=True)
class DiskZero:
    t: float
    slope_sign: int


@dataclass(frozen=True)
class Type2DiskSolution:
    zeros: tuple[DiskZero, ...]
    fold: float | None


def type2_disk_solve(
    s: float, lambda1: float, lambda2: float, grid_step: float = 1e-4
) -> Type2DiskSolution:
    """All zeros of h(s, .) on (0, s), each with the sign of dh/dt.

    Grid sign scan followed by bracketed root refinement.  A fold is
    reported when two zeros sit closer than a few grid cells.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    n = max(64, int(math.ceil(s / grid_step)))
    ts = np.linspace(0.0, s, n + 1)[1:-1]
    vals = (
        lambda2 * ts / (1.0 - ts * ts)
        + lambda1 / (ts - s)
        + lambda1 * s / (1.0 - s * ts)
    )
    zeros: list[DiskZero] = []
    sign = np.sign(vals)
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        root = brentq(
            lambda t: type2_disk_h(s, t, lambda1, lambda2),
            ts[i],
            ts[i + 1],
            xtol=1e-14,
            rtol=8.881784197001252e-16,
        )
        slope = _type2_disk_dh(s, root, lambda1, lambda2)
        zeros.append(DiskZero(t=float(root), slope_sign=int(math.copysign(1.0, slope))))
    for i in np.nonzero(sign == 0)[0]:
        zeros.append(DiskZero(t=float(ts[i]), slope_sign=0))
    zeros.sort(key=lambda z: z.t)
    fold = None
    if len(zeros) == 2 and zeros[1].t - zeros[0].t < 4.0 * grid_step:
        fold = 0.5 * (zeros[0].t + zeros[1].t)
    return Type2DiskSolution(zeros=tuple(zeros), fold=fold)


@dataclass(frozen=True)
class Type2Thresholds:
    s_bar: float
    d1: float
    d2: float


def _fold_location(lambda1: float, lambda2: float) -> float:
    """Bisection on the zero count of h(s, .): 0 below the fold, 2 above."""
    lo = 0.05
    if len(type2_disk_solve(lo, lambda1, lambda2).zeros) != 0:
        raise RuntimeError("no fold: zeros persist at small s")
    hi = None
    for cand in np.arange(0.10, 0.999, 0.02):
        if len(type2_disk_solve(float(cand), lambda1, lambda2).zeros) >= 2:
            hi = float(cand)
            break
        lo = float(cand)
    if hi is None:
        raise RuntimeError("no fold: zero count never reaches 2")
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if len(type2_disk_solve(mid, lambda1, lambda2).zeros) >= 2:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def type2_disk_thresholds(lambda1: float, lambda2: float) -> Type2Thresholds:
    """Fold location and the two hole-distance thresholds of the unit disk."""
    if lambda1 <= 0.0 or lambda2 <= 0.0:
        raise ValueError("strengths must be positive")
    s_bar = _fold_location(lambda1, lambda2)
    s_bar_swapped = s_bar if lambda1 == lambda2 else _fold_location(lambda2, lambda1)
    return Type2Thresholds(s_bar=s_bar, d1=1.0 - s_bar, d2=1.0 - s_bar_swapped)


@dataclass(frozen=True)
class HepsRoot:
    root: float
    in_paper_bracket: bool
    bracket: tuple[float, float]


def type2_heps_root(grad_norm: float, lambda1: float, eps: float) -> HepsRoot:
    """Unique root of ln(r)/r = (pi/lambda1^2) * grad_norm * ln(eps).

    ln(r)/r is increasing on (0, e), so the root is found robustly by
    bracketed bisection there.  The asymptotic bracket
    (1/|ln eps|, 1/sqrt(|ln eps|)) only contains the root once
    ln|ln eps| exceeds pi*grad_norm/lambda1^2; the flag records whether
    it does at this eps.
    """
    if grad_norm <= 0.0:
        raise ValueError("grad_norm must be positive")
    if not 0.0 < eps < math.exp(-1.0):
        raise ValueError("eps must lie in (0, 1/e)")
    rhs = math.pi / lambda1 ** 2 * grad_norm * math.log(eps)

    def f(r: float) -> float:
        return math.log(r) / r - rhs

    root = brentq(f, 1e-300, 1.0, xtol=1e-300, rtol=8.881784197001252e-16)
    labs = abs(math.log(eps))
    bracket = (1.0 / labs, 1.0 / math.sqrt(labs))
    inside = bracket[0] < root < bracket[1]
    return HepsRoot(root=float(root), in_paper_bracket=inside, bracket=bracket)


def type2_r_eps(lam_i: float, lambda1: float, eps: float) -> float:
    """Unique r in (0,1) with ln(r)/(r^2 ln(eps)) = lam_i*pi/lambda1^2."""
    if lam_i <= 0.0:
        raise ValueError("lam_i must be positive")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    rhs = lam_i * math.pi / lambda1 ** 2

    def f(r: float) -> float:
        return math.log(r) / (r * r * math.log(eps)) - rhs

    lo, hi = 1e-150, 1.0 - 1e-12
    if f(lo) * f(hi) > 0.0:
        raise ValueError("no sign change in bracket")
    return float(brentq(f, lo, hi, xtol=1e-300, rtol=8.881784197001252e-16))


# ---------------------------------------------------------------------------
# structure matrices


def eig2(mat: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Closed-form eigen data of a symmetric 2x2 matrix.

    Returns (values ascending, eigenvectors as columns).  Eigenvector
    signs are fixed by making the first nonzero component positive, so
    direction comparisons are deterministic.
    """
    m = 0.5 * (np.asarray(mat, dtype=float) + np.asarray(mat, dtype=float).T)
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    mid = 0.5 * (a + c)
    disc = math.hypot(0.5 * (a - c), b)
    vals = np.array([mid - disc, mid + disc])
    vecs = np.empty((2, 2))
    for k in range(2):
        lam = vals[k]
        cand1 = np.array([b, lam - a])
        cand2 = np.array([lam - c, b])
        v = cand1 if np.linalg.norm(cand1) >= np.linalg.norm(cand2) else cand2
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            v = np.array([1.0, 0.0]) if k == 0 else np.array([0.0, 1.0])
        else:
            v = v / nrm
        lead = v[0] if abs(v[0]) > 1e-14 else v[1]
        if lead < 0.0:
            v = -v
        vecs[:, k] = v
    return vals, vecs


def matrix_M0(hess: FloatArray) -> FloatArray:
    """Schur complement of the y-block of a 4x4 interaction Hessian."""
    h = np.asarray(hess, dtype=float)
    if h.shape != (4, 4):
        raise ValueError("expected a 4x4 Hessian")
    axx = h[:2, :2]
    axy = h[:2, 2:]
    ayy = h[2:, 2:]
    scale = max(np.linalg.norm(ayy, np.inf), np.linalg.norm(h, np.inf))
    if min(abs(np.linalg.eigvalsh(0.5 * (ayy + ayy.T)))) <= 1e-10 * scale:
        raise ValueError("Thm 1.9 hypothesis fails: singular y-block")
    m0 = axx - axy @ np.linalg.solve(ayy, axy.T)
    return 0.5 * (m0 + m0.T)


def matrix_Mtilde(rob: RobinData) -> FloatArray:
    """Diagonal H block minus 3*pi times the Robin gradient outer product."""
    g = np.asarray(rob.gradR, dtype=float)
    return np.asarray(rob.hessH_xx, dtype=float) - 3.0 * math.pi * np.outer(g, g)


def matrix_Mbar_M1(
    rob: RobinData, tau: float, *, domain_diameter: float = 2.0
) -> tuple[FloatArray, FloatArray]:
    """Weighted H-block combinations for the zero-Robin-gradient regime."""
    g = np.linalg.norm(np.asarray(rob.gradR, dtype=float))
    if g >= _GRAD_ZERO_TOL / domain_diameter:
        warnings.warn(
            "Robin gradient is not numerically zero; the zero-gradient "
            "hypothesis behind these matrices is violated",
            stacklevel=2,
        )
    hxx = np.asarray(rob.hessH_xx, dtype=float)
    hyx = np.asarray(rob.hessH_xy, dtype=float)
    mbar = (tau ** 4 + tau ** 2 + 1.0) * hxx + (tau ** 2 - 1.0) ** 2 * hyx
    m1 = (tau ** 2 + tau + 1.0) * hxx + (tau + 1.0) ** 2 * hyx
    return mbar, m1


# ---------------------------------------------------------------------------
# prediction assembly


@dataclass
class PredictionSet:
    """Theorem-side prediction of a critical-point family at one eps."""

    theorem_id: str
    count: int
    points: list[tuple[Point2, Point2]]
    errors: list[str]
    directions: list[FloatArray]
    exponent: float
    constant: float
    indices: list[int]
    nontrivially_different: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.count != len(self.points):
            raise ValueError("count must equal the number of predicted points")
        if self.errors and len(self.errors) != self.count:
            raise ValueError("one error tag per predicted point")

    def as_record(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "count": self.count,
            "points": [
                {"x": [p.x1, p.x2], "y": [q.x1, q.x2]} for p, q in self.points
            ],
            "errors": list(self.errors),
            "directions": [[float(d[0]), float(d[1])] for d in self.directions],
            "exponent": self.exponent,
            "constant": self.constant,
            "indices": list(self.indices),
            "nontrivially_different": self.nontrivially_different,
            "meta": dict(self.meta),
        }


def _hypothesis(condition: bool, description: str) -> None:
    if not condition:
        raise ValueError(f"hypothesis violated: {description}")


def _shift(P: Point2, radius: float, direction: FloatArray) -> Point2:
    return Point2(P.x1 + radius * float(direction[0]), P.x2 + radius * float(direction[1]))


def predict(
    theorem_id: str,
    green: GreenModel,
    P,
    lambda1: float,
    lambda2: float,
    eps: float,
    y0=None,
) -> PredictionSet:
    """Assemble the full prediction record for one theorem scenario.

    ``green`` is a model of the unpunctured domain; ``y0`` is required
    for the T1_9 scenario (the far-vortex position of the underlying
    critical point).  Hypothesis failures raise ValueError with the
    failed check named.
    """
    pa = as_point(P)
    Pp = Point2(float(pa[0]), float(pa[1]))
    tau = lambda1 / lambda2
    diam = diameter(green.domain)
    rob = robin(green, Pp)
    cst = constants(tau, rob.R)
    grad_r = np.asarray(rob.gradR, dtype=float)
    grad_zero = np.linalg.norm(grad_r) < _GRAD_ZERO_TOL / diam

    if theorem_id == "T1_15":
        _hypothesis(abs(tau - 1.0) > 1e-12, "T1_15 needs lambda1 != lambda2")
        _hypothesis(not grad_zero, "T1_15 needs a nonzero Robin gradient")
        u = grad_r / np.linalg.norm(grad_r)
        rx = cst.c_tau * eps ** cst.beta
        ry = rx / tau
        points = [
            (_shift(Pp, rx, u), _shift(Pp, -ry, u)),
            (_shift(Pp, -rx, u), _shift(Pp, ry, u)),
        ]
        tag = f"O(eps^{2 * cst.beta:.6g})"
        return PredictionSet(
            theorem_id=theorem_id,
            count=2,
            points=points,
            errors=[tag, tag],
            directions=[u, -u],
            exponent=cst.beta,
            constant=cst.c_tau,
            indices=[],
            nontrivially_different=2,
            meta={"tau": tau, "r_p": rob.R},
        )

    if theorem_id == "T1_16":
        _hypothesis(abs(tau - 1.0) <= 1e-12, "T1_16 needs lambda1 = lambda2")
        _hypothesis(not grad_zero, "T1_16 needs a nonzero Robin gradient")
        mt = matrix_Mtilde(rob)
        vals, vecs = eig2(mt)
        _hypothesis(
            abs(vals[1] - vals[0]) > 1e-8 * (abs(vals[0]) + abs(vals[1]) + 1e-30),
            "T1_16 needs distinct eigenvalues of the structure matrix",
        )
        r = math.exp(-1.5 * math.pi * rob.R) * eps ** 0.25
        points = []
        dirs = []
        for m in range(2):
            nu = vecs[:, m]
            points.append((_shift(Pp, r, nu), _shift(Pp, -r, nu)))
            dirs.append(nu)
        for m in range(2):
            nu = vecs[:, m]
            points.append((_shift(Pp, -r, nu), _shift(Pp, r, nu)))
            dirs.append(-nu)
        tag = "O(eps^0.5)"
        return PredictionSet(
            theorem_id=theorem_id,
            count=4,
            points=points,
            errors=[tag] * 4,
            directions=dirs,
            exponent=0.25,
            constant=math.exp(-1.5 * math.pi * rob.R),
            indices=[],
            nontrivially_different=2,
            meta={"eigenvalues": [float(v) for v in vals], "r_p": rob.R},
        )

    if theorem_id == "T1_17":
        _hypothesis(grad_zero, "T1_17 needs a vanishing Robin gradient")
        mbar, _ = matrix_Mbar_M1(rob, tau, domain_diameter=diam)
        vals, vecs = eig2(mbar)
        _hypothesis(
            abs(vals[1] - vals[0]) > 1e-8 * (abs(vals[0]) + abs(vals[1]) + 1e-30),
            "T1_17 needs distinct eigenvalues of the structure matrix",
        )
        rx = cst.c_tau * eps ** cst.beta
        ry = rx / tau
        points = []
        dirs = []
        for m in range(2):
            nu = vecs[:, m]
            for sgn in (1.0, -1.0):
                points.append((_shift(Pp, sgn * rx, nu), _shift(Pp, -sgn * ry, nu)))
                dirs.append(sgn * nu)
        tag = f"O(eps^{2 * cst.beta:.6g})"
        return PredictionSet(
            theorem_id=theorem_id,
            count=4,
            points=points,
            errors=[tag] * 4,
            directions=dirs,
            exponent=cst.beta,
            constant=cst.c_tau,
            indices=[],
            nontrivially_different=2 if abs(tau - 1.0) <= 1e-12 else 4,
            meta={"eigenvalues": [float(v) for v in vals], "r_p": rob.R},
        )

    if theorem_id == "T1_19":
        center = getattr(green.domain, "center", None)
        _hypothesis(center is not None, "T1_19 needs a disk domain")
        ca = as_point(center)
        _hypothesis(
            math.hypot(Pp.x1 - ca[0], Pp.x2 - ca[1]) < 1e-12 * diam,
            "T1_19 needs the hole at the disk center",
        )
        rx = cst.c_tau * eps ** cst.beta
        ry = rx / tau
        axis = np.array([1.0, 0.0])
        points = [(_shift(Pp, rx, axis), _shift(Pp, -ry, axis))]
        dirs = [axis]
        if abs(tau - 1.0) > 1e-12:
            points.append((_shift(Pp, -rx, axis), _shift(Pp, ry, axis)))
            dirs.append(-axis)
        tag = f"O(eps^{2 * cst.beta:.6g})"
        return PredictionSet(
            theorem_id=theorem_id,
            count=len(points),
            points=points,
            errors=[tag] * len(points),
            directions=dirs,
            exponent=cst.beta,
            constant=cst.c_tau,
            indices=[],
            nontrivially_different=1 if abs(tau - 1.0) <= 1e-12 else 2,
            meta={"gauge": "x on the positive first axis", "r_p": rob.R},
        )

    if theorem_id == "T1_6":
        radius = getattr(green.domain, "radius", None)
        center = getattr(green.domain, "center", None)
        _hypothesis(radius is not None, "T1_6 needs a disk domain")
        ca = as_point(center)
        pvec = np.array([Pp.x1 - ca[0], Pp.x2 - ca[1]])
        s = float(np.linalg.norm(pvec)) / radius
        _hypothesis(s > 1e-12, "T1_6 needs the hole off the disk center")
        u = pvec / np.linalg.norm(pvec)
        thr = type2_disk_thresholds(lambda1, lambda2)
        points = []
        dirs = []
        ev = KREvaluator(green=green)
        for (la, lb, sgn_role) in ((lambda1, lambda2, 0), (lambda2, lambda1, 1)):
            sol = type2_disk_solve(s, la, lb)
            for z in sol.zeros:
                far = Point2(ca[0] + radius * z.t * u[0], ca[1] + radius * z.t * u[1])
                if sgn_role == 0:
                    cfg = VortexConfig(x=Pp, y=far, lambda1=lambda1, lambda2=lambda2)
                    gnorm = float(np.linalg.norm(kr_gradient_block(ev, cfg, "x")))
                    off = type2_heps_root(gnorm, lambda1, eps).root if gnorm > 0 else 0.0
                    gdir = kr_gradient_block(ev, cfg, "x")
                    gdir = gdir / (np.linalg.norm(gdir) + 1e-300)
                    points.append((_shift(Pp, off, gdir), far))
                    dirs.append(gdir)
                else:
                    cfg = VortexConfig(x=far, y=Pp, lambda1=lambda1, lambda2=lambda2)
                    gnorm = float(np.linalg.norm(kr_gradient_block(ev, cfg, "y")))
                    off = type2_heps_root(gnorm, lambda2, eps).root if gnorm > 0 else 0.0
                    gdir = kr_gradient_block(ev, cfg, "y")
                    gdir = gdir / (np.linalg.norm(gdir) + 1e-300)
                    points.append((far, _shift(Pp, off, gdir)))
                    dirs.append(gdir)
        count = len(points)
        nontriv = count // 2 if abs(tau - 1.0) <= 1e-12 else count
        return PredictionSet(
            theorem_id=theorem_id,
            count=count,
            points=points,
            errors=["o(1)"] * count,
            directions=dirs,
            exponent=0.0,
            constant=0.0,
            indices=[],
            nontrivially_different=nontriv,
            meta={
                "s": s,
                "s_bar": thr.s_bar,
                "d": (1.0 - s) * radius,
                "d1": thr.d1 * radius,
                "d2": thr.d2 * radius,
            },
        )

    if theorem_id == "T1_9":
        _hypothesis(y0 is not None, "T1_9 needs the far-vortex position y0")
        ya = as_point(y0)
        y0p = Point2(float(ya[0]), float(ya[1]))
        ev = KREvaluator(green=green)
        cfg = VortexConfig(x=Pp, y=y0p, lambda1=lambda1, lambda2=lambda2)
        hess = kr_hess(ev, cfg)
        m0 = matrix_M0(hess)
        vals, vecs = eig2(m0)
        ayy = hess[2:, 2:]
        ayx = hess[2:, :2]
        det_ayy = float(np.linalg.det(ayy))
        simple = abs(vals[1] - vals[0]) > 1e-8 * (abs(vals[0]) + abs(vals[1]) + 1e-30)
        points = []
        dirs = []
        indices = []
        for i in range(2):
            if vals[i] <= 0.0 or not simple:
                continue
            r_i = type2_r_eps(float(vals[i]), lambda1, eps)
            eta = vecs[:, i]
            lam_other = vals[1 - i]
            idx = int(math.copysign(1.0, det_ayy * (lam_other - vals[i])))
            for sgn in (1.0, -1.0):
                xpt = _shift(Pp, sgn * r_i, eta)
                offset = -np.linalg.solve(ayy, ayx @ (sgn * r_i * eta))
                ypt = Point2(y0p.x1 + float(offset[0]), y0p.x2 + float(offset[1]))
                points.append((xpt, ypt))
                dirs.append(sgn * eta)
                indices.append(idx)
        _hypothesis(points, "T1_9 needs a simple positive eigenvalue")
        return PredictionSet(
            theorem_id=theorem_id,
            count=len(points),
            points=points,
            errors=["o(1)"] * len(points),
            directions=dirs,
            exponent=0.0,
            constant=0.0,
            indices=indices,
            nontrivially_different=len(points),
            meta={
                "eigenvalues": [float(v) for v in vals],
                "det_ayy": det_ayy,
            },
        )

    raise ValueError(f"unknown theorem id: {theorem_id}")


def kr_gradient_block(ev: KREvaluator, cfg: VortexConfig, which: str) -> FloatArray:
    """Half of the interaction gradient: the x rows or the y rows."""
    g = kr_grad(ev, cfg)
    return g[:2] if which == "x" else g[2:]


# ---------------------------------------------------------------------------
# blown-up limit system


def _limit_quotient(w: FloatArray, z: FloatArray, tau: float, r_p: float, eps: float) -> float:
    num = (
        tau * math.log(float(np.linalg.norm(w)))
        + math.log(float(np.linalg.norm(z)))
        + 2.0 * math.pi * (tau * tau + tau + 1.0) / (tau + 1.0) * r_p
    )
    return num / (math.log(eps) + 2.0 * math.pi * r_p)


def limit_system_check(w, z, tau: float, r_p: float, eps: float) -> float:
    """Sup-norm residual of the blown-up first-order system at (w, z)."""
    wa = as_point(w)
    za = as_point(z)
    if np.linalg.norm(wa) == 0.0 or np.linalg.norm(za) == 0.0:
        raise ValueError("w and z must be nonzero")
    if np.linalg.norm(wa - za) == 0.0:
        raise ValueError("w and z must differ")
    coef = -tau / (tau + 1.0) - _limit_quotient(wa, za, tau, r_p, eps)
    dwz = wa - za
    e1 = wa / float(wa @ wa) * coef + dwz / float(dwz @ dwz)
    e2 = za / float(za @ za) * coef - tau * dwz / float(dwz @ dwz)
    return float(max(np.max(np.abs(e1)), np.max(np.abs(e2))))


def ftilde_eps(
    wt: float, zt: float, tau: float, r_p: float, eps: float
) -> tuple[float, FloatArray]:
    """Scalar reduction of the limit energy and its 2x2 Hessian.

    wt > 0 and zt < 0 put the two blown-up vortices on opposite sides of
    the hole along the first axis.
    """
    if not (wt > 0.0 and zt < 0.0):
        raise ValueError("need wt > 0 and zt < 0")
    ell = math.log(eps) + 2.0 * math.pi * r_p
    c_r = 2.0 * math.pi * (tau * tau + tau + 1.0) / (tau + 1.0) * r_p
    s_val = tau * math.log(wt) + math.log(-zt) + c_r
    value = (
        -tau / (tau + 1.0) * (tau * math.log(wt) + math.log(-zt))
        + tau * math.log(abs(wt - zt))
        - s_val * s_val / (2.0 * ell)
    )
    d = wt - zt
    h_ww = tau * tau / ((tau + 1.0) * wt * wt) - tau / (d * d) - tau * (tau - s_val) / (
        wt * wt * ell
    )
    h_wz = tau / (d * d) - tau / (wt * zt * ell)
    h_zz = tau / ((tau + 1.0) * zt * zt) - tau / (d * d) - (1.0 - s_val) / (zt * zt * ell)
    hess = np.array([[h_ww, h_wz], [h_wz, h_zz]])
    return value, hess
