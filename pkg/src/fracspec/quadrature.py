"""Quadrature for Weyl-law constants over domain x cosphere products.

Three asymptotic constants are computed here:

* the Dirichlet constant ``C' = (n (2 pi)^n)^{-1} int_Omega int_{|xi|=1}
  |p(x, xi)|^{-n/2a} domega dx`` of the fractional Weyl law, with its
  companion ``C = C'**(-2a/n)``;
* the interface constant ``c(L) = ((n-1) (2 pi)^{n-1})^{-1} int_{Sigma+}
  int_{|xi'|=1} kappa0^{-(n-1)}`` for the weighted mixed-problem operator;
* the perturbation constant ``c(M)``, same prefactor with integrand
  ``(ann / (2 kappa0^2))^{(n-1)/2}``.

Cosphere rules are composite trapezoid on the circle and product
Gauss-Legendre x trapezoid on the 2-sphere; the "cosphere" of a
1-dimensional tangent space is the two-point set {-1, +1} with counting
measure.  Error estimates come from comparing two refinement levels,
since no external truth is available for these integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .symbols import EllipticityError, PrincipalSymbol, SecondOrderCoeffs, reduce_frames

__all__ = [
    "DomainSpec",
    "QuadratureResult",
    "SphereRule",
    "sphere_rule",
    "sphere_integral",
    "domain_measure",
    "weyl_constant_dirichlet",
    "weyl_constant_L",
    "weyl_constant_M",
]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    nodes: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "error", abs(self.error))

    def __float__(self):
        return self.value


# ---------------------------------------------------------------------------
# cosphere rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereRule:
    nodes: np.ndarray  # (ns, n) unit covectors
    weights: np.ndarray  # (ns,), sums to the sphere measure
    rule_id: str


def sphere_rule(n: int, level: int = 0) -> SphereRule:
    """Quadrature rule on the unit sphere in R^n.

    n = 1 is the two-point set with counting measure; n = 2 a composite
    trapezoid rule on the circle; n = 3 product Gauss-Legendre in the
    polar cosine times trapezoid in azimuth.  Each level doubles nodes.
    """
    scale = 2.0**level
    if n == 1:
        return SphereRule(
            nodes=np.array([[1.0], [-1.0]]),
            weights=np.array([1.0, 1.0]),
            rule_id="two-point",
        )
    if n == 2:
        k = max(int(256 * scale), 8)
        th = 2.0 * np.pi * np.arange(k) / k
        nodes = np.column_stack([np.cos(th), np.sin(th)])
        weights = np.full(k, 2.0 * np.pi / k)
        return SphereRule(nodes, weights, f"trapezoid-circle-{k}")
    if n == 3:
        nz, nphi = max(int(64 * scale), 8), max(int(128 * scale), 16)
        z, wz = np.polynomial.legendre.leggauss(nz)
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        r = np.sqrt(1.0 - z**2)
        nodes = np.empty((nz * nphi, 3))
        nodes[:, 0] = np.outer(r, np.cos(phi)).ravel()
        nodes[:, 1] = np.outer(r, np.sin(phi)).ravel()
        nodes[:, 2] = np.repeat(z, nphi)
        weights = np.outer(wz, np.full(nphi, 2.0 * np.pi / nphi)).ravel()
        return SphereRule(nodes, weights, f"product-gauss-{nz}x{nphi}")
    raise ValueError("sphere rules are provided for n in {1, 2, 3}")


def _eval_on_nodes(f, nodes: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(f(nodes), dtype=float)
        if vals.shape == (nodes.shape[0],):
            return vals
    except Exception:
        pass
    return np.array([float(f(xi)) for xi in nodes])


def sphere_integral(f, n: int, level: int = 0) -> QuadratureResult:
    """Integral of f over the unit sphere with a refinement error estimate."""
    if n < 2:
        raise ValueError("sphere_integral requires n >= 2")
    vals = {}
    for lev in (level - 1, level):
        rule = sphere_rule(n, lev)
        fx = _eval_on_nodes(f, rule.nodes)
        bad = ~np.isfinite(fx)
        if bad.any():
            k = int(np.argmax(bad))
            raise ValueError(f"non-finite integrand value at node {rule.nodes[k]}")
        vals[lev] = float(rule.weights @ fx)
    rule = sphere_rule(n, level)
    return QuadratureResult(
        value=vals[level],
        error=vals[level] - vals[level - 1],
        nodes={"sphere": rule.nodes.shape[0]},
        meta={"rule": rule.rule_id},
    )


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

_BOX_FACES = {
    1: ("x-", "x+"),
    2: ("x-", "x+", "y-", "y+"),
    3: ("x-", "x+", "y-", "y+", "z-", "z+"),
}


@dataclass(frozen=True)
class DomainSpec:
    """Shape, boundary split Sigma+/Sigma-, and torus-embedding data.

    kind: interval | rectangle | box | disk | ball.
    lengths: per-axis extents for box-like kinds.
    radius/center: for disk and ball.
    sigma_plus: face-id tuple for box-like kinds (e.g. ("y-",)), an
        ("arc", th0, th1) angle range for the disk, or ("cap", phi_max)
        (polar angle from the north pole) for the ball.
    torus_pad: padding factor of the periodic embedding (>= 1.5).
    """

    kind: str
    lengths: tuple = ()
    radius: float = 1.0
    center: tuple = ()
    sigma_plus: tuple = ()
    torus_pad: float = 2.0

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle", "box", "disk", "ball"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.torus_pad < 1.5:
            raise ValueError("torus_pad must be >= 1.5 so the domain sits strictly inside")
        if self.kind in ("interval", "rectangle", "box"):
            want = {"interval": 1, "rectangle": 2, "box": 3}[self.kind]
            if len(self.lengths) != want:
                raise ValueError(f"{self.kind} needs {want} lengths")
            bad = [f for f in self.sigma_plus if f not in _BOX_FACES[want]]
            if bad:
                raise ValueError(f"unknown faces in sigma_plus: {bad}")
        if self.kind == "disk" and self.sigma_plus and self.sigma_plus[0] != "arc":
            raise ValueError("disk sigma_plus must be ('arc', th0, th1)")
        if self.kind == "ball" and self.sigma_plus and self.sigma_plus[0] != "cap":
            raise ValueError("ball sigma_plus must be ('cap', phi_max)")
        if not self.center and self.kind in ("disk", "ball"):
            object.__setattr__(self, "center", (0.0,) * self.n)

    # -- constructors -------------------------------------------------------

    @classmethod
    def unit_interval(cls, sigma_plus=("x-",), torus_pad=2.0):
        return cls("interval", lengths=(1.0,), sigma_plus=tuple(sigma_plus), torus_pad=torus_pad)

    @classmethod
    def unit_square(cls, sigma_plus=("y-",), torus_pad=2.0):
        return cls("rectangle", lengths=(1.0, 1.0), sigma_plus=tuple(sigma_plus), torus_pad=torus_pad)

    @classmethod
    def unit_box(cls, sigma_plus=("z-",), torus_pad=2.0):
        return cls("box", lengths=(1.0, 1.0, 1.0), sigma_plus=tuple(sigma_plus), torus_pad=torus_pad)

    @classmethod
    def disk(cls, radius=1.0, arc=(0.0, np.pi), torus_pad=2.0):
        return cls("disk", radius=radius, sigma_plus=("arc",) + tuple(arc), torus_pad=torus_pad)

    @classmethod
    def ball(cls, radius=1.0, cap=np.pi / 2, torus_pad=2.0):
        return cls("ball", radius=radius, sigma_plus=("cap", cap), torus_pad=torus_pad)

    # -- basic geometry -----------------------------------------------------

    @property
    def n(self) -> int:
        return {"interval": 1, "rectangle": 2, "box": 3, "disk": 2, "ball": 3}[self.kind]

    def extent(self) -> np.ndarray:
        """Per-axis side lengths of the bounding box."""
        if self.kind in ("interval", "rectangle", "box"):
            return np.asarray(self.lengths, dtype=float)
        return np.full(self.n, 2.0 * self.radius)

    def origin(self) -> np.ndarray:
        """Lower corner of the bounding box."""
        if self.kind in ("interval", "rectangle", "box"):
            return np.zeros(self.n)
        return np.asarray(self.center, dtype=float) - self.radius

    def measure(self) -> float:
        if self.kind == "interval":
            return float(self.lengths[0])
        if self.kind == "rectangle":
            return float(np.prod(self.lengths))
        if self.kind == "box":
            return float(np.prod(self.lengths))
        if self.kind == "disk":
            return float(np.pi * self.radius**2)
        return float(4.0 / 3.0 * np.pi * self.radius**3)

    def _face_measure(self, face: str) -> float:
        ax = "xyz".index(face[0])
        if self.n == 1:
            return 1.0
        others = [self.lengths[i] for i in range(self.n) if i != ax]
        return float(np.prod(others))

    def sigma_plus_measure(self) -> float:
        if self.kind in ("interval", "rectangle", "box"):
            return float(sum(self._face_measure(f) for f in self.sigma_plus))
        if self.kind == "disk":
            _, th0, th1 = self.sigma_plus
            return float(self.radius * (th1 - th0))
        _, phi1 = self.sigma_plus
        return float(2.0 * np.pi * self.radius**2 * (1.0 - np.cos(phi1)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Strict interior membership of each point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind in ("interval", "rectangle", "box"):
            lo = points > 0.0
            hi = points < np.asarray(self.lengths)
            return np.logical_and(lo.all(axis=1), hi.all(axis=1))
        d = points - np.asarray(self.center)
        return np.einsum("ki,ki->k", d, d) < self.radius**2

    # -- volume rule --------------------------------------------------------

    def volume_rule(self, level: int = 0):
        """(points, weights) integrating over the domain; Gauss-Legendre based."""
        m = max(int(32 * 2.0**level), 4)
        if self.kind in ("interval", "rectangle", "box"):
            axes = []
            for L in self.lengths:
                t, w = np.polynomial.legendre.leggauss(m)
                axes.append((0.5 * L * (t + 1.0), 0.5 * L * w))
            return _tensor_rule(axes)
        if self.kind == "disk":
            t, w = np.polynomial.legendre.leggauss(m)
            r = 0.5 * self.radius * (t + 1.0)
            wr = 0.5 * self.radius * w * r
            k = 4 * m
            th = 2.0 * np.pi * np.arange(k) / k
            wth = np.full(k, 2.0 * np.pi / k)
            pts = np.empty((m * k, 2))
            pts[:, 0] = np.outer(r, np.cos(th)).ravel()
            pts[:, 1] = np.outer(r, np.sin(th)).ravel()
            return pts + np.asarray(self.center), np.outer(wr, wth).ravel()
        # ball: Gauss-Legendre in radius and polar cosine, trapezoid azimuth
        t, w = np.polynomial.legendre.leggauss(m)
        r = 0.5 * self.radius * (t + 1.0)
        wr = 0.5 * self.radius * w * r**2
        z, wz = np.polynomial.legendre.leggauss(m)
        k = 2 * m
        lam = 2.0 * np.pi * np.arange(k) / k
        wl = np.full(k, 2.0 * np.pi / k)
        s = np.sqrt(1.0 - z**2)
        pts = np.empty((m * m * k, 3))
        pts[:, 0] = (r[:, None, None] * np.outer(s, np.cos(lam))[None]).ravel()
        pts[:, 1] = (r[:, None, None] * np.outer(s, np.sin(lam))[None]).ravel()
        pts[:, 2] = (r[:, None, None] * np.broadcast_to(z[:, None], (m, k))[None]).ravel()
        wts = (wr[:, None, None] * np.outer(wz, wl)[None]).ravel()
        return pts + np.asarray(self.center), wts

    # -- boundary rule ------------------------------------------------------

    def _face_rule(self, face: str, m: int):
        ax = "xyz".index(face[0])
        side = face[1]
        n = self.n
        normal = np.zeros(n)
        normal[ax] = 1.0 if side == "-" else -1.0  # interior normal
        tangents = [np.eye(n)[i] for i in range(n) if i != ax]
        frame = np.column_stack(tangents + [normal]) if n > 1 else normal.reshape(1, 1)
        if n == 1:
            pt = np.array([[0.0 if side == "-" else self.lengths[0]]])
            return pt, np.array([frame]), np.array([1.0])
        axes = []
        for i in range(n):
            if i == ax:
                continue
            t, w = np.polynomial.legendre.leggauss(m)
            axes.append((0.5 * self.lengths[i] * (t + 1.0), 0.5 * self.lengths[i] * w))
        sub_pts, wts = _tensor_rule(axes)
        pts = np.empty((sub_pts.shape[0], n))
        cols = [i for i in range(n) if i != ax]
        for j, i in enumerate(cols):
            pts[:, i] = sub_pts[:, j]
        pts[:, ax] = 0.0 if side == "-" else self.lengths[ax]
        frames = np.broadcast_to(frame, (pts.shape[0], n, n)).copy()
        return pts, frames, wts

    def boundary_rule(self, part: str = "sigma_plus", level: int = 0):
        """(points, frames, weights) over Sigma+ (or the whole boundary).

        Frames have tangent columns first and the interior normal last, so
        frame-reduced coefficient matrices feed the boundary factorization
        directly.
        """
        m = max(int(32 * 2.0**level), 4)
        if self.kind in ("interval", "rectangle", "box"):
            faces = self.sigma_plus if part == "sigma_plus" else _BOX_FACES[self.n]
            chunks = [self._face_rule(f, m) for f in faces]
            pts = np.concatenate([c[0] for c in chunks])
            frames = np.concatenate([c[1] for c in chunks])
            wts = np.concatenate([c[2] for c in chunks])
            return pts, frames, wts
        if self.kind == "disk":
            if part == "sigma_plus":
                _, th0, th1 = self.sigma_plus
            else:
                th0, th1 = 0.0, 2.0 * np.pi
            k = 8 * m
            t, w = np.polynomial.legendre.leggauss(k)
            th = 0.5 * (th1 - th0) * (t + 1.0) + th0
            wts = 0.5 * (th1 - th0) * w * self.radius
            cs, sn = np.cos(th), np.sin(th)
            pts = np.column_stack([cs, sn]) * self.radius + np.asarray(self.center)
            frames = np.empty((k, 2, 2))
            frames[:, 0, 0] = -sn
            frames[:, 1, 0] = cs
            frames[:, 0, 1] = -cs
            frames[:, 1, 1] = -sn
            return pts, frames, wts
        # ball cap
        phi1 = self.sigma_plus[1] if part == "sigma_plus" else np.pi
        z0 = np.cos(phi1)
        t, wz = np.polynomial.legendre.leggauss(2 * m)
        z = 0.5 * (1.0 - z0) * (t + 1.0) + z0
        wz = 0.5 * (1.0 - z0) * wz
        k = 4 * m
        lam = 2.0 * np.pi * np.arange(k) / k
        wl = np.full(k, 2.0 * np.pi / k)
        s = np.sqrt(np.clip(1.0 - z**2, 0.0, None))
        npts = z.size * k
        pts = np.empty((npts, 3))
        rad = np.empty((npts, 3))
        rad[:, 0] = np.outer(s, np.cos(lam)).ravel()
        rad[:, 1] = np.outer(s, np.sin(lam)).ravel()
        rad[:, 2] = np.repeat(z, k)
        pts[:] = self.radius * rad + np.asarray(self.center)
        # frame: e_phi, e_lambda tangents, inward radial normal
        e_lam = np.column_stack([-np.tile(np.sin(lam), z.size), np.tile(np.cos(lam), z.size), np.zeros(npts)])
        e_phi = np.cross(e_lam, rad)
        frames = np.stack([e_phi, e_lam, -rad], axis=2)
        wts = self.radius**2 * np.outer(wz, wl).ravel()
        return pts, frames, wts


def _tensor_rule(axes):
    pts_1d = [a[0] for a in axes]
    wts_1d = [a[1] for a in axes]
    grids = np.meshgrid(*pts_1d, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    w = wts_1d[0]
    for wi in wts_1d[1:]:
        w = np.outer(w, wi).ravel()
    return pts, w


def domain_measure(domain: DomainSpec, part: str = "volume", via: str = "closed") -> QuadratureResult:
    """|Omega| or |Sigma+|, closed form by default, quadrature on request."""
    if part == "volume":
        exact = domain.measure()
        if via == "rule":
            _, w = domain.volume_rule()
            return QuadratureResult(float(w.sum()), float(w.sum()) - exact, {"volume": w.size})
        return QuadratureResult(exact, 0.0, {})
    exact = domain.sigma_plus_measure()
    if via == "rule":
        _, _, w = domain.boundary_rule("sigma_plus")
        return QuadratureResult(float(w.sum()), float(w.sum()) - exact, {"boundary": w.size})
    return QuadratureResult(exact, 0.0, {})


# ---------------------------------------------------------------------------
# the three constants
# ---------------------------------------------------------------------------


def _coeff_symbol_parts(symbol: PrincipalSymbol):
    coeffs = getattr(symbol, "coeffs", None)
    power = getattr(symbol, "power", None)
    return coeffs, power


def weyl_constant_dirichlet(symbol: PrincipalSymbol, domain: DomainSpec, level: int = 0) -> QuadratureResult:
    """Dirichlet Weyl constant C' and its companion C = C'**(-2a/n).

    For symbols built from coefficient matrices the integrand
    |p|^{-n/2a} reduces to (xi . a(x) xi)^{-n/2}, independent of a.
    """
    n = domain.n
    two_a = symbol.order
    if two_a <= 0:
        raise ValueError("symbol order must be positive")
    coeffs, _power = _coeff_symbol_parts(symbol)
    vals = {}
    nodes = {}
    for lev in (level - 1, level):
        pts, wx = domain.volume_rule(lev)
        rule = sphere_rule(n, lev)
        if coeffs is not None:
            mats = np.ascontiguousarray(coeffs.a_batch(pts))
            total = _kernels.quad_form_power_sum(
                mats, np.ascontiguousarray(wx), np.ascontiguousarray(rule.nodes),
                np.ascontiguousarray(rule.weights), -0.5 * n
            )
            if not np.isfinite(total):
                raise EllipticityError("coefficient form not positive at a quadrature node")
        else:
            total = 0.0
            for x, w in zip(pts, wx):
                fv = np.array([abs(complex(symbol(x, xi))) for xi in rule.nodes])
                if np.any(fv <= 0.0) or not np.all(np.isfinite(fv)):
                    raise EllipticityError(f"symbol not elliptic at sample x={x}")
                total += w * float(rule.weights @ fv ** (-n / two_a))
        vals[lev] = total / (n * (2.0 * np.pi) ** n)
        nodes[lev] = {"domain": pts.shape[0], "sphere": rule.nodes.shape[0]}
    cprime = vals[level]
    companion = cprime ** (-two_a / n)
    return QuadratureResult(
        value=cprime,
        error=vals[level] - vals[level - 1],
        nodes=nodes[level],
        meta={"companion_C": companion, "order": two_a},
    )


def _boundary_constant(coeffs: SecondOrderCoeffs, domain: DomainSpec, level: int, which: str) -> QuadratureResult:
    n = domain.n
    if n < 2:
        raise ValueError("boundary constants need n >= 2")
    vals = {}
    nodes = {}
    for lev in (level - 1, level):
        pts, frames, wx = domain.boundary_rule("sigma_plus", lev)
        rule = sphere_rule(n - 1, lev)
        mats = np.ascontiguousarray(reduce_frames(coeffs.a_batch(pts), frames))
        wx = np.ascontiguousarray(wx)
        dirs = np.ascontiguousarray(rule.nodes)
        ws = np.ascontiguousarray(rule.weights)
        if which == "L":
            total = _kernels.kappa0_power_sum(mats, wx, dirs, ws, -(n - 1.0))
        else:
            total = _kernels.dtn_weight_sum(mats, wx, dirs, ws, 0.5 * (n - 1.0))
        if not np.isfinite(total):
            raise EllipticityError("boundary factorization failed at a quadrature node")
        vals[lev] = total / ((n - 1) * (2.0 * np.pi) ** (n - 1))
        nodes[lev] = {"boundary": pts.shape[0], "cosphere": rule.nodes.shape[0]}
    meta = {}
    if which == "M" and n == 2:
        meta["n2_special_case"] = True  # reported value sits outside the main n >= 3 scope
    return QuadratureResult(
        value=vals[level],
        error=vals[level] - vals[level - 1],
        nodes=nodes[level],
        meta=meta,
    )


def weyl_constant_L(coeffs: SecondOrderCoeffs, domain: DomainSpec, level: int = 0) -> QuadratureResult:
    """Interface constant c(L): boundary integral of kappa0^{-(n-1)}."""
    return _boundary_constant(coeffs, domain, level, "L")


def weyl_constant_M(coeffs: SecondOrderCoeffs, domain: DomainSpec, level: int = 0) -> QuadratureResult:
    """Perturbation constant c(M): boundary integral of (ann/(2 kappa0^2))^{(n-1)/2}."""
    return _boundary_constant(coeffs, domain, level, "M")
