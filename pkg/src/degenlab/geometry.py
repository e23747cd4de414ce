"""Distance-to-boundary geometry for the supported domain classes.

Every variant exposes the distance d(x) to the boundary set, its gradient, the
full Hessian, and the trace of the scaled Hessian d(x) * Tr(D^2 d)(x), all in
closed form.  Points are numpy arrays of length ``d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

VARIANTS = (
    "interval",
    "punctured",
    "ball_interior",
    "ball_exterior",
    "convex_product",
    "lattice",
)


class DomainError(ValueError):
    """Point or parameter outside the domain of validity."""


class AmbiguousNearestPoint(DomainError):
    """The point has more than one nearest boundary point."""


@dataclass(frozen=True)
class DomainSpec:
    """A domain Omega together with its boundary data.

    Use the classmethod constructors rather than the raw initializer.
    """

    variant: str
    d: int
    radius: float = 0.0  # R for balls, R_Pi for the product obstacle
    sub_dim: int = 0  # s for the product case
    spacing: float = 1.0  # lattice spacing
    endpoints: tuple[float, float] = (0.0, 1.0)
    degenerate: tuple[bool, bool] = (True, False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.d < 1:
            raise DomainError("ambient dimension must be >= 1")
        if self.variant == "interval":
            a, b = self.endpoints
            if self.d != 1 or not a < b or not any(self.degenerate):
                raise DomainError("interval needs d=1, a<b and at least one degenerate endpoint")
        if self.variant in ("ball_interior", "ball_exterior") and not self.radius > 0:
            raise DomainError("ball radius must be positive")
        if self.variant == "convex_product":
            if not 1 <= self.sub_dim <= self.d - 1:
                raise DomainError("subspace dimension s must satisfy 1 <= s <= d-1")
            if not self.radius > 0:
                raise DomainError("obstacle radius R_Pi must be positive")
        if self.variant == "lattice" and not self.spacing > 0:
            raise DomainError("lattice spacing must be positive")

    # constructors -------------------------------------------------------
    @classmethod
    def interval(cls, a=0.0, b=1.0, degenerate=(True, False)):
        return cls("interval", 1, endpoints=(float(a), float(b)), degenerate=tuple(degenerate))

    @classmethod
    def punctured(cls, d):
        return cls("punctured", int(d))

    @classmethod
    def ball_interior(cls, d, R=1.0):
        return cls("ball_interior", int(d), radius=float(R))

    @classmethod
    def ball_exterior(cls, d, R=1.0):
        return cls("ball_exterior", int(d), radius=float(R))

    @classmethod
    def convex_product(cls, d, s, R_pi=1.0):
        return cls("convex_product", int(d), radius=float(R_pi), sub_dim=int(s))

    @classmethod
    def lattice(cls, d, spacing=1.0):
        return cls("lattice", int(d), spacing=float(spacing))

    # derived data ------------------------------------------------------
    @property
    def hausdorff_dim(self) -> int:
        if self.variant in ("punctured", "lattice", "interval"):
            return 0
        if self.variant == "convex_product":
            return self.sub_dim
        return self.d - 1

    @property
    def curvature_bound(self) -> float:
        if self.variant in ("ball_interior", "ball_exterior", "convex_product"):
            return 1.0 / self.radius
        return 0.0

    @property
    def is_c2(self) -> bool:
        """Boundary of codimension one (C^2 domain class)."""
        return self.variant in ("interval", "ball_interior", "ball_exterior")

    @property
    def unique_radius(self) -> float:
        """Width of the layer in which every point has a unique nearest point."""
        if self.variant in ("ball_interior", "ball_exterior"):
            return self.radius
        if self.variant == "lattice":
            return self.spacing / 2
        if self.variant == "interval":
            a, b = self.endpoints
            return (b - a) / 2 if all(self.degenerate) else b - a
        return math.inf

    @property
    def name(self) -> str:
        return self.variant


@dataclass(frozen=True)
class LayerSpec:
    """Annular boundary layer {s <= d(x) < r}; s = 0 means the full layer."""

    r: float
    s: float = 0.0

    def __post_init__(self):
        if not (0 <= self.s < self.r <= 1):
            raise DomainError(f"layer requires 0 <= s < r <= 1, got s={self.s}, r={self.r}")

    def check(self, spec: DomainSpec) -> "LayerSpec":
        if not self.r < spec.unique_radius:
            raise DomainError(
                f"layer width r={self.r} must be below the unique-nearest-point radius "
                f"{spec.unique_radius} of {spec.variant}"
            )
        return self


def _as_point(spec: DomainSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise DomainError(f"point must have shape ({spec.d},), got {x.shape}")
    return x


def _product_parts(spec, x):
    s = spec.sub_dim
    y, z = x[:s], x[s:]
    ny = float(np.linalg.norm(y))
    d_pi = max(ny - spec.radius, 0.0)
    return y, z, ny, d_pi, float(np.linalg.norm(z))


def _interval_side(spec, x0):
    """Return (distance, sign) to the nearest degenerate endpoint."""
    a, b = spec.endpoints
    if not a < x0 < b:
        raise DomainError(f"point {x0} outside the interval ({a}, {b})")
    cands = []
    if spec.degenerate[0]:
        cands.append((x0 - a, 1.0))
    if spec.degenerate[1]:
        cands.append((b - x0, -1.0))
    cands.sort()
    if len(cands) == 2 and cands[0][0] == cands[1][0]:
        raise AmbiguousNearestPoint(f"{x0} is equidistant from both endpoints")
    return cands[0]


def _nearest_lattice(spec, x):
    t = x / spec.spacing
    frac = t - np.floor(t)
    return np.round(t) * spec.spacing, bool(np.any(np.abs(frac - 0.5) < 1e-12))


def distance(spec: DomainSpec, x) -> float:
    """Euclidean distance from ``x`` to the boundary set."""
    x = _as_point(spec, x)
    v = spec.variant
    if v == "interval":
        dist = _interval_side(spec, x[0])[0]
    elif v == "punctured":
        dist = float(np.linalg.norm(x))
    elif v == "ball_interior":
        nx = float(np.linalg.norm(x))
        if nx >= spec.radius:
            raise DomainError("point is not inside the ball")
        dist = spec.radius - nx
    elif v == "ball_exterior":
        nx = float(np.linalg.norm(x))
        if nx <= spec.radius:
            raise DomainError("point is not outside the ball")
        dist = nx - spec.radius
    elif v == "convex_product":
        _, _, _, d_pi, nz = _product_parts(spec, x)
        dist = math.hypot(d_pi, nz)
    else:
        p, _ = _nearest_lattice(spec, x)
        dist = float(np.linalg.norm(x - p))
    if dist <= 0:
        raise DomainError("point lies on the boundary")
    return dist


def grad_distance(spec: DomainSpec, x) -> np.ndarray:
    """Unit gradient of the distance, pointing away from the nearest boundary point."""
    x = _as_point(spec, x)
    dist = distance(spec, x)
    v = spec.variant
    if v == "interval":
        return np.array([_interval_side(spec, x[0])[1]])
    if v in ("punctured", "ball_exterior"):
        return x / np.linalg.norm(x)
    if v == "ball_interior":
        nx = np.linalg.norm(x)
        if nx == 0:
            raise AmbiguousNearestPoint("the centre of the ball has no unique nearest point")
        return -x / nx
    if v == "convex_product":
        y, z, ny, d_pi, _ = _product_parts(spec, x)
        gy = d_pi * y / ny if d_pi > 0 else np.zeros_like(y)
        g = np.concatenate([gy, z]) / dist
        return g / np.linalg.norm(g)
    p, tie = _nearest_lattice(spec, x)
    if tie:
        raise AmbiguousNearestPoint(f"{x} is equidistant from several lattice points")
    return (x - p) / dist


def hessian(spec: DomainSpec, x) -> np.ndarray:
    """Full Hessian matrix D^2 d at ``x`` (closed form)."""
    x = _as_point(spec, x)
    dist = distance(spec, x)
    n = grad_distance(spec, x)
    d = spec.d
    v = spec.variant
    if v == "interval":
        return np.zeros((1, 1))
    if v == "convex_product":
        # D^2(d^2)/2 = grad d grad d^T + d D^2 d, applied blockwise
        s = spec.sub_dim
        y, _, ny, d_pi, _ = _product_parts(spec, x)
        half_h2 = np.zeros((d, d))
        if d_pi > 0:
            e = y / ny
            half_h2[:s, :s] = np.outer(e, e) + (d_pi / ny) * (np.eye(s) - np.outer(e, e))
        half_h2[s:, s:] = np.eye(d - s)
        return (half_h2 - np.outer(n, n)) / dist
    if v == "lattice":
        p, _ = _nearest_lattice(spec, x)
        rad = np.linalg.norm(x - p)
    else:
        rad = np.linalg.norm(x)
    proj = np.eye(d) - np.outer(n, n)
    sign = -1.0 if v == "ball_interior" else 1.0
    return sign * proj / rad


def scaled_hessian_trace(spec: DomainSpec, x) -> float:
    """Closed-form value of Tr(d D^2 d)(x)."""
    x = _as_point(spec, x)
    dist = distance(spec, x)
    d = spec.d
    v = spec.variant
    if v == "interval":
        return 0.0
    if v in ("punctured", "lattice"):
        return float(d - 1)
    if v == "ball_interior":
        return -(d - 1) * dist / (spec.radius - dist)
    if v == "ball_exterior":
        return (d - 1) * dist / (spec.radius + dist)
    # beyond the obstacle edge (d_Pi > 0) the rank-one remainder has trace -1,
    # which adds one to the flat-direction count d - s - 1
    s = spec.sub_dim
    _, _, ny, d_pi, _ = _product_parts(spec, x)
    if d_pi > 0:
        return d_pi * (s - 1) / ny + (d - s)
    return float(d - s - 1)


def hessian_trace(spec: DomainSpec, x) -> float:
    """Closed-form value of Tr(D^2 d)(x)."""
    x = _as_point(spec, x)
    if spec.variant in ("punctured", "lattice"):
        rad = distance(spec, x)
        return (spec.d - 1) / rad
    if spec.variant == "ball_interior":
        return -(spec.d - 1) / float(np.linalg.norm(x))
    if spec.variant == "ball_exterior":
        return (spec.d - 1) / float(np.linalg.norm(x))
    return scaled_hessian_trace(spec, x) / distance(spec, x)


def abs_hessian_trace(spec: DomainSpec, x) -> float:
    """Tr(|D^2 d|)(x): sum of absolute Hessian eigenvalues."""
    return float(np.abs(np.linalg.eigvalsh(hessian(spec, x))).sum())


# sampling -------------------------------------------------------------


def _halton(dim: int, n: int) -> np.ndarray:
    # unscrambled Halton, first point (the origin) dropped: deterministic, in (0, 1)
    return qmc.Halton(d=dim, scramble=False).random(n + 1)[1:]


def _directions(u: np.ndarray) -> np.ndarray:
    """Map uniform points in (0,1)^k to unit vectors in R^k."""
    if u.shape[1] == 1:
        return np.where(u < 0.5, -1.0, 1.0)
    g = norm.ppf(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_layer(spec: DomainSpec, layer: LayerSpec, n: int, log_spaced: bool = False) -> np.ndarray:
    """Deterministic low-discrepancy points with s < d(x) < r.

    With ``log_spaced`` the distances are spread uniformly in log(d) instead of d,
    which resolves thin sublayers near the boundary.
    """
    layer.check(spec)
    d = spec.d
    u = _halton(d + 1, n)
    lo = layer.s if layer.s > 0 else layer.r * 1e-6
    if log_spaced:
        t = lo * (layer.r / lo) ** u[:, 0]
    else:
        t = np.maximum(layer.s + (layer.r - layer.s) * u[:, 0], layer.r * 1e-12)
    alternate = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)[:, None]
    v = spec.variant
    if v == "interval":
        a, b = spec.endpoints
        left = alternate[:, 0] > 0 if all(spec.degenerate) else np.full(n, spec.degenerate[0])
        return np.where(left, a + t, b - t)[:, None]
    dirs = alternate if d == 1 else _directions(u[:, 1:d + 1])
    if v == "punctured":
        return t[:, None] * dirs
    if v == "ball_interior":
        return (spec.radius - t)[:, None] * dirs
    if v == "ball_exterior":
        return (spec.radius + t)[:, None] * dirs
    if v == "lattice":
        cell = np.floor(3 * u[:, d]).astype(int)[:, None]
        return spec.spacing * cell + t[:, None] * dirs
    # convex product: split the distance between the obstacle and the normal space
    s = spec.sub_dim
    # theta <= 0.45 pi keeps d_Pi >= 0.15 d away from the Hessian jump at |y| = R_Pi
    theta = 0.45 * np.pi * u[:, d]
    d_pi = t * np.cos(theta)
    nz = t * np.sin(theta)
    dy = np.where(u[:, 1:2] < 0.5, -1.0, 1.0) if s == 1 else _directions(u[:, 1:s + 1])
    dz = alternate if d - s == 1 else _directions(u[:, s + 1:d + 1])
    # every fourth sample sits over the obstacle itself (d_Pi = 0)
    over = np.arange(n) % 4 == 3
    y = np.where(over[:, None], 0.5 * spec.radius * dy, (spec.radius + d_pi)[:, None] * dy)
    nz = np.where(over, t, nz)
    return np.hstack([y, nz[:, None] * dz])


@dataclass
class TraceBound:
    gamma: float
    max_deviation: float
    samples: int
    deviations: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)


def verify_trace_bound(spec: DomainSpec, layer: LayerSpec, sample_count: int = 1000) -> TraceBound:
    """Smallest gamma with |Tr(d D^2 d) - (d - d_H - 1)| <= gamma d on the sampled layer."""
    if sample_count < 100:
        raise DomainError("verify_trace_bound needs at least 100 samples")
    pts = sample_layer(spec, layer, sample_count)
    target = spec.d - spec.hausdorff_dim - 1
    dev = np.empty(len(pts))
    dist = np.empty(len(pts))
    for i, x in enumerate(pts):
        dist[i] = distance(spec, x)
        dev[i] = abs(scaled_hessian_trace(spec, x) - target)
    gamma = float(np.max(dev / dist))
    return TraceBound(gamma=gamma, max_deviation=float(dev.max()), samples=len(pts),
                      deviations=dev, distances=dist)
