"""Degenerate coefficient fields C(x) ~ a(x) d(x)^delta I near the boundary.

Fields are closed-form so that div C is available analytically:

* profile ``a``: constant, a polynomial in the boundary distance ("radial"), or an
  angular profile ``a0 + amp * x_1/|x|`` on the punctured space;
* optional perturbation ``B d^(delta + gamma_pert)`` with a constant symmetric
  positive semidefinite matrix ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import geometry as geo
from .geometry import DomainSpec, LayerSpec


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Boundary profile a(x) with declared bounds mu <= a <= lambda."""

    kind: str = "constant"  # constant | radial | angular
    coeffs: tuple[float, ...] = (1.0,)  # constant: (a,), radial: polynomial in d, angular: (a0, amp)

    def __post_init__(self):
        if self.kind not in ("constant", "radial", "angular"):
            raise FieldError(f"unknown profile kind {self.kind!r}")
        if self.kind == "constant" and len(self.coeffs) != 1:
            raise FieldError("constant profile takes a single coefficient")
        if self.kind == "angular":
            if len(self.coeffs) != 2 or not abs(self.coeffs[1]) < self.coeffs[0]:
                raise FieldError("angular profile needs (a0, amp) with |amp| < a0")

    @classmethod
    def constant(cls, a=1.0):
        return cls("constant", (float(a),))

    @classmethod
    def radial(cls, *coeffs):
        return cls("radial", tuple(float(c) for c in coeffs))

    @classmethod
    def angular(cls, a0, amp):
        return cls("angular", (float(a0), float(amp)))

    def value(self, spec: DomainSpec, x, dist: float) -> float:
        if self.kind == "constant":
            return self.coeffs[0]
        if self.kind == "radial":
            return float(np.polynomial.polynomial.polyval(dist, self.coeffs))
        x = np.asarray(x, dtype=float)
        return self.coeffs[0] + self.coeffs[1] * x[0] / np.linalg.norm(x)

    def gradient(self, spec: DomainSpec, x, dist: float, normal: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros(spec.d)
        if self.kind == "radial":
            dp = np.polynomial.polynomial.polyder(self.coeffs)
            return float(np.polynomial.polynomial.polyval(dist, dp)) * normal
        x = np.asarray(x, dtype=float)
        rad = np.linalg.norm(x)
        w = x / rad
        e1 = np.zeros(spec.d)
        e1[0] = 1.0
        return self.coeffs[1] * (e1 - w[0] * w) / rad

    def radial_value(self, t):
        """a as a function of the distance t (constant and radial kinds only)."""
        if self.kind == "constant":
            return np.full_like(np.asarray(t, dtype=float), self.coeffs[0])
        if self.kind == "radial":
            return np.polynomial.polynomial.polyval(t, self.coeffs)
        raise FieldError("angular profiles have no radial reduction")

    def radial_derivative(self, t):
        if self.kind == "constant":
            return np.zeros_like(np.asarray(t, dtype=float))
        if self.kind == "radial":
            return np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(self.coeffs))
        raise FieldError("angular profiles have no radial reduction")


@dataclass(frozen=True)
class Perturbation:
    """Matrix term B d^(delta + gamma) added to a d^delta I."""

    B: tuple  # nested tuples, symmetric PSD
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise FieldError("perturbation exponent must be positive")
        B = self.matrix
        if not np.allclose(B, B.T):
            raise FieldError("perturbation matrix must be symmetric")
        if np.linalg.eigvalsh(B).min() < -1e-14:
            raise FieldError("perturbation matrix must be positive semidefinite")

    @classmethod
    def from_array(cls, B, gamma):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        return cls(tuple(map(tuple, B)), float(gamma))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.B, dtype=float)

    def scalar_multiple(self) -> Optional[float]:
        """b if B = b I, else None."""
        B = self.matrix
        b = B[0, 0]
        return float(b) if np.allclose(B, b * np.eye(len(B))) else None


@dataclass(frozen=True)
class CoefficientField:
    delta: float
    profile: Profile = field(default_factory=Profile)
    mu: float = 1.0
    lam: float = 1.0
    perturbation: Optional[Perturbation] = None
    interior_floor: float = 1.0

    def __post_init__(self):
        if self.delta < 0:
            raise FieldError("degeneracy exponent must be nonnegative")
        if not (self.mu > 0 and self.lam >= self.mu):
            raise FieldError("profile bounds need 0 < mu <= lambda")
        if not self.interior_floor > 0:
            raise FieldError("interior floor must be positive")

    @classmethod
    def exact(cls, delta, a=1.0):
        """C = a d^delta I with constant a."""
        return cls(float(delta), Profile.constant(a), mu=float(a), lam=float(a))

    def _check_perturbation_dim(self, spec):
        if self.perturbation is not None and self.perturbation.matrix.shape != (spec.d, spec.d):
            raise FieldError("perturbation matrix dimension does not match the domain")

    def a(self, spec: DomainSpec, x) -> float:
        dist = geo.distance(spec, x)
        val = self.profile.value(spec, x, dist)
        if not self.mu - 1e-12 <= val <= self.lam + 1e-12:
            raise FieldError(f"profile value {val} violates declared bounds [{self.mu}, {self.lam}]")
        return val

    # radial reduction -------------------------------------------------
    @property
    def is_radial(self) -> bool:
        if self.profile.kind == "angular":
            return False
        return self.perturbation is None or self.perturbation.scalar_multiple() is not None

    def radial_c(self, t):
        """Scalar coefficient c(t) with C = c(d) I (radial fields only)."""
        if not self.is_radial:
            raise FieldError("field is not radially representable")
        t = np.asarray(t, dtype=float)
        c = self.profile.radial_value(t) * t ** self.delta
        if self.perturbation is not None:
            c = c + self.perturbation.scalar_multiple() * t ** (self.delta + self.perturbation.gamma)
        return c

    def radial_c_prime(self, t):
        if not self.is_radial:
            raise FieldError("field is not radially representable")
        t = np.asarray(t, dtype=float)
        a = self.profile.radial_value(t)
        da = self.profile.radial_derivative(t)
        out = da * t ** self.delta
        if self.delta != 0:
            out = out + self.delta * a * t ** (self.delta - 1)
        if self.perturbation is not None:
            e = self.delta + self.perturbation.gamma
            out = out + self.perturbation.scalar_multiple() * e * t ** (e - 1)
        return out


def eval_C(fld: CoefficientField, spec: DomainSpec, x) -> np.ndarray:
    """C(x) = a(x) d(x)^delta I (+ B d(x)^(delta+gamma))."""
    fld._check_perturbation_dim(spec)
    dist = geo.distance(spec, x)
    C = fld.a(spec, x) * dist ** fld.delta * np.eye(spec.d)
    if fld.perturbation is not None:
        C = C + fld.perturbation.matrix * dist ** (fld.delta + fld.perturbation.gamma)
    return C


def eval_C_scaled(fld: CoefficientField, spec: DomainSpec, x) -> np.ndarray:
    """C(x) d(x)^-delta = a(x) I (+ B d(x)^gamma), without forming d^delta."""
    fld._check_perturbation_dim(spec)
    C = fld.a(spec, x) * np.eye(spec.d)
    if fld.perturbation is not None:
        C = C + fld.perturbation.matrix * geo.distance(spec, x) ** fld.perturbation.gamma
    return C


def div_C(fld: CoefficientField, spec: DomainSpec, x) -> np.ndarray:
    """Vector with components sum_k d_k c_kl, in closed form."""
    fld._check_perturbation_dim(spec)
    dist = geo.distance(spec, x)
    n = geo.grad_distance(spec, x)
    a = fld.a(spec, x)
    grad_a = fld.profile.gradient(spec, x, dist, n)
    out = dist ** fld.delta * grad_a
    if fld.delta != 0:
        out = out + a * fld.delta * dist ** (fld.delta - 1) * n
    if fld.perturbation is not None:
        e = fld.delta + fld.perturbation.gamma
        out = out + e * dist ** (e - 1) * (fld.perturbation.matrix @ n)
    return out


def div_C_scaled(fld: CoefficientField, spec: DomainSpec, x) -> np.ndarray:
    """div(C d^-delta) in closed form."""
    fld._check_perturbation_dim(spec)
    dist = geo.distance(spec, x)
    n = geo.grad_distance(spec, x)
    out = fld.profile.gradient(spec, x, dist, n)
    if fld.perturbation is not None:
        g = fld.perturbation.gamma
        out = out + g * dist ** (g - 1) * (fld.perturbation.matrix @ n)
    return out


# condition checks -----------------------------------------------------


@dataclass
class ConditionRung:
    r: float
    A: float  # sup ||C d^-delta - a I||
    B: float  # sup |(div C).n| d^(1-delta)
    C: float  # sup |(div(C d^-delta)).n|


@dataclass
class ConditionReport:
    rungs: list[ConditionRung]
    slopes: dict[str, float]
    holds: dict[str, bool]
    tolerance: float

    @property
    def A(self) -> bool:
        return self.holds["A"]

    @property
    def B(self) -> bool:
        return self.holds["B"]

    @property
    def C(self) -> bool:
        return self.holds["C"]


def _loglog_slope(rs, vals):
    rs = np.asarray(rs, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if np.any(vals <= 0):
        return float("nan")
    return float(np.polyfit(np.log(rs), np.log(vals), 1)[0])


def verify_degeneracy_conditions(
    fld: CoefficientField,
    spec: DomainSpec,
    r_ladder: Sequence[float] | None = None,
    samples: int = 400,
    tol: float = 1e-8,
    slope_tol: float = 0.05,
) -> ConditionReport:
    """Measure the three degeneracy conditions on a ladder of dyadic shells.

    Each rung r samples the shell r/2 < d(x) < r with the same normalized
    low-discrepancy points, so a power law d^p shows up as an exact log-log
    slope p across the ladder.  A holds when the sups vanish (<= tol) or decay
    as r -> 0 (slope >= slope_tol); B and C hold when the sups vanish or do not
    blow up (slope >= -slope_tol).
    """
    if r_ladder is None:
        r0 = min(0.5, 0.5 * spec.unique_radius)
        r_ladder = [r0, r0 / 2, r0 / 4, r0 / 8]
    rungs = []
    for r in r_ladder:
        pts = geo.sample_layer(spec, LayerSpec(r, r / 2), samples)
        supA = supB = supC = 0.0
        for x in pts:
            dist = geo.distance(spec, x)
            n = geo.grad_distance(spec, x)
            a = fld.a(spec, x)
            dev = eval_C_scaled(fld, spec, x) - a * np.eye(spec.d)
            supA = max(supA, float(np.linalg.norm(dev, 2)))
            supB = max(supB, abs(float(div_C(fld, spec, x) @ n)) * dist ** (1 - fld.delta))
            supC = max(supC, abs(float(div_C_scaled(fld, spec, x) @ n)))
        rungs.append(ConditionRung(r, supA, supB, supC))
    rs = [g.r for g in rungs]
    slopes, holds = {}, {}
    for key in "ABC":
        vals = [getattr(g, key) for g in rungs]
        zero = max(vals) <= tol
        slope = _loglog_slope(rs, vals)
        slopes[key] = slope
        if key == "A":
            holds[key] = zero or (slope >= slope_tol)
        else:
            holds[key] = zero or (slope >= -slope_tol)
    return ConditionReport(rungs, slopes, holds, tol)


# comparability ----------------------------------------------------------


@dataclass
class ComparabilityConstants:
    r: float
    sigma_r: float
    tau_r: float
    upsilon_r: float
    rho_r: float
    gamma: float  # geometric trace-bound constant
    gamma_a: float
    c_a: float
    alpha_1r: float
    alpha_2r: Optional[float]
    rellich_condition: bool


def alpha_constants(d, d_H, delta, r, gamma, gamma_a, sigma=1.0, upsilon=1.0):
    """(alpha_1r, alpha_2r or None, condition flag) from the layer constants."""
    c_a = gamma + gamma_a
    a1 = d - d_H + delta - 2 - c_a * r
    cond = delta < 2 and a1 > 0 and a1 ** 2 > upsilon * (2 - delta + gamma_a * r) ** 2
    a2 = float(sigma * (a1 ** 2 - upsilon * (2 - delta + gamma_a * r) ** 2)) if cond else None
    return float(a1), a2, bool(cond)


def comparability(fld: CoefficientField, spec: DomainSpec, layer: LayerSpec,
                  samples: int = 1000) -> ComparabilityConstants:
    """Sampled comparability constants of C against a d^delta I on the layer."""
    layer.check(spec)
    pts = geo.sample_layer(spec, layer, samples, log_spaced=True)
    sig, tau, rho, gam_a = np.inf, 0.0, 0.0, 0.0
    for x in pts:
        dist = geo.distance(spec, x)
        n = geo.grad_distance(spec, x)
        a = fld.a(spec, x)
        ev = np.linalg.eigvalsh(eval_C_scaled(fld, spec, x)) / a
        sig = min(sig, ev.min())
        tau = max(tau, ev.max())
        rho = max(rho, abs(float(div_C(fld, spec, x) @ n)) / (a * dist ** (fld.delta - 1)))
        # only the normal derivative of a enters the Hardy argument
        grad_a = fld.profile.gradient(spec, x, dist, n)
        gam_a = max(gam_a, abs(float(grad_a @ n)) / a)
    gamma = geo.verify_trace_bound(spec, layer, max(samples, 100)).gamma
    ups = tau / sig
    a1, a2, cond = alpha_constants(spec.d, spec.hausdorff_dim, fld.delta, layer.r, gamma,
                                   gam_a, sig, ups)
    return ComparabilityConstants(layer.r, float(sig), float(tau), float(ups), float(rho), gamma,
                                  float(gam_a), gamma + float(gam_a), a1, a2, cond)
