"""Logarithmic cutoffs chi_n, their C^1 smoothing zeta_n, and eta_{r,n} = 1 - zeta_n(d/r).

On [1/n, 1]:

    chi_n(u)   = log(nu) / log n
    sigma_n(u) = rho_n'(u) - rho_n'(1) (u - 1/n) / (1 - 1/n),   rho_n = chi_n^2
    zeta_n(u)  = N_n^{-1} int_0^u sigma_n,                       N_n = int_0^1 sigma_n

so zeta_n' vanishes at both ends of the transition and everything integrates
in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, optimize

from . import geometry as geo
from .coefficients import CoefficientField, comparability, div_C, eval_C
from .geometry import DomainSpec, LayerSpec


def chi(n: float, u):
    """0 on [0, 1/n], log(nu)/log n in between, 1 on [1, inf)."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        val = np.log(np.maximum(n * u, 1.0)) / np.log(n)
    return np.clip(val, 0.0, 1.0)[()]


@dataclass(frozen=True)
class Mollifier:
    n: int
    r: float = 1.0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("mollifier index must be >= 3")
        if not 0 < self.r <= 1:
            raise ValueError("layer width must lie in (0, 1]")

    @property
    def log_n(self) -> float:
        return float(np.log(self.n))

    @cached_property
    def N(self) -> float:
        """Normalization int_0^1 sigma_n, in closed form."""
        return 1.0 - (1.0 - 1.0 / self.n) / self.log_n

    def N_quad(self) -> float:
        return integrate.quad(self.sigma, 1.0 / self.n, 1.0, points=[2.0 / self.n], limit=200,
                              epsabs=1e-14, epsrel=1e-13)[0]

    def _inside(self, u):
        u = np.asarray(u, dtype=float)
        return u, (u >= 1.0 / self.n) & (u <= 1.0)

    def sigma(self, u):
        u, mask = self._inside(u)
        L, a = self.log_n, 1.0 / self.n
        us = np.where(mask, u, 1.0)
        val = 2 * np.log(self.n * us) / (us * L ** 2) - (2 / L) * (us - a) / (1 - a)
        return np.where(mask, val, 0.0)[()]

    def zeta(self, u):
        u, mask = self._inside(u)
        L, a = self.log_n, 1.0 / self.n
        us = np.where(mask, u, 1.0)
        val = (np.log(self.n * us) / L) ** 2 - (us - a) ** 2 / ((1 - a) * L)
        return np.where(mask, val / self.N, np.where(u > 1.0, 1.0, 0.0))[()]

    def zeta_prime(self, u):
        return (self.sigma(u) / self.N)[()]

    def zeta_double_prime(self, u):
        """One-sided (interior) second derivative on the closed transition interval."""
        u, mask = self._inside(u)
        L, a = self.log_n, 1.0 / self.n
        us = np.where(mask, u, 1.0)
        val = 2 * (1 - np.log(self.n * us)) / (us ** 2 * L ** 2) - 2 / ((1 - a) * L)
        return np.where(mask, val / self.N, 0.0)[()]

    # composed cutoff ----------------------------------------------------
    def eta(self, spec: DomainSpec, x) -> float:
        return 1.0 - float(self.zeta(geo.distance(spec, x) / self.r))

    def eta_derivatives(self, spec: DomainSpec, x):
        """(eta, d eta/d d_Gamma, d^2 eta/d d_Gamma^2) at x."""
        u = geo.distance(spec, x) / self.r
        return (1.0 - float(self.zeta(u)), -float(self.zeta_prime(u)) / self.r,
                -float(self.zeta_double_prime(u)) / self.r ** 2)

    def H_eta(self, fld: CoefficientField, spec: DomainSpec, x) -> float:
        """-div(C grad eta) at x, expanded into its three terms."""
        return float(sum(self.H_eta_terms(fld, spec, x)))

    def H_eta_terms(self, fld: CoefficientField, spec: DomainSpec, x):
        u = geo.distance(spec, x) / self.r
        zp = float(self.zeta_prime(u))
        zpp = float(self.zeta_double_prime(u))
        n = geo.grad_distance(spec, x)
        C = eval_C(fld, spec, x)
        t1 = zpp / self.r ** 2 * float(n @ C @ n)
        t2 = zp / self.r * float(np.trace(C @ geo.hessian(spec, x)))
        t3 = zp / self.r * float(div_C(fld, spec, x) @ n)
        return t1, t2, t3


# measured constants --------------------------------------------------------


@dataclass
class AlphaMeasurement:
    n: int
    alpha_first: float  # sup |zeta'| u log n
    alpha_second: float  # sup |zeta''| u^2 log n

    @property
    def alpha(self) -> float:
        return max(self.alpha_first, self.alpha_second)


def measure_alpha(n: int, points: int = 20001) -> AlphaMeasurement:
    """Least alpha with |zeta'| <= alpha/(u log n) and |zeta''| <= alpha/(u^2 log n).

    A log-spaced grid over [1/n, 1] locates the maxima, which are then polished
    with a bounded scalar search around the best grid point.
    """
    m = Mollifier(n)
    L = m.log_n
    u = np.geomspace(1.0 / n, 1.0, points)
    f1 = lambda v: abs(float(m.zeta_prime(v))) * v * L
    f2 = lambda v: abs(float(m.zeta_double_prime(v))) * v * v * L
    out = []
    for f in (f1, f2):
        vals = np.array([f(v) for v in u])
        k = int(np.argmax(vals))
        lo, hi = u[max(k - 1, 0)], u[min(k + 1, points - 1)]
        res = optimize.minimize_scalar(lambda v: -f(v), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-14})
        out.append(max(vals[k], -res.fun))
    return AlphaMeasurement(n, *out)


def uniform_alpha(ns=(10, 100, 1000, 10000), points: int = 20001) -> float:
    return max(measure_alpha(n, points).alpha for n in ns)


@dataclass
class HEtaBound:
    n: int
    r: float
    c_measured: float  # least c with |H eta| <= c a d^(delta-2) / log n over the samples
    term_constants: tuple[float, float, float]  # same, per term of the expansion
    c_theoretical: float  # alpha (tau + tau (d - d_H - 1 + gamma r) + rho)
    alpha: float


def h_eta_bound(m: Mollifier, fld: CoefficientField, spec: DomainSpec, layer: LayerSpec | None = None,
                samples: int = 2000, alpha: float | None = None) -> HEtaBound:
    """Measure the constant c in |H eta_{r,n}| <= c (log n)^{-1} a d^{delta-2}.

    Samples are log-spaced in the transition shell r/n < d < r (H eta vanishes
    elsewhere) and always include points at u = 1/n and u = 1 along one ray.
    """
    layer = layer or LayerSpec(m.r)
    if layer.r != m.r:
        raise ValueError("layer width and mollifier width differ")
    comp = comparability(fld, spec, layer, samples=min(samples, 1000))
    pts = list(geo.sample_layer(spec, LayerSpec(m.r, m.r / m.n), samples, log_spaced=True))
    # the extremes sit at the ends of the transition
    for u in (1.0 / m.n, 1.0 - 1e-12):
        x = _point_at_distance(spec, pts[0], u * m.r)
        if x is not None:
            pts.append(x)
    L = m.log_n
    best = np.zeros(4)
    for x in pts:
        dist = geo.distance(spec, x)
        scale = L / (fld.a(spec, x) * dist ** (fld.delta - 2))
        t = np.array(m.H_eta_terms(fld, spec, x))
        best = np.maximum(best, np.abs(np.append(t, t.sum())) * scale)
    alpha = uniform_alpha((m.n,)) if alpha is None else alpha
    dd = spec.d - spec.hausdorff_dim - 1
    c_th = alpha * (comp.tau_r + comp.tau_r * (abs(dd) + comp.gamma * m.r) + comp.rho_r)
    return HEtaBound(m.n, m.r, float(best[3]), tuple(float(b) for b in best[:3]), float(c_th), alpha)


def _point_at_distance(spec: DomainSpec, x, target: float):
    """Move x along its normal line until d(x) = target (None when that leaves the layer)."""
    x = np.asarray(x, dtype=float)
    dist = geo.distance(spec, x)
    y = x + (target - dist) * geo.grad_distance(spec, x)
    try:
        if abs(geo.distance(spec, y) - target) <= 1e-12 * max(target, 1.0):
            return y
    except geo.DomainError:
        pass
    return None
