"""Discrete Hardy/Rellich minima and limit-point/limit-circle classification in 1D."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate

from .coefficients import CoefficientField, alpha_constants, comparability
from .geometry import DomainSpec, LayerSpec
from .grid import AssembledOperator, assemble, build_grid


class ConvergenceError(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, msg, smallest_eps):
        super().__init__(f"{msg} (smallest reached epsilon {smallest_eps:.3e})")
        self.smallest_eps = smallest_eps


# eigen solver -------------------------------------------------------------


def inverse_iteration(A, B, tol: float = 1e-10, maxiter: int = 20000, block: int = 6):
    """Smallest eigenpair of A x = lam B x (A, B symmetric positive definite).

    Shift-0 block inverse iteration: one sparse LU of A, a block of ``block``
    vectors started from the all-ones vector and fixed polynomial profiles,
    B-orthonormalized and Rayleigh-Ritz projected every step.  The block makes
    the contraction rate lam_1/lam_(block+1) instead of lam_1/lam_2, which matters
    for weighted pencils whose bottom eigenvalues cluster.  The pencil is first
    scaled symmetrically by diag(B)^-1/2.  Stops when successive
    smallest Ritz values agree to ``tol`` relative.
    """
    B = sp.diags(B) if np.ndim(B) == 1 else sp.csr_matrix(B)
    # symmetric diagonal scaling by diag(B)^-1/2: graded grids spread the raw
    # entries over dozens of decades, which would otherwise wreck the LU
    D = sp.diags(1.0 / np.sqrt(B.diagonal()))
    A = sp.csc_matrix(D @ A @ D)
    B = (D @ B @ D).tocsr()
    n = A.shape[0]
    k = max(1, min(block, n))
    lu = spla.splu(A)
    s = np.linspace(-1.0, 1.0, n)
    X = np.column_stack([np.ones(n)] + [np.cos(j * np.pi * (s + 1) / 2) for j in range(1, k)])
    lam = np.inf
    for it in range(1, maxiter + 1):
        Y = lu.solve(B @ X)
        # B-orthonormalize, then Rayleigh-Ritz on the block
        G = Y.T @ (B @ Y)
        w, V = np.linalg.eigh((G + G.T) / 2)
        keep = w > w.max() * 1e-14
        Y = Y @ (V[:, keep] / np.sqrt(w[keep]))
        Ar = Y.T @ (A @ Y)
        theta, W = np.linalg.eigh((Ar + Ar.T) / 2)
        X = Y @ W
        new = float(theta[0])
        if abs(new - lam) <= tol * abs(new):
            return new, D @ X[:, 0], it
        lam = new
    raise ConvergenceError(f"inverse iteration did not converge in {maxiter} steps (last {lam:.6g})")


# layer constants -----------------------------------------------------------


def _layer_alphas(fld: CoefficientField, spec: DomainSpec, r: float):
    """(alpha_1r, alpha_2r, condition) from sampled comparability constants."""
    if spec.variant == "interval":
        # one degenerate endpoint: no curvature, constant profile factor only
        return alpha_constants(1, 0, fld.delta, r, 0.0, _radial_gamma_a(fld, r))
    c = comparability(fld, spec, LayerSpec(min(r, 0.999 * spec.unique_radius)), samples=400)
    return c.alpha_1r, c.alpha_2r, c.rellich_condition


def _radial_gamma_a(fld: CoefficientField, r: float) -> float:
    t = np.linspace(0.0, r, 401)
    return float(np.max(np.abs(fld.profile.radial_derivative(t)) / fld.profile.radial_value(t)))


def _with_epsilon(op: AssembledOperator, fld: CoefficientField, eps: float) -> AssembledOperator:
    g = op.grid
    grid = build_grid(eps, g.L, g.cells, g.grading_exponent, g.radial_dim, grading=g.grading,
                      jacobian=g.jacobian, R=g.R)
    return assemble(fld, grid, op.bc)


@dataclass
class LadderPoint:
    epsilon: float
    value: float


def _log_extrapolate(ladder: list[LadderPoint], L: float) -> Optional[float]:
    """Fit value = v_inf + K / log(L/eps)^2 through the two smallest epsilons."""
    if len(ladder) < 2:
        return None
    (e1, v1), (e2, v2) = [(p.epsilon, p.value) for p in ladder[-2:]]
    s1, s2 = np.log(L / e1) ** -2, np.log(L / e2) ** -2
    return float(v2 - (v1 - v2) * s2 / (s1 - s2))


@dataclass
class HardyReport:
    numeric_min: float
    theoretical_bound: float
    alpha_1r: float
    applicable: bool
    epsilon: float
    cells: int
    L: float
    iterations: int
    ladder: list[LadderPoint] = field(default_factory=list)
    extrapolated: Optional[float] = None


@dataclass
class RellichReport:
    numeric_min: float
    theoretical_bound: Optional[float]
    limiting_constant: float
    condition: bool
    informative: bool
    alpha_1r: float
    alpha_2r: Optional[float]
    epsilon: float
    cells: int
    L: float
    iterations: int
    ladder: list[LadderPoint] = field(default_factory=list)
    extrapolated: Optional[float] = None

    @property
    def applicable(self) -> bool:
        return self.condition and self.informative


def hardy_min(op: AssembledOperator, fld: CoefficientField, spec: DomainSpec,
              layer: LayerSpec | None = None, ladder: bool = True, tol: float = 1e-10) -> HardyReport:
    """Smallest eigenvalue of (stiffness, Galerkin weight a t^(delta-2)).

    The Galerkin weight makes the discrete minimum a Rayleigh-Ritz value: it
    bounds the continuum minimum from above and decreases under nested refinement.
    """
    r = layer.r if layer is not None else op.grid.L
    a1, _, _ = _layer_alphas(fld, spec, r)
    lam, _, its = inverse_iteration(op.stiffness, op.hardy_weight_matrix, tol)
    pts = [LadderPoint(op.grid.epsilon, lam)]
    if ladder:
        for k in (2, 4):
            o = _with_epsilon(op, fld, op.grid.epsilon / k)
            pts.append(LadderPoint(o.grid.epsilon, inverse_iteration(o.stiffness, o.hardy_weight_matrix, tol)[0]))
    return HardyReport(lam, (a1 / 2) ** 2, a1, a1 > 0, op.grid.epsilon, op.grid.cells, op.grid.L, its,
                       pts, _log_extrapolate(pts, op.grid.L) if ladder else None)


def limiting_rellich_constant(d: int, d_H: int, delta: float) -> float:
    return (d - d_H) ** 2 * (d - d_H + 2 * delta - 4) ** 2 / 16


def rellich_min(op: AssembledOperator, fld: CoefficientField, spec: DomainSpec,
                layer: LayerSpec | None = None, ladder: bool = True, tol: float = 1e-10) -> RellichReport:
    """Smallest eigenvalue of (K M^-1 K, (a t^(delta-2))^2 M) with lumped M."""
    r = layer.r if layer is not None else op.grid.L
    a1, a2, cond = _layer_alphas(fld, spec, r)
    d_H = 0 if spec.variant == "interval" else spec.hausdorff_dim
    lim = limiting_rellich_constant(spec.d, d_H, fld.delta)
    cond = cond and fld.delta < 2

    def solve(o):
        return inverse_iteration(o.H_squared_form(), o.rellich_weight, tol)

    lam, _, its = solve(op)
    pts = [LadderPoint(op.grid.epsilon, lam)]
    if ladder:
        for k in (2, 4):
            o = _with_epsilon(op, fld, op.grid.epsilon / k)
            pts.append(LadderPoint(o.grid.epsilon, solve(o)[0]))
    bound = (a2 / 4) ** 2 if (cond and a2 is not None) else None
    return RellichReport(lam, bound, lim, bool(cond), lim > 0, a1, a2, op.grid.epsilon, op.grid.cells,
                         op.grid.L, its, pts, _log_extrapolate(pts, op.grid.L) if ladder else None)


# ladder diagnostics -------------------------------------------------------------


def ladder_status(partials, sat_tol: float = 1e-6, div_tol: float = 1e-6, window: int = 5) -> str:
    """'saturates', 'diverges' or 'inconclusive' for a sequence of partial integrals."""
    p = np.asarray(partials, dtype=float)
    if len(p) < window + 1 or not np.all(np.isfinite(p)):
        return "diverges" if not np.all(np.isfinite(p)) else "inconclusive"
    inc = np.diff(p)
    if p[-1] > 0 and inc[-1] < sat_tol * p[-1]:
        return "saturates"
    tail = inc[-window:]
    if np.all(tail > 0) and np.all(np.diff(tail) >= -div_tol * tail[1:]):
        return "diverges"
    return "inconclusive"


# Weyl integral criterion -------------------------------------------------------


@dataclass
class WeylResult:
    verdict: str  # essentially_self_adjoint | not_essentially_self_adjoint | indeterminate
    ladder_status: str
    epsilons: np.ndarray = field(repr=False)
    partials: np.ndarray = field(repr=False)
    closed_form: bool


def _power_law(fld) -> Optional[tuple[float, float]]:
    if isinstance(fld, CoefficientField) and fld.profile.kind == "constant" and fld.perturbation is None:
        return fld.profile.coeffs[0], fld.delta
    return None


def _nu_ladder(c, eps):
    """Partials int_eps^r nu^2 for a general c, as one ODE in t = log x:

        d nu/dt = -x / c(x),   dI/dt = -x nu^2,   integrated from log r downward.
    """
    rhs = lambda t, y: [-np.exp(t) / float(c(np.exp(t))), -np.exp(t) * y[0] ** 2]
    ts = np.log(eps)
    sol = integrate.solve_ivp(rhs, (ts[0], ts[-1]), [0.0, 0.0], method="DOP853", t_eval=ts,
                              rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise IntegrationError(sol.message, float(np.exp(sol.t[-1])) if len(sol.t) else eps[0])
    return sol.y[1]


def weyl_classify(fld, r: float = 1.0, rungs: int = 40) -> WeylResult:
    """Essential self-adjointness at 0 via nu(x) = int_x^r 1/c not in L2(0, r).

    ``fld`` is a CoefficientField (its radial c) or a callable c(x) on (0, r].
    Power laws c = a x^delta use the closed form delta >= 3/2 for the verdict;
    the epsilon-ladder of int_eps^r nu^2 is always reported.
    """
    pl = _power_law(fld)
    if pl is not None:
        a, delta = pl
        if abs(delta - 1) < 1e-15:
            nu = lambda x: np.log(r / x) / a
        else:
            nu = lambda x: (x ** (1 - delta) - r ** (1 - delta)) / (a * (delta - 1))
    eps = r * 2.0 ** -np.arange(rungs + 1)
    if pl is not None:
        incs = [0.0]
        for hi, lo in zip(eps[:-1], eps[1:]):
            # the log variable keeps every rung O(1)
            incs.append(integrate.quad(lambda s: np.exp(s) * nu(np.exp(s)) ** 2, np.log(lo), np.log(hi),
                                       epsrel=1e-12, epsabs=0)[0])
        partials = np.cumsum(incs)
    else:
        partials = _nu_ladder(fld.radial_c if isinstance(fld, CoefficientField) else fld, eps)
    status = ladder_status(partials[1:])
    if pl is not None:
        verdict = "essentially_self_adjoint" if pl[1] >= 1.5 else "not_essentially_self_adjoint"
    else:
        verdict = {"diverges": "essentially_self_adjoint",
                   "saturates": "not_essentially_self_adjoint"}.get(status, "indeterminate")
    return WeylResult(verdict, status, eps, partials, pl is not None)


# deficiency indices by shooting -------------------------------------------------


@dataclass
class DeficiencyResult:
    n_plus: int
    n_minus: int
    endpoint_classification: str  # limit_point | limit_circle
    statuses: dict = field(default_factory=dict)  # (lambda sign, basis) -> ladder status
    growth_rates: dict = field(default_factory=dict)  # last-rung log2 increment ratio
    smallest_epsilon: float = 0.0
    rungs: int = 0


def _shoot(x_over_c, L, lams, inits, max_rungs, rtol, cap):
    """Partial norms int_{eps_k}^L |u|^2 for -(c u')' = lam u, on eps_k = L 2^-k.

    In t = log x with quasi-derivative p = c u':
        du/dt = x p / c(x),  dp/dt = -lam x u,  dN/dt = -x |u|^2.
    All (lam, initial value) pairs are advanced together as one system; the
    ladder stops once every solution saturates or one of them reaches ``cap``.
    """
    m = len(lams)
    lams = np.asarray(lams)

    def rhs(t, y):
        x = np.exp(t)
        z = y[:4 * m].view(complex).reshape(m, 2)
        u, p = z[:, 0], z[:, 1]
        du = x_over_c(t) * p
        dp = -lams * x * u
        out = np.empty_like(y)
        out[:4 * m] = np.column_stack([du, dp]).ravel().view(float)
        out[4 * m:] = -x * np.abs(u) ** 2
        return out

    y = np.concatenate([np.array(inits, dtype=complex).ravel().view(float), np.zeros(m)])
    t = np.log(L)
    step = np.log(2.0)
    partials = []
    for k in range(1, max_rungs + 1):
        sol = integrate.solve_ivp(rhs, (t, t - step), y, method="DOP853", rtol=rtol, atol=1e-12)
        if not sol.success:
            raise IntegrationError(sol.message, L * 2.0 ** -(k - 1))
        y, t = sol.y[:, -1].copy(), t - step
        partials.append(y[4 * m:].copy())
        if k >= 8:
            arr = np.array(partials)
            if all(ladder_status(arr[:, j]) == "saturates" for j in range(m)):
                break
            if y[4 * m:].max() > cap or np.abs(y[:4 * m]).max() > 1e150:
                break
    return np.array(partials)


def deficiency_indices(fld, L: float = 1.0, max_rungs: int = 1000, rtol: float = 1e-10,
                       cap: float = 1e200) -> DeficiencyResult:
    """Deficiency indices at the singular endpoint 0 (regular endpoint L closed).

    Two independent solutions of -(c u')' = +-i u are shot from L toward 0 and
    their truncated L2 norms tracked on eps_k = L 2^-k.  Limit circle when both
    saturate, limit point when one diverges (then generically both do).
    """
    pl = _power_law(fld)
    if pl is not None:
        # x / c(x) = x^(1-delta)/a, formed in the log variable to avoid underflow of c
        x_over_c = lambda t: np.exp((1 - pl[1]) * t) / pl[0]
    else:
        c = (lambda x: float(fld.radial_c(x))) if isinstance(fld, CoefficientField) else fld
        x_over_c = lambda t: np.exp(t) / c(np.exp(t))
    statuses, rates = {}, {}
    keys = [(sign, name) for sign in "+-" for name in "up"]
    lams = [1j if sign == "+" else -1j for sign, _ in keys]
    inits = [(1.0, 0.0) if name == "u" else (0.0, 1.0) for _, name in keys]
    parts = _shoot(x_over_c, L, lams, inits, max_rungs, rtol, cap)
    depth = len(parts)
    smallest = L * 2.0 ** -depth
    for j, key in enumerate(keys):
        part = parts[:, j]
        statuses[key] = ladder_status(part)
        inc = np.diff(part)
        rates[key] = float(np.log2(inc[-1] / inc[-2])) if len(inc) > 1 and inc[-2] > 0 else float("nan")
    n = {}
    for sign in "+-":
        s = [statuses[(sign, b)] for b in "up"]
        if all(v == "saturates" for v in s):
            n[sign] = 1
        elif any(v == "diverges" for v in s):
            n[sign] = 0
        else:
            raise IntegrationError(f"ladder inconclusive for lambda = {sign}i: {s}", smallest)
    cls = "limit_circle" if n["+"] == 1 else "limit_point"
    return DeficiencyResult(n["+"], n["-"], cls, statuses, rates, smallest, depth)
