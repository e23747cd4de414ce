"""Uniqueness verdicts, semigroup mass-conservation probes and non-self-adjointness witnesses."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate

from .coefficients import CoefficientField, ConditionReport, verify_degeneracy_conditions
from .geometry import DomainSpec
from .grid import AssembledOperator, assemble, build_grid
from .spectral import ladder_status

VERDICTS = ("not_markov_unique", "markov_unique_not_self_adjoint", "critical_indeterminate",
            "self_adjoint", "outside_proven_regime")

# provenance labels carried into reports
SUFFICIENCY = "Thm3.1"
NECESSITY_C2 = "Thm3.4"
PUNCTURED_EXAMPLE = "Ex3.7"
ONE_DIM = "Obs4.1"
MARKOV_CRITERION = "MarkovCriterion"
CRITICAL_OPEN = "CriticalOpen"


class VerdictWithheld(ValueError):
    """Required coefficient conditions fail, so no proven statement applies."""


@dataclass
class ClassificationVerdict:
    verdict: str
    provenance: str
    markov_threshold: float
    l2_threshold: float
    delta: float
    d: int
    d_H: int
    notes: str = ""


def thresholds(spec: DomainSpec) -> tuple[float, float]:
    """(Markov threshold 2 - (d - d_H), L2 threshold 2 - (d - d_H)/2)."""
    gap = spec.d - spec.hausdorff_dim
    return 2.0 - gap, 2.0 - gap / 2.0


def _punctured_l2_condition(fld: CoefficientField, d: int) -> bool:
    """Whether x -> |x.grad a| |x|^-d is square integrable near 0."""
    prof = fld.profile
    if prof.kind in ("constant", "angular"):
        return True  # x.grad a vanishes identically
    # x.grad a = t a'(t) = sum k c_k t^k; the lowest nonzero k dominates
    ks = [k for k, c in enumerate(prof.coeffs) if k >= 1 and c != 0]
    return not ks or 2 * ks[0] > d


def classify(spec: DomainSpec, fld: CoefficientField,
             conditions: Optional[ConditionReport] = None) -> ClassificationVerdict:
    """Decision table over the Markov and L2 thresholds.

    Raises VerdictWithheld when the coefficient conditions a proven statement
    needs do not hold.
    """
    mk, l2 = thresholds(spec)
    delta = fld.delta
    d_H = spec.hausdorff_dim

    def out(verdict, prov, notes=""):
        return ClassificationVerdict(verdict, prov, mk, l2, delta, spec.d, d_H, notes)

    v = spec.variant
    if v == "interval":
        if delta < mk:
            return out("not_markov_unique", MARKOV_CRITERION)
        if delta >= 1.5:
            return out("self_adjoint", ONE_DIM, "one-dimensional criterion includes delta = 3/2")
        return out("markov_unique_not_self_adjoint", ONE_DIM)
    if delta < mk:
        prov = {"ball_interior": NECESSITY_C2, "ball_exterior": NECESSITY_C2,
                "punctured": PUNCTURED_EXAMPLE}.get(v, MARKOV_CRITERION)
        return out("not_markov_unique", prov)
    if v == "lattice":
        return out("outside_proven_regime", MARKOV_CRITERION,
                   "Markov unique; lattice complements are not covered by the L2 results")
    if conditions is None:
        conditions = verify_degeneracy_conditions(fld, spec)
    if delta > l2:
        if not (conditions.A and conditions.B):
            raise VerdictWithheld("sufficiency needs the coefficient conditions A and B "
                                  f"(A holds: {conditions.A}, B holds: {conditions.B})")
        return out("self_adjoint", SUFFICIENCY)
    if delta == l2:
        return out("critical_indeterminate", CRITICAL_OPEN, "sufficiency at the critical exponent is open")
    # markov <= delta < l2
    if v in ("ball_interior", "ball_exterior"):
        if not (conditions.A and conditions.C):
            raise VerdictWithheld("necessity needs the coefficient conditions A and C "
                                  f"(A holds: {conditions.A}, C holds: {conditions.C})")
        return out("markov_unique_not_self_adjoint", NECESSITY_C2)
    if v == "punctured":
        if _punctured_l2_condition(fld, spec.d):
            return out("markov_unique_not_self_adjoint", PUNCTURED_EXAMPLE)
        return out("outside_proven_regime", PUNCTURED_EXAMPLE,
                   "|x.grad a| |x|^-d is not square integrable near the origin")
    return out("outside_proven_regime", MARKOV_CRITERION,
               "Markov unique; necessity of the L2 threshold is unproven for this class")


# evolution --------------------------------------------------------------------


class SolverBreakdown(RuntimeError):
    pass


@dataclass
class EvolutionTrace:
    times: np.ndarray
    masses: np.ndarray
    energies: np.ndarray
    scheme: str
    dt: float
    epsilon: float
    final: np.ndarray = field(repr=False, default=None)


def evolve(op: AssembledOperator, initial, dt: float, T: float,
           scheme: str = "implicit_euler") -> EvolutionTrace:
    """Integrate M phi' + K phi = 0 on the free nodes; mass = sum m_i phi_i."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    phi = np.asarray(initial, dtype=float)
    if np.any(phi < 0):
        raise ValueError("initial data must be nonnegative")
    if scheme not in ("implicit_euler", "crank_nicolson"):
        raise ValueError(f"unknown scheme {scheme!r}")
    M = sp.diags(op.mass)
    K = op.stiffness
    theta = 1.0 if scheme == "implicit_euler" else 0.5
    lhs = (M + theta * dt * K).tocsc()
    rhs_op = (M - (1 - theta) * dt * K).tocsr()
    try:
        lu = spla.splu(lhs)
    except RuntimeError as exc:
        raise SolverBreakdown(str(exc)) from exc
    steps = int(round(T / dt))
    times = dt * np.arange(steps + 1)
    masses = np.empty(steps + 1)
    energies = np.empty(steps + 1)
    masses[0], energies[0] = op.mass @ phi, op.form(phi)
    for k in range(1, steps + 1):
        phi = lu.solve(rhs_op @ phi)
        if not np.all(np.isfinite(phi)):
            raise SolverBreakdown(f"non-finite state at step {k}")
        masses[k], energies[k] = op.mass @ phi, op.form(phi)
    return EvolutionTrace(times, masses, energies, scheme, dt, op.grid.epsilon, phi)


def bump(t, center: float = 0.3, width: float = 0.1):
    """(1 - s^2)^3 on |s| < 1 with s = (t - center)/width."""
    s = (np.asarray(t, dtype=float) - center) / width
    return np.where(np.abs(s) < 1, (1 - s ** 2) ** 3, 0.0)


@dataclass
class MassLossReport:
    epsilons: list[float]
    losses: list[float]
    extrapolated: Optional[float]
    status: str  # conserving | losing | inconclusive
    T: float


def _aitken(l1, l2, l3):
    den = l1 + l3 - 2 * l2
    if den == 0:
        return l3
    return (l1 * l3 - l2 ** 2) / den


def mass_conservation_test(spec: DomainSpec, fld: CoefficientField,
                           epsilon_ladder=(1e-2, 1e-3, 1e-4), dt: float = 1e-4, T: float = 0.1,
                           cells: int = 2000, L: float = 1.0, center: float = 0.3, width: float = 0.1,
                           loss_tol: float = 1e-3, monotone_tol: float = 1e-12,
                           noise_floor: float = 1e-12) -> MassLossReport:
    """Loss 1 - mass(T)/mass(0) of the epsilon-truncated Dirichlet semigroup.

    The outer end reflects; the degenerate end is cut at each epsilon with an
    absorbing condition.  The ladder is extrapolated to epsilon -> 0 by Aitken's
    delta-squared on its last three rungs.  Rung-to-rung changes below
    ``noise_floor`` (accumulated solver roundoff) never count against monotonicity.
    """
    if spec.variant not in ("interval", "punctured", "ball_interior", "ball_exterior"):
        raise ValueError(f"{spec.name} has no radial reduction")
    losses = []
    for eps in epsilon_ladder:
        radial = spec.d if spec.variant != "interval" else 1
        jac = spec.variant if spec.variant != "interval" else None
        R = spec.radius if spec.variant.startswith("ball") else 0.0
        g = build_grid(eps, L, cells, 1.0, radial, grading="geometric", jacobian=jac, R=R)
        op = assemble(fld, g, ("dirichlet", "neumann"))
        tr = evolve(op, bump(op.t, center, width), dt, T)
        losses.append(float(1 - tr.masses[-1] / tr.masses[0]))
    diffs = np.diff(losses)
    tol = max(monotone_tol * max(np.abs(losses)), noise_floor)
    monotone = np.all(diffs <= tol) or np.all(diffs >= -tol)
    if not monotone:
        return MassLossReport(list(epsilon_ladder), losses, None, "inconclusive", T)
    ext = max(_aitken(*losses[-3:]), 0.0) if len(losses) >= 3 else losses[-1]
    status = "conserving" if ext <= loss_tol else "losing"
    return MassLossReport(list(epsilon_ladder), losses, float(ext), status, T)


# witness functions ----------------------------------------------------------


class WitnessRangeError(ValueError):
    pass


@dataclass(frozen=True)
class Cutoff:
    """C^2 quintic cutoff: 1 on [0, s], 0 on [r, inf)."""

    s: float = 0.25
    r: float = 0.5

    def __post_init__(self):
        if not 0 < self.s < self.r:
            raise ValueError("cutoff needs 0 < s < r")

    def _tau(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.s) / (self.r - self.s), 0.0, 1.0)

    def value(self, t):
        u = self._tau(t)
        return 1 - u ** 3 * (10 - 15 * u + 6 * u ** 2)

    def d1(self, t):
        u = self._tau(t)
        return -30 * u ** 2 * (1 - u) ** 2 / (self.r - self.s)

    def d2(self, t):
        u = self._tau(t)
        return -60 * u * (1 - u) * (1 - 2 * u) / (self.r - self.s) ** 2


@dataclass
class WitnessReport:
    delta: float
    exponent: float  # p in nu = t^p chi (0 means -log t chi)
    l2_status: str
    l2_norm: float
    energy_status: str
    fitted_exponent: float
    h_sup: float
    h_bounded: bool
    verdict: str  # yes | no | inconclusive
    epsilons: np.ndarray = field(repr=False)
    l2_partials: np.ndarray = field(repr=False)
    energy_partials: np.ndarray = field(repr=False)


def witness_exponent(spec: DomainSpec, delta: float) -> Fraction:
    """Exponent p of nu = d^p chi, exact; checks the witness range."""
    dl = Fraction(str(delta))
    if spec.variant in ("interval", "ball_interior", "ball_exterior"):
        if not 1 <= dl < Fraction(3, 2):
            raise WitnessRangeError(f"delta = {delta} outside the witness range [1, 3/2)")
        return 1 - dl
    if spec.variant == "punctured":
        d = spec.d
        if not 2 - d <= dl < 2 - Fraction(d, 2):
            raise WitnessRangeError(f"delta = {delta} outside the witness range [{2 - d}, {2 - d / 2})")
        return 2 - d - dl
    raise WitnessRangeError(f"no witness family for {spec.name}")


class _RadialWitness:
    """nu = t^p chi (p != 0) or -log(t) chi on a radial model with J = t^k."""

    def __init__(self, fld: CoefficientField, p: Fraction, k: int, cutoff: Cutoff):
        self.fld, self.p, self.k, self.chi = fld, p, k, cutoff
        self.a = fld.profile.coeffs[0]
        # flux exponent: c J nu' ~ t^q on the region chi = 1; q = 0 by construction
        self.q = Fraction(str(fld.delta)) + k + p - 1
        self.pf, self.qf = float(p), float(self.q)

    def nu(self, t):
        base = t ** self.pf if self.p != 0 else -np.log(t)
        return base * self.chi.value(t)

    def nu_prime(self, t):
        if self.p != 0:
            return self.pf * t ** (self.pf - 1) * self.chi.value(t) + t ** self.pf * self.chi.d1(t)
        return -self.chi.value(t) / t - np.log(t) * self.chi.d1(t)

    def H_nu(self, t):
        """-(t^-k) (c t^k nu')' in closed form."""
        a, q, qf = self.a, self.q, self.qf
        c0, c1, c2 = self.chi.value(t), self.chi.d1(t), self.chi.d2(t)
        tq = t ** qf
        if self.p != 0:
            p = self.pf
            flux_d = a * p * float(q) * t ** (qf - 1) * c0 + a * (p + qf + 1) * tq * c1 + a * t * tq * c2
        else:
            lg = np.log(t)
            flux_d = (-a * float(q) * t ** (qf - 1) * c0 - a * tq * c1
                      - a * ((qf + 1) * tq * lg + tq) * c1 - a * t * tq * lg * c2)
        return -flux_d / t ** self.k


def witness(spec: DomainSpec, fld: CoefficientField, delta: Optional[float] = None,
            cutoff: Cutoff = Cutoff(), max_rungs: int = 400, fit_window: int = 10) -> WitnessReport:
    """Check nu in D(H*) but not in D(h_N) for the radial witness nu = d^p chi.

    (i) the L2 ladder int_eps^r nu^2 J must saturate, (ii) the energy ladder
    int_eps^r c nu'^2 J must diverge (its increments fit eps^p), and (iii) H nu
    must stay bounded on the region chi = 1.
    """
    if delta is not None and delta != fld.delta:
        raise ValueError("delta disagrees with the coefficient field")
    if fld.profile.kind != "constant" or fld.perturbation is not None:
        raise ValueError("witness construction needs an exact field a d^delta I with constant a")
    p = witness_exponent(spec, fld.delta)
    k = spec.d - 1 if spec.variant == "punctured" else 0
    w = _RadialWitness(fld, p, k, cutoff)
    r = cutoff.r
    c = lambda t: w.a * t ** fld.delta

    def rung(f, lo, hi):
        g = lambda s: np.exp(s) * f(np.exp(s))
        pts = [np.log(x) for x in (cutoff.s,) if lo < x < hi]
        return integrate.quad(g, np.log(lo), np.log(hi), points=pts or None, epsrel=1e-12, epsabs=0,
                              limit=200)[0]

    l2f = lambda t: w.nu(t) ** 2 * t ** k
    enf = lambda t: c(t) * w.nu_prime(t) ** 2 * t ** k
    eps = [r]
    l2, en = [0.0], [0.0]
    l2_status = en_status = "inconclusive"
    for j in range(1, max_rungs + 1):
        lo, hi = r * 2.0 ** -j, eps[-1]
        eps.append(lo)
        l2.append(l2[-1] + rung(l2f, lo, hi))
        en.append(en[-1] + rung(enf, lo, hi))
        if j >= 8:
            l2_status = ladder_status(l2[1:])
            en_status = ladder_status(en[1:])
            if l2_status != "inconclusive" and en_status != "inconclusive" and j >= fit_window + 2:
                break
    eps_a, l2_a, en_a = np.array(eps), np.array(l2), np.array(en)
    inc = np.diff(en_a)[-fit_window:]
    fitted = float(np.polyfit(np.log(eps_a[-fit_window:]), np.log(inc), 1)[0])
    # H nu on the chi = 1 region, sampled down to the smallest rung
    ts = np.geomspace(eps_a[-1], cutoff.s, 2000)
    hv = np.abs(w.H_nu(ts))
    h_sup = float(hv.max())
    # bounded: the sup over [eps, s] does not grow as eps shrinks
    h_half = float(np.abs(w.H_nu(np.geomspace(np.sqrt(eps_a[-1] * cutoff.s), cutoff.s, 2000))).max())
    h_bounded = bool(np.isfinite(h_sup) and h_sup <= max(h_half, 1e-300) * (1 + 1e-9))
    if "inconclusive" in (l2_status, en_status):
        verdict = "inconclusive"
    elif l2_status == "saturates" and en_status == "diverges" and h_bounded:
        verdict = "yes"
    else:
        verdict = "no"
    return WitnessReport(fld.delta, float(p), l2_status, float(np.sqrt(l2_a[-1])), en_status, fitted,
                         h_sup, h_bounded, verdict, eps_a, l2_a, en_a)
