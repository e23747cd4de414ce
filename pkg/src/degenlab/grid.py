"""Graded 1D/radial grids on a truncated boundary layer and P1 finite-element assembly.

The layer is parametrized by the boundary distance t in [eps, L].  Radial
reductions carry the surface Jacobian J(t):

    interval        J = 1
    punctured       J = t^(d-1)
    ball_interior   J = (R - t)^(d-1)
    ball_exterior   J = (R + t)^(d-1)

The form is h(phi) = int c(t) phi'(t)^2 J(t) dt.  Because c is a sum of powers
t^q (profile polynomial times t^delta plus the scalar perturbation) and J is a
polynomial, every cell integral is computed exactly.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp

from .coefficients import CoefficientField, FieldError
from .geometry import DomainSpec

JACOBIANS = ("interval", "punctured", "ball_interior", "ball_exterior")


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    nodes: np.ndarray = field(repr=False)
    grading_exponent: float
    epsilon: float
    L: float
    radial_dim: int = 1
    grading: str = "power"
    jacobian: str = "interval"
    R: float = 0.0

    @property
    def radial_weight_exponent(self) -> int:
        return self.radial_dim - 1

    @property
    def cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def jacobian_poly(self) -> np.ndarray:
        """Coefficients (ascending powers of t) of J(t)."""
        k = self.radial_dim - 1
        if self.jacobian == "interval" or k == 0:
            return np.array([1.0])
        if self.jacobian == "punctured":
            out = np.zeros(k + 1)
            out[k] = 1.0
            return out
        sign = -1.0 if self.jacobian == "ball_interior" else 1.0
        return np.array([comb(k, j) * self.R ** (k - j) * sign ** j for j in range(k + 1)])

    def J(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.jacobian_poly())


def build_grid(epsilon: float, L: float, cells: int, grading_exponent: float = 1.0,
               radial_dim: int = 1, *, grading: str = "power", jacobian: str | None = None,
               R: float = 0.0, geometry_only: bool = False) -> Grid1D:
    """Nodes eps + (L - eps)(i/cells)^p, or eps (L/eps)^(i/cells) for geometric grading.

    ``geometry_only`` lifts the cells >= 16 and eps > 0 requirements for grids that
    are only inspected, never assembled.
    """
    if grading not in ("power", "geometric"):
        raise GridError(f"unknown grading {grading!r}")
    if not (epsilon < L) or epsilon < 0 or (epsilon == 0 and not geometry_only):
        raise GridError("need 0 < epsilon < L")
    if cells < (1 if geometry_only else 16):
        raise GridError("need at least 16 cells")
    if grading_exponent < 1:
        raise GridError("grading exponent must be >= 1")
    if radial_dim < 1:
        raise GridError("radial dimension must be >= 1")
    jacobian = jacobian or ("interval" if radial_dim == 1 else "punctured")
    if jacobian not in JACOBIANS:
        raise GridError(f"unknown jacobian {jacobian!r}")
    if jacobian.startswith("ball") and not (R > 0 and (jacobian == "ball_exterior" or L < R)):
        raise GridError("ball jacobian needs radius R > L")
    s = np.arange(cells + 1) / cells
    if grading == "geometric":
        if epsilon == 0:
            raise GridError("geometric grading needs epsilon > 0")
        nodes = epsilon * (L / epsilon) ** s
    else:
        nodes = epsilon + (L - epsilon) * s ** grading_exponent
    nodes[0], nodes[-1] = epsilon, L
    if np.any(np.diff(nodes) <= 0):
        raise GridError("grid nodes are not strictly increasing")
    return Grid1D(nodes, float(grading_exponent), float(epsilon), float(L), int(radial_dim),
                  grading, jacobian, float(R))


def grid_for(spec: DomainSpec, epsilon: float, L: float, cells: int, grading_exponent: float = 1.0,
             grading: str = "power") -> Grid1D:
    """Grid for the radial reduction of a domain (interval, punctured space, balls)."""
    v = spec.variant
    if v == "interval":
        return build_grid(epsilon, L, cells, grading_exponent, 1, grading=grading)
    if v in ("punctured", "ball_interior", "ball_exterior"):
        return build_grid(epsilon, L, cells, grading_exponent, spec.d, grading=grading,
                          jacobian=v, R=spec.radius if v != "punctured" else 0.0)
    raise GridError(f"{spec.name} has no radial reduction")


# exact power integrals ---------------------------------------------------


def _power_integral(t0, t1, q):
    """int_{t0}^{t1} t^q dt, vectorized, stable for t1/t0 close to 1."""
    lr = np.log(t1 / t0)
    p = q + 1.0
    if p == 0:
        return lr
    return t0 ** p * np.expm1(p * lr) / p


def _profile_poly(fld: CoefficientField) -> np.ndarray:
    if fld.profile.kind == "angular":
        raise FieldError("non-radial fields cannot be assembled on a 1D grid")
    return np.array(fld.profile.coeffs, dtype=float)


def _power_terms(fld: CoefficientField, grid: Grid1D):
    """(coefficient, exponent) pairs with c(t) J(t) = sum coef t^exp."""
    if not fld.is_radial:
        raise FieldError("non-radial fields cannot be assembled on a 1D grid")
    jp = grid.jacobian_poly()
    terms = []
    cj = np.polynomial.polynomial.polymul(_profile_poly(fld), jp)
    terms += [(float(c), fld.delta + k) for k, c in enumerate(cj) if c != 0]
    if fld.perturbation is not None:
        b = fld.perturbation.scalar_multiple()
        terms += [(b * float(c), fld.delta + fld.perturbation.gamma + k)
                  for k, c in enumerate(jp) if c != 0 and b != 0]
    return terms


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _hat_moments(t0, t1, terms):
    """Cell integrals of f N0^2, f N0 N1, f N1^2 for f = sum c t^q and hat functions N.

    Exact moments when the cell is wide relative to t0 (where quadrature would
    feel the t^q singularity); Gauss-Legendre otherwise (where the moment
    combination would cancel catastrophically).
    """
    h = t1 - t0
    wide = t1 >= 2 * t0
    out = np.zeros((3, len(t0)))
    # quadrature branch
    tq = 0.5 * (t0 + t1)[:, None] + 0.5 * h[:, None] * _GL_X[None, :]
    f = sum(c * tq ** q for c, q in terms)
    n1 = (tq - t0[:, None]) / h[:, None]
    n0 = 1 - n1
    wq = 0.5 * h[:, None] * _GL_W[None, :]
    quad = np.array([(f * n0 * n0 * wq).sum(1), (f * n0 * n1 * wq).sum(1), (f * n1 * n1 * wq).sum(1)])
    # exact branch
    if np.any(wide):
        a, b, hh = t0[wide], t1[wide], h[wide]
        mom = [sum(c * _power_integral(a, b, q + k) for c, q in terms) for k in range(3)]
        ex = np.array([(b * b * mom[0] - 2 * b * mom[1] + mom[2]) / hh ** 2,
                       (-a * b * mom[0] + (a + b) * mom[1] - mom[2]) / hh ** 2,
                       (a * a * mom[0] - 2 * a * mom[1] + mom[2]) / hh ** 2])
        out[:, wide] = ex
    out[:, ~wide] = quad[:, ~wide]
    return out


def _poly_integral(t0, t1, poly):
    return sum(c * _power_integral(t0, t1, k) for k, c in enumerate(poly) if c != 0)


# assembled operator ---------------------------------------------------------


@dataclass(frozen=True)
class AssembledOperator:
    """Discrete form h, lumped mass and nodal weights on the free nodes.

    ``stiffness`` and ``mass`` are restricted to the free nodes (Dirichlet rows
    eliminated); ``free`` indexes them into ``grid.nodes``.
    """

    grid: Grid1D
    stiffness: sp.csr_matrix = field(repr=False)
    mass: np.ndarray = field(repr=False)  # lumped diagonal
    hardy_weight: np.ndarray = field(repr=False)  # a t^(delta-2) * mass
    hardy_weight_matrix: sp.csr_matrix = field(repr=False)  # Galerkin int a t^(delta-2) phi_i phi_j J
    rellich_weight: np.ndarray = field(repr=False)  # a^2 t^(2(delta-2)) * mass
    free: np.ndarray = field(repr=False)
    bc: tuple[str, str]
    delta: float

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes[self.free]

    def form(self, phi) -> float:
        phi = np.asarray(phi, dtype=float)
        return float(phi @ (self.stiffness @ phi))

    def H_squared_form(self):
        """K M^-1 K, the discrete ||H phi||^2 form."""
        K = self.stiffness
        return (K @ sp.diags(1.0 / self.mass) @ K).tocsr()

    def restrict(self, phi_full):
        return np.asarray(phi_full, dtype=float)[self.free]

    def extend(self, phi):
        out = np.zeros(len(self.grid.nodes))
        out[self.free] = phi
        return out


def assemble(fld: CoefficientField, grid: Grid1D, bc=("dirichlet", "dirichlet")) -> AssembledOperator:
    """P1 stiffness with exact cell integrals, lumped mass and nodal weight maps."""
    inner, outer = bc
    for b in bc:
        if b not in ("dirichlet", "neumann"):
            raise GridError(f"unknown boundary condition {b!r}")
    if grid.epsilon <= 0:
        raise GridError("assembly needs epsilon > 0")
    t = grid.nodes
    t0, t1 = t[:-1], t[1:]
    h = t1 - t0
    kc = sum(c * _power_integral(t0, t1, q) for c, q in _power_terms(fld, grid)) / h ** 2
    n = len(t)
    main = np.zeros(n)
    main[:-1] += kc
    main[1:] += kc
    K = sp.diags([-kc, main, -kc], [-1, 0, 1], format="csr")
    # lumped mass: half of each adjacent cell's J-measure
    cell_mass = _poly_integral(t0, t1, grid.jacobian_poly())
    m = np.zeros(n)
    m[:-1] += cell_mass / 2
    m[1:] += cell_mass / 2
    a = fld.profile.radial_value(t)
    wh = a * t ** (fld.delta - 2) * m
    wr = a ** 2 * t ** (2 * (fld.delta - 2)) * m
    wterms = [(c * ac, fld.delta - 2 + k + j) for k, c in enumerate(grid.jacobian_poly()) if c != 0
              for j, ac in enumerate(_profile_poly(fld)) if ac != 0]
    g00, g01, g11 = _hat_moments(t0, t1, wterms)
    wd = np.zeros(n)
    wd[:-1] += g00
    wd[1:] += g11
    Wh = sp.diags([g01, wd, g01], [-1, 0, 1], format="csr")
    free = np.arange(n)
    if inner == "dirichlet":
        free = free[1:]
    if outer == "dirichlet":
        free = free[:-1]
    K = K[free][:, free].tocsr()
    Wh = Wh[free][:, free].tocsr()
    return AssembledOperator(grid, K, m[free], wh[free], Wh, wr[free], free, (inner, outer),
                             float(fld.delta))


def to_coo_text(matrix, precision: int = 17) -> str:
    """Coordinate-format text: 'row col value' lines sorted row-major."""
    A = sp.coo_matrix(matrix) if sp.issparse(matrix) else sp.coo_matrix(np.diag(matrix)
                                                                        if np.ndim(matrix) == 1
                                                                        else matrix)
    order = np.lexsort((A.col, A.row))
    buf = io.StringIO()
    for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
        buf.write(f"{i} {j} {v:.{precision}g}\n")
    return buf.getvalue()
