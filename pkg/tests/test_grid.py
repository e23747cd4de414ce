import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from scipy import integrate

from degenlab.coefficients import CoefficientField, FieldError, Perturbation, Profile
from degenlab.geometry import DomainSpec
from degenlab.grid import GridError, assemble, build_grid, grid_for, to_coo_text
from degenlab.spectral import inverse_iteration


# grids --------------------------------------------------------------------------


def test_uniform_nodes_example():
    g = build_grid(0.01, 1.0, 4, 1, geometry_only=True)
    np.testing.assert_allclose(g.nodes, [0.01, 0.2575, 0.505, 0.7525, 1.0], rtol=1e-15)


def test_graded_nodes_example():
    g = build_grid(0.0, 1.0, 2, 2, geometry_only=True)
    np.testing.assert_allclose(g.nodes, [0.0, 0.25, 1.0])


def test_radial_weight_exponent():
    assert build_grid(0.01, 1.0, 16, radial_dim=3).radial_weight_exponent == 2


def test_geometric_grading_nodes():
    g = build_grid(1e-8, 1.0, 16, grading="geometric")
    np.testing.assert_allclose(np.diff(np.log(g.nodes)), np.log(1e8) / 16, rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 0.5), st.integers(16, 400), st.floats(1.0, 4.0))
def test_grid_invariants(eps, cells, p):
    g = build_grid(eps, 1.0, cells, p)
    assert g.nodes[0] == eps and g.nodes[-1] == 1.0
    assert g.cells == cells
    w = g.widths
    assert np.all(w > 0)
    assert np.all(np.diff(w) >= -1e-12 * w.max())  # spacing grows away from eps


@pytest.mark.parametrize("kwargs", [
    dict(epsilon=0.0, L=1.0, cells=16),
    dict(epsilon=0.5, L=0.5, cells=16),
    dict(epsilon=0.01, L=1.0, cells=8),
    dict(epsilon=0.01, L=1.0, cells=16, grading_exponent=0.5),
    dict(epsilon=0.01, L=1.0, cells=16, grading="chebyshev"),
    dict(epsilon=0.01, L=2.0, cells=16, radial_dim=3, jacobian="ball_interior", R=1.0),
])
def test_grid_errors(kwargs):
    with pytest.raises(GridError):
        build_grid(**kwargs)


def test_grid_for_rejects_product_and_lattice():
    with pytest.raises(GridError):
        grid_for(DomainSpec.convex_product(3, 1, 1.0), 0.01, 0.5, 32)
    with pytest.raises(GridError):
        grid_for(DomainSpec.lattice(3), 0.01, 0.4, 32)


# assembly -----------------------------------------------------------------------


def test_second_difference_row():
    g = build_grid(0.01, 1.0, 16)
    op = assemble(CoefficientField.exact(0.0), g)
    h = g.widths[0]
    K = op.stiffness.toarray()
    np.testing.assert_allclose(K[5, 4:7], [-1 / h, 2 / h, -1 / h], rtol=1e-12)


def test_lumped_mass_entries():
    g = grid_for(DomainSpec.punctured(3), 0.05, 1.0, 32, 1.5)
    op = assemble(CoefficientField.exact(1.0), g)
    t = g.nodes
    for i in (1, 10, 31):
        left = integrate.quad(lambda s: s ** 2, t[i - 1], t[i])[0]
        right = integrate.quad(lambda s: s ** 2, t[i], t[i + 1])[0]
        assert op.mass[i - 1] == pytest.approx((left + right) / 2, rel=1e-12)
    assert np.all(op.mass > 0)


@pytest.mark.parametrize("variant", ["punctured", "ball_interior", "ball_exterior"])
def test_stiffness_cell_integrals_exact(variant):
    spec = {"punctured": DomainSpec.punctured(3), "ball_interior": DomainSpec.ball_interior(3, 2.0),
            "ball_exterior": DomainSpec.ball_exterior(3, 1.0)}[variant]
    fld = CoefficientField(0.7, Profile.radial(1.0, 0.4, 0.2), mu=1.0, lam=2.0,
                           perturbation=Perturbation.from_array(0.3 * np.eye(3), 0.5))
    g = grid_for(spec, 1e-3, 1.0, 16, 2.0)
    op = assemble(fld, g, bc=("neumann", "neumann"))
    K = op.stiffness.toarray()
    for i in (0, 7, 15):
        t0, t1 = g.nodes[i], g.nodes[i + 1]
        ref = integrate.quad(lambda s: fld.radial_c(s) * g.J(s), t0, t1, epsabs=0, epsrel=1e-13)[0]
        assert -K[i, i + 1] * (t1 - t0) ** 2 == pytest.approx(ref, rel=1e-10)


def test_galerkin_weight_partition_of_unity():
    fld = CoefficientField(0.5, Profile.radial(1.0, 0.5), mu=1.0, lam=1.5)
    g = grid_for(DomainSpec.punctured(3), 1e-4, 1.0, 64, grading="geometric")
    op = assemble(fld, g, bc=("neumann", "neumann"))
    total = op.hardy_weight_matrix.sum()
    # int (1 + s/2) s^(1/2) ds over [1e-4, 1] in closed form
    ref = 2 / 3 * (1 - 1e-6) + 0.2 * (1 - 1e-10)
    assert total == pytest.approx(ref, rel=1e-10)


def test_pi_squared_at_256_cells():
    g = build_grid(1e-12, 1.0, 256)
    op = assemble(CoefficientField.exact(0.0), g)
    lam, _, _ = inverse_iteration(op.stiffness, op.mass)
    assert lam == pytest.approx(np.pi ** 2, rel=0.01)


def _form_error(cells):
    fld = CoefficientField(1.0, Profile.radial(1.0, 0.5), mu=1.0, lam=1.5)
    g = grid_for(DomainSpec.punctured(3), 0.1, 1.0, cells)
    op = assemble(fld, g, bc=("neumann", "neumann"))
    phi = np.sin(np.pi * g.nodes) + g.nodes ** 2
    exact = integrate.quad(lambda s: fld.radial_c(s) * (np.pi * np.cos(np.pi * s) + 2 * s) ** 2 * s ** 2,
                           0.1, 1.0, epsabs=0, epsrel=1e-13)[0]
    return abs(op.form(phi) - exact)


def test_form_second_order_convergence():
    cells = np.array([32, 64, 128, 256])
    err = np.array([_form_error(c) for c in cells])
    slope = -np.polyfit(np.log(cells), np.log(err), 1)[0]
    assert slope >= 1.9


def test_neumann_kernel_contains_constants():
    fld = CoefficientField(1.3, Profile.radial(2.0, -0.5), mu=1.5, lam=2.0)
    for spec in (DomainSpec.punctured(4), DomainSpec.ball_exterior(2, 1.0), DomainSpec.interval()):
        op = assemble(fld, grid_for(spec, 1e-3, 0.9, 40, 2.0), bc=("neumann", "neumann"))
        K = op.stiffness
        np.testing.assert_allclose(np.asarray(K.sum(axis=1)).ravel(), 0.0, atol=1e-12 * abs(K).max())


def test_pencil_symmetric_nonnegative():
    fld = CoefficientField(0.5, Profile.radial(1.0, 0.5), mu=1.0, lam=1.5)
    for bc in (("dirichlet", "dirichlet"), ("dirichlet", "neumann"), ("neumann", "neumann")):
        op = assemble(fld, grid_for(DomainSpec.ball_interior(3, 1.0), 1e-3, 0.9, 48, 2.0), bc=bc)
        K = op.stiffness.toarray()
        assert np.max(np.abs(K - K.T)) <= 1e-12 * np.abs(K).max()
        ev = sla.eigh(K, np.diag(op.mass), eigvals_only=True)
        assert ev.min() >= -1e-9 * ev.max()


def test_nodal_weight_maps():
    fld = CoefficientField(0.5, Profile.radial(1.0, 0.5), mu=1.0, lam=1.5)
    op = assemble(fld, grid_for(DomainSpec.punctured(3), 1e-3, 1.0, 32))
    t = op.t
    a = 1 + 0.5 * t
    np.testing.assert_allclose(op.hardy_weight, a * t ** -1.5 * op.mass, rtol=1e-14)
    np.testing.assert_allclose(op.rellich_weight, a ** 2 * t ** -3 * op.mass, rtol=1e-14)


def test_boundary_conditions_and_restriction():
    g = build_grid(0.01, 1.0, 16)
    fld = CoefficientField.exact(1.0)
    assert assemble(fld, g).stiffness.shape == (15, 15)
    assert assemble(fld, g, ("dirichlet", "neumann")).stiffness.shape == (16, 16)
    op = assemble(fld, g, ("dirichlet", "neumann"))
    phi = np.arange(17.0)
    np.testing.assert_array_equal(op.extend(op.restrict(phi))[1:], phi[1:])
    with pytest.raises(GridError):
        assemble(fld, g, ("robin", "neumann"))


def test_non_radial_rejected():
    g = build_grid(0.01, 1.0, 16, radial_dim=3)
    with pytest.raises(FieldError):
        assemble(CoefficientField(1.0, Profile.angular(1.0, 0.5), mu=0.5, lam=1.5), g)


def test_coo_text_round_trip():
    op = assemble(CoefficientField(0.3, Profile.radial(1.0, 0.25), mu=1.0, lam=1.25),
                  grid_for(DomainSpec.punctured(3), 1e-4, 1.0, 16, grading="geometric"))
    text = to_coo_text(op.stiffness)
    rows = [line.split() for line in text.splitlines()]
    keys = [(int(i), int(j)) for i, j, _ in rows]
    assert keys == sorted(keys)
    K = op.stiffness.toarray()
    for i, j, v in rows:
        assert float(v) == K[int(i), int(j)]  # 17 significant digits round-trip exactly
    assert to_coo_text(op.stiffness) == text
