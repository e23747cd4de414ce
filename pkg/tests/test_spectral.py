import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from degenlab.coefficients import CoefficientField, Profile
from degenlab.geometry import DomainSpec, LayerSpec
from degenlab.grid import assemble, build_grid, grid_for
from degenlab.spectral import (ConvergenceError, deficiency_indices, hardy_min, inverse_iteration,
                               ladder_status, limiting_rellich_constant, rellich_min, weyl_classify)

INTERVAL = DomainSpec.interval(0, 1)


# inverse iteration ----------------------------------------------------------------


def test_inverse_iteration_matches_dense_eigensolver():
    rng = np.random.default_rng(0)
    Q = rng.standard_normal((30, 30))
    A = Q @ Q.T + 30 * np.eye(30)
    B = np.diag(rng.uniform(0.5, 2.0, 30))
    lam, x, _ = inverse_iteration(sp.csr_matrix(A), np.diag(B))
    ref = sla.eigh(A, B, eigvals_only=True)[0]
    # the stopping rule bounds successive changes, not the error itself
    assert lam == pytest.approx(ref, rel=1e-7)
    assert x @ B @ x == pytest.approx(1.0)
    lam2, _, _ = inverse_iteration(sp.csr_matrix(A), sp.csr_matrix(B))
    assert lam2 == pytest.approx(lam, rel=1e-12)


def test_inverse_iteration_convergence_error():
    A = sp.diags([1.0, 1.0 + 1e-9, 3.0])
    with pytest.raises(ConvergenceError):
        inverse_iteration(A, np.ones(3), tol=1e-16, maxiter=2)


# ladder status ----------------------------------------------------------------------


def test_ladder_status_cases():
    k = np.arange(1, 30)
    assert ladder_status(1 - 2.0 ** -(3 * k)) == "saturates"
    assert ladder_status(k.astype(float)) == "diverges"
    assert ladder_status(2.0 ** k) == "diverges"
    assert ladder_status([1, 2, 3]) == "inconclusive"
    assert ladder_status(1 - 1.0 / k) == "inconclusive"  # slow decay: neither
    assert ladder_status([1, 2, np.inf, 4, 5, 6, 7]) == "diverges"


# Hardy ------------------------------------------------------------------------------


def _hardy(spec, fld, eps, cells, grading="geometric", L=1.0, ladder=False):
    op = assemble(fld, grid_for(spec, eps, L, cells, grading=grading))
    return hardy_min(op, fld, spec, LayerSpec(L) if L <= 1 else None, ladder=ladder)


@pytest.mark.parametrize("spec", [INTERVAL, DomainSpec.punctured(3)], ids=["interval", "punctured3"])
def test_hardy_monotone_under_nested_refinement(spec):
    fld = CoefficientField.exact(0.0)
    vals = []
    for cells in (64, 128, 256, 512, 1024):
        rep = _hardy(spec, fld, 1e-8, cells, grading="power")
        vals.append(rep.numeric_min)
        assert rep.numeric_min >= rep.theoretical_bound - 1e-6
    assert all(b <= a * (1 + 1e-10) for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("delta,d", [(0.0, 3), (0.5, 3), (1.0, 4), (0.0, 5), (1.5, 3)])
def test_hardy_above_bound_radial(delta, d):
    spec = DomainSpec.punctured(d)
    fld = CoefficientField.exact(delta)
    for cells in (128, 1024):
        rep = _hardy(spec, fld, 1e-10, cells)
        assert rep.alpha_1r == pytest.approx(d + delta - 2)
        assert rep.applicable
        assert rep.numeric_min >= rep.theoretical_bound - 1e-6


def test_hardy_ball_layer_above_bound():
    spec = DomainSpec.ball_exterior(3, 1.0)
    fld = CoefficientField.exact(1.7)
    op = assemble(fld, grid_for(spec, 1e-8, 0.2, 512, grading="geometric"))
    rep = hardy_min(op, fld, spec, LayerSpec(0.2), ladder=False)
    assert rep.applicable
    assert rep.numeric_min >= rep.theoretical_bound - 1e-6


def test_hardy_non_applicable_report():
    fld = CoefficientField.exact(0.5)
    rep = _hardy(INTERVAL, fld, 1e-6, 256)
    assert rep.alpha_1r == pytest.approx(-0.5)
    assert not rep.applicable


def test_hardy_scaling_invariance():
    spec = DomainSpec.punctured(3)
    g = grid_for(spec, 1e-6, 1.0, 256, grading="geometric")
    base = None
    for k in (1.0, 3.0, 0.25):
        fld = CoefficientField(0.5, Profile.radial(k, 0.5 * k), mu=k, lam=1.5 * k)
        rep = hardy_min(assemble(fld, g), fld, spec, LayerSpec(1.0), ladder=False)
        ratio = rep.numeric_min / rep.theoretical_bound
        if base is None:
            base = (rep.numeric_min, rep.theoretical_bound, ratio)
        else:
            assert rep.numeric_min == pytest.approx(base[0], rel=1e-9)
            assert rep.theoretical_bound == pytest.approx(base[1], rel=1e-12)
            assert ratio == pytest.approx(base[2], rel=1e-9)


def test_hardy_epsilon_ladder_extrapolates_toward_quarter():
    rep = _hardy(INTERVAL, CoefficientField.exact(0.0), 1e-6, 1024, ladder=True)
    assert [p.epsilon for p in rep.ladder] == [1e-6, 5e-7, 2.5e-7]
    vals = [p.value for p in rep.ladder]
    assert vals[0] > vals[1] > vals[2] > 0.25
    assert rep.extrapolated == pytest.approx(0.25, abs=2e-3)


# Rellich ----------------------------------------------------------------------------


def test_limiting_rellich_constant():
    assert limiting_rellich_constant(5, 0, 0.0) == 25 / 16
    assert limiting_rellich_constant(4, 0, 0.0) == 0.0
    assert limiting_rellich_constant(3, 2, 1.5) == 0.0


def test_rellich_interval_delta_175_above_bound():
    fld = CoefficientField.exact(1.75)
    op = assemble(fld, grid_for(INTERVAL, 1e-8, 0.5, 512, grading="geometric"))
    rep = rellich_min(op, fld, INTERVAL, LayerSpec(0.5), ladder=False)
    assert rep.condition and rep.alpha_2r == pytest.approx(0.75 ** 2 - 0.25 ** 2)
    assert rep.theoretical_bound == pytest.approx((0.5 / 4) ** 2)
    assert rep.numeric_min >= rep.theoretical_bound - 1e-6


def test_rellich_non_applicable_flags():
    spec4 = DomainSpec.punctured(4)
    fld = CoefficientField.exact(0.0)
    rep = rellich_min(assemble(fld, grid_for(spec4, 1e-6, 1.0, 128, grading="geometric")), fld, spec4,
                      ladder=False)
    assert rep.limiting_constant == 0.0 and not rep.informative and not rep.applicable
    spec3 = DomainSpec.punctured(3)
    rep = rellich_min(assemble(fld, grid_for(spec3, 1e-6, 1.0, 128, grading="geometric")), fld, spec3,
                      ladder=False)
    # alpha_1^2 = 1 <= (2 - delta)^2 = 4
    assert not rep.condition and rep.theoretical_bound is None and not rep.applicable


def test_rellich_continuous_at_delta_two():
    spec = DomainSpec.punctured(5)
    g = grid_for(spec, 1e-6, 1.0, 512, grading="geometric")
    vals = {}
    for delta in (1.99, 2.0):
        fld = CoefficientField.exact(delta)
        vals[delta] = rellich_min(assemble(fld, g), fld, spec, ladder=False).numeric_min
    assert abs(vals[1.99] - vals[2.0]) <= 0.05 * vals[2.0]
    assert rellich_min(assemble(CoefficientField.exact(2.0), g), CoefficientField.exact(2.0), spec,
                       ladder=False).condition is False


# Weyl classification ----------------------------------------------------------------


@pytest.mark.parametrize("delta,verdict", [(1.4, "not_essentially_self_adjoint"),
                                           (1.5, "essentially_self_adjoint"),
                                           (2.0, "essentially_self_adjoint")])
def test_weyl_examples(delta, verdict):
    res = weyl_classify(CoefficientField.exact(delta))
    assert res.verdict == verdict and res.closed_form
    assert len(res.epsilons) == 41 and res.epsilons[-1] == 2.0 ** -40


def test_weyl_ladder_matches_closed_form_integrals():
    # int_eps^1 (x^(1-d) - 1)^2/(d-1)^2 dx in closed form for d = 0.5
    res = weyl_classify(CoefficientField.exact(0.5))
    eps = res.epsilons[5]
    F = lambda x: (x ** 2 / 2 - 2 * x ** 1.5 / 1.5 + x) / 0.25
    assert res.partials[5] == pytest.approx(F(1.0) - F(eps), rel=1e-10)
    assert res.ladder_status == "saturates"
    assert weyl_classify(CoefficientField.exact(2.0)).ladder_status == "diverges"


def test_weyl_general_coefficient_uses_ladder():
    res = weyl_classify(lambda x: x ** 2 * (1 + x))
    assert not res.closed_form and res.verdict == "essentially_self_adjoint"
    res = weyl_classify(lambda x: x ** 0.5 * (2 - x))
    assert res.ladder_status == "saturates" and res.verdict == "not_essentially_self_adjoint"
    fld = CoefficientField(1.8, Profile.radial(1.0, 1.0), mu=1.0, lam=2.0)
    assert weyl_classify(fld).verdict == "essentially_self_adjoint"


def test_weyl_critical_log_case_is_not_decided_by_ladder():
    # c = x^1.5 |log x|: nu^2 ~ 1/x, the partials grow like log and never saturate
    res = weyl_classify(lambda x: x ** 1.5 * (1 - np.log(x)))
    assert res.verdict in ("essentially_self_adjoint", "indeterminate")


# deficiency indices -----------------------------------------------------------------


@pytest.mark.parametrize("delta,cls,n", [(1.0, "limit_circle", 1), (1.5, "limit_point", 0),
                                         (0.0, "limit_circle", 1)])
def test_deficiency_examples(delta, cls, n):
    res = deficiency_indices(CoefficientField.exact(delta))
    assert res.endpoint_classification == cls
    assert res.n_plus == res.n_minus == n


def test_deficiency_general_coefficient_callable():
    res = deficiency_indices(lambda x: x ** 2 * (1 + x))
    assert res.endpoint_classification == "limit_point"
    res = deficiency_indices(lambda x: x ** 0.5 * (1 + x))
    assert res.endpoint_classification == "limit_circle" and res.n_plus == 1


def test_deficiency_statuses_consistent():
    res = deficiency_indices(CoefficientField.exact(1.75))
    assert any(v == "diverges" for v in res.statuses.values())
    res = deficiency_indices(CoefficientField.exact(0.5))
    assert all(v == "saturates" for v in res.statuses.values())
    assert res.smallest_epsilon == 2.0 ** -res.rungs
