import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imlfista.checks import accelerated_dual_prox
from imlfista.prox import (
    huber_envelope, project_positive, prox_weighted_l1_positive, smooth_grad_reg, soft_threshold, update_weights,
    weighted_l1,
)
from imlfista.sara import SaraDictionary

IDENT = SaraDictionary((8, 8), wavelets=())
PSI16 = SaraDictionary((16, 16))
PSI8 = SaraDictionary((8, 8), levels=3)


def primal(u, x, w, tau, psi):
    return 0.5 * np.sum((u - x) ** 2) + tau * weighted_l1(psi, u, w)


def test_soft_threshold_examples():
    assert soft_threshold(np.array(2.0), 0.5) == 1.5
    assert soft_threshold(np.array(-0.3), 0.5) == 0.0
    c = np.array([-1.0, 0.2, 3.0])
    assert np.array_equal(soft_threshold(c, 0.0), c)
    with pytest.raises(ValueError):
        soft_threshold(c, -0.1)


def test_project_positive(rng):
    assert project_positive(np.array([-1.0, 2.0])).tolist() == [0.0, 2.0]
    x = rng.standard_normal(50)
    p = project_positive(x)
    assert np.array_equal(project_positive(p), p)
    for _ in range(20):
        u = np.abs(rng.standard_normal(50))
        assert np.linalg.norm(x - p) <= np.linalg.norm(x - u)


def test_prox_zero_weights_is_projection(rng):
    x = rng.standard_normal((16, 16))
    res = prox_weighted_l1_positive(x, 0.0, 1.0, PSI16)
    assert np.array_equal(res.point, np.maximum(x, 0)) and res.gap == 0 and res.iterations == 1 and res.converged


def test_prox_dirac_scalar_closed_form():
    x = np.zeros((8, 8))
    x[0, 0], x[0, 1] = 3.0, -3.0
    res = prox_weighted_l1_positive(x, 1.0, 1.0, IDENT, tol=1e-12, max_iter=1000)
    assert res.point[0, 0] == pytest.approx(2.0, abs=1e-10)
    assert res.point[0, 1] == 0.0


def test_prox_matches_independent_oracle(rng):
    for _ in range(2):
        x = rng.standard_normal((16, 16))
        w = rng.uniform(0.05, 0.5, PSI16.coef_shape)
        res = prox_weighted_l1_positive(x, w, 1.0, PSI16, tol=1e-10, max_iter=100_000)
        ref = accelerated_dual_prox(x, w, 1.0, PSI16, 100_000, tol=1e-13)
        assert np.linalg.norm(res.point - ref) <= 1e-6 * np.linalg.norm(ref)


def test_prox_matches_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    x = rng.standard_normal((8, 8))
    w = rng.uniform(0.05, 0.5, PSI8.coef_shape)
    # explicit analysis matrix of Psi^* (columns = analysis of unit images)
    A = np.stack([PSI8.analysis(e.reshape(8, 8)).ravel() for e in np.eye(64)], axis=1)
    u = cp.Variable(64)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(u - x.ravel()) + cp.norm1(cp.multiply(w.ravel(), A @ u))), [u >= 0])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    res = prox_weighted_l1_positive(x, w, 1.0, PSI8, tol=1e-13, max_iter=100_000)
    assert np.linalg.norm(res.point.ravel() - u.value) <= 1e-6 * np.linalg.norm(u.value)


def test_prox_feasible_every_subiterate(rng):
    x = rng.standard_normal((16, 16))
    seen = []
    res = prox_weighted_l1_positive(x, 0.3, 0.7, PSI16, tol=1e-9, max_iter=30, callback=lambda q: seen.append(q.min()))
    assert len(seen) == res.iterations and min(seen) >= 0


def test_gap_bounds_suboptimality(rng):
    x = rng.standard_normal((16, 16))
    w = rng.uniform(0.1, 0.4, PSI16.coef_shape)
    ref = accelerated_dual_prox(x, w, 1.0, PSI16, 100_000, tol=1e-13)
    p_star = primal(ref, x, w, 1.0, PSI16)
    for it in (1, 3, 10, 30):
        res = prox_weighted_l1_positive(x, w, 1.0, PSI16, tol=1e-14, max_iter=it)
        assert res.gap >= 0
        assert primal(res.point, x, w, 1.0, PSI16) - p_star <= res.gap + 1e-9


def test_max_iter_flags_unconverged(rng):
    res = prox_weighted_l1_positive(rng.standard_normal((16, 16)), 0.5, 1.0, PSI16, tol=1e-14, max_iter=2)
    assert not res.converged and res.iterations == 2 and res.gap > 1e-14


def test_warm_start_reduces_iterations(rng):
    x = rng.standard_normal((16, 16))
    cold = prox_weighted_l1_positive(x, 0.2, 1.0, PSI16, tol=1e-4, max_iter=50_000)
    warm = prox_weighted_l1_positive(x + 1e-3, 0.2, 1.0, PSI16, tol=1e-4, max_iter=50_000, dual0=cold.dual)
    assert cold.converged and warm.converged
    assert warm.iterations < cold.iterations


def test_prox_argument_errors():
    with pytest.raises(ValueError):
        prox_weighted_l1_positive(np.zeros((8, 8)), 1.0, 0.0, IDENT)
    with pytest.raises(ValueError):
        prox_weighted_l1_positive(np.zeros((8, 8)), 1.0, 1.0, IDENT, tol=0)


def test_firm_nonexpansive_sampled(rng):
    tol = 1e-6
    for _ in range(4):
        a, b = rng.standard_normal((2, 16, 16))
        ra = prox_weighted_l1_positive(a, 0.3, 1.0, PSI16, tol=tol, max_iter=100_000)
        rb = prox_weighted_l1_positive(b, 0.3, 1.0, PSI16, tol=tol, max_iter=100_000)
        assert ra.converged and rb.converged
        pa, pb = ra.point, rb.point
        # slack: each point is within sqrt(2 gap) of the exact prox (strong convexity)
        assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 2 * np.sqrt(2 * tol)


def test_smooth_grad_examples():
    x = np.zeros((8, 8))
    x[0, 0], x[0, 1] = 0.3, 3.0
    g = smooth_grad_reg(x, 2.0, 0.5, IDENT)
    assert g[0, 0] == pytest.approx(0.6) and g[0, 1] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        smooth_grad_reg(x, 2.0, 0.0, IDENT)


def test_smooth_grad_finite_differences(rng):
    for _ in range(5):
        x = rng.standard_normal((8, 8))
        w = rng.uniform(0.1, 1.0, PSI8.coef_shape)
        gamma = 0.1
        g = smooth_grad_reg(x, w, gamma, PSI8)
        d = rng.standard_normal((8, 8))
        h = 1e-6
        fd = (huber_envelope(PSI8, x + h * d, w, gamma) - huber_envelope(PSI8, x - h * d, w, gamma)) / (2 * h)
        assert abs(fd - np.vdot(g, d)) <= 1e-6 * max(abs(fd), 1.0)


def test_smooth_grad_lipschitz(rng):
    gamma = 0.05
    for _ in range(10):
        a, b = rng.standard_normal((2, 16, 16))
        w = rng.uniform(0.1, 1, PSI16.coef_shape)
        ratio = np.linalg.norm(smooth_grad_reg(a, w, gamma, PSI16) - smooth_grad_reg(b, w, gamma, PSI16))
        assert ratio <= np.linalg.norm(a - b) / gamma * (1 + 1e-6)


def test_smooth_grad_saturates_for_small_gamma(rng):
    x = rng.standard_normal((8, 8))
    w = 0.2
    c = IDENT.analysis(x)
    g = smooth_grad_reg(x, w, 1e-8, IDENT)
    assert np.allclose(g, IDENT.synthesis(w * np.sign(c)))


def test_huber_envelope_values():
    x = np.zeros((8, 8))
    x[0, 0], x[0, 1] = 0.3, 3.0
    # inside: c^2 / (2 gamma) = 0.09; outside: w|c| - gamma w^2 / 2 = 6 - 1
    assert huber_envelope(IDENT, x, 2.0, 0.5) == pytest.approx(0.09 + 5.0)


@given(st.floats(1e-3, 10), st.floats(1e-3, 1), st.floats(0, 100))
def test_update_weights_bounds(lam, rho, c):
    x = np.zeros((8, 8))
    x[0, 0] = c
    w = update_weights(x, lam, rho, IDENT)
    assert np.all(w > 0) and np.all(w <= lam / rho * (1 + 1e-15))


def test_update_weights_examples():
    x = np.zeros((8, 8))
    x[0, 0] = 0.9
    w = update_weights(x, 1.0, 0.1, IDENT)
    assert w[0, 0, 0] == pytest.approx(1.0) and w[0, 1, 1] == pytest.approx(10.0)
    mags = np.linspace(0, 5, 8)
    x2 = np.zeros((8, 8))
    x2[0] = mags
    assert np.all(np.diff(update_weights(x2, 1.0, 0.1, IDENT)[0, 0]) < 0)
    with pytest.raises(ValueError):
        update_weights(x, 0.0, 0.1, IDENT)
    with pytest.raises(ValueError):
        update_weights(x, 1.0, 0.0, IDENT)
