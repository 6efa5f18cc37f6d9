"""Invariant suites behind ``imlfista check``: each yields measured residuals against tolerances."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .coverage import ObservationSpec, generate_tracks, synthetic_array
from .measurement import MeasurementOperator, adjoint_crop, data_fidelity, grad_data_fidelity, zero_pad
from .multilevel import (
    Hierarchy, coarse_gradient, coarse_objective, coherence_vector, fine_level, fine_smoothed_gradient,
)
from .prox import huber_envelope, prox_weighted_l1_positive, smooth_grad_reg
from .sara import SaraDictionary


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)

    def as_dict(self):
        return {**asdict(self), "passed": self.passed}


def small_operator(size=8, n_antennas=6, samples=20, seed=0, factor=2):
    """Operator on a ``size x size`` image from a random synthetic array (norm estimated)."""
    cov = generate_tracks(synthetic_array(n_antennas, seed), ObservationSpec(samples_per_pair=samples))
    return MeasurementOperator.from_coverage(cov, (size, size), factor).with_norm(seed=seed), cov


def _dot_residual(fx, y, x, fty):
    lhs, rhs = np.vdot(fx, y), np.vdot(x, fty)
    return abs(lhs - rhs) / max(np.linalg.norm(fx) * np.linalg.norm(y), 1e-300)


def _real_dot_residual(fx, y, x, fty):
    """Dot test in the real inner product ``Re <., .>`` (Phi maps reals to complex)."""
    lhs, rhs = np.vdot(fx, y).real, float(np.vdot(x, fty))
    return abs(lhs - rhs) / max(np.linalg.norm(fx) * np.linalg.norm(y), 1e-300)


def suite_adjoint(rng, trials=5):
    out = []
    op, cov = small_operator(32, 8, 40, seed=int(rng.integers(1 << 31)))
    sub = op.restrict(np.sort(rng.choice(op.m, op.m // 2, replace=False)))
    psi = SaraDictionary((64, 64))
    for t in range(trials):
        x = rng.standard_normal((32, 32))
        g = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
        out.append(CheckResult("adjoint", f"Z[{t}]", _real_dot_residual(zero_pad(x, 2), g, x, adjoint_crop(g, 2)), 1e-10))
        y = rng.standard_normal(op.m) + 1j * rng.standard_normal(op.m)
        out.append(CheckResult("adjoint", f"Phi[{t}]", _real_dot_residual(op.forward(x), y, x, op.adjoint(y)), 1e-10))
        ys = rng.standard_normal(sub.m) + 1j * rng.standard_normal(sub.m)
        out.append(CheckResult("adjoint", f"SPhi[{t}]", _real_dot_residual(sub.forward(x), ys, x, sub.adjoint(ys)), 1e-10))
        xi = rng.standard_normal((64, 64))
        c = rng.standard_normal(psi.coef_shape)
        out.append(CheckResult("adjoint", f"Psi[{t}]", _dot_residual(psi.analysis(xi), c, xi, psi.synthesis(c)), 1e-10))
    return out


def suite_parseval(rng, trials=20):
    psi = SaraDictionary((64, 64))
    iso = rec = 0.0
    for _ in range(trials):
        x = rng.standard_normal((64, 64))
        c = psi.analysis(x)
        nx = np.linalg.norm(x)
        iso = max(iso, abs(np.linalg.norm(c) - nx) / nx)
        rec = max(rec, np.linalg.norm(psi.synthesis(c) - x) / nx)
    return [CheckResult("parseval", "isometry", iso, 1e-12), CheckResult("parseval", "reconstruction", rec, 1e-12)]


def _fd_residual(f, grad, x, rng, h=1e-5, directions=3):
    """Worst relative mismatch of ``<grad, d>`` against central differences."""
    worst = 0.0
    for _ in range(directions):
        d = rng.standard_normal(x.shape)
        d /= np.linalg.norm(d)
        fd = (f(x + h * d) - f(x - h * d)) / (2 * h)
        an = float(np.vdot(grad, d))
        worst = max(worst, abs(fd - an) / max(abs(an), abs(fd), 1e-12))
    return worst


def _small_problem(rng):
    op, cov = small_operator(8, 6, 20, seed=int(rng.integers(1 << 31)))
    psi = SaraDictionary((8, 8), levels=3)
    x = np.abs(rng.standard_normal((8, 8)))
    y = op.forward(x) + 0.1 * (rng.standard_normal(op.m) + 1j * rng.standard_normal(op.m))
    w = rng.uniform(0.1, 1.0, psi.coef_shape)
    return op, cov, psi, y, w


def suite_gradient(rng, trials=3):
    out = []
    for t in range(trials):
        op, cov, psi, y, w = _small_problem(rng)
        x = rng.standard_normal((8, 8))
        gamma = 0.05
        out.append(CheckResult("gradient", f"grad_L[{t}]", _fd_residual(
            lambda u: data_fidelity(op, u, y), grad_data_fidelity(op, x, y), x, rng), 1e-6))
        out.append(CheckResult("gradient", f"grad_R_gamma[{t}]", _fd_residual(
            lambda u: huber_envelope(psi, u, w, gamma), smooth_grad_reg(x, w, gamma, psi), x, rng, h=1e-7), 1e-6))
        h = Hierarchy.build(fine_level(op, y, cov), depth=2)
        lv = h.levels[1]
        v = rng.standard_normal((8, 8))
        out.append(CheckResult("gradient", f"grad_F_H[{t}]", _fd_residual(
            lambda u: coarse_objective(lv, v, u), coarse_gradient(lv, v, x), x, rng), 1e-6))
    return out


def suite_coherence(rng, trials=5):
    out = []
    for t in range(trials):
        op, cov, psi, y, w = _small_problem(rng)
        h = Hierarchy.build(fine_level(op, y, cov), depth=3)
        z = np.abs(rng.standard_normal((8, 8)))
        gamma = 1.0 / op.norm_sq
        parent = fine_smoothed_gradient(h.levels[0], z, w, gamma, psi)
        grad_l = grad_data_fidelity(op, z, y)
        for i, lv in enumerate(h.levels[1:], 1):
            coh = coherence_vector(lv, z, parent)
            res = np.linalg.norm(coarse_gradient(lv, coh.v, z) - parent) / (1 + np.linalg.norm(grad_l))
            out.append(CheckResult("coherence", f"level{i}[{t}]", float(res), 1e-10))
    return out


def accelerated_dual_prox(x, weights, tau, dictionary, iterations, tol=0.0):
    """Reference prox by FISTA on the dual with adaptive (gradient) restart.

    Independent of the plain dual forward-backward route of
    :func:`~imlfista.prox.prox_weighted_l1_positive`. Stops after
    ``iterations`` steps or once the duality gap at the current dual point is
    at most ``tol``.
    """
    bound = tau * np.broadcast_to(weights, dictionary.coef_shape)
    v = u = np.zeros(dictionary.coef_shape)
    t = 1.0
    for _ in range(iterations):
        q = np.maximum(x - dictionary.synthesis(u), 0.0)
        v_new = np.clip(u + dictionary.analysis(q), -bound, bound)
        if np.vdot(u - v_new, v_new - v) > 0:
            # momentum points uphill: restart from the plain step
            t, u = 1.0, v
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        u = v_new + ((t - 1) / t_new) * (v_new - v)
        v, t = v_new, t_new
        if tol > 0:
            p = np.maximum(x - dictionary.synthesis(v), 0.0)
            c = dictionary.analysis(p)
            if np.sum(bound * np.abs(c)) - np.vdot(v, c) <= tol:
                return p
    return np.maximum(x - dictionary.synthesis(v), 0.0)


def suite_prox(rng, trials=3, tol=1e-8, max_iter=100_000, oracle_iterations=100_000, oracle_tol=1e-12):
    """Dual forward-backward prox against the restarted accelerated oracle.

    Instances: ``x ~ N(0, 1)`` on 16x16, weights iid ``U(0.05, 0.5)``, ``tau = 1``.
    """
    out = []
    psi = SaraDictionary((16, 16))
    for t in range(trials):
        x = rng.standard_normal((16, 16))
        w = rng.uniform(0.05, 0.5, psi.coef_shape)
        feasible = [True]

        def watch(q):
            feasible[0] &= bool((q >= 0).all())

        res = prox_weighted_l1_positive(x, w, 1.0, psi, tol=tol, max_iter=max_iter, callback=watch)
        ref = accelerated_dual_prox(x, w, 1.0, psi, oracle_iterations, tol=oracle_tol)
        err = np.linalg.norm(res.point - ref) / max(np.linalg.norm(ref), 1e-300)
        out.append(CheckResult("prox", f"oracle[{t}]", float(err), 1e-6))
        out.append(CheckResult("prox", f"feasible[{t}]", 0.0 if feasible[0] else 1.0, 0.0))
    return out


def primal_dual_reference(problem, weights, iterations=100_000, xtol=1e-15):
    """High-accuracy minimizer of ``F`` by a primal-dual (Condat-Vu) iteration.

    Independent of the forward-backward family: the weighted l1 term is handled
    through its dual variable, so no inner prox solve is needed. With
    ``tau = 1 / beta`` and dual step ``beta / 2`` the step condition
    ``1/tau - sigma ||Psi||^2 >= beta / 2`` holds since ``||Psi|| = 1``.
    Returns ``(x, F(x))``.
    """
    op, psi, y = problem.operator, problem.dictionary, problem.data
    beta = problem.beta
    tau, sigma = 1.0 / beta, 0.5 * beta
    bound = np.broadcast_to(weights, psi.coef_shape)
    x = np.zeros(problem.shape)
    u = np.zeros(psi.coef_shape)
    for _ in range(iterations):
        g = op.adjoint(op.forward(x) - y)
        x_new = np.maximum(x - tau * (g + psi.synthesis(u)), 0.0)
        u = np.clip(u + sigma * psi.analysis(2 * x_new - x), -bound, bound)
        step = np.linalg.norm(x_new - x)
        x = x_new
        if step <= xtol * max(np.linalg.norm(x), 1e-300):
            break
    return x, problem.objective(x, weights)


SUITES = {
    "adjoint": suite_adjoint,
    "parseval": suite_parseval,
    "gradient": suite_gradient,
    "coherence": suite_coherence,
    "prox": suite_prox,
}


def run_suite(name: str, seed=0) -> list[CheckResult]:
    """Run one suite (or ``"all"``) with a seeded generator."""
    if name == "all":
        return [r for n in SUITES for r in run_suite(n, seed)]
    if name not in SUITES:
        raise KeyError(f"unknown check suite {name!r}; choose from {', '.join(SUITES)} or all")
    return SUITES[name](np.random.default_rng(seed))
