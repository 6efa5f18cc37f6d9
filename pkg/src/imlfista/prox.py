"""Nonsmooth part of the objective: ``R(x, W) = ||W Psi^* x||_1 + i_+(x)``.

``dictionary`` arguments are any object with ``analysis``/``synthesis``
methods forming a Parseval frame, typically :class:`~imlfista.sara.SaraDictionary`.
Weights live on the coefficient array and broadcast against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProxResult:
    point: np.ndarray
    dual: np.ndarray
    gap: float
    iterations: int
    converged: bool


def soft_threshold(c, t):
    """``sign(c) * max(|c| - t, 0)`` elementwise."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("soft-threshold levels must be nonnegative")
    return np.sign(c) * np.maximum(np.abs(c) - t, 0.0)


def project_positive(x):
    return np.maximum(x, 0.0)


def weighted_l1(dictionary, x, weights) -> float:
    return float(np.sum(np.abs(weights * dictionary.analysis(x))))


def prox_weighted_l1_positive(x, weights, tau, dictionary, tol=1e-6, max_iter=50, dual0=None, callback=None):
    """Approximate ``argmin_{u >= 0} ||u - x||^2 / (2 tau) + ||W Psi^* u||_1``.

    Dual forward-backward with unit step: ``q = max(x - Psi v, 0)``, then
    ``v <- clip(v + Psi^* q, -tau w, tau w)``. Every primal candidate ``q`` is
    feasible. Stops once the duality gap of the scaled problem
    ``0.5 ||u - x||^2 + tau ||W Psi^* u||_1`` at ``(q, v)`` is at most ``tol``,
    or after ``max_iter`` iterations (``converged`` is then ``False``).

    ``callback(q)`` is called with each primal candidate.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    x = np.asarray(x, dtype=float)
    bound = tau * np.broadcast_to(np.asarray(weights, dtype=float), dictionary.coef_shape)
    if dual0 is None:
        v = np.zeros(dictionary.coef_shape)
    else:
        v = np.clip(dual0, -bound, bound)
    for it in range(1, max_iter + 1):
        q = np.maximum(x - dictionary.synthesis(v), 0.0)
        if callback is not None:
            callback(q)
        c = dictionary.analysis(q)
        # P(q) - D(v) = tau ||w c||_1 - <v, c>, nonnegative because |v| <= tau w
        gap = float(np.sum(bound * np.abs(c)) - np.vdot(v, c))
        gap = max(gap, 0.0)
        if gap <= tol:
            return ProxResult(q, v, gap, it, True)
        if it < max_iter:
            v = np.clip(v + c, -bound, bound)
    return ProxResult(q, v, gap, max_iter, False)


def huber_envelope(dictionary, x, weights, gamma) -> float:
    """Moreau envelope (parameter ``gamma``) of ``||W .||_1`` evaluated at ``Psi^* x``."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    c = np.abs(dictionary.analysis(x))
    w = np.broadcast_to(np.asarray(weights, dtype=float), c.shape)
    inside = c <= gamma * w
    return float(np.sum(np.where(inside, c * c / (2 * gamma), w * c - 0.5 * gamma * w * w)))


def smooth_grad_reg(x, weights, gamma, dictionary):
    """Gradient of :func:`huber_envelope`: ``Psi h`` with ``h`` the clipped ``Psi^* x / gamma``.

    The positivity constraint is not smoothed.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    c = dictionary.analysis(x)
    w = np.asarray(weights, dtype=float)
    return dictionary.synthesis(np.clip(c / gamma, -w, w))


def update_weights(x, lam, rho, dictionary):
    """Reweighting rule ``w_j = lam / (rho + |(Psi^* x)_j|)``."""
    if lam <= 0 or rho <= 0:
        raise ValueError(f"lambda and rho must be positive, got {lam}, {rho}")
    return lam / (rho + np.abs(dictionary.analysis(x)))
