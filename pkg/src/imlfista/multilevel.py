"""Data-space multilevel hierarchy and the coarse-correction (ML) step.

Level 0 is the full data set. Level ``l+1`` keeps the visibilities of the
shortest-baseline tracks of level ``l`` until at least ``fraction`` of them are
retained, so every coarse model lives on the same image space and only the
data term shrinks::

    F_H(x) = 0.5 ||S Phi x - S y||^2 + <v_H, x>

``v_H`` is rebuilt at each anchor ``z`` so that ``grad F_H(z)`` equals the
gradient of the (smoothed) model one level up.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .measurement import UVCoverage, operator_norm_sq
from .prox import smooth_grad_reg


class CoarseDecreaseError(RuntimeError):
    """A coarse model increased during its gradient steps."""


class CoarseDecreaseWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class LevelSelector:
    """Sorted indices (into the parent level) of the visibilities kept."""

    indices: np.ndarray
    fraction: float
    parent_m: int


def build_selector(coverage: UVCoverage, fraction: float = 0.5) -> LevelSelector:
    """Keep whole tracks, shortest baseline first, until ``ceil(fraction * m)`` points.

    Ties in baseline length are broken by track id.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    m = coverage.m
    if m == 0:
        raise ValueError("cannot select from an empty coverage")
    target = math.ceil(fraction * m)
    present, counts = np.unique(coverage.track, return_counts=True)
    order = np.lexsort((present, coverage.baseline_length[present]))
    cumulative = np.cumsum(counts[order])
    n_keep = int(np.searchsorted(cumulative, target)) + 1
    keep = present[order[:n_keep]]
    indices = np.flatnonzero(np.isin(coverage.track, keep))
    return LevelSelector(indices, float(fraction), m)


@dataclass(frozen=True)
class Level:
    """One data-space level: ``S Phi``, ``S y`` and the coarse step ``tau = 1 / beta``.

    ``fine_indices`` maps the rows of this level to the level-0 visibilities.
    """

    operator: object
    data: np.ndarray
    beta: float
    tau: float
    fine_indices: np.ndarray
    coverage: UVCoverage | None = None

    @property
    def m(self) -> int:
        return self.operator.m


def fine_level(op, data, coverage=None, norm_tol=1e-6, seed=0) -> Level:
    beta = op.norm_sq if op.norm_sq is not None else operator_norm_sq(op, norm_tol, seed=seed)
    return Level(op, np.asarray(data), beta, 1.0 / beta, np.arange(op.m), coverage)


def restrict_operator(parent: Level, selector: LevelSelector, norm_tol=1e-6, seed=0) -> Level:
    """Coarse level from the parent's rows ``selector.indices``."""
    idx = np.asarray(selector.indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("selector is empty")
    if idx.min() < 0 or idx.max() >= parent.m:
        raise IndexError(f"selector index out of range for a level with {parent.m} rows")
    op = parent.operator.restrict(idx)
    beta = operator_norm_sq(op, norm_tol, seed=seed)
    op = replace(op, norm_sq=beta)
    cov = parent.coverage.subset(idx) if parent.coverage is not None else None
    return Level(op, parent.data[idx], beta, 1.0 / beta, parent.fine_indices[idx], cov)


@dataclass(frozen=True)
class Hierarchy:
    """Levels (0 = fine) plus the ML-step parameters.

    ``p`` gradient steps are taken on every coarse level; the correction is
    applied with step ``alpha``. ``safeguard`` discards a deeper-level
    correction that would increase the current coarse objective.
    """

    levels: tuple
    p: int = 5
    alpha: float = 1.0
    fraction: float = 0.5
    safeguard: bool = True

    def __post_init__(self):
        if not self.levels:
            raise ValueError("a hierarchy needs at least the fine level")
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    @classmethod
    def build(cls, level0: Level, depth=3, fraction=0.5, p=5, alpha=1.0, norm_tol=1e-6, seed=0, safeguard=True):
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        if level0.coverage is None:
            raise ValueError("building coarse levels needs the u-v coverage")
        levels = [level0]
        for _ in range(depth - 1):
            sel = build_selector(levels[-1].coverage, fraction)
            levels.append(restrict_operator(levels[-1], sel, norm_tol, seed))
        return cls(tuple(levels), p, alpha, fraction, safeguard)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def metered(self, meter) -> "Hierarchy":
        """Same hierarchy with every operator charging ``meter``."""
        levels = tuple(replace(lv, operator=meter.wrap(lv.operator)) for lv in self.levels)
        return replace(self, levels=levels)


@dataclass(frozen=True)
class CoherenceVector:
    """``v_H`` for one level at ``anchor``; ``residual`` is ``S Phi z - S y`` there."""

    v: np.ndarray
    anchor: np.ndarray
    residual: np.ndarray = field(repr=False)


def fine_smoothed_gradient(level0: Level, z, weights, gamma, dictionary):
    """``grad L(z) + grad R_gamma(z)`` at the fine level."""
    r = level0.operator.forward(z) - level0.data
    return level0.operator.adjoint(r) + smooth_grad_reg(z, weights, gamma, dictionary)


def coherence_vector(level: Level, z, parent_gradient) -> CoherenceVector:
    """``v_H = parent_gradient - grad L_H(z)`` (the coarse regularization is zero)."""
    r = level.operator.forward(z) - level.data
    v = np.asarray(parent_gradient) - level.operator.adjoint(r)
    return CoherenceVector(v, np.array(z, copy=True), r)


def coarse_objective(level: Level, v, x) -> float:
    r = level.operator.forward(x) - level.data
    return _objective_from_residual(r, v, x)


def coarse_gradient(level: Level, v, x):
    """``(S Phi)^*(S Phi x - S y) + v_H``."""
    r = level.operator.forward(x) - level.data
    return level.operator.adjoint(r) + v


def _objective_from_residual(r, v, x) -> float:
    return 0.5 * float(np.vdot(r, r).real) + float(np.vdot(v, x))


@dataclass
class CoarseRecord:
    """Log entry of the work done on one coarse level during an ML step."""

    level: int
    objective_before: float
    objective_after: float
    deeper_accepted: bool | None

    @property
    def decreased(self) -> bool:
        return self.objective_after <= self.objective_before + _slack(self.objective_before)


def _unmetered(op):
    return getattr(op, "unmetered", op)


def _slack(value):
    return 1e-12 * max(1.0, abs(value))


def ml_step(hierarchy: Hierarchy, z, weights, gamma, dictionary, level_index=0, log=None, fine_gradient=None):
    """Coarse correction of the level-``level_index`` model at anchor ``z``.

    V-cycle: the coherence vector of the next level is formed at ``z``, the
    level below that (if any) corrects first, then ``p`` gradient steps of size
    ``tau_H`` are taken and ``z + alpha * (z_plus - z)`` is returned. At the
    fine level the model gradient is ``grad L + grad R_gamma``; pass
    ``fine_gradient`` to reuse one already computed at ``z``.

    ``log`` (a list) receives one :class:`CoarseRecord` per visited level.
    """
    z = np.asarray(z, dtype=float)
    if level_index + 1 >= hierarchy.depth or hierarchy.alpha == 0:
        return z.copy()
    if level_index == 0:
        grad = fine_gradient
        if grad is None:
            grad = fine_smoothed_gradient(hierarchy.levels[0], z, weights, gamma, dictionary)
    else:
        if fine_gradient is None:
            raise ValueError("coarse-level ML steps need the parent model gradient at z")
        grad = fine_gradient
    return _correct(hierarchy, level_index + 1, z, grad, log)


def _correct(h: Hierarchy, index, z, parent_grad, log):
    level = h.levels[index]
    coh = coherence_vector(level, z, parent_grad)
    v = coh.v
    f_start = _objective_from_residual(coh.residual, v, z)
    w, r, f_w = z, coh.residual, f_start
    # first-order coherence: grad F_H(z) equals the parent gradient
    g = parent_grad
    deeper = None
    if index + 1 < h.depth:
        w1 = _correct(h, index + 1, z, parent_grad, log)
        r1 = level.operator.forward(w1) - level.data
        f1 = _objective_from_residual(r1, v, w1)
        deeper = f1 <= f_start or not h.safeguard
        if deeper:
            w, r, f_w, g = w1, r1, f1, None
    for step in range(h.p):
        if g is None:
            if step:
                r = level.operator.forward(w) - level.data
            g = level.operator.adjoint(r) + v
        w = w - level.tau * g
        g = None
    if h.p:
        # invariant check only; not charged to a cost meter
        f_w = coarse_objective(replace(level, operator=_unmetered(level.operator)), v, w)
    record = CoarseRecord(index, f_start, f_w, deeper)
    if log is not None:
        log.append(record)
    if not record.decreased:
        msg = f"coarse objective at level {index} increased from {f_start!r} to {f_w!r}"
        if __debug__:
            raise CoarseDecreaseError(msg)
        warnings.warn(msg, CoarseDecreaseWarning, stacklevel=2)
    return z + h.alpha * (w - z)
