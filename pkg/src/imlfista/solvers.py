"""Forward-backward, FISTA and IML-FISTA for the weighted problem

    minimize_x  0.5 ||Phi x - y||^2 + ||W Psi^* x||_1 + i_+(x)

and the reweighting loop around them.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .cost import CostMeter
from .measurement import data_fidelity
from .metrics import log_snr, snr
from .multilevel import Hierarchy, fine_level, fine_smoothed_gradient, ml_step
from .prox import prox_weighted_l1_positive, update_weights, weighted_l1

ALGORITHMS = ("fb", "fista", "iml-fista")
TRACE_COLUMNS = (
    "k", "cycle", "wall_s", "cost_units", "objective", "snr_db", "log_snr_db", "ml_applied", "prox_iters", "prox_gap",
)


class NumericalAbort(RuntimeError):
    """The objective became non-finite."""


def inertia_alpha(k: int, a: float = 4.0) -> float:
    """Inertia ``(t_k - 1) / t_{k+1}`` with ``t_k = (k + a - 1) / a``."""
    if a <= 2:
        raise ValueError(f"inertia parameter a must exceed 2, got {a}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    t_k = (k + a - 1) / a
    t_next = (k + a) / a
    return (t_k - 1) / t_next


@dataclass
class Problem:
    """Data, operators and (optionally) the ground truth used for SNR tracking.

    ``operator.norm_sq`` must be set; ``sigma`` is the visibility noise level
    when known.
    """

    operator: object
    data: np.ndarray
    dictionary: object
    coverage: object = None
    truth: np.ndarray | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.operator.norm_sq is None:
            self.operator = self.operator.with_norm()
        self.data = np.asarray(self.data)

    @property
    def beta(self) -> float:
        return self.operator.norm_sq

    @property
    def shape(self):
        return self.operator.image_shape

    def objective(self, x, weights) -> float:
        return data_fidelity(self.operator, x, self.data) + weighted_l1(self.dictionary, x, weights)

    def uniform_weights(self, value):
        return np.full(self.dictionary.coef_shape, float(value))


@dataclass
class SolverConfig:
    """Solver parameters.

    ``tau`` defaults to ``1 / beta`` and ``gamma`` to ``tau``. Any of the three
    budgets may be set; the run stops when the first is exhausted.
    ``ml_schedule`` is ``"first-r"`` (ML step at the first ``ml_r`` iterations
    after each inertia reset), ``"every-K"`` (every ``ml_every`` iterations) or
    ``"none"``.
    """

    lam: float = 1.0
    rho: float = 1e-3
    tau: float | None = None
    gamma: float | None = None
    inertia_a: float = 4.0
    prox_tol: float = 1e-6
    prox_max_iter: int = 50
    prox_tol_floor: float = 0.0
    ml_schedule: str = "first-r"
    ml_r: int = 3
    ml_every: int = 10
    max_iterations: int | None = None
    max_cost: float | None = None
    max_seconds: float | None = None
    xtol: float = 0.0
    trace_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0 or self.rho <= 0:
            raise ValueError("lam and rho must be positive")
        if self.inertia_a <= 2:
            raise ValueError("inertia_a must exceed 2")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.ml_schedule not in ("first-r", "every-K", "none"):
            raise ValueError(f"unknown ML schedule {self.ml_schedule!r}")
        if self.max_iterations is None and self.max_cost is None and self.max_seconds is None:
            raise ValueError("set at least one of max_iterations, max_cost, max_seconds")

    def step(self, beta: float) -> float:
        tau = 1.0 / beta if self.tau is None else self.tau
        if not 0 < tau <= 1.0 / beta:
            raise ValueError(f"step tau={tau} must lie in (0, 1/beta] with beta={beta}")
        return tau

    def smoothing(self, beta: float) -> float:
        return self.step(beta) if self.gamma is None else self.gamma

    def ml_due(self, k: int) -> bool:
        if self.ml_schedule == "first-r":
            return k <= self.ml_r
        if self.ml_schedule == "every-K":
            return (k - 1) % self.ml_every == 0
        return False


@dataclass
class TraceRow:
    k: int
    cycle: int
    wall_s: float
    cost_units: float
    objective: float
    snr_db: float
    log_snr_db: float
    ml_applied: int
    prox_iters: int
    prox_gap: float
    inner_k: int = 0
    alpha: float = 0.0


@dataclass
class IterationTrace:
    rows: list = field(default_factory=list)
    coarse_log: list = field(default_factory=list)
    cycle_starts: list = field(default_factory=list)

    def append(self, row: TraceRow):
        if self.rows:
            if row.k <= self.rows[-1].k:
                raise RuntimeError("trace iteration counter must increase")
            if row.cost_units < self.rows[-1].cost_units:
                raise RuntimeError("trace cost units must not decrease")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def last(self) -> TraceRow:
        return self.rows[-1]

    def to_csv(self, path, wall=True):
        """Write the trace; ``wall=False`` drops the wall-clock column."""
        cols = [c for c in TRACE_COLUMNS if wall or c != "wall_s"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows:
                w.writerow([_fmt(getattr(row, c)) for c in cols])


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_trace_csv(path):
    """Rows of a trace CSV as dicts of floats/ints."""
    ints = {"k", "cycle", "ml_applied", "prox_iters"}
    with open(path, newline="") as fh:
        return [{k: (int(v) if k in ints else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)]


@dataclass
class ReweightState:
    cycle: int
    weights: np.ndarray
    warm_start: np.ndarray


class _Run:
    """Shared state of one (possibly multi-cycle) optimization run."""

    def __init__(self, problem: Problem, config: SolverConfig, hierarchy: Hierarchy | None, callback=None):
        self.problem = problem
        self.callback = callback
        self.config = config
        self.meter = CostMeter(problem.operator.m)
        self.op = self.meter.wrap(problem.operator)
        self.hierarchy = hierarchy.metered(self.meter) if hierarchy is not None else None
        self.trace = IterationTrace()
        self.start = time.perf_counter()
        self.k = 0

    def elapsed(self):
        return time.perf_counter() - self.start

    def record(self, x, weights, cycle, inner_k=0, alpha=0.0, ml=False, prox=None, force=True):
        cfg = self.config
        if not force and inner_k % cfg.trace_every:
            return
        obj = self.problem.objective(x, weights)
        if not math.isfinite(obj):
            raise NumericalAbort(f"objective is {obj} at iteration {self.k}")
        truth = self.problem.truth
        s = snr(x, truth) if truth is not None else math.nan
        ls = log_snr(x, truth) if truth is not None else math.nan
        self.trace.append(TraceRow(
            self.k, cycle, self.elapsed(), self.meter.units, obj, s, ls, int(ml),
            prox.iterations if prox else 0, prox.gap if prox else 0.0, inner_k, alpha,
        ))

    def exhausted(self, iters_done, cost_limit, deadline):
        cfg = self.config
        if cfg.max_iterations is not None and iters_done >= cfg.max_iterations:
            return True
        if cost_limit is not None and self.meter.units >= cost_limit:
            return True
        return deadline is not None and time.perf_counter() >= deadline

    def cycle(self, x0, weights, cycle, inertial, use_ml):
        """Run inner iterations until the per-cycle budget is spent."""
        cfg, prob = self.config, self.problem
        tau = cfg.step(prob.beta)
        gamma = cfg.smoothing(prob.beta)
        cost_limit = None if cfg.max_cost is None else self.meter.units + cfg.max_cost
        deadline = None if cfg.max_seconds is None else time.perf_counter() + cfg.max_seconds
        x = np.maximum(np.asarray(x0, dtype=float), 0.0)
        z = x
        dual = None
        self.trace.cycle_starts.append(self.k)
        if self.k == 0:
            self.record(x, weights, cycle)
            if self.callback is not None:
                self.callback(0, self.meter.units, x)
        inner = 0
        prox = None
        while not self.exhausted(inner, cost_limit, deadline):
            inner += 1
            self.k += 1
            ml = use_ml and self.hierarchy is not None and self.hierarchy.depth > 1 and cfg.ml_due(inner)
            zbar = z
            if ml:
                zbar = ml_step(self.hierarchy, z, weights, gamma, prob.dictionary, log=self.trace.coarse_log)
            grad = self.op.adjoint(self.op.forward(zbar) - prob.data)
            tol = max(cfg.prox_tol / (inner + 1) ** 2, cfg.prox_tol_floor)
            prox = prox_weighted_l1_positive(
                zbar - tau * grad, weights, tau, prob.dictionary, tol, cfg.prox_max_iter, dual0=dual,
            )
            dual = prox.dual
            x_new = prox.point
            alpha = inertia_alpha(inner, cfg.inertia_a) if inertial else 0.0
            z = x_new + alpha * (x_new - x)
            step = float(np.linalg.norm(x_new - x))
            x = x_new
            if self.callback is not None:
                self.callback(self.k, self.meter.units, x)
            last = self.exhausted(inner, cost_limit, deadline)
            stalled = cfg.xtol > 0 and step <= cfg.xtol * max(float(np.linalg.norm(x)), 1e-300)
            self.record(x, weights, cycle, inner, alpha, ml, prox, force=last or stalled)
            if stalled:
                break
        if self.trace.last.k != self.k:
            self.record(x, weights, cycle, inner, 0.0, False, prox)
        return x


def _solve(problem, weights, config, inertial, hierarchy=None, x0=None, callback=None):
    run = _Run(problem, config, hierarchy, callback)
    x0 = np.zeros(problem.shape) if x0 is None else x0
    x = run.cycle(x0, weights, 0, inertial, hierarchy is not None)
    run.trace.meter = run.meter
    return x, run.trace


def solve_fb(problem: Problem, weights, config: SolverConfig, x0=None, callback=None):
    """Forward-backward iterations ``x <- prox_{tau R}(x - tau grad L(x))``."""
    return _solve(problem, weights, config, inertial=False, x0=x0, callback=callback)


def solve_fista(problem: Problem, weights, config: SolverConfig, x0=None, callback=None):
    """FISTA with the inertia of :func:`inertia_alpha`."""
    return _solve(problem, weights, config, inertial=True, x0=x0, callback=callback)


def solve_iml_fista(problem: Problem, weights, hierarchy: Hierarchy, config: SolverConfig, x0=None, callback=None):
    """FISTA with coarse corrections ``z_bar = ML(z)`` at scheduled iterations."""
    return _solve(problem, weights, config, inertial=True, hierarchy=hierarchy, x0=x0, callback=callback)


def solve(algorithm, problem, weights, config, hierarchy=None, x0=None, callback=None):
    """Dispatch on ``algorithm``; ``callback(k, cost_units, x)`` sees every iterate."""
    if algorithm == "fb":
        return solve_fb(problem, weights, config, x0, callback)
    if algorithm == "fista":
        return solve_fista(problem, weights, config, x0, callback)
    if algorithm == "iml-fista":
        if hierarchy is None:
            raise ValueError("iml-fista needs a hierarchy")
        return solve_iml_fista(problem, weights, hierarchy, config, x0, callback)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def reweighted_solve(problem: Problem, config: SolverConfig, cycles: int, algorithm="iml-fista", hierarchy=None, x0=None, callback=None):
    """Reweighting loop: ``cycles + 1`` inner solves, weights updated in between.

    Cycle 0 uses uniform weights ``lam``. Each cycle restarts the inertia and
    warm-starts from the previous cycle's image; the per-cycle budget comes from
    ``config`` (cost units, iterations or seconds). Returns the final image,
    the concatenated trace (``trace.cycle_starts`` marks boundaries) and the
    final :class:`ReweightState`.
    """
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm == "iml-fista" and hierarchy is None:
        raise ValueError("iml-fista needs a hierarchy")
    run = _Run(problem, config, hierarchy if algorithm == "iml-fista" else None, callback)
    weights = problem.uniform_weights(config.lam)
    x = np.zeros(problem.shape) if x0 is None else np.asarray(x0, dtype=float)
    state = ReweightState(0, weights, x)
    for i in range(cycles + 1):
        x = run.cycle(x, weights, i, algorithm != "fb", algorithm == "iml-fista")
        state = ReweightState(i, weights, x)
        if i < cycles:
            weights = update_weights(x, config.lam, config.rho, problem.dictionary)
    run.trace.meter = run.meter
    return x, run.trace, state


def default_rho(sigma, beta, scale=1.0):
    """Image-domain noise level ``scale * sigma / sqrt(beta)``."""
    return scale * sigma / math.sqrt(beta)


def build_hierarchy(problem: Problem, depth=3, fraction=0.5, p=5, alpha=1.0, **kwargs) -> Hierarchy:
    level0 = fine_level(problem.operator, problem.data, problem.coverage)
    return Hierarchy.build(level0, depth, fraction, p, alpha, **kwargs)


def config_fields():
    return [f.name for f in fields(SolverConfig)]
