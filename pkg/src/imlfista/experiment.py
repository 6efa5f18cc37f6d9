"""Experiment harness: simulate once, run every algorithm under the same budget.

Configurations are JSON documents validated against
``data/config.schema.json``; missing keys take the values of
:data:`DEFAULTS`. Output directory layout::

    truth.img  dirty.img  visibilities.vis  selector_<l>.sel
    trace_<algo>.csv
    snapshot_<algo>_cost<c>.pgm / .img     (first iterate past checkpoint c)
    final_<algo>.pgm / .img
    summary.json
    *.png                                   (when ``figures`` is true)
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import fileio
from .coverage import (
    NoiseSpec, ObservationSpec, PhantomSpec, calibrate_noise_sigma, generate_phantom, generate_tracks,
    input_snr_db, load_antennas, noise_realization, synthetic_array,
)
from .measurement import MeasurementOperator, dirty_image
from .sara import SaraDictionary
from .solvers import ALGORITHMS, Problem, SolverConfig, build_hierarchy, default_rho, reweighted_solve, solve

log = logging.getLogger(__name__)

DEFAULTS = {
    "seed": 0,
    "output": "out",
    "image": {"size": 64, "n_blobs": 10, "n_points": 20, "file": None},
    "array": {"n_antennas": 16, "file": None, "core_radius": 500.0, "max_radius": 4000.0},
    "observation": {
        "samples_per_pair": 500,
        "declination_deg": -40.0,
        "hour_angle_deg": [-60.0, 60.0],
        "wavelength": 0.21,
        "latitude_deg": -30.7215,
    },
    "noise": {"input_snr_db": 19.0, "sigma": None},
    "operator": {"padding": 2, "kernel": "bilinear"},
    "dictionary": {"levels": 4},
    "hierarchy": {"depth": 3, "fraction": 0.5, "p": 5, "alpha": 1.0, "schedule": "first-r", "r": 3, "every": 10},
    "solver": {
        "lambda": None,
        "lambda_relative": 1e-3,
        "rho": None,
        "rho_scale": 1.0,
        "gamma": None,
        "inertia_a": 4.0,
        "prox_tol": 1e-6,
        "prox_max_iter": 50,
    },
    "algorithms": list(ALGORITHMS),
    "budget": {"cost": None, "seconds": None, "iterations": None},
    "reweighting": {"cycles": 0},
    "reference": {"iterations": 0, "target": 1e-3},
    "snapshots": [],
    "figures": True,
    "grid": {"low": 1e-5, "high": 1e-1, "per_decade": 10},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def schema() -> dict:
    return json.loads(resources.files("imlfista").joinpath("data/config.schema.json").read_text())


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(cfg: dict) -> dict:
    """Check ``cfg`` against the schema and fill in defaults."""
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    full = _merge(DEFAULTS, cfg)
    b = full["budget"]
    if b["cost"] is None and b["seconds"] is None and b["iterations"] is None:
        raise ConfigError("config error at budget: set at least one of cost, seconds, iterations")
    h0, h1 = full["observation"]["hour_angle_deg"]
    if not h0 < h1:
        raise ConfigError("config error at observation/hour_angle_deg: need h0 < h1")
    if full["grid"]["low"] >= full["grid"]["high"]:
        raise ConfigError("config error at grid: low must be below high")
    return full


def load_config(path, overrides: dict | None = None) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate_config(_merge(cfg, overrides or {}))


def bundled_config(name: str) -> dict:
    """One of the shipped configs (``smoke``, ``desk``) with defaults filled in."""
    text = resources.files("imlfista").joinpath(f"data/{name}.json").read_text()
    return validate_config(json.loads(text))


# -- simulation -------------------------------------------------------------

@dataclass
class Simulation:
    truth: np.ndarray
    coverage: object
    operator: MeasurementOperator
    data: np.ndarray
    sigma: float
    dictionary: SaraDictionary
    input_snr_db: float

    def problem(self) -> Problem:
        return Problem(self.operator, self.data, self.dictionary, self.coverage, self.truth, self.sigma)


def simulate(cfg: dict) -> Simulation:
    """Phantom, coverage, operator and noisy visibilities for a validated config."""
    seed = cfg["seed"]
    img = cfg["image"]
    if img["file"]:
        truth = fileio.load_image(img["file"])
        if truth.shape[0] != truth.shape[1]:
            raise ConfigError(f"image {img['file']} must be square, got {truth.shape}")
    else:
        truth = generate_phantom(PhantomSpec.random(img["size"], img["n_blobs"], img["n_points"], seed))
    arr = cfg["array"]
    if arr["file"]:
        array = load_antennas(arr["file"])
    else:
        array = synthetic_array(arr["n_antennas"], seed + 1, arr["core_radius"], arr["max_radius"])
    obs = cfg["observation"]
    spec = ObservationSpec(
        declination=math.radians(obs["declination_deg"]),
        hour_angle=tuple(math.radians(h) for h in obs["hour_angle_deg"]),
        samples_per_pair=obs["samples_per_pair"],
        wavelength=obs["wavelength"],
        latitude=math.radians(obs["latitude_deg"]),
    )
    coverage = generate_tracks(array, spec)
    op = MeasurementOperator.from_coverage(
        coverage, truth.shape, cfg["operator"]["padding"], cfg["operator"]["kernel"],
    ).with_norm(seed=seed)
    clean = op.forward(truth)
    noise = cfg["noise"]
    if noise["sigma"] is not None:
        sigma = float(noise["sigma"])
    elif noise["input_snr_db"] is not None:
        sigma = calibrate_noise_sigma(clean, noise["input_snr_db"])
    else:
        sigma = 0.0
    data = clean + noise_realization(clean.size, NoiseSpec(sigma, seed + 2)) if sigma > 0 else clean
    achieved = input_snr_db(clean, data) if sigma > 0 else math.inf
    dictionary = SaraDictionary(truth.shape, cfg["dictionary"]["levels"])
    return Simulation(truth, coverage, op, data, sigma, dictionary, achieved)


def resolve_lambda(cfg: dict, problem: Problem) -> float:
    """Explicit ``lambda``, else ``lambda_relative * max |Psi^* Phi^* y|``."""
    s = cfg["solver"]
    if s["lambda"] is not None:
        return float(s["lambda"])
    scale = float(np.max(np.abs(problem.dictionary.analysis(dirty_image(problem.operator, problem.data)))))
    if scale == 0:
        raise ConfigError("config error at solver/lambda: data are zero, give lambda explicitly")
    return s["lambda_relative"] * scale


def solver_config(cfg: dict, problem: Problem, lam: float, **overrides) -> SolverConfig:
    s, h, b = cfg["solver"], cfg["hierarchy"], cfg["budget"]
    rho = s["rho"]
    if rho is None:
        sigma = problem.sigma if problem.sigma else 1e-3 * math.sqrt(problem.beta)
        rho = default_rho(sigma, problem.beta, s["rho_scale"])
    kw = dict(
        lam=lam, rho=rho, gamma=s["gamma"], inertia_a=s["inertia_a"],
        prox_tol=s["prox_tol"], prox_max_iter=s["prox_max_iter"],
        ml_schedule=h["schedule"], ml_r=h["r"], ml_every=h["every"],
        max_iterations=b["iterations"], max_cost=b["cost"], max_seconds=b["seconds"], seed=cfg["seed"],
    )
    kw.update(overrides)
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"config error at solver: {exc}") from None


def hierarchy_for(cfg: dict, problem: Problem):
    h = cfg["hierarchy"]
    return build_hierarchy(problem, h["depth"], h["fraction"], h["p"], h["alpha"], seed=cfg["seed"])


# -- runs -------------------------------------------------------------------

@dataclass
class MetricsRow:
    algorithm: str
    iterations: int
    cost_units: float
    wall_s: float
    objective: float
    snr_db: float
    log_snr_db: float
    ml_steps: int

    @classmethod
    def from_trace(cls, algorithm, trace):
        last = trace.last
        return cls(
            algorithm, last.k, last.cost_units, last.wall_s, last.objective, last.snr_db, last.log_snr_db,
            int(trace.column("ml_applied").sum()),
        )


class SnapshotRecorder:
    """Keeps the first iterate at or past each cost checkpoint."""

    def __init__(self, checkpoints):
        self.pending = sorted(float(c) for c in checkpoints)
        self.images = {}

    def __call__(self, k, cost, x):
        while self.pending and cost >= self.pending[0]:
            self.images[self.pending.pop(0)] = (k, cost, np.array(x, copy=True))


def run_algorithm(algorithm, problem, config: SolverConfig, hierarchy=None, cycles=0, snapshots=()):
    """One run; returns ``(x, trace, recorder)``."""
    rec = SnapshotRecorder(snapshots)
    hier = hierarchy if algorithm == "iml-fista" else None
    if cycles:
        x, trace, _ = reweighted_solve(problem, config, cycles, algorithm, hier, callback=rec)
    else:
        x, trace = solve(algorithm, problem, problem.uniform_weights(config.lam), config, hier, callback=rec)
    return x, trace, rec


def cost_to_target(trace, f_star, target=1e-3, column="cost_units"):
    """First ``column`` value with ``F(x_k) - F* <= target (F(x_0) - F*)``; ``None`` if never."""
    obj = trace.column("objective")
    thresh = f_star + target * (obj[0] - f_star)
    hit = np.flatnonzero(obj <= thresh)
    return float(trace.column(column)[hit[0]]) if hit.size else None


def reference_objective(problem, config: SolverConfig, iterations: int) -> float:
    """Objective after a long FISTA run with a tight prox (estimate of ``F*``)."""
    ref_cfg = SolverConfig(**{
        **asdict(config), "max_iterations": iterations, "max_cost": None, "max_seconds": None,
        "prox_max_iter": max(config.prox_max_iter, 200), "prox_tol_floor": 1e-12, "xtol": 1e-12,
        "trace_every": max(iterations, 1),
    })
    _, trace = solve("fista", problem, problem.uniform_weights(config.lam), ref_cfg)
    return float(trace.column("objective").min())


def _speedups(traces, f_star, target):
    out = {}
    for algo, trace in traces.items():
        out[algo] = {
            "cost_to_target": cost_to_target(trace, f_star, target),
            "wall_to_target": cost_to_target(trace, f_star, target, "wall_s"),
        }
    base = out.get("fista")
    for algo, entry in out.items():
        for key in ("cost", "wall"):
            mine = entry[f"{key}_to_target"]
            ref = base[f"{key}_to_target"] if base else None
            entry[f"{key}_speedup_vs_fista"] = ref / mine if ref and mine else None
    return out


def _write_image_pair(path_stem: Path, x):
    x = np.maximum(x, 0.0)
    fileio.save_image(path_stem.with_suffix(".img"), x)
    fileio.save_pgm(path_stem.with_suffix(".pgm"), x)


def _cost_tag(c):
    return f"{c:g}".replace(".", "p")


def write_simulation(sim: Simulation, out: Path, hierarchy=None):
    out.mkdir(parents=True, exist_ok=True)
    fileio.save_image(out / "truth.img", sim.truth)
    fileio.save_pgm(out / "truth.pgm", sim.truth)
    dirty = dirty_image(sim.operator, sim.data)
    fileio.save_image(out / "dirty.img", dirty)
    fileio.save_pgm(out / "dirty.pgm", dirty - dirty.min(), log=False)
    fileio.save_visibilities(out / "visibilities.vis", sim.data, sim.coverage)
    if hierarchy is not None:
        for i, lv in enumerate(hierarchy.levels[1:], 1):
            fileio.save_selector(out / f"selector_{i}.sel", lv.fine_indices, sim.operator.m, hierarchy.fraction)


def run_experiment(cfg: dict, out_dir=None) -> dict:
    """Simulate, run every configured algorithm, write artifacts; returns the summary dict."""
    out = Path(out_dir if out_dir is not None else cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    sim = simulate(cfg)
    problem = sim.problem()
    lam = resolve_lambda(cfg, problem)
    config = solver_config(cfg, problem, lam)
    needs_h = "iml-fista" in cfg["algorithms"]
    hierarchy = hierarchy_for(cfg, problem) if needs_h else None
    write_simulation(sim, out, hierarchy)
    cycles = cfg["reweighting"]["cycles"]
    log.info("m=%d beta=%.4g lambda=%.4g rho=%.4g sigma=%.4g", sim.operator.m, problem.beta, lam, config.rho, sim.sigma)

    traces, rows = {}, []
    for algo in cfg["algorithms"]:
        log.info("running %s", algo)
        x, trace, rec = run_algorithm(algo, problem, config, hierarchy, cycles, cfg["snapshots"])
        traces[algo] = trace
        trace.to_csv(out / f"trace_{algo}.csv")
        _write_image_pair(out / f"final_{algo}", x)
        for c, (_, _, img) in rec.images.items():
            _write_image_pair(out / f"snapshot_{algo}_cost{_cost_tag(c)}", img)
        rows.append(MetricsRow.from_trace(algo, trace))

    summary = {
        "m": sim.operator.m,
        "image_size": int(sim.truth.shape[0]),
        "beta": problem.beta,
        "lambda": lam,
        "rho": config.rho,
        "sigma": sim.sigma,
        "input_snr_db": sim.input_snr_db,
        "cycles": cycles,
        "levels": [lv.m for lv in hierarchy.levels] if hierarchy else [sim.operator.m],
        "metrics": [asdict(r) for r in rows],
    }
    ref = cfg["reference"]
    if cycles == 0 and ref["iterations"] > 0:
        f_ref = reference_objective(problem, config, ref["iterations"])
        f_star = min([f_ref] + [float(t.column("objective").min()) for t in traces.values()])
        summary["f_star"] = f_star
        summary["target"] = ref["target"]
        summary["speedups"] = _speedups(traces, f_star, ref["target"])
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, allow_nan=True)
        fh.write("\n")
    if cfg["figures"]:
        from . import plotting

        plotting.plot_traces(traces, out, f_star=summary.get("f_star"))
        plotting.plot_coverage(sim.coverage, hierarchy, out / "coverage.png")
        plotting.plot_snapshots(out, cfg["algorithms"], out / "snapshots.png")
    return summary


# -- lambda grid --------------------------------------------------------------

def lambda_grid(low, high, per_decade=10):
    """Geometric grid from ``low`` to ``high`` (inclusive) with ``per_decade`` points per decade."""
    if not 0 < low < high:
        raise ValueError("need 0 < low < high")
    n = int(round(per_decade * math.log10(high / low)))
    return np.logspace(math.log10(low), math.log10(high), n + 1)


def grid_lambda(cfg: dict, algorithm="fista", out_dir=None) -> list[dict]:
    """Final SNR per relative lambda on the grid; writes ``grid_<algo>.csv``."""
    out = Path(out_dir if out_dir is not None else cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    sim = simulate(cfg)
    problem = sim.problem()
    hierarchy = hierarchy_for(cfg, problem) if algorithm == "iml-fista" else None
    g = cfg["grid"]
    rows = []
    for rel in lambda_grid(g["low"], g["high"], g["per_decade"]):
        lam = resolve_lambda(_merge(cfg, {"solver": {"lambda": None, "lambda_relative": float(rel)}}), problem)
        config = solver_config(cfg, problem, lam)
        _, trace, _ = run_algorithm(algorithm, problem, config, hierarchy, cfg["reweighting"]["cycles"])
        last = trace.last
        rows.append({"lambda_relative": float(rel), "lambda": lam, "snr_db": last.snr_db,
                     "log_snr_db": last.log_snr_db, "objective": last.objective, "cost_units": last.cost_units})
        log.info("lambda_rel=%.3g snr=%.2f dB", rel, last.snr_db)
    with open(out / f"grid_{algorithm}.csv", "w") as fh:
        cols = list(rows[0])
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(repr(r[c]) for c in cols) + "\n")
    return rows
