"""Synthetic interferometer observations: arrays, u-v tracks, phantoms, noise."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .measurement import UVCoverage

# Tracks are rescaled so that the largest |u| or |v| equals this fraction of pi.
COVERAGE_EXTENT = 0.95
MEERKAT_LATITUDE = np.deg2rad(-30.7215)


@dataclass(frozen=True)
class AntennaArray:
    """Antenna positions as local ``(east, north, up)`` offsets in meters."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (n_a, 3), got {pos.shape}")
        if pos.shape[0] < 2:
            raise ValueError("an array needs at least 2 antennas")
        if np.unique(pos, axis=0).shape[0] != pos.shape[0]:
            raise ValueError("antenna positions must be distinct")
        object.__setattr__(self, "positions", pos)

    @property
    def n_antennas(self) -> int:
        return self.positions.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.n_antennas * (self.n_antennas - 1) // 2


@dataclass(frozen=True)
class ObservationSpec:
    """Earth-rotation synthesis parameters.

    ``hour_angle`` is the ``(h0, h1)`` window in radians, sampled at
    ``samples_per_pair`` evenly spaced instants. ``latitude`` converts local
    ENU offsets to equatorial baselines.
    """

    declination: float = np.deg2rad(-40.0)
    hour_angle: tuple[float, float] = (-np.pi / 3, np.pi / 3)
    samples_per_pair: int = 500
    wavelength: float = 0.21
    latitude: float = MEERKAT_LATITUDE
    extent: float = COVERAGE_EXTENT

    def __post_init__(self):
        h0, h1 = self.hour_angle
        if not h0 < h1:
            raise ValueError(f"hour-angle window must satisfy h0 < h1, got {self.hour_angle}")
        if int(self.samples_per_pair) < 1:
            raise ValueError("samples_per_pair must be >= 1")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if not 0 < self.extent < 1:
            raise ValueError("extent must lie in (0, 1)")


@dataclass(frozen=True)
class NoiseSpec:
    """Circular complex Gaussian noise with ``E|eps_i|^2 = sigma^2``."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class Blob:
    center: tuple[float, float]
    covariance: tuple[tuple[float, float], tuple[float, float]]
    amplitude: float


@dataclass(frozen=True)
class PhantomSpec:
    """Sum of anisotropic Gaussian blobs and point sources on an ``N x N`` grid.

    ``points`` holds ``(row, col, amplitude)`` triples.
    """

    size: int
    blobs: tuple[Blob, ...] = ()
    points: tuple[tuple[int, int, float], ...] = ()
    seed: int = 0

    @classmethod
    def random(cls, size=128, n_blobs=10, n_points=20, seed=0):
        """Extended emission plus compact sources, loosely galaxy-like."""
        rng = np.random.default_rng(seed)
        blobs = []
        for _ in range(n_blobs):
            center = tuple(rng.uniform(0.25, 0.75, 2) * size)
            sx, sy = rng.uniform(0.02, 0.12, 2) * size
            theta = rng.uniform(0, np.pi)
            rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
            cov = rot @ np.diag([sx**2, sy**2]) @ rot.T
            blobs.append(Blob(center, tuple(map(tuple, cov)), float(rng.uniform(0.2, 1.0))))
        points = []
        for _ in range(n_points):
            r, c = rng.integers(size // 8, size - size // 8, 2)
            points.append((int(r), int(c), float(rng.uniform(0.3, 1.5))))
        return cls(size, tuple(blobs), tuple(points), seed)


def baseline_uv(baseline, hour_angles, declination, wavelength):
    """u-v samples of one equatorial baseline ``(Bx, By, Bz)`` over ``hour_angles``."""
    bx, by, bz = baseline
    h = np.asarray(hour_angles, dtype=float)
    sd, cd = np.sin(declination), np.cos(declination)
    u = (bx * np.sin(h) + by * np.cos(h)) / wavelength
    v = (-bx * sd * np.cos(h) + by * sd * np.sin(h) + bz * cd) / wavelength
    return u, v


def enu_to_equatorial(enu, latitude):
    """Rotate local ``(east, north, up)`` vectors to equatorial ``(X, Y, Z)``."""
    e, n, up = np.moveaxis(np.asarray(enu, dtype=float), -1, 0)
    sl, cl = np.sin(latitude), np.cos(latitude)
    return np.stack([-sl * n + cl * up, e, cl * n + sl * up], axis=-1)


def coverage_size(n_antennas: int, samples_per_pair: int) -> int:
    """Number of visibilities, one per pair and time sample."""
    return n_antennas * (n_antennas - 1) // 2 * samples_per_pair


def generate_tracks(array: AntennaArray, spec: ObservationSpec) -> UVCoverage:
    """Earth-rotation u-v tracks of every unordered antenna pair.

    Pair ``(i, j)``, ``i < j`` in lexicographic order, becomes track id ``t``
    and contributes ``samples_per_pair`` consecutive points. Coordinates are
    rescaled globally so the largest ``|u|`` or ``|v|`` equals
    ``spec.extent * pi``. Hermitian-conjugate points are not added.
    """
    pairs = np.array(list(combinations(range(array.n_antennas), 2)))
    xyz = enu_to_equatorial(array.positions, spec.latitude)
    baselines = xyz[pairs[:, 1]] - xyz[pairs[:, 0]]
    h = np.linspace(spec.hour_angle[0], spec.hour_angle[1], int(spec.samples_per_pair))
    u, v = baseline_uv(baselines.T[:, :, None], h[None, :], spec.declination, spec.wavelength)
    peak = max(np.abs(u).max(), np.abs(v).max())
    if not peak > 0:
        raise ValueError("all baselines project to zero; cannot scale the coverage")
    scale = spec.extent * np.pi / peak
    uv = np.empty((u.size, 2))
    uv[:, 0] = u.ravel() * scale
    uv[:, 1] = v.ravel() * scale
    track = np.repeat(np.arange(len(pairs)), h.size)
    lengths = np.linalg.norm(array.positions[pairs[:, 1]] - array.positions[pairs[:, 0]], axis=1)
    return UVCoverage(uv, track, lengths)


def synthetic_array(n_antennas=64, seed=0, core_radius=500.0, max_radius=4000.0, core_fraction=0.7):
    """MeerKAT-like layout: a dense core plus sparse outer antennas."""
    rng = np.random.default_rng(seed)
    n_core = int(round(core_fraction * n_antennas))
    r = np.concatenate([
        core_radius * np.sqrt(rng.uniform(0, 1, n_core)),
        rng.uniform(core_radius, max_radius, n_antennas - n_core),
    ])
    phi = rng.uniform(0, 2 * np.pi, n_antennas)
    up = rng.normal(0, 2.0, n_antennas)
    return AntennaArray(np.stack([r * np.cos(phi), r * np.sin(phi), up], axis=1))


def load_antennas(path) -> AntennaArray:
    """Read ``east,north,up`` rows (meters); a non-numeric first line is a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(t) for t in row])
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}:{lineno}: expected three numbers, got {row}") from None
            if len(rows[-1]) != 3:
                raise ValueError(f"{path}:{lineno}: expected three columns, got {len(rows[-1])}")
    return AntennaArray(np.array(rows))


def save_antennas(path, array: AntennaArray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["east", "north", "up"])
        for row in array.positions:
            w.writerow([repr(float(t)) for t in row])


def sample_array_path() -> Path:
    return Path(__file__).with_name("data") / "sample_array.csv"


def calibrate_noise_sigma(clean, target_snr_db: float) -> float:
    """Noise level giving an expected input SNR of ``target_snr_db``."""
    clean = np.asarray(clean)
    energy = float(np.linalg.norm(clean))
    if energy == 0.0:
        raise ValueError("cannot calibrate noise against an all-zero signal")
    return energy / (np.sqrt(clean.size) * 10.0 ** (target_snr_db / 20.0))


def noise_realization(m: int, noise: NoiseSpec) -> np.ndarray:
    rng = np.random.default_rng(noise.seed)
    eps = rng.standard_normal((2, m)) * (noise.sigma / np.sqrt(2.0))
    return eps[0] + 1j * eps[1]


def simulate_visibilities(op, truth, noise: NoiseSpec) -> np.ndarray:
    """``y = Phi x + eps`` with reproducible noise."""
    clean = op.forward(truth)
    if noise.sigma == 0:
        return clean
    return clean + noise_realization(clean.size, noise)


def input_snr_db(clean, noisy) -> float:
    clean = np.asarray(clean)
    return 20.0 * np.log10(np.linalg.norm(clean) / np.linalg.norm(np.asarray(noisy) - clean))


def generate_phantom(spec: PhantomSpec) -> np.ndarray:
    """Nonnegative image with peak 1 (all-zero when ``spec`` lists no sources)."""
    N = int(spec.size)
    if N < 8:
        raise ValueError(f"phantom size must be >= 8, got {N}")
    img = np.zeros((N, N))
    rr, cc = np.mgrid[0:N, 0:N].astype(float)
    for blob in spec.blobs:
        inv = np.linalg.inv(np.asarray(blob.covariance, dtype=float))
        dr, dc = rr - blob.center[0], cc - blob.center[1]
        q = inv[0, 0] * dr * dr + (inv[0, 1] + inv[1, 0]) * dr * dc + inv[1, 1] * dc * dc
        img += abs(blob.amplitude) * np.exp(-0.5 * q)
    for r, c, amp in spec.points:
        img[int(r), int(c)] += abs(amp)
    peak = img.max()
    if peak <= 0:
        warnings.warn("phantom spec produced an all-zero image", RuntimeWarning, stacklevel=2)
        return img
    return img / peak
