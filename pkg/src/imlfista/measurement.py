"""Discretized interferometric measurement operator ``Phi = G F Z``.

Conventions
-----------
* ``Z`` embeds an ``H x W`` image in the top-left block of an ``fH x fW`` grid.
* ``F`` is the unnormalized 2D DFT (``numpy.fft.fft2``); :func:`idft2` carries
  the ``1/d`` factor.
* Grid frequencies are addressed in FFT order. A spatial frequency ``u`` in
  ``[-pi, pi)`` sits at fractional grid column ``u * fW / (2 pi)`` (negative
  values wrap around), ``v`` likewise on the rows.
* Images are real; the adjoint is taken in the real inner product
  ``Re <a, b>``, so ``Phi^* v = Re(Z^* F^* G^* v)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp


class NormEstimateWarning(RuntimeWarning):
    """Power iteration stopped at ``max_iter`` before reaching ``tol``."""


@dataclass(frozen=True)
class UVCoverage:
    """Spatial-frequency sampling points grouped into per-antenna-pair tracks.

    Attributes
    ----------
    uv : ndarray, shape (m, 2)
        ``(u, v)`` in radians per pixel, inside ``[-pi, pi)``.
    track : ndarray of int, shape (m,)
        Track (antenna-pair) id of each point.
    baseline_length : ndarray, shape (n_tracks,)
        Physical baseline length in meters, indexed by track id.
    """

    uv: np.ndarray
    track: np.ndarray
    baseline_length: np.ndarray

    def __post_init__(self):
        uv = np.ascontiguousarray(self.uv, dtype=float).reshape(-1, 2)
        track = np.ascontiguousarray(self.track, dtype=np.int64).ravel()
        lengths = np.ascontiguousarray(self.baseline_length, dtype=float).ravel()
        if track.shape[0] != uv.shape[0]:
            raise ValueError(f"{uv.shape[0]} points but {track.shape[0]} track labels")
        if track.size and (track.min() < 0 or track.max() >= lengths.size):
            raise ValueError("track id outside the baseline_length table")
        object.__setattr__(self, "uv", uv)
        object.__setattr__(self, "track", track)
        object.__setattr__(self, "baseline_length", lengths)

    @property
    def m(self) -> int:
        return self.uv.shape[0]

    @property
    def n_tracks(self) -> int:
        return self.baseline_length.size

    def subset(self, indices) -> "UVCoverage":
        """Points at ``indices``; track ids and the length table are kept."""
        idx = np.asarray(indices, dtype=np.int64)
        return UVCoverage(self.uv[idx], self.track[idx], self.baseline_length)


def zero_pad(x: np.ndarray, factor: int) -> np.ndarray:
    """Embed ``x`` in the top-left block of a complex grid ``factor`` times larger."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"padding factor must be an integer >= 1, got {factor}")
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {x.shape}")
    H, W = x.shape
    g = np.zeros((factor * H, factor * W), dtype=complex)
    g[:H, :W] = x
    return g


def adjoint_crop(g: np.ndarray, factor: int) -> np.ndarray:
    """Adjoint of :func:`zero_pad`: real part of the top-left block."""
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] % factor or g.shape[1] % factor:
        raise ValueError(f"grid shape {g.shape} is not divisible by padding factor {factor}")
    H, W = g.shape[0] // factor, g.shape[1] // factor
    return np.ascontiguousarray(g[:H, :W].real)


def dft2(g: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT."""
    return np.fft.fft2(g)


def idft2(g: np.ndarray) -> np.ndarray:
    """Inverse 2D DFT, ``idft2(dft2(g)) == g``."""
    return np.fft.ifft2(g)


def _bilinear(pos):
    base = np.floor(pos)
    frac = pos - base
    return base.astype(np.int64), np.stack([base * 0, base * 0 + 1]).astype(np.int64), np.stack([1.0 - frac, frac])


def _nearest(pos):
    base = np.floor(pos + 0.5)
    return base.astype(np.int64), np.zeros((1, pos.size), dtype=np.int64), np.ones((1, pos.size))


# name -> function(fractional grid positions) -> (base index, offsets (S, m), weights (S, m))
INTERPOLATION_KERNELS = {"bilinear": _bilinear, "nearest": _nearest}


def build_interpolation(coverage, grid_shape, kernel="bilinear") -> sp.csr_matrix:
    """Sparse interpolation matrix from an FFT-ordered grid to the u-v points.

    Row ``i`` interpolates the gridded spectrum at point ``i`` of ``coverage``
    (a :class:`UVCoverage` or an ``(m, 2)`` array of ``(u, v)``). Columns index
    the flattened grid, row-major with ``v`` along rows and ``u`` along columns.
    """
    uv = coverage.uv if isinstance(coverage, UVCoverage) else np.asarray(coverage, dtype=float).reshape(-1, 2)
    bad = np.flatnonzero(~((uv >= -np.pi) & (uv < np.pi)).all(axis=1))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"u-v point {i} = {tuple(uv[i])} lies outside [-pi, pi)^2")
    try:
        interp = INTERPOLATION_KERNELS[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; known: {sorted(INTERPOLATION_KERNELS)}") from None
    rows_g, cols_g = grid_shape
    m = uv.shape[0]
    cu, ou, wu = interp(uv[:, 0] * cols_g / (2 * np.pi))
    cv, ov, wv = interp(uv[:, 1] * rows_g / (2 * np.pi))
    r_idx, c_idx, vals = [], [], []
    point = np.arange(m)
    for a in range(ov.shape[0]):
        for b in range(ou.shape[0]):
            r = (cv + ov[a]) % rows_g
            c = (cu + ou[b]) % cols_g
            r_idx.append(point)
            c_idx.append(r * cols_g + c)
            vals.append(wv[a] * wu[b])
    G = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(r_idx), np.concatenate(c_idx))),
        shape=(m, rows_g * cols_g),
    ).tocsr()
    G.eliminate_zeros()
    G.sort_indices()
    return G


@dataclass(frozen=True)
class MeasurementOperator:
    """``Phi = G F Z`` for real images of shape ``image_shape``.

    Instances are immutable; :meth:`with_norm` and :meth:`restrict` return new
    operators.
    """

    interpolation: sp.csr_matrix
    image_shape: tuple[int, int]
    factor: int = 2
    norm_sq: float | None = None
    _adjoint_matrix: sp.csr_matrix = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        G = sp.csr_matrix(self.interpolation)
        H, W = self.image_shape
        if G.shape[1] != self.factor * H * self.factor * W:
            raise ValueError(
                f"interpolation has {G.shape[1]} columns, grid needs {self.factor * H * self.factor * W}"
            )
        object.__setattr__(self, "interpolation", G)
        object.__setattr__(self, "image_shape", (int(H), int(W)))
        object.__setattr__(self, "_adjoint_matrix", G.conj().T.tocsr())

    @classmethod
    def from_coverage(cls, coverage, image_shape, factor=2, kernel="bilinear"):
        grid = (factor * image_shape[0], factor * image_shape[1])
        return cls(build_interpolation(coverage, grid, kernel), tuple(image_shape), factor)

    @property
    def m(self) -> int:
        return self.interpolation.shape[0]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.factor * self.image_shape[0], self.factor * self.image_shape[1])

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Visibilities ``G F Z x``."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.image_shape:
            raise ValueError(f"image shape {x.shape} does not match operator shape {self.image_shape}")
        spectrum = np.fft.fft2(x, s=self.grid_shape)
        return self.interpolation @ spectrum.ravel()

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        """Real image ``Re(Z^* F^* G^* v)``."""
        v = np.asarray(v)
        if v.shape != (self.m,):
            raise ValueError(f"expected {self.m} visibilities, got shape {v.shape}")
        grid = (self._adjoint_matrix @ v.astype(complex, copy=False)).reshape(self.grid_shape)
        # F^* = d * ifft2 for the unnormalized DFT
        d = grid.size
        H, W = self.image_shape
        return np.ascontiguousarray((np.fft.ifft2(grid)[:H, :W] * d).real)

    def normal(self, x: np.ndarray) -> np.ndarray:
        return self.adjoint(self.forward(x))

    def restrict(self, rows) -> "MeasurementOperator":
        """Operator keeping only visibility rows ``rows`` (``S Phi``); norm not carried over."""
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= self.m):
            raise IndexError(f"row index out of range for operator with {self.m} rows")
        return MeasurementOperator(self.interpolation[rows], self.image_shape, self.factor)

    def scaled(self, c: float) -> "MeasurementOperator":
        return MeasurementOperator(self.interpolation * c, self.image_shape, self.factor)

    def with_norm(self, tol=1e-6, max_iter=500, seed=0) -> "MeasurementOperator":
        return replace(self, norm_sq=operator_norm_sq(self, tol, max_iter, seed))

    def dense(self) -> np.ndarray:
        """Explicit ``m x n`` complex matrix, for small problems only."""
        n = self.image_shape[0] * self.image_shape[1]
        cols = [self.forward(e.reshape(self.image_shape)) for e in np.eye(n)]
        return np.stack(cols, axis=1)


def power_iteration(normal, shape, tol=1e-6, max_iter=500, seed=0):
    """Largest eigenvalue of the positive semidefinite map ``normal``.

    Starts from an all-ones array plus a small fixed-seed perturbation.

    Returns
    -------
    value : float
    converged : bool
        ``False`` when ``max_iter`` was reached first.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    rng = np.random.default_rng(seed)
    x = np.ones(shape) + 1e-2 * rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    value = 0.0
    for _ in range(max_iter):
        y = normal(x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0, True
        x = y / new
        if abs(new - value) <= tol * new:
            return new, True
        value = new
    return value, False


def operator_norm_sq(op, tol=1e-6, max_iter=500, seed=0) -> float:
    """Power-iteration estimate of ``||Phi||^2``; warns if not converged."""
    value, converged = power_iteration(op.normal, op.image_shape, tol, max_iter, seed)
    if not converged:
        warnings.warn(
            f"power iteration did not reach tol={tol} in {max_iter} iterations; "
            f"returning best estimate {value:.6g}",
            NormEstimateWarning,
            stacklevel=2,
        )
    return value


def data_fidelity(op, x, y) -> float:
    r = op.forward(x) - y
    return 0.5 * float(np.vdot(r, r).real)


def grad_data_fidelity(op, x, y) -> np.ndarray:
    """``Phi^*(Phi x - y)``, the gradient of ``0.5 ||Phi x - y||^2``."""
    y = np.asarray(y)
    if y.shape != (op.m,):
        raise ValueError(f"data has shape {y.shape}, operator has {op.m} rows")
    return op.adjoint(op.forward(x) - y)


def dirty_image(op, y) -> np.ndarray:
    return op.adjoint(np.asarray(y))


def save_sparse_coo(path, matrix) -> None:
    """Write ``matrix`` as text: a ``# rows cols`` header, then ``row col re im`` lines."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]}\n")
        for r, c, val in zip(coo.row, coo.col, coo.data.astype(complex)):
            fh.write(f"{r} {c} {float(val.real)!r} {float(val.imag)!r}\n")


def load_sparse_coo(path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "#":
            raise ValueError(f"{path}: missing '# rows cols' header")
        shape = (int(header[1]), int(header[2]))
        data = np.loadtxt(fh, ndmin=2) if shape[0] else np.empty((0, 4))
    if data.size == 0:
        return sp.csr_matrix(shape, dtype=complex)
    vals = data[:, 2] + 1j * data[:, 3]
    return sp.coo_matrix((vals, (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape).tocsr()
