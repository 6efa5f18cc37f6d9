"""SARA dictionary: Daubechies db1..db8 bases plus the Dirac basis.

The dictionary is normalized by ``1/sqrt(n_bases)`` so that it is a Parseval
frame (``Psi @ Psi^* = Id``). Coefficients are held in an array of shape
``(n_bases, H, W)``; flattening it gives the contiguous block layout, one block
of length ``H*W`` per basis in the order of :attr:`SaraDictionary.bases`, with
the Dirac block last. Within a wavelet block the Mallat pyramid is packed with
the coarsest approximation in the top-left corner.
"""

from __future__ import annotations

import numpy as np

from .wavelets import analysis_matrix, check_levels

SARA_WAVELETS = ("db1", "db2", "db3", "db4", "db5", "db6", "db7", "db8")


class SaraDictionary:
    """Analysis/synthesis operator pair of a concatenation of orthonormal bases.

    Parameters
    ----------
    shape : tuple of int
        Image shape ``(H, W)``; both must be multiples of ``2**levels``.
    levels : int
        Decomposition depth of every wavelet basis.
    wavelets : sequence of str
        Daubechies wavelets to include. An empty sequence together with
        ``dirac=True`` gives the identity.
    dirac : bool
        Append the Dirac (identity) basis.
    """

    def __init__(self, shape, levels=4, wavelets=SARA_WAVELETS, dirac=True):
        self.shape = tuple(int(s) for s in shape)
        self.levels = int(levels)
        self.wavelets = tuple(wavelets)
        self.dirac = bool(dirac)
        self.bases = self.wavelets + (("dirac",) if dirac else ())
        if not self.bases:
            raise ValueError("dictionary needs at least one basis")
        if self.wavelets:
            check_levels(self.shape, self.levels)
        self.scale = 1.0 / np.sqrt(len(self.bases))
        self._stacks = []
        if self.wavelets:
            rows, cols = self.shape
            for _ in range(self.levels):
                Ar = np.stack([analysis_matrix(w, rows) for w in self.wavelets])
                Ac = np.stack([analysis_matrix(w, cols) for w in self.wavelets])
                self._stacks.append((Ar, Ac.transpose(0, 2, 1).copy(), Ar.transpose(0, 2, 1).copy(), Ac))
                rows, cols = rows // 2, cols // 2

    @property
    def n_bases(self) -> int:
        return len(self.bases)

    @property
    def coef_shape(self) -> tuple[int, int, int]:
        return (self.n_bases,) + self.shape

    def _check_image(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise ValueError(f"image shape {x.shape} does not match dictionary shape {self.shape}")
        return x

    def analysis(self, x: np.ndarray) -> np.ndarray:
        """Return ``Psi^* x`` with shape :attr:`coef_shape`."""
        x = self._check_image(x)
        out = np.empty(self.coef_shape)
        nw = len(self.wavelets)
        if nw:
            rows, cols = self.shape
            cur = x
            for Ar, AcT, _, _ in self._stacks:
                block = Ar @ cur @ AcT
                out[:nw, :rows, :cols] = block
                rows, cols = rows // 2, cols // 2
                cur = block[:, :rows, :cols]
        if self.dirac:
            out[-1] = x
        out *= self.scale
        return out

    def synthesis(self, c: np.ndarray) -> np.ndarray:
        """Return ``Psi c``; the adjoint of :meth:`analysis`."""
        c = np.asarray(c, dtype=float)
        if c.size != self.n_bases * self.shape[0] * self.shape[1]:
            raise ValueError(
                f"coefficient length {c.size} does not match {self.n_bases} blocks of {self.shape}"
            )
        c = c.reshape(self.coef_shape)
        nw = len(self.wavelets)
        total = np.zeros(self.shape)
        if nw:
            H, W = self.shape
            rows, cols = H >> self.levels, W >> self.levels
            cur = c[:nw, :rows, :cols]
            for j in reversed(range(self.levels)):
                _, _, ArT, Ac = self._stacks[j]
                rows, cols = H >> j, W >> j
                block = c[:nw, :rows, :cols].copy()
                block[:, : rows // 2, : cols // 2] = cur
                cur = ArT @ block @ Ac
            total += cur.sum(axis=0)
        if self.dirac:
            total += c[-1]
        total *= self.scale
        return total

    def __repr__(self):
        return f"SaraDictionary(shape={self.shape}, levels={self.levels}, bases={self.bases})"
