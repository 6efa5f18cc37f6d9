"""Periodic orthonormal Daubechies wavelet transforms.

Each single-level transform on a length-``M`` periodic signal is stored as an
``M x M`` orthogonal matrix whose first ``M/2`` rows are the lowpass (scaling)
outputs and last ``M/2`` rows the highpass (detail) outputs. Two-dimensional
transforms follow the usual Mallat pyramid and recurse on the LL quadrant.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Lowpass reconstruction filters h[n] of the Daubechies family with N vanishing
# moments (dbN, length 2N), from the standard tables (Daubechies, "Ten Lectures
# on Wavelets", 1992, Table 6.1), double precision.
DAUBECHIES_LOWPASS = {
    "db1": (
        0.7071067811865476,
        0.7071067811865476,
    ),
    "db2": (
        0.48296291314453416,
        0.8365163037378079,
        0.2241438680420134,
        -0.12940952255126037,
    ),
    "db3": (
        0.33267055295008263,
        0.8068915093110925,
        0.45987750211849154,
        -0.13501102001025458,
        -0.08544127388202666,
        0.03522629188570953,
    ),
    "db4": (
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859854,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ),
    "db5": (
        0.16010239797419293,
        0.6038292697971896,
        0.7243085284377729,
        0.13842814590132074,
        -0.24229488706638203,
        -0.032244869584638375,
        0.07757149384004572,
        -0.006241490212798274,
        -0.012580751999081999,
        0.0033357252854737712,
    ),
    "db6": (
        0.11154074335010947,
        0.49462389039845306,
        0.7511339080210954,
        0.31525035170919763,
        -0.22626469396543983,
        -0.12976686756726194,
        0.09750160558732304,
        0.027522865530305727,
        -0.03158203931748603,
        0.0005538422011614961,
        0.004777257510945511,
        -0.0010773010853084796,
    ),
    "db7": (
        0.07785205408500918,
        0.3965393194819173,
        0.7291320908462351,
        0.4697822874051931,
        -0.14390600392856498,
        -0.22403618499387498,
        0.07130921926683026,
        0.08061260915108308,
        -0.03802993693501441,
        -0.01657454163066688,
        0.01255099855609984,
        0.0004295779729213665,
        -0.0018016407040474908,
        0.00035371379997452024,
    ),
    "db8": (
        0.05441584224310401,
        0.31287159091429995,
        0.6756307362972898,
        0.5853546836542067,
        -0.015829105256349306,
        -0.2840155429615469,
        0.0004724845739132828,
        0.12874742662047847,
        -0.017369301001807547,
        -0.044088253930794755,
        0.013981027917398282,
        0.008746094047405777,
        -0.004870352993451574,
        -0.00039174037337694705,
        0.0006754494064505693,
        -0.00011747678412476953,
    ),
}


def lowpass(name: str) -> np.ndarray:
    try:
        return np.asarray(DAUBECHIES_LOWPASS[name], dtype=float)
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; expected one of {sorted(DAUBECHIES_LOWPASS)}") from None


def highpass(name: str) -> np.ndarray:
    """Quadrature mirror filter ``g[n] = (-1)^n h[L-1-n]``."""
    h = lowpass(name)
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


@lru_cache(maxsize=None)
def analysis_matrix(name: str, size: int) -> np.ndarray:
    """Single-level periodic analysis matrix for a signal of even length ``size``.

    Row ``k`` computes ``sum_n h[n] x[(2k + n) mod size]`` and row ``size/2 + k``
    the same with the highpass filter. Filters longer than ``size`` wrap more
    than once, which keeps the matrix orthogonal.
    """
    if size < 2 or size % 2:
        raise ValueError(f"periodic DWT needs an even length >= 2, got {size}")
    h, g = lowpass(name), highpass(name)
    half = size // 2
    A = np.zeros((size, size))
    rows = np.arange(half)
    for n in range(h.size):
        cols = (2 * rows + n) % size
        np.add.at(A, (rows, cols), h[n])
        np.add.at(A, (rows + half, cols), g[n])
    A.setflags(write=False)
    return A


def dwt2(x: np.ndarray, name: str, levels: int) -> np.ndarray:
    """Multi-level 2D periodic DWT, coefficients packed in an array of ``x.shape``."""
    check_levels(x.shape, levels)
    out = np.array(x, dtype=float, copy=True)
    rows, cols = x.shape
    for _ in range(levels):
        Ar, Ac = analysis_matrix(name, rows), analysis_matrix(name, cols)
        out[:rows, :cols] = Ar @ out[:rows, :cols] @ Ac.T
        rows, cols = rows // 2, cols // 2
    return out


def idwt2(c: np.ndarray, name: str, levels: int) -> np.ndarray:
    """Inverse (and adjoint) of :func:`dwt2`."""
    check_levels(c.shape, levels)
    out = np.array(c, dtype=float, copy=True)
    for j in reversed(range(levels)):
        rows, cols = c.shape[0] >> j, c.shape[1] >> j
        Ar, Ac = analysis_matrix(name, rows), analysis_matrix(name, cols)
        out[:rows, :cols] = Ar.T @ out[:rows, :cols] @ Ac
    return out


def check_levels(shape: tuple[int, ...], levels: int) -> None:
    if levels < 1:
        raise ValueError(f"decomposition depth must be >= 1, got {levels}")
    step = 1 << levels
    bad = [s for s in shape if s % step]
    if len(shape) != 2 or bad:
        need = tuple(-(-s // step) * step for s in shape)
        raise ValueError(
            f"image shape {tuple(shape)} is not divisible by 2**{levels} = {step}; "
            f"pad to {need}"
        )
