"""Reconstruction quality metrics."""

import numpy as np

SNR_CAP_DB = 300.0


def snr(x, ref) -> float:
    """``20 log10(||ref|| / ||x - ref||)`` in dB, capped at +300 dB for an exact match."""
    x, ref = np.asarray(x, dtype=float), np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0:
        raise ValueError("reference image is zero")
    err = np.linalg.norm(x - ref)
    if err == 0:
        return SNR_CAP_DB
    return float(min(20.0 * np.log10(ref_norm / err), SNR_CAP_DB))


def log_transform(x):
    """``log10(1e3 x + 1) / 3``, mapping ``[0, 1]`` to about ``[0, 1]``."""
    return np.log10(1e3 * np.asarray(x, dtype=float) + 1.0) / 3.0


def log_snr(x, ref) -> float:
    """SNR after :func:`log_transform`; both images must be nonnegative."""
    x, ref = np.asarray(x, dtype=float), np.asarray(ref, dtype=float)
    if (x < 0).any() or (ref < 0).any():
        raise ValueError("log-SNR needs nonnegative images; project first")
    return snr(log_transform(x), log_transform(ref))
