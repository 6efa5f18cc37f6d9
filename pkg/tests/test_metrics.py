import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imlfista.metrics import SNR_CAP_DB, log_snr, log_transform, snr


def test_snr_examples():
    ref = np.array([1.0, 0.0])
    assert snr(ref.copy(), ref) == SNR_CAP_DB == 300.0
    assert snr(np.zeros(2), ref) == pytest.approx(0.0)
    assert snr(np.array([1.0, 0.1]), ref) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        snr(ref, np.zeros(2))
    with pytest.raises(ValueError):
        snr(np.zeros(3), ref)


@given(st.integers(0, 1000))
def test_snr_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    ref, x = rng.standard_normal((2, 30))
    perm = rng.permutation(30)
    assert snr(x[perm], ref[perm]) == pytest.approx(snr(x, ref), rel=1e-12)


def test_log_transform_examples():
    assert not log_transform(np.zeros(3)).any()
    assert log_transform(0.999) == pytest.approx(np.log10(1000 * 0.999 + 1) / 3)
    assert log_transform(1.0) == pytest.approx(1.0, abs=2e-4)


def test_log_snr():
    ref = np.array([0.5, 0.0, 1.0])
    assert log_snr(ref, ref) == SNR_CAP_DB
    x = np.array([0.4, 0.01, 0.9])
    assert log_snr(x, ref) == pytest.approx(snr(log_transform(x), log_transform(ref)))
    with pytest.raises(ValueError, match="nonnegative"):
        log_snr(np.array([-0.1, 0, 1]), ref)
