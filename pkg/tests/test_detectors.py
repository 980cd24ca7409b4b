import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bosecount.detectors import (
    Completeness,
    DetectorMatrix,
    build_dilation,
    homodyne_pair,
    mean_count,
    mean_field_count,
    paper_pair,
    scale_array,
    validate_array,
)
from bosecount.errors import NonHermitianOrNegative, OverComplete

from .conftest import random_array


def test_homodyne_pair_is_complete():
    assert homodyne_pair().completeness is Completeness.COMPLETE


def test_reference_pair_is_subunity():
    arr = paper_pair(0.867)
    assert arr.completeness is Completeness.SUB_UNITY
    d1, d2 = arr
    assert d1.r_aa == pytest.approx(0.6 * 0.867) and d2.r_bb == pytest.approx(0.6 * 0.867)
    assert abs(d1.r_ab) ** 2 == pytest.approx(d1.r_aa * d1.r_bb)
    assert d2.theta - d1.theta == pytest.approx(0.9 * math.pi)


def test_reference_pair_at_half_pi_is_overcomplete():
    with pytest.raises(OverComplete):
        paper_pair(0.867, dtheta=0.5 * math.pi)


def test_non_psd_matrix_rejected():
    with pytest.raises(NonHermitianOrNegative):
        validate_array([DetectorMatrix(0.2, 0.2, 0.5)])
    with pytest.raises(NonHermitianOrNegative):
        validate_array([DetectorMatrix(-0.1, 0.2, 0.0)])


def test_scale_identity_and_magnification():
    arr = paper_pair(0.867)
    assert scale_array(arr, 1.0, 2) == arr
    small = paper_pair(0.867 * 0.4)
    back = scale_array(small, 0.4, 2)
    for a, b in zip(back, arr):
        assert a.r_aa == pytest.approx(b.r_aa) and a.r_ab == pytest.approx(b.r_ab)


def test_scale_complete_array_overcomplete():
    with pytest.raises(OverComplete):
        scale_array(homodyne_pair(), 0.5, 2)


def test_scale_drops_detectors():
    arr = scale_array(paper_pair(0.4), 0.5, 1)
    assert len(arr) == 1 and arr[0].r_aa == pytest.approx(0.48)


def test_mean_count_examples():
    d1, d2 = paper_pair(0.867)
    n = 100 / 0.867
    assert mean_count(d1, n, n) == pytest.approx(100.0)
    assert mean_count(d1, 0.0, 0.0) == 0.0
    assert mean_count(homodyne_pair()[0], 7.0, 7.0) == pytest.approx(7.0)


def test_mean_field_count_examples():
    d1, _ = paper_pair(0.867)
    n = 100 / 0.867
    assert mean_field_count(d1, n, n, math.pi / 2 - d1.theta) == pytest.approx(mean_count(d1, n, n))
    d = DetectorMatrix.rank_one(0.3, 0.3, 0.4)
    assert mean_field_count(d, 9.0, 9.0, math.pi - 0.4) == pytest.approx(0.0, abs=1e-12)


def test_mean_field_count_reference_predictions():
    arr = paper_pair(0.867)
    n = 100 / 0.867
    x = 1.3861
    assert mean_field_count(arr[1], n, n, -x) == pytest.approx(112.7, abs=0.5)
    assert mean_field_count(arr[1], n, n, x) == pytest.approx(53.2, abs=0.5)


def _check_dilation(arr, net):
    total = sum(np.outer(t.conj(), t) for t in net.rows)
    assert np.max(np.abs(total - np.eye(2))) < 1e-12
    for m, d in enumerate(arr):
        assert np.max(np.abs(net.detector_sum(m) - d.matrix)) < 1e-12


def test_dilation_homodyne():
    arr = homodyne_pair()
    net = build_dilation(arr)
    assert net.n_rows == 2 and net.n_loss_rows == 0
    _check_dilation(arr, net)


def test_dilation_reference_pair():
    arr = paper_pair(0.867)
    net = build_dilation(arr)
    assert net.n_rows - net.n_loss_rows == 2 and net.n_loss_rows == 2
    _check_dilation(arr, net)


def test_dilation_full_detector():
    arr = validate_array([DetectorMatrix(1.0, 1.0, 0.0)])
    net = build_dilation(arr)
    assert net.n_rows == 2 and net.n_loss_rows == 0
    _check_dilation(arr, net)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans())
def test_dilation_properties(seed, M, rank_one):
    arr = random_array(np.random.default_rng(seed), M, rank_one)
    _check_dilation(arr, build_dilation(arr))


@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi), st.floats(-5, 5))
def test_phase_covariance(seed, phi, delta):
    d = random_array(np.random.default_rng(seed), 1)[0]
    r = d.rotated(phi)
    assert math.cos(r.theta - d.theta - phi) == pytest.approx(1.0)
    assert mean_count(r, 3.0, 5.0) == pytest.approx(mean_count(d, 3.0, 5.0))
    assert mean_field_count(r, 3.0, 5.0, delta) == pytest.approx(mean_field_count(d, 3.0, 5.0, delta + phi), abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0.5, 1.5))
def test_overcomplete_iff_negative_residual(seed, fill):
    rng = np.random.default_rng(seed)
    arr = random_array(rng, 2, fill=0.5)
    mats = [d.matrix * fill / 0.5 for d in arr]
    lam = np.linalg.eigvalsh(np.eye(2) - sum(mats)).min()
    ds = [DetectorMatrix(m[0, 0].real, m[1, 1].real, m[0, 1]) for m in mats]
    if lam < -1e-10:
        with pytest.raises(OverComplete):
            validate_array(ds)
    elif lam > 1e-9:
        validate_array(ds)
