import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowgate.detector_core import (
    DetectorKind,
    predict_binary,
    score_and_binarize,
)
from flowgate.errors import ConfigError, DataError


def test_mlp_threshold_rule():
    np.testing.assert_array_equal(
        predict_binary(DetectorKind.MLP, [0.4, 0.6], 0.5), [0, 1]
    )
    # >= at the boundary
    np.testing.assert_array_equal(
        predict_binary(DetectorKind.CNN1D, [0.5], 0.5), [1]
    )


def test_ocsvm_sign_rule():
    np.testing.assert_array_equal(
        predict_binary(DetectorKind.OCSVM, [-0.1, 0.0, 0.2]), [1, 0, 0]
    )


def test_lof_threshold_rule():
    np.testing.assert_array_equal(
        predict_binary(DetectorKind.LOF, [1.0, 2.0], 1.5), [0, 1]
    )
    # default threshold is 1.5, strict >
    np.testing.assert_array_equal(predict_binary(DetectorKind.LOF, [1.5]), [0])


def test_nan_scores_rejected():
    with pytest.raises(DataError):
        predict_binary(DetectorKind.MLP, [0.1, float("nan")], 0.5)


def test_ocsvm_rejects_threshold_override():
    with pytest.raises(ConfigError):
        predict_binary(DetectorKind.OCSVM, [0.1], 0.5)


def test_kind_from_name():
    assert DetectorKind.from_name("OCSVM") is DetectorKind.OCSVM
    with pytest.raises(ConfigError):
        DetectorKind.from_name("svm")


@given(
    scores=st.lists(st.floats(0, 1), min_size=1, max_size=40),
    t1=st.floats(0, 1),
    t2=st.floats(0, 1),
)
@settings(max_examples=60)
def test_threshold_monotonicity(scores, t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    for kind in (DetectorKind.MLP, DetectorKind.LOF):
        n_lo = predict_binary(kind, scores, lo).sum()
        n_hi = predict_binary(kind, scores, hi).sum()
        assert n_hi <= n_lo


def test_score_and_binarize_records_effective_threshold():
    sp = score_and_binarize(DetectorKind.LOF, [1.0, 3.0])
    assert sp.threshold == 1.5
    assert sp.labels.tolist() == [0, 1]
    sp2 = score_and_binarize(DetectorKind.OCSVM, [-1.0])
    assert sp2.threshold is None
    assert sp2.labels.tolist() == [1]
