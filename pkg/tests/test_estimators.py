import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lesionuot.core import ConfigError, InvalidLesionError, LesionSet
from lesionuot.estimators import DistanceBipartiteMatcher, NormDistanceBipartiteMatcher, UOTMatcher
from lesionuot.graph import MERGING, label_events
from lesionuot.validation import check_lesion_set, lesion_array

X0 = np.array([[-2.0, 0, 0, 10.0], [2.0, 0, 0, 10.0], [40.0, 0, 0, 30.0]])
X1 = np.array([[0.0, 0, 0, 20.0], [41.0, 0, 0, 30.0]])
REF = label_events(3, 2, {(0, 0), (1, 0), (2, 1)})


@pytest.mark.parametrize("est", [UOTMatcher(), DistanceBipartiteMatcher(5.0), NormDistanceBipartiteMatcher(1.0)])
def test_fit_predict_on_arrays(est):
    g = est.fit_predict(X0, X1)
    assert g == REF
    assert est.edges_ == [(0, 0), (1, 0), (2, 1)]
    assert est.followup_states_[0] == MERGING
    assert est.score(X0, X1, REF) == 1.0


def test_params_and_clone():
    est = UOTMatcher(epsilon=0.2, tau_row=0.3)
    assert est.get_params()["epsilon"] == 0.2
    twin = clone(est).set_params(lambda_base=4.0)
    assert twin.get_params()["tau_row"] == 0.3 and twin.lambda_base == 4.0 and est.lambda_base == 1.0
    with pytest.raises(NotFittedError):
        est.edges_


def test_invalid_params_fail_at_fit():
    est = UOTMatcher(epsilon=-1.0)
    with pytest.raises(ConfigError):
        est.fit(X0, X1)
    with pytest.raises(ValueError):
        DistanceBipartiteMatcher(rule="mutual").fit(X0, X1)


def test_uot_attributes():
    est = UOTMatcher(epsilon_scaling=True).fit(X0, X1)
    assert est.plan_.shape == (3, 2) and est.cost_.combined.shape == (3, 2)
    assert est.prior_.rho == pytest.approx(50 / 50)
    assert est.config_.epsilon == 0.05


def test_validation_round_trip():
    arr = np.array([[1.0, 2, 3, 4, 0.5, np.nan], [5, 6, 7, 8, np.nan, 0.25]])
    s = check_lesion_set(arr, "followup")
    assert s[0].trust == 0.5 and s[0].appearance is None and s[1].appearance == 0.25
    np.testing.assert_array_equal(lesion_array(s), arr)
    assert check_lesion_set(s, "followup") is s
    assert check_lesion_set(np.empty(0)).lesions == ()
    assert isinstance(check_lesion_set(s, "baseline"), LesionSet)
    for bad in (np.ones((2, 3)), np.array([[0, 0, np.inf, 1.0]]), np.array([[0, 0, 0, -1.0]])):
        with pytest.raises(InvalidLesionError):
            check_lesion_set(bad)
