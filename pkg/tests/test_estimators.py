import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import TARGET, unb_pair, wb_pair
from dopplerinsar import forward as fw
from dopplerinsar import geometry as geo
from dopplerinsar.estimators import AntennaPair, DopplerInSAR, WidebandInSAR
from dopplerinsar.heightsolver import SearchGrid
from dopplerinsar.imaging import ImageGrid

WINDOW = ImageGrid(x_extent=16, y_extent=4, x_center=-40, y_center=-31)
SEARCH = SearchGrid(x_interval=(-30, -10), h_interval=(40, 60))


@pytest.fixture(scope="module")
def scene():
    return geo.Scene([geo.Scatterer(TARGET[:2], TARGET[2])])


@pytest.fixture(scope="module")
def wb_obs(scene):
    t1, t2 = wb_pair()
    cfg = fw.WidebandConfig(n_freq=128, n_slow=256)
    return AntennaPair(fw.simulate_wideband(scene, t1, cfg), fw.simulate_wideband(scene, t2, cfg), t1, t2)


@pytest.fixture(scope="module")
def unb_obs(scene):
    t1, t2 = unb_pair()
    cfg = fw.UNBConfig(n_fast=128, n_slow=256, n_mu=256)
    return AntennaPair(fw.simulate_unb(scene, t1, cfg), fw.simulate_unb(scene, t2, cfg), t1, t2)


def test_wideband_fit_predict(wb_obs):
    est = WidebandInSAR(image_grid=WINDOW, search_grid=SEARCH)
    out = est.fit_predict([wb_obs])
    np.testing.assert_allclose(out, [TARGET])
    assert est.n_pairs_ == 1
    np.testing.assert_allclose(est.predict(wb_obs), [TARGET])


def test_doppler_fit_predict(unb_obs):
    est = DopplerInSAR(image_grid=WINDOW, search_grid=SEARCH).fit(tuple(unb_obs))
    np.testing.assert_allclose(est.solutions_[0].position, TARGET)
    images, meas, _ = est.results_[0]
    assert meas.phi.resolved
    assert images[0].modality == "UNB"


def test_predict_before_fit(wb_obs):
    with pytest.raises(NotFittedError):
        WidebandInSAR().predict(wb_obs)


def test_wrong_data_type(wb_obs):
    with pytest.raises(TypeError):
        DopplerInSAR().fit([wb_obs])


def test_malformed_pair(wb_obs):
    with pytest.raises(ValueError):
        WidebandInSAR().fit([(wb_obs.data1, wb_obs.data2)])
    with pytest.raises(ValueError):
        WidebandInSAR().fit([])


def test_params_round_trip():
    est = WidebandInSAR(phase_surface="cone", threads=2)
    params = est.get_params()
    assert params["phase_surface"] == "cone" and params["threads"] == 2
    assert clone(est).get_params() == params
    assert DopplerInSAR().set_params(phase_surface="linearized").phase_surface == "linearized"
