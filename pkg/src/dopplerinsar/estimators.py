"""scikit-learn style wrappers around the imaging and height-solving chain.

An observation is an :class:`AntennaPair`: two datasets of the same
modality and the trajectories that recorded them. ``predict`` maps a
sequence of pairs to an ``(n_pairs, 3)`` array of scatterer positions. Nothing
is learned across pairs, so ``fit`` only validates its input and keeps the
intermediate products of the pairs it saw for inspection.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import geometry as geo
from . import heightsolver as hs
from .forward import UNBDataSet, WidebandDataSet
from .imaging import ImageGrid, backproject_unb, backproject_wideband


class AntennaPair(NamedTuple):
    data1: object
    data2: object
    traj1: geo.Trajectory
    traj2: geo.Trajectory


def check_pair(pair, data_type):
    """Validate one observation and return it as an :class:`AntennaPair`."""
    if not isinstance(pair, AntennaPair):
        if len(pair) != 4:
            raise ValueError("a pair is (data1, data2, traj1, traj2)")
        pair = AntennaPair(*pair)
    for d in (pair.data1, pair.data2):
        if not isinstance(d, data_type):
            raise TypeError(f"expected {data_type.__name__}, got {type(d).__name__}")
    for t in (pair.traj1, pair.traj2):
        if not isinstance(t, geo.Trajectory):
            raise TypeError(f"expected Trajectory, got {type(t).__name__}")
    return pair


def check_pairs(X, data_type):
    """Accept one pair or a sequence of pairs; always return a list."""
    if isinstance(X, AntennaPair) or (isinstance(X, tuple) and len(X) == 4
                                       and isinstance(X[2], geo.Trajectory)):
        X = [X]
    pairs = [check_pair(p, data_type) for p in X]
    if not pairs:
        raise ValueError("no observations given")
    return pairs


class _InSARBase(BaseEstimator):
    _data_type = None

    def _grids(self):
        return (self.image_grid if self.image_grid is not None else ImageGrid(),
                self.search_grid if self.search_grid is not None else hs.SearchGrid())

    def _consts(self):
        return geo.PhysicalConstants(self.propagation_speed)

    def fit(self, X, y=None):
        pairs = check_pairs(X, self._data_type)
        self.results_ = [self._solve(p) for p in pairs]
        self.solutions_ = [r[2] for r in self.results_]
        self.n_pairs_ = len(pairs)
        return self

    def predict(self, X):
        check_is_fitted(self, "n_pairs_")
        pairs = check_pairs(X, self._data_type)
        return np.array([self._solve(p)[2].position for p in pairs])

    def fit_predict(self, X, y=None):
        self.fit(X)
        return np.array([s.position for s in self.solutions_])


class WidebandInSAR(_InSARBase):
    """Wideband interferometric height estimation.

    Parameters
    ----------
    image_grid : ImageGrid, optional
    search_grid : SearchGrid, optional
        ``fixed_y`` defaults to the image-1 peak row.
    phase_surface : {'hyperboloid', 'cone'}
    refine : bool
        Refine peaks off-grid before reading phases.
    threads : int
    propagation_speed : float
    """

    _data_type = WidebandDataSet

    def __init__(self, image_grid=None, search_grid=None, phase_surface="hyperboloid",
                 refine=True, threads=1, propagation_speed=geo.C_DEFAULT):
        self.image_grid = image_grid
        self.search_grid = search_grid
        self.phase_surface = phase_surface
        self.refine = refine
        self.threads = threads
        self.propagation_speed = propagation_speed

    def _solve(self, pair):
        c = self._consts()
        ig, sg = self._grids()
        i1 = backproject_wideband(pair.data1, pair.traj1, ig, c, threads=self.threads)
        i2 = backproject_wideband(pair.data2, pair.traj2, ig, c, threads=self.threads)
        meas = hs.measure_wb(i1, i2, pair.data1, pair.data2, pair.traj1, pair.traj2, c,
                             refine=self.refine, threads=self.threads)
        if sg.fixed_y is None and not sg.is_3d:
            sg = sg.with_fixed_y(meas.peaks["image1_m"][1])
        sol = hs.solve_wb(meas, pair.traj1, pair.traj2, sg, c, self.phase_surface)
        return (i1, i2), meas, sol


class DopplerInSAR(_InSARBase):
    """Ultra-narrowband (Doppler) interferometric height estimation.

    Parameters
    ----------
    image_grid : ImageGrid, optional
    search_grid : SearchGrid, optional
        ``fixed_y`` defaults to the image-1 peak row.
    phase_surface : {'exact', 'linearized'}
    threads : int
    propagation_speed : float
    """

    _data_type = UNBDataSet

    def __init__(self, image_grid=None, search_grid=None, phase_surface="exact",
                 threads=1, propagation_speed=geo.C_DEFAULT):
        self.image_grid = image_grid
        self.search_grid = search_grid
        self.phase_surface = phase_surface
        self.threads = threads
        self.propagation_speed = propagation_speed

    def _solve(self, pair):
        c = self._consts()
        ig, sg = self._grids()
        i1 = backproject_unb(pair.data1, pair.traj1, ig, c, threads=self.threads)
        i2 = backproject_unb(pair.data2, pair.traj2, ig, c, threads=self.threads)
        meas = hs.measure_unb(i1, i2, pair.data1, pair.data2, pair.traj1, pair.traj2, c)
        sol = hs.solve_unb(meas, pair.traj1, pair.traj2, sg, c, self.phase_surface)
        return (i1, i2), meas, sol
