"""scikit-learn style wrappers.

``X`` is always an ``(n, 2)`` array of ``(expiry, tenor)`` in years and ``y``
the annualized ATM normal vols (absolute units, not basis points).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .calibrator import QuoteGrid, SwaptionQuote, bootstrap
from .curve import DEFAULT_DT, DiscountCurve, SwapSchedule
from .factors import FactorSet, FactorVolSurface, decompose
from .mcengine import SimConfig, monte_carlo, swaption_values
from .svapprox import ForwardVolSurface, normal_vol_from_price, sva_normal_vol


def _check_curve(curve, dt):
    if not isinstance(curve, DiscountCurve):
        raise ValueError("a DiscountCurve is required; pass curve=...")
    if not np.isclose(curve.dt, dt):
        raise ValueError(f"curve dt {curve.dt} differs from dt={dt}")
    return curve


def _schedules(X, dt):
    X = check_array(X, dtype=float)
    if X.shape[1] != 2:
        raise ValueError(f"X must have 2 columns (expiry, tenor), got {X.shape[1]}")
    return [SwapSchedule(float(e), float(t), dt) for e, t in X]


class SVACalibrator(RegressorMixin, BaseEstimator):
    """Bootstraps a forward-vol surface so small-vol prices match the quotes.

    Parameters
    ----------
    curve : DiscountCurve
        Initial discount curve.
    dt : float, default=0.25
        Grid and payment step in years.
    grid_size : int or None
        Number of maturity cells of the surface; defaults to quote coverage.

    Attributes
    ----------
    surface_ : ForwardVolSurface
    report_ : CalibrationReport
    """

    def __init__(self, curve=None, dt=DEFAULT_DT, grid_size=None):
        self.curve = curve
        self.dt = dt
        self.grid_size = grid_size

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        curve = _check_curve(self.curve, self.dt)
        if X.shape[1] != 2:
            raise ValueError(f"X must have 2 columns (expiry, tenor), got {X.shape[1]}")
        quotes = QuoteGrid.from_quotes(
            [SwaptionQuote(float(e), float(t), float(v)) for (e, t), v in zip(X, y)], self.dt
        )
        self.report_ = bootstrap(curve, quotes, self.grid_size)
        self.surface_ = self.report_.surface
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "surface_")
        return np.array([sva_normal_vol(self.curve, self.surface_, s) for s in _schedules(X, self.dt)])


class FactorDecomposer(TransformerMixin, BaseEstimator):
    """Maps a :class:`ForwardVolSurface` to per-factor surfaces."""

    def __init__(self, weights=(1.0,), mean_reversions=(0.0,), correlation=None):
        self.weights = weights
        self.mean_reversions = mean_reversions
        self.correlation = correlation

    def fit(self, X=None, y=None):
        self.factor_set_ = FactorSet(tuple(self.weights), tuple(self.mean_reversions), self.correlation)
        return self

    def transform(self, X: ForwardVolSurface) -> FactorVolSurface:
        check_is_fitted(self, "factor_set_")
        if not isinstance(X, ForwardVolSurface):
            raise TypeError("FactorDecomposer transforms a ForwardVolSurface")
        return decompose(X, self.factor_set_)


class HJMSwaptionModel(RegressorMixin, BaseEstimator):
    """Calibrated multi-factor HJM model that reprices ATM swaptions.

    ``fit`` bootstraps the surface and splits it over the factors; ``predict``
    returns implied ATM normal vols from Monte Carlo (``method="mc"``) or from
    the small-vol approximation (``method="sva"``).
    """

    def __init__(self, curve=None, dt=DEFAULT_DT, weights=(1.0,), mean_reversions=(0.0,),
                 correlation=None, n_paths=50_000, seed=0, antithetic=False, method="mc"):
        self.curve = curve
        self.dt = dt
        self.weights = weights
        self.mean_reversions = mean_reversions
        self.correlation = correlation
        self.n_paths = n_paths
        self.seed = seed
        self.antithetic = antithetic
        self.method = method

    def fit(self, X, y):
        if self.method not in ("mc", "sva"):
            raise ValueError(f"method must be 'mc' or 'sva', got {self.method!r}")
        self.calibrator_ = SVACalibrator(self.curve, self.dt).fit(X, y)
        self.decomposer_ = FactorDecomposer(self.weights, self.mean_reversions, self.correlation).fit()
        self.factor_surface_ = self.decomposer_.transform(self.calibrator_.surface_)
        self.n_features_in_ = 2
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "factor_surface_")
        scheds = _schedules(X, self.dt)
        if self.method == "sva":
            vols = self.calibrator_.predict(X)
            return (vols, np.zeros_like(vols)) if return_std else vols
        cfg = SimConfig(self.n_paths, max(s.expiry for s in scheds), self.seed, self.antithetic,
                        max_maturity=max(s.end_index for s in scheds) * self.dt)
        est = monte_carlo(
            self.curve, self.factor_surface_, cfg,
            lambda p: np.stack([swaption_values(p, s) for s in scheds], axis=1),
            sorted({s.expiry_index for s in scheds}),
        )
        means = np.atleast_1d(est.mean)
        vols = np.array([normal_vol_from_price(self.curve, s, max(p, 0.0)) for s, p in zip(scheds, means)])
        if not return_std:
            return vols
        se = np.atleast_1d(est.std_error)
        std = np.where(means > 0, vols * se / np.where(means > 0, means, 1.0), 0.0)
        return vols, std
