"""scikit-learn style front ends to the hardness features and scaling fits."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .analysis import fit_hp_scaling, fit_landau_zener
from .counting import hardness_metrics

FEATURES = ("n", "mis_size", "log_d_mis", "log_d_mis_minus_1", "hp", "rho")


class HardnessFeatures(TransformerMixin, BaseEstimator):
    """Map a sequence of graphs to exact hardness features (one row per graph)."""

    def fit(self, X, y=None):
        self.n_features_out_ = len(FEATURES)
        return self

    def transform(self, X) -> np.ndarray:
        rows = []
        for g in X:
            m = hardness_metrics(g)
            rows.append((m.n, m.mis_size, np.log(float(m.d_mis)), np.log(float(m.d_mis_minus_1)), m.hp, m.rho))
        return np.array(rows, dtype=float).reshape(-1, len(FEATURES))

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURES, dtype=object)


def _column(X) -> np.ndarray:
    x = np.asarray(X, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ValueError("expected a single feature column")
        x = x[:, 0]
    return x


class HPScalingRegressor(RegressorMixin, BaseEstimator):
    """Power law in the hardness parameter.

    protocol "threshold": y is the depth to reach P_MIS = threshold and
    predict returns depths. protocol "depth": y is P_MIS at one depth and
    predict returns P_MIS.
    """

    def __init__(self, protocol: str = "threshold", threshold: float = 0.6, min_decades: float = 1.0):
        self.protocol = protocol
        self.threshold = threshold
        self.min_decades = min_decades

    def fit(self, X, y):
        res = fit_hp_scaling(_column(X), y, self.protocol, self.threshold, self.min_decades)
        self.result_ = res
        self.exponent_ = res.params["b"]
        self.stderr_ = res.stderr["b"]
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "result_")
        hp = _column(X)
        b = self.exponent_
        if self.protocol == "threshold":
            return -np.log1p(-self.threshold) * hp**b / self.result_.params["a"]
        return -np.expm1(-self.result_.params["C"] * hp ** (-b))


class LandauZenerRegressor(RegressorMixin, BaseEstimator):
    """P_MIS = 1 - exp(-A delta_min^eta), fitted where delta_min > 1/T."""

    def __init__(self, total_time: float = 1.0):
        self.total_time = total_time

    def fit(self, X, y):
        res = fit_landau_zener(_column(X), y, self.total_time)
        self.result_ = res
        self.eta_ = res.params["eta"]
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "result_")
        return -np.expm1(-self.result_.params["A"] * _column(X) ** self.eta_)
