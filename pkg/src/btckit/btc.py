"""Linear basic thresholding classifier and its threshold estimator.

Classification is one-shot: correlate the test sample with every dictionary
column, keep the M strongest atoms, solve a Tikhonov-regularized least
squares on that support, and pick the class with minimum reconstruction
residual. The threshold M is estimated off-line from the dictionary alone
by minimizing the average sufficient-identification ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from btckit.data import Dictionary, NORM_L2
from btckit.errors import ConfigError
from btckit.linalg import (
    SELECT_MAGNITUDE,
    solve_spd_regularized,
    top_m_select,
    top_m_select_excluding,
)


@dataclass(frozen=True)
class BtcParams:
    """Threshold M (atom count, M < feature dim) and regularization alpha."""

    m: int
    alpha: float
    selection: str = SELECT_MAGNITUDE

    def validate(self, n_features: int, n_samples: int) -> None:
        if not 1 <= self.m < n_features:
            raise ConfigError(f"M={self.m} must satisfy 1 <= M < B={n_features}")
        if self.m > n_samples:
            raise ConfigError(f"M={self.m} exceeds sample count {n_samples}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha={self.alpha} must lie in (0, 1)")


@dataclass(frozen=True)
class SparseCode:
    """Coefficients on a selected support; zero elsewhere."""

    support: np.ndarray  # selected column indices, selection order
    coefficients: np.ndarray  # aligned with support
    ambient_size: int

    def dense(self) -> np.ndarray:
        x = np.zeros(self.ambient_size)
        x[self.support] = self.coefficients
        return x


@dataclass(frozen=True)
class ResidualVector:
    """Per-class reconstruction errors; argmin is the predicted class."""

    values: np.ndarray  # length C, class ids 1..C

    @property
    def predicted_class(self) -> int:
        # np.argmin returns the first minimum: lowest class id on ties
        return int(np.argmin(self.values)) + 1


def btc_classify(
    dictionary: Dictionary,
    y: np.ndarray,
    params: BtcParams,
    support: np.ndarray | None = None,
) -> tuple[ResidualVector, SparseCode]:
    """Classify one sample with the linear BTC.

    The sample is L2-normalized, correlated against all columns, and
    reconstructed on the top-M support. Classes without support atoms get
    residual ||y||_2 = 1. An explicit ``support`` overrides the selection
    step (used for cross-pipeline checks).
    """
    if dictionary.norm_mode != NORM_L2:
        raise ConfigError("btc_classify requires an L2-normalized dictionary")
    params.validate(dictionary.n_features, dictionary.n_samples)
    y = np.asarray(y, dtype=np.float64)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise ConfigError("zero test vector")
    yn = y / norm

    A = dictionary.columns
    if support is None:
        v = A.T @ yn
        support = top_m_select(v, params.m, mode=params.selection)
    else:
        support = np.asarray(support, dtype=np.int64)

    D = A[:, support]
    coeffs = solve_spd_regularized(D.T @ D, D.T @ yn, params.alpha)
    code = SparseCode(support=support, coefficients=coeffs, ambient_size=dictionary.n_samples)

    residuals = np.empty(dictionary.n_classes)
    for cid, start, count in dictionary.class_offsets:
        in_class = (support >= start) & (support < start + count)
        if not np.any(in_class):
            residuals[cid - 1] = 1.0
            continue
        recon = A[:, support[in_class]] @ coeffs[in_class]
        residuals[cid - 1] = np.linalg.norm(yn - recon)
    return ResidualVector(values=residuals), code


def corr_classify(dictionary: Dictionary, y: np.ndarray, m: int) -> int:
    """Correlation baseline: argmax of class-wise sums of the M largest correlations."""
    if dictionary.norm_mode != NORM_L2:
        raise ConfigError("corr_classify requires an L2-normalized dictionary")
    if not 1 <= m <= dictionary.n_samples:
        raise ConfigError(f"M={m} out of range")
    y = np.asarray(y, dtype=np.float64)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise ConfigError("zero test vector")
    v = dictionary.columns.T @ (y / norm)
    keep = top_m_select(v, m, mode=SELECT_MAGNITUDE)
    kept = np.zeros_like(v)
    kept[keep] = v[keep]
    sums = np.array(
        [kept[start : start + count].sum() for _, start, count in dictionary.class_offsets]
    )
    # ties -> lowest class id (argmax returns first maximum)
    return int(np.argmax(sums)) + 1


def btc_beta_sample(
    dictionary: Dictionary, class_id: int, sample_idx: int, params: BtcParams
) -> float:
    """Sufficient-identification ratio for one training column.

    The column is classified against the dictionary with itself excluded
    from selection; the result is its own-class residual over the best
    rival residual. Values below 1 mean the column is identifiable.
    """
    if params.m < 2:
        raise ConfigError("beta requires M >= 2")
    params.validate(dictionary.n_features, dictionary.n_samples)
    sl = dictionary.class_slice(class_id)
    if not 0 <= sample_idx < sl.stop - sl.start:
        raise ConfigError(f"sample_idx {sample_idx} out of class {class_id} range")
    gram = dictionary.columns.T @ dictionary.columns
    return _beta_from_gram(dictionary, gram, sl.start + sample_idx, params.m, params.alpha, params.selection)


def btc_beta_average(dictionary: Dictionary, m: int, alpha: float) -> float:
    """Mean sufficient-identification ratio over all dictionary columns."""
    params = BtcParams(m=m, alpha=alpha)
    params.validate(dictionary.n_features, dictionary.n_samples)
    if m < 2:
        raise ConfigError("beta requires M >= 2")
    if dictionary.n_classes < 2:
        raise ConfigError("beta needs at least 2 classes")
    gram = dictionary.columns.T @ dictionary.columns
    total = 0.0
    for g in range(dictionary.n_samples):
        total += _beta_from_gram(dictionary, gram, g, m, alpha, params.selection)
    return total / dictionary.n_samples


def btc_estimate_threshold(
    dictionary: Dictionary,
    alpha: float,
    m_range: range | None = None,
) -> tuple[int, list[tuple[int, float]]]:
    """Exhaustively scan M and return (argmin, full profile).

    The default range is 2..B-1. The smallest M attaining the minimum
    average ratio wins.
    """
    b = dictionary.n_features
    if m_range is None:
        m_range = range(2, b)
    ms = [m for m in m_range]
    if not ms:
        raise ConfigError("empty M range")
    if ms[0] < 2 or ms[-1] >= b:
        raise ConfigError(f"M range must lie within [2, {b - 1}]")
    if dictionary.n_classes < 2:
        raise ConfigError("threshold estimation needs at least 2 classes")

    gram = dictionary.columns.T @ dictionary.columns
    n = dictionary.n_samples
    labels = dictionary.column_labels()
    # one descending sort per column, shared by every M
    orders = np.argsort(-np.abs(gram), axis=0, kind="stable")

    profile = []
    for m in ms:
        total = 0.0
        for g in range(n):
            order = orders[:, g]
            sel = order[order != g][: m - 1]
            total += _beta_on_support(dictionary, gram, g, int(labels[g]), sel, alpha)
        profile.append((m, total / n))
    best_m = min(profile, key=lambda t: (t[1], t[0]))[0]
    return best_m, profile


def _beta_from_gram(
    dictionary: Dictionary,
    gram: np.ndarray,
    col: int,
    m: int,
    alpha: float,
    selection: str = SELECT_MAGNITUDE,
) -> float:
    v = gram[:, col]
    sel = top_m_select_excluding(v, m, col, mode=selection)
    labels = dictionary.column_labels()
    return _beta_on_support(dictionary, gram, col, int(labels[col]), sel, alpha)


def _beta_on_support(
    dictionary: Dictionary,
    gram: np.ndarray,
    col: int,
    own_class: int,
    sel: np.ndarray,
    alpha: float,
) -> float:
    """Ratio of own-class to best rival residual, all in Gram arithmetic."""
    if dictionary.n_classes < 2:
        raise ConfigError("beta needs a competing class")
    if sel.size:
        coeffs = solve_spd_regularized(gram[np.ix_(sel, sel)], gram[sel, col], alpha)
    else:
        coeffs = np.empty(0)
    own_sq = float(gram[col, col])

    residuals = np.empty(dictionary.n_classes)
    for cid, start, count in dictionary.class_offsets:
        in_class = (sel >= start) & (sel < start + count)
        if not np.any(in_class):
            residuals[cid - 1] = np.sqrt(own_sq)
            continue
        s = sel[in_class]
        x = coeffs[in_class]
        sq = own_sq - 2.0 * float(x @ gram[s, col]) + float(x @ gram[np.ix_(s, s)] @ x)
        residuals[cid - 1] = np.sqrt(max(sq, 0.0))

    rivals = np.delete(residuals, own_class - 1)
    denom = rivals.min()
    if denom == 0:
        return np.inf
    return float(residuals[own_class - 1] / denom)


def recover_sparse(A: np.ndarray, y: np.ndarray, m: int, alpha: float) -> np.ndarray:
    """One-shot thresholding recovery of a sparse vector from y = A x.

    Selects the M columns most correlated (in magnitude) with y and solves
    the regularized least squares on that support; entries off the support
    are zero. Used by the synthetic recovery demo.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    v = A.T @ y
    sel = top_m_select(v, m, mode=SELECT_MAGNITUDE)
    D = A[:, sel]
    coeffs = solve_spd_regularized(D.T @ D, D.T @ y, alpha)
    x = np.zeros(A.shape[1])
    x[sel] = coeffs
    return x
