"""Kernel basic thresholding classifier with RBF kernel and Gram caching.

The linear correlation and reconstruction steps are replaced by their
kernel-space counterparts: selection on K(A, y), a regularized solve on the
cached Gram submatrix, and residuals expanded entirely in kernel
evaluations. Both the kernel width gamma and the threshold M are estimated
off-line from the dictionary via the averaged sufficient-identification
ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from btckit.btc import ResidualVector, SparseCode
from btckit.data import Dictionary
from btckit.errors import ConfigError, NumericalError
from btckit.linalg import (
    SELECT_MAGNITUDE,
    SELECT_RAW,
    solve_spd_regularized,
    top_m_select,
)

KERNEL_RBF = "rbf"
KERNEL_LINEAR = "linear"

# radicands of kernel residuals may dip slightly below zero from rounding;
# anything worse than this is treated as a numerical integrity failure
_RADICAND_FLOOR = -1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind and, for the RBF kernel, its width gamma."""

    kind: str = KERNEL_RBF
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (KERNEL_RBF, KERNEL_LINEAR):
            raise ConfigError(f"unknown kernel {self.kind!r}")
        if self.kind == KERNEL_RBF and not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError(f"gamma must be finite and positive, got {self.gamma}")

    @property
    def selection_mode(self) -> str:
        # RBF values are strictly positive: raw ranking; linear values may
        # be signed: magnitude ranking
        return SELECT_RAW if self.kind == KERNEL_RBF else SELECT_MAGNITUDE


@dataclass(frozen=True)
class KernelCache:
    """Precomputed N x N Gram matrix of the dictionary columns."""

    gram: np.ndarray
    spec: KernelSpec


@dataclass(frozen=True)
class KbtcParams:
    """Threshold M, regularization alpha, and kernel choice."""

    m: int
    alpha: float
    spec: KernelSpec

    def validate(self, n_features: int, n_samples: int) -> None:
        if not 1 <= self.m < n_features:
            raise ConfigError(f"M={self.m} must satisfy 1 <= M < B={n_features}")
        if self.m > n_samples:
            raise ConfigError(f"M={self.m} exceeds sample count {n_samples}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha={self.alpha} must lie in (0, 1)")


def kernel_matrix(X: np.ndarray, Y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Pairwise kernel evaluations between the columns of X and Y."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if spec.kind == KERNEL_LINEAR:
        out = X.T @ Y
    else:
        sq_x = np.sum(X * X, axis=0)[:, None]
        sq_y = np.sum(Y * Y, axis=0)[None, :]
        d2 = np.maximum(sq_x + sq_y - 2.0 * (X.T @ Y), 0.0)
        out = np.exp(-spec.gamma * d2)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite kernel value")
    return out


def kernel_vector(dictionary: Dictionary, y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """K(A, y): kernel of every dictionary column against one sample."""
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    return kernel_matrix(dictionary.columns, y, spec)[:, 0]


def kernel_cache(dictionary: Dictionary, spec: KernelSpec) -> KernelCache:
    """Compute the full training Gram matrix once."""
    gram = kernel_matrix(dictionary.columns, dictionary.columns, spec)
    return KernelCache(gram=gram, spec=spec)


def _self_kernel(y: np.ndarray, spec: KernelSpec) -> float:
    if spec.kind == KERNEL_RBF:
        return 1.0
    return float(y @ y)


def kbtc_classify(
    dictionary: Dictionary,
    y: np.ndarray,
    params: KbtcParams,
    cache: KernelCache,
    support: np.ndarray | None = None,
) -> tuple[ResidualVector, SparseCode]:
    """Classify one sample with the kernel BTC.

    Residuals are computed in kernel space:
    eps(j)^2 = K(y,y) - 2 x_j' K(A_j,y) + x_j' K(A_j,A_j) x_j.
    An explicit ``support`` overrides the selection step.
    """
    params.validate(dictionary.n_features, dictionary.n_samples)
    if cache.spec != params.spec:
        raise ConfigError("kernel cache was built with a different spec")
    y = np.asarray(y, dtype=np.float64)

    v = kernel_vector(dictionary, y, params.spec)
    if support is None:
        support = top_m_select(v, params.m, mode=params.spec.selection_mode)
    else:
        support = np.asarray(support, dtype=np.int64)

    sub = cache.gram[np.ix_(support, support)]
    coeffs = solve_spd_regularized(sub, v[support], params.alpha)
    code = SparseCode(support=support, coefficients=coeffs, ambient_size=dictionary.n_samples)

    kyy = _self_kernel(y, params.spec)
    residuals = _kernel_residuals(dictionary, cache, support, coeffs, v, kyy)
    return ResidualVector(values=residuals), code


def kbtc_residual_alt(
    dictionary: Dictionary,
    y: np.ndarray,
    code: SparseCode,
    cache: KernelCache,
) -> ResidualVector:
    """Alternative residual |K(y,y) - x_j' K(A_j,y)| per class."""
    y = np.asarray(y, dtype=np.float64)
    v = kernel_vector(dictionary, y, cache.spec)
    kyy = _self_kernel(y, cache.spec)
    residuals = np.empty(dictionary.n_classes)
    for cid, start, count in dictionary.class_offsets:
        in_class = (code.support >= start) & (code.support < start + count)
        cross = float(code.coefficients[in_class] @ v[code.support[in_class]])
        residuals[cid - 1] = abs(kyy - cross)
    return ResidualVector(values=residuals)


def _kernel_residuals(
    dictionary: Dictionary,
    cache: KernelCache,
    support: np.ndarray,
    coeffs: np.ndarray,
    v: np.ndarray,
    kyy: float,
) -> np.ndarray:
    residuals = np.empty(dictionary.n_classes)
    for cid, start, count in dictionary.class_offsets:
        in_class = (support >= start) & (support < start + count)
        if not np.any(in_class):
            residuals[cid - 1] = np.sqrt(max(kyy, 0.0))
            continue
        s = support[in_class]
        x = coeffs[in_class]
        sq = kyy - 2.0 * float(x @ v[s]) + float(x @ cache.gram[np.ix_(s, s)] @ x)
        if sq < _RADICAND_FLOOR:
            raise NumericalError(f"negative residual radicand {sq:.3e} for class {cid}")
        residuals[cid - 1] = np.sqrt(max(sq, 0.0))
    return residuals


def kbtc_beta_sample(
    dictionary: Dictionary,
    class_id: int,
    sample_idx: int,
    params: KbtcParams,
    cache: KernelCache,
) -> float:
    """Kernel sufficient-identification ratio for one training column."""
    if params.m < 2:
        raise ConfigError("beta requires M >= 2")
    params.validate(dictionary.n_features, dictionary.n_samples)
    if dictionary.n_classes < 2:
        raise ConfigError("beta needs at least 2 classes")
    sl = dictionary.class_slice(class_id)
    if not 0 <= sample_idx < sl.stop - sl.start:
        raise ConfigError(f"sample_idx {sample_idx} out of class {class_id} range")
    col = sl.start + sample_idx
    order = top_m_select(
        cache.gram[:, col], dictionary.n_samples, mode=params.spec.selection_mode
    )
    sel = order[order != col][: params.m - 1]
    return _kernel_beta_on_support(dictionary, cache, col, int(class_id), sel, params.alpha)


def _kernel_beta_on_support(
    dictionary: Dictionary,
    cache: KernelCache,
    col: int,
    own_class: int,
    sel: np.ndarray,
    alpha: float,
) -> float:
    v = cache.gram[:, col]
    if sel.size:
        coeffs = solve_spd_regularized(cache.gram[np.ix_(sel, sel)], v[sel], alpha)
    else:
        coeffs = np.empty(0)
    kyy = float(cache.gram[col, col])
    residuals = _kernel_residuals(dictionary, cache, sel, coeffs, v, kyy)
    rivals = np.delete(residuals, own_class - 1)
    denom = rivals.min()
    if denom == 0:
        return np.inf
    return float(residuals[own_class - 1] / denom)


def kbtc_gamma_profile(
    dictionary: Dictionary,
    alpha: float,
    gamma_grid: list[float] | np.ndarray | None = None,
    subsample_m: int = 1,
    kind: str = KERNEL_RBF,
) -> list[tuple[float, float]]:
    """Average identification ratio over all (M, sample) pairs per gamma.

    For each grid point, beta is averaged over M = 1..B-1 and all N
    columns with a shared kernel cache. M = 1 leaves an empty support and
    contributes exactly 1. ``subsample_m`` strides the M loop for large B.
    """
    if gamma_grid is None:
        gamma_grid = default_gamma_grid()
    gammas = [float(g) for g in gamma_grid]
    if not gammas:
        raise ConfigError("empty gamma grid")
    if dictionary.n_classes < 2:
        raise ConfigError("gamma estimation needs at least 2 classes")
    if subsample_m < 1:
        raise ConfigError("subsample_m must be >= 1")

    profile = []
    for gamma in gammas:
        spec = KernelSpec(kind=kind, gamma=gamma)
        cache = kernel_cache(dictionary, spec)
        ms = list(range(1, dictionary.n_features, subsample_m))
        profile.append((gamma, _beta_double_average(dictionary, cache, alpha, ms)))
    return profile


def _beta_double_average(
    dictionary: Dictionary, cache: KernelCache, alpha: float, ms: list[int]
) -> float:
    n = dictionary.n_samples
    labels = dictionary.column_labels()
    orders = np.argsort(
        -cache.gram if cache.spec.selection_mode == SELECT_RAW else -np.abs(cache.gram),
        axis=0,
        kind="stable",
    )
    total = 0.0
    for g in range(n):
        order = orders[:, g]
        ranked = order[order != g]
        for m in ms:
            sel = ranked[: m - 1]
            total += _kernel_beta_on_support(
                dictionary, cache, g, int(labels[g]), sel, alpha
            )
    return total / (len(ms) * n)


def kbtc_beta_average_m(
    dictionary: Dictionary, cache: KernelCache, m: int, alpha: float
) -> float:
    """Average identification ratio over all columns for a fixed M."""
    return _beta_double_average(dictionary, cache, alpha, [m])


def kbtc_estimate_params(
    dictionary: Dictionary,
    alpha: float,
    gamma_grid: list[float] | np.ndarray | None = None,
    subsample_m: int = 1,
) -> tuple[float, int, list[tuple[float, float]], list[tuple[int, float]]]:
    """Two-stage estimation: gamma from the grid, then M at the chosen gamma.

    Returns (gamma_hat, m_hat, gamma_profile, m_profile). The first grid
    point attaining the minimum wins for gamma; the smallest M wins on M
    ties.
    """
    gamma_profile = kbtc_gamma_profile(dictionary, alpha, gamma_grid, subsample_m)
    gamma_hat = min(gamma_profile, key=lambda t: t[1])[0]

    spec = KernelSpec(kind=KERNEL_RBF, gamma=gamma_hat)
    cache = kernel_cache(dictionary, spec)
    labels = dictionary.column_labels()
    orders = np.argsort(-cache.gram, axis=0, kind="stable")
    n = dictionary.n_samples
    m_profile = []
    for m in range(2, dictionary.n_features):
        total = 0.0
        for g in range(n):
            ranked = orders[:, g]
            sel = ranked[ranked != g][: m - 1]
            total += _kernel_beta_on_support(dictionary, cache, g, int(labels[g]), sel, alpha)
        m_profile.append((m, total / n))
    if not m_profile:
        raise ConfigError("feature dimension too small to estimate M")
    m_hat = min(m_profile, key=lambda t: (t[1], t[0]))[0]
    return gamma_hat, m_hat, gamma_profile, m_profile


def default_gamma_grid() -> list[float]:
    """Powers of two from 2^-10 up to 2^1."""
    return [2.0**e for e in range(-10, 2)]
