"""Dense numerical kernels shared by the classifiers.

Regularized SPD solves via Cholesky factorization, deterministic top-M
selection with ascending-index tie-breaking, a power-iteration first
principal component for guidance images, and the mutual coherence
diagnostic.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from btckit.data import Dictionary, HsiCube, NORM_L2
from btckit.errors import ConfigError, NumericalError

SELECT_MAGNITUDE = "magnitude"
SELECT_RAW = "raw"


def solve_spd_regularized(G: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Solve (G + alpha*I) x = b via Cholesky factorization.

    G must be symmetric and G + alpha*I numerically positive definite.
    No explicit inverse is formed.
    """
    G = np.asarray(G, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ConfigError(f"G must be square, got shape {G.shape}")
    if b.shape != (G.shape[0],):
        raise ConfigError(f"b length {b.shape} does not match G order {G.shape[0]}")
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    system = G + alpha * np.eye(G.shape[0])
    try:
        chol = scipy.linalg.cho_factor(system, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"SPD factorization failed: {exc}") from exc
    return scipy.linalg.cho_solve(chol, b, check_finite=False)


def top_m_select(v: np.ndarray, m: int, mode: str = SELECT_MAGNITUDE) -> np.ndarray:
    """Indices of the M largest entries of v, ties broken by ascending index.

    ``magnitude`` ranks by |v_i|, ``raw`` by the signed value. The result is
    in selection order (descending score).
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if not 1 <= m <= n:
        raise ConfigError(f"M={m} out of range [1, {n}]")
    if mode == SELECT_MAGNITUDE:
        scores = np.abs(v)
    elif mode == SELECT_RAW:
        scores = v
    else:
        raise ConfigError(f"unknown selection mode {mode!r}")
    # stable sort on -scores keeps ascending original index among ties
    order = np.argsort(-scores, kind="stable")
    return order[:m]


def top_m_select_excluding(
    v: np.ndarray, m: int, excluded: int, mode: str = SELECT_MAGNITUDE
) -> np.ndarray:
    """Top-M selection that skips one index; returns M-1 indices."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if not 2 <= m <= n:
        raise ConfigError(f"M={m} out of range [2, {n}]")
    if not 0 <= excluded < n:
        raise ConfigError(f"excluded index {excluded} out of range")
    order = top_m_select(v, n, mode=mode)
    order = order[order != excluded]
    return order[: m - 1]


def pca_first_component(
    cube: HsiCube, tol: float = 1e-8, max_iter: int = 1000
) -> np.ndarray:
    """First principal component image of a cube, min-max normalized to [0, 1].

    The dominant eigenvector of the band covariance is found by power
    iteration; the sign is fixed so the component correlates non-negatively
    with the band-mean image.
    """
    h, w, b = cube.height, cube.width, cube.bands
    X = cube.values.reshape(h * w, b)
    if b == 1:
        return _min_max(X[:, 0]).reshape(h, w)
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / max(h * w - 1, 1)

    vec = np.ones(b) / np.sqrt(b)
    eig = 0.0
    for _ in range(max_iter):
        nxt = cov @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0:  # zero covariance: constant cube
            score = np.zeros(h * w)
            return score.reshape(h, w)
        nxt /= norm
        new_eig = float(nxt @ cov @ nxt)
        if abs(new_eig - eig) <= tol * max(abs(new_eig), 1e-300):
            vec, eig = nxt, new_eig
            break
        vec, eig = nxt, new_eig
    else:
        resid = float(np.linalg.norm(cov @ vec - eig * vec))
        raise NumericalError(
            f"power iteration did not converge after {max_iter} iterations "
            f"(Rayleigh residual {resid:.3e})"
        )

    score = Xc @ vec
    mean_img = Xc.mean(axis=1)
    if float(score @ mean_img) < 0:
        score = -score
    return _min_max(score).reshape(h, w)


def _min_max(v: np.ndarray) -> np.ndarray:
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def mutual_coherence(dictionary: Dictionary) -> float:
    """Maximum absolute inner product over distinct column pairs."""
    if dictionary.norm_mode != NORM_L2:
        raise ConfigError("mutual coherence requires unit-norm columns")
    if dictionary.n_samples < 2:
        raise ConfigError("mutual coherence needs at least 2 columns")
    gram = dictionary.columns.T @ dictionary.columns
    np.fill_diagonal(gram, 0.0)
    return float(np.abs(gram).max())
