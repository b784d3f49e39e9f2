"""Linear-Gaussian primitives shared by every filter in the package."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

_LOG_2PI = np.log(2.0 * np.pi)
_CHOL_TOL = 1e-12


class SingularCovarianceError(np.linalg.LinAlgError):
    """Raised when a covariance that must be positive definite is not."""


class SingularInnovationError(SingularCovarianceError):
    """Raised when the innovation covariance of an update is singular."""


def log_sum_exp(values) -> float:
    """``log(sum(exp(values)))`` for a short sequence; -inf when empty."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return -np.inf
    top = a.max()
    if not np.isfinite(top):
        return float(top)
    return float(top + np.log(np.exp(a - top).sum()))


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"mean of shape {mean.shape} does not match cov of shape {cov.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def is_valid(self, tol: float = 1e-9) -> bool:
        """Symmetric within ``tol`` (relative) and PSD up to ``-tol * trace``."""
        P = self.cov
        scale = max(np.abs(P).max(), 1.0)
        if np.abs(P - P.T).max() > tol * scale:
            return False
        eig = np.linalg.eigvalsh(symmetrize(P))
        return bool(eig.min() >= -tol * max(np.trace(P), 1.0))


@dataclass(frozen=True)
class LinearObservation:
    """Observation ``z = H x + v`` with ``v ~ N(0, noise_cov)``."""

    matrix: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        R = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        if R.shape != (H.shape[0], H.shape[0]):
            raise ValueError(f"noise_cov of shape {R.shape} does not fit H {H.shape}")
        if not np.allclose(R, R.T) or np.linalg.eigvalsh(symmetrize(R)).min() <= 0:
            raise ValueError("noise_cov must be symmetric positive definite")
        object.__setattr__(self, "matrix", H)
        object.__setattr__(self, "noise_cov", R)


def _cholesky(S: np.ndarray, exc=SingularCovarianceError):
    if not np.all(np.isfinite(S)):
        raise exc("covariance has non-finite entries")
    try:
        c, low = cho_factor(S, lower=True, check_finite=False)
    except LinAlgError as err:
        raise exc(str(err)) from None
    # pivot^2 relative to the trace; cho_factor alone accepts near-singular S
    diag = np.diag(c)
    if diag.min() ** 2 <= _CHOL_TOL * np.trace(S):
        raise exc("covariance is numerically singular")
    return c, low


def log_gaussian_eval(x, g: Gaussian) -> float:
    """Log of the normal density ``N(x; g.mean, g.cov)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != g.mean.shape:
        raise ValueError(f"point of shape {x.shape} vs mean of shape {g.mean.shape}")
    c, low = _cholesky(g.cov)
    return _log_pdf_chol(x - g.mean, c, low)


def _log_pdf_chol(d: np.ndarray, c: np.ndarray, low: bool) -> float:
    sol = cho_solve((c, low), d, check_finite=False)
    logdet = 2.0 * np.log(np.diag(c)).sum()
    return float(-0.5 * (d.size * _LOG_2PI + logdet + d @ sol))


def gaussian_eval(x, g: Gaussian) -> float:
    return float(np.exp(log_gaussian_eval(x, g)))


def innovation(prior: Gaussian, obs: LinearObservation):
    """Predicted measurement mean and innovation covariance ``S``."""
    H = obs.matrix
    if H.shape[1] != prior.dim:
        raise ValueError(f"H with {H.shape[1]} columns applied to {prior.dim}-D state")
    z_hat = H @ prior.mean
    S = symmetrize(H @ prior.cov @ H.T + obs.noise_cov)
    return z_hat, S


def kalman_update_log(prior: Gaussian, obs: LinearObservation, z):
    """Kalman update returning the posterior and the log marginal likelihood.

    The likelihood is ``log N(z; H m, H P H^T + R)``. Raises
    SingularInnovationError when ``S`` cannot be Cholesky-factorised.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    H = obs.matrix
    z_hat, S = innovation(prior, obs)
    if z.shape != z_hat.shape:
        raise ValueError(f"measurement of shape {z.shape}, expected {z_hat.shape}")
    c, low = _cholesky(S, SingularInnovationError)
    PHt = prior.cov @ H.T
    d = z - z_hat
    # K = P H^T S^{-1}
    K = cho_solve((c, low), PHt.T, check_finite=False).T
    mean = prior.mean + K @ d
    cov = symmetrize(prior.cov - K @ PHt.T)
    return Gaussian(mean, cov), _log_pdf_chol(d, c, low)


def kalman_update(prior: Gaussian, obs: LinearObservation, z):
    post, loglik = kalman_update_log(prior, obs, z)
    return post, float(np.exp(loglik))


def predict_two_step(prior: Gaussian, F, Q) -> Gaussian:
    """Joint Gaussian of ``(x_k, x_{k+1})`` under ``x_{k+1} = F x_k + w``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = prior.dim
    if F.shape != (n, n) or Q.shape != (n, n):
        raise ValueError(f"F {F.shape} / Q {Q.shape} do not match a {n}-D prior")
    m, P = prior.mean, prior.cov
    FP = F @ P
    cov = np.block([[P, FP.T], [FP, FP @ F.T + Q]])
    return Gaussian(np.concatenate([m, F @ m]), symmetrize(cov))


def marginal_block(g: Gaussian, block) -> Gaussian:
    """Marginal over a contiguous index range ``block`` (a slice or (start, stop))."""
    if isinstance(block, slice):
        if block.step not in (None, 1):
            raise IndexError("blocks must be contiguous")
        start = 0 if block.start is None else block.start
        stop = g.dim if block.stop is None else block.stop
    else:
        start, stop = block
    if not (0 <= start < stop <= g.dim):
        raise IndexError(f"block [{start}, {stop}) outside a {g.dim}-D Gaussian")
    return Gaussian(g.mean[start:stop].copy(), g.cov[start:stop, start:stop].copy())


def moment_match(weights, gaussians) -> Gaussian:
    """Single Gaussian with the mean and covariance of a weighted mixture."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    means = np.stack([g.mean for g in gaussians])
    mean = w @ means
    cov = np.zeros((mean.size, mean.size))
    for wi, g in zip(w, gaussians):
        d = g.mean - mean
        cov += wi * (g.cov + np.outer(d, d))
    return Gaussian(mean, symmetrize(cov))
