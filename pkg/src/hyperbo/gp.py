"""Exact Gaussian-process regression with an anisotropic squared-exponential kernel.

Inputs are assumed to live in the unit hypercube (one coordinate per search
dimension); outputs are arbitrary scalars.  Fitting factorizes the Gram matrix
once via Cholesky; fitted models are immutable and cheap to query.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

__all__ = [
    "KernelParams",
    "ObservationSet",
    "PosteriorPrediction",
    "FittedGP",
    "StandardizedGP",
    "SingularGramError",
    "se_kernel",
    "se_kernel_matrix",
    "gp_fit",
    "gp_predict",
]

# Jitter escalation used when the Gram matrix fails to factorize.
_JITTER_START = 1e-10
_JITTER_MAX = 1e-4
_JITTER_GROWTH = 10.0


class SingularGramError(np.linalg.LinAlgError):
    """Gram matrix could not be factorized, even at the maximum jitter level."""

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel hyperparameters with one length scale per dimension."""

    signal_variance: float
    length_scales: tuple[float, ...]
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.signal_variance <= 0:
            raise ValueError(f"signal_variance must be > 0, got {self.signal_variance}")
        if self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")
        scales = tuple(float(v) for v in self.length_scales)
        if len(scales) == 0 or any(v <= 0 for v in scales):
            raise ValueError(f"length_scales must be positive, got {scales}")
        object.__setattr__(self, "length_scales", scales)

    @property
    def dim(self) -> int:
        return len(self.length_scales)

    def scales_array(self) -> np.ndarray:
        return np.asarray(self.length_scales, dtype=float)


@dataclass(frozen=True)
class PosteriorPrediction:
    """Posterior mean and (clamped, non-negative) variance at a single point."""

    mean: float
    variance: float


class ObservationSet:
    """Mutable collection of (input, output) pairs with inputs in [0, 1]^d."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = dim
        self._inputs: list[np.ndarray] = []
        self._outputs: list[float] = []

    def append(self, x, y: float) -> None:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ValueError(f"input has dimension {x.shape[0]}, expected {self.dim}")
        if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
            raise ValueError(f"input coordinates must lie in [0, 1], got {x}")
        self._inputs.append(np.clip(x, 0.0, 1.0))
        self._outputs.append(float(y))

    def extend(self, X, y) -> None:
        for xi, yi in zip(np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(y, dtype=float).reshape(-1)):
            self.append(xi, yi)

    @property
    def count(self) -> int:
        return len(self._outputs)

    def __len__(self) -> int:
        return self.count

    @property
    def X(self) -> np.ndarray:
        if not self._inputs:
            return np.empty((0, self.dim))
        return np.vstack(self._inputs)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self._outputs, dtype=float)

    def copy(self) -> "ObservationSet":
        out = ObservationSet(self.dim)
        out._inputs = [x.copy() for x in self._inputs]
        out._outputs = list(self._outputs)
        return out


def se_kernel(x_i, x_j, params: KernelParams) -> float:
    """Squared-exponential covariance between two points.

    k(x, x') = signal_variance * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)
    """
    x_i = np.asarray(x_i, dtype=float).reshape(-1)
    x_j = np.asarray(x_j, dtype=float).reshape(-1)
    if x_i.shape[0] != params.dim or x_j.shape[0] != params.dim:
        raise ValueError(
            f"point dimensions ({x_i.shape[0]}, {x_j.shape[0]}) do not match kernel dimension {params.dim}"
        )
    scaled = (x_i - x_j) / params.scales_array()
    return float(params.signal_variance * np.exp(-0.5 * np.dot(scaled, scaled)))


def se_kernel_matrix(X, Z, params: KernelParams) -> np.ndarray:
    """Cross-covariance matrix K[i, j] = k(X[i], Z[j]) under the SE kernel."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if X.shape[1] != params.dim or Z.shape[1] != params.dim:
        raise ValueError("input dimension does not match kernel dimension")
    ls = params.scales_array()
    diff = X[:, None, :] / ls - Z[None, :, :] / ls
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return params.signal_variance * np.exp(-0.5 * sq)


def _has_duplicate_rows(X: np.ndarray) -> bool:
    if X.shape[0] < 2:
        return False
    # Exact duplicates only: with zero noise they make interpolation ill-posed.
    uniq = np.unique(X, axis=0)
    return uniq.shape[0] < X.shape[0]


@dataclass(frozen=True)
class FittedGP:
    """Immutable GP posterior: Cholesky factor of (K + noise*I) plus solved weights."""

    X: np.ndarray
    y: np.ndarray
    params: KernelParams
    chol: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def count(self) -> int:
        return self.X.shape[0]

    def predict(self, x) -> PosteriorPrediction:
        means, variances = self.predict_batch(np.atleast_2d(np.asarray(x, dtype=float)))
        return PosteriorPrediction(mean=float(means[0]), variance=float(variances[0]))

    def predict_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and variances at each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        k_star = se_kernel_matrix(self.X, X, self.params)  # (t, m)
        means = k_star.T @ self.weights
        v = solve_triangular(self.chol, k_star, lower=True)
        variances = self.params.signal_variance - np.einsum("ij,ij->j", v, v)
        variances = np.clip(variances, 0.0, self.params.signal_variance)
        return means, variances

    def predict_joint(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean vector and full covariance matrix over the rows of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        k_star = se_kernel_matrix(self.X, X, self.params)
        means = k_star.T @ self.weights
        prior = se_kernel_matrix(X, X, self.params)
        v = solve_triangular(self.chol, k_star, lower=True)
        cov = prior - v.T @ v
        return means, cov


def gp_fit(data: ObservationSet, params: KernelParams) -> FittedGP:
    """Factorize the regularized Gram matrix and cache the weight vector.

    Jitter policy: on Cholesky failure, add jitter starting at 1e-10 *
    signal_variance to the diagonal and escalate tenfold up to 1e-4 *
    signal_variance before giving up.  Exact duplicate inputs with zero noise
    are rejected outright: the Gram matrix is rank-deficient by construction
    and jitter would only mask the ill-posed interpolation problem.
    """
    if data.count < 1:
        raise ValueError("gp_fit requires at least one observation")
    if params.dim != data.dim:
        raise ValueError(f"kernel dimension {params.dim} does not match data dimension {data.dim}")
    X, y = data.X, data.y
    if params.noise_variance == 0.0 and _has_duplicate_rows(X):
        raise SingularGramError(
            "Gram matrix is rank-deficient: duplicate inputs with zero noise variance",
            jitter=0.0,
        )
    gram = se_kernel_matrix(X, X, params)
    gram[np.diag_indices_from(gram)] += params.noise_variance

    jitter = 0.0
    while True:
        try:
            chol = cholesky(gram + jitter * np.eye(len(y)), lower=True)
            break
        except np.linalg.LinAlgError:
            if jitter == 0.0:
                jitter = _JITTER_START * params.signal_variance
            elif jitter < _JITTER_MAX * params.signal_variance:
                jitter = min(jitter * _JITTER_GROWTH, _JITTER_MAX * params.signal_variance)
            else:
                raise SingularGramError(
                    f"Cholesky factorization failed at maximum jitter {jitter:g}",
                    jitter=jitter,
                ) from None
    weights = cho_solve((chol, True), y)
    return FittedGP(X=X.copy(), y=y.copy(), params=params, chol=chol, weights=weights, jitter=jitter)


def gp_predict(model: FittedGP, x) -> PosteriorPrediction:
    """Posterior mean/variance at a single point (functional form of model.predict)."""
    return model.predict(x)


class StandardizedGP:
    """GP fit on zero-mean/unit-variance outputs, reporting predictions in raw units.

    The shift and scale are estimated from the training outputs; predictions
    are mapped back with mean -> mean * scale + shift and variance ->
    variance * scale^2.
    """

    def __init__(self, data: ObservationSet, params: KernelParams):
        y = data.y
        self.shift = float(np.mean(y))
        scale = float(np.std(y))
        self.scale = scale if scale > 1e-12 else 1.0
        std_data = ObservationSet(data.dim)
        std_data.extend(data.X, (y - self.shift) / self.scale)
        self.model = gp_fit(std_data, params)

    def predict(self, x) -> PosteriorPrediction:
        inner = self.model.predict(x)
        return PosteriorPrediction(
            mean=inner.mean * self.scale + self.shift,
            variance=inner.variance * self.scale**2,
        )

    def predict_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        means, variances = self.model.predict_batch(X)
        return means * self.scale + self.shift, variances * self.scale**2
