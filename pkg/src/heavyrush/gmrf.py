"""Precision matrices, GMRF densities, exact sampling, conditional moments.

Three precision families are built over a :class:`~heavyrush.graph.SpatialGraph`:

* Leroux:        Q_L = (1-lam)*I + lam*(D - W)
* Congdon:       Q_C[i,i] = kappa_i*(1-lam+lam*d_i),
                 Q_C[i,j] = -lam*w_ij*kappa_i*kappa_j
* scaled PCAR:   Q = h * (D - rho*W), with h chosen so the geometric mean
                 of the marginal variances diag(Q^{-1}) equals one.

Congdon matrices are not positive definite for every kappa; callers detect
that through a failed Cholesky factorization and treat the log-density as
-inf.  Matrices are stored sparse (pattern = diagonal plus graph edges);
factorizations densify, which is exact and fast at the area counts this
package targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import IsolatedAreaError, NonPositiveKappaError, NotPositiveDefiniteError
from .graph import SpatialGraph, dense_weights

LEROUX = "leroux"
CONGDON = "congdon"
SCALED_PCAR = "scaled-pcar"

# Factorizations use dense LAPACK; refuse silently quadratic memory beyond this.
DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class PrecisionMatrix:
    """Sparse symmetric precision matrix tagged with its structural family."""

    n: int
    matrix: scipy.sparse.csc_array = field(repr=False)
    structure: str
    positive_definite: bool

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T equal to the precision."""

    lower: np.ndarray = field(repr=False)
    log_det: float  # log-determinant of the precision itself


def car_precision_dense(w: np.ndarray, degree: np.ndarray, lam: float, kappa: np.ndarray) -> np.ndarray:
    """Dense Congdon precision from a dense weight matrix.

    With ``kappa`` identically one this reduces entrywise (and bitwise) to
    the Leroux matrix; both public builders share this code path.
    """
    q = w * ((-lam) * np.outer(kappa, kappa))
    np.fill_diagonal(q, kappa * ((1.0 - lam) + lam * degree))
    return q


def _attempt_cholesky(dense: np.ndarray) -> tuple[np.ndarray, float] | None:
    try:
        lower = scipy.linalg.cholesky(dense, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        return None
    diag = np.diag(lower)
    if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
        return None
    return lower, 2.0 * float(np.sum(np.log(diag)))


def _wrap(dense: np.ndarray, structure: str) -> PrecisionMatrix:
    if dense.shape[0] > DENSE_CAP:
        raise ValueError(f"n={dense.shape[0]} exceeds the dense factorization cap {DENSE_CAP}")
    pd = _attempt_cholesky(dense) is not None
    sparse = scipy.sparse.csc_array(dense)
    return PrecisionMatrix(n=dense.shape[0], matrix=sparse, structure=structure, positive_definite=pd)


def build_leroux_precision(g: SpatialGraph, lam: float) -> PrecisionMatrix:
    """Leroux precision (1-lam)*I + lam*(D-W); positive definite for lam in [0,1)."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0,1], got {lam}")
    dense = car_precision_dense(dense_weights(g), g.degree, lam, np.ones(g.n))
    return _wrap(dense, LEROUX)


def build_congdon_precision(g: SpatialGraph, lam: float, kappa: np.ndarray) -> PrecisionMatrix:
    """Congdon precision with per-area scaling components.

    The returned object's ``positive_definite`` flag comes from an attempted
    factorization; kappa far from one can push the matrix outside the PD cone.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0,1], got {lam}")
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (g.n,):
        raise ValueError(f"kappa must have shape ({g.n},), got {kappa.shape}")
    if np.any(kappa <= 0.0):
        bad = int(np.argmax(kappa <= 0.0))
        raise NonPositiveKappaError(f"kappa[{bad}] = {kappa[bad]} is not positive")
    dense = car_precision_dense(dense_weights(g), g.degree, lam, kappa)
    return _wrap(dense, CONGDON)


def build_scaled_pcar_precision(
    g: SpatialGraph, rho: float, dense_cap: int = 2000
) -> tuple[PrecisionMatrix, float]:
    """Proper-CAR precision D - rho*W rescaled to unit geometric-mean marginal variance.

    The scaling constant ``h`` is exp(mean(log diag((D-rho*W)^{-1}))) computed
    from the exact dense inverse; graphs beyond ``dense_cap`` areas are refused
    rather than approximated.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0,1), got {rho}")
    if np.any(g.degree == 0):
        bad = int(np.argmax(g.degree == 0))
        raise IsolatedAreaError(f"area {bad} has no neighbours; D-rho*W would be singular")
    if g.n > dense_cap:
        raise ValueError(f"n={g.n} exceeds the dense inversion cap {dense_cap}")
    q = -rho * dense_weights(g)
    np.fill_diagonal(q, g.degree.astype(float))
    inv_diag = np.diag(np.linalg.inv(q))
    h = float(np.exp(np.mean(np.log(inv_diag))))
    return _wrap(h * q, SCALED_PCAR), h


def cholesky(p: PrecisionMatrix) -> CholeskyFactor:
    """Lower Cholesky factor and log-determinant of a precision matrix.

    Raises :class:`NotPositiveDefiniteError` when factorization fails; this
    is the positive-definiteness check used throughout inference.
    """
    result = _attempt_cholesky(p.dense())
    if result is None:
        raise NotPositiveDefiniteError(f"{p.structure} precision (n={p.n}) is not positive definite")
    lower, log_det = result
    return CholeskyFactor(lower=lower, log_det=log_det)


def gmrf_log_density(
    x: np.ndarray, mean: np.ndarray, p: PrecisionMatrix, sigma: float
) -> float:
    """Log-density of N(mean, sigma^2 * P^{-1}) evaluated at x."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if x.shape != (p.n,) or mean.shape != (p.n,):
        raise ValueError(f"x and mean must have shape ({p.n},)")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    factor = cholesky(p)
    r = x - mean
    quad = float(r @ (p.matrix @ r))
    n = p.n
    return 0.5 * (factor.log_det - 2.0 * n * np.log(sigma)) - 0.5 * n * np.log(2.0 * np.pi) - quad / (
        2.0 * sigma**2
    )


def sample_gmrf(
    rng: np.random.Generator,
    mean: np.ndarray,
    p: PrecisionMatrix,
    sigma: float,
    size: int | None = None,
) -> np.ndarray:
    """Exact draw(s) from N(mean, sigma^2 * P^{-1}) via the Cholesky factor.

    A draw is mean + sigma * L^{-T} z with z standard normal.  ``size=None``
    returns one vector; an integer returns a (size, n) matrix.
    """
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (p.n,):
        raise ValueError(f"mean must have shape ({p.n},)")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    factor = cholesky(p)
    z = rng.standard_normal(p.n if size is None else (p.n, size))
    x = scipy.linalg.solve_triangular(factor.lower, z, lower=True, trans="T", check_finite=False)
    if size is None:
        return mean + sigma * x
    return mean + sigma * x.T


def conditional_moments_congdon(
    i: int,
    t: int,
    b: np.ndarray,
    alpha: float,
    lam: float,
    sigma: float,
    kappa: np.ndarray,
    g: SpatialGraph,
) -> tuple[float, float]:
    """Conditional mean and variance of b[i, t] under the Congdon transition kernel.

    Time is 0-based: for t >= 1 the moments condition on the previous layer
    and the other areas at time t; at t = 0 the autoregressive terms drop out.

        mean = alpha*b[i,t-1] + lam/(1-lam+lam*d_i) * sum_{j~i} kappa_j*(b[j,t]-alpha*b[j,t-1])
        var  = sigma^2 / (kappa_i*(1-lam+lam*d_i))
    """
    b = np.asarray(b, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    n, n_time = b.shape
    if n != g.n or kappa.shape != (n,):
        raise ValueError("b rows and kappa must match the graph's area count")
    if not (0 <= i < n and 0 <= t < n_time):
        raise ValueError(f"indices (i={i}, t={t}) outside the latent matrix")
    c_i = (1.0 - lam) + lam * g.degree[i]
    neighbors = g.neighbors(i)
    if t >= 1:
        diffs = b[neighbors, t] - alpha * b[neighbors, t - 1]
        base = alpha * b[i, t - 1]
    else:
        diffs = b[neighbors, t]
        base = 0.0
    mean = base + (lam / c_i) * float(np.sum(kappa[neighbors] * diffs))
    var = sigma**2 / (kappa[i] * c_i)
    return float(mean), float(var)
