"""Hierarchical Poisson log-posterior over an unconstrained parameterization.

Observed counts y[i,t] are Poisson with mean E_i * exp(beta0 + x_i'beta + b[i,t]).
The latent field b is a first-order autoregression of spatially structured
layers: b_{.1} ~ N(0, sigma^2 Q^{-1}) and b_{.t} | b_{.t-1} ~ N(alpha*b_{.t-1},
sigma^2 Q^{-1}), with Q either the Leroux precision (plain model) or the
Congdon precision carrying per-area scaling components kappa (heavy-tailed
model).  A soft sum-to-zero penalty on the first layer separates it from the
intercept.

Six variants are supported, crossing the kappa prior (absent, independent
gamma, spatially structured log-PCAR) with the temporal mode (alpha fixed at
one, or estimated on (-1,1)).

Sampling happens on an unconstrained vector; the fixed bijection is

    sigma = exp(s),  lambda = logistic(l),  alpha = tanh(a),
    kappa = exp(k)            (gamma prior)
    kappa = exp(-nu/2 + z)    (log-PCAR prior, z free)
    nu = exp(m)

with the matching log-Jacobian terms added to the target so that the
posterior over the unconstrained vector is exactly the constrained posterior.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.special import digamma, expit, gammaln, logit

from .errors import GradientUnavailableError, NotPositiveDefiniteError
from .gmrf import (
    build_congdon_precision,
    build_scaled_pcar_precision,
    car_precision_dense,
    cholesky,
    gmrf_log_density,
)
from .graph import SpatialGraph, dense_weights

LN_2PI = float(np.log(2.0 * np.pi))
LN_2 = float(np.log(2.0))

# Soft sum-to-zero: sum_i b[i,0] ~ N(0, sd = SUM_TO_ZERO_COEFF * n).
SUM_TO_ZERO_COEFF = 0.001


class KappaPrior(str, enum.Enum):
    NONE = "none"
    GAMMA = "gamma"
    LOG_PCAR = "log-pcar"


class AlphaMode(str, enum.Enum):
    FIXED_ONE = "fixed-one"
    ESTIMATED = "estimated"


_TAGS: dict[str, tuple[KappaPrior, AlphaMode]] = {
    "R1": (KappaPrior.NONE, AlphaMode.FIXED_ONE),
    "Ralpha": (KappaPrior.NONE, AlphaMode.ESTIMATED),
    "HR1": (KappaPrior.GAMMA, AlphaMode.FIXED_ONE),
    "HRalpha": (KappaPrior.GAMMA, AlphaMode.ESTIMATED),
    "HRLPC1": (KappaPrior.LOG_PCAR, AlphaMode.FIXED_ONE),
    "HRLPCalpha": (KappaPrior.LOG_PCAR, AlphaMode.ESTIMATED),
}

MODEL_TAGS = tuple(_TAGS)


@dataclass(frozen=True)
class ModelSpec:
    """One of the six model variants plus its prior hyperparameters."""

    kappa_prior: KappaPrior = KappaPrior.NONE
    alpha_mode: AlphaMode = AlphaMode.ESTIMATED
    nu_rate: float | None = None  # None = family default (1/4 gamma, 1/0.3 log-PCAR)
    rho: float = 0.99  # log-PCAR spatial dependence, fixed (not estimated)
    beta0_scale: float = 1.0
    beta_scale: float = 1.0
    sigma_scale: float = 0.1

    @property
    def has_kappa(self) -> bool:
        return self.kappa_prior is not KappaPrior.NONE

    @property
    def estimates_alpha(self) -> bool:
        return self.alpha_mode is AlphaMode.ESTIMATED

    @property
    def resolved_nu_rate(self) -> float:
        if self.nu_rate is not None:
            return self.nu_rate
        if self.kappa_prior is KappaPrior.GAMMA:
            return 1.0 / 4.0
        if self.kappa_prior is KappaPrior.LOG_PCAR:
            return 1.0 / 0.3
        raise ValueError("nu rate undefined without a kappa prior")

    @property
    def tag(self) -> str:
        for tag, combo in _TAGS.items():
            if combo == (self.kappa_prior, self.alpha_mode):
                return tag
        raise AssertionError("unreachable")


def normalize_tag(text: str) -> str:
    """Map user spellings like 'HR-LPC-alpha' onto the canonical model tags."""
    squashed = text.replace("-", "").replace("_", "").lower()
    for tag in _TAGS:
        if squashed == tag.lower():
            return tag
    raise ValueError(f"unknown model tag {text!r}; expected one of {', '.join(_TAGS)}")


def spec_from_tag(tag: str, **overrides) -> ModelSpec:
    kappa_prior, alpha_mode = _TAGS[normalize_tag(tag)]
    return replace(ModelSpec(kappa_prior=kappa_prior, alpha_mode=alpha_mode), **overrides)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Counts y (n areas x T times), constant offsets e (n), covariates x (n x p)."""

    y: np.ndarray
    e: np.ndarray
    x: np.ndarray
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 2:
            raise ValueError("y must be an (n, T) matrix")
        n = y.shape[0]
        e = np.asarray(self.e, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2 or x.shape[0] != n or e.shape != (n,):
            raise ValueError("e must be (n,) and x must be (n, p)")
        if np.any(y < 0) or not np.issubdtype(y.dtype, np.integer):
            raise ValueError("counts must be non-negative integers")
        if np.any(e <= 0.0):
            raise ValueError("offsets must be positive")
        if self.covariate_names and len(self.covariate_names) != x.shape[1]:
            raise ValueError("covariate_names must match the number of columns of x")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_times(self) -> int:
        return self.y.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class ParameterState:
    """One point in the constrained parameter space."""

    beta0: float
    beta: np.ndarray
    sigma: float
    lam: float
    alpha: float
    kappa: np.ndarray
    b: np.ndarray  # (n, T)
    nu: float | None = None
    z: np.ndarray | None = None  # log-PCAR auxiliary; ln(kappa) = -nu/2 + z


class ParameterLayout:
    """Index bookkeeping for the unconstrained vector of one model variant.

    Order: beta0, beta (p), s, l, [a], [kappa block (n): log-kappa or z],
    [m], then b stacked time-major (u[b_off + t*n + i] = b[i, t]).
    """

    def __init__(self, n: int, n_times: int, n_covariates: int, spec: ModelSpec):
        self.n = n
        self.n_times = n_times
        self.n_covariates = n_covariates
        self.spec = spec
        pos = 0
        self.i_beta0 = pos
        pos += 1
        self.sl_beta = slice(pos, pos + n_covariates)
        pos += n_covariates
        self.i_s = pos
        pos += 1
        self.i_l = pos
        pos += 1
        self.i_a = None
        if spec.estimates_alpha:
            self.i_a = pos
            pos += 1
        self.sl_kappa = None
        self.i_m = None
        if spec.has_kappa:
            self.sl_kappa = slice(pos, pos + n)
            pos += n
            self.i_m = pos
            pos += 1
        self.sl_b = slice(pos, pos + n * n_times)
        pos += n * n_times
        self.dim = pos

    def constrain(self, u: np.ndarray) -> ParameterState:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got {u.shape}")
        spec = self.spec
        alpha = float(np.tanh(u[self.i_a])) if spec.estimates_alpha else 1.0
        nu = None
        z = None
        if spec.has_kappa:
            nu = float(np.exp(u[self.i_m]))
            if spec.kappa_prior is KappaPrior.GAMMA:
                kappa = np.exp(u[self.sl_kappa])
            else:
                z = u[self.sl_kappa].copy()
                kappa = np.exp(-0.5 * nu + z)
        else:
            kappa = np.ones(self.n)
        b = u[self.sl_b].reshape(self.n_times, self.n).T.copy()
        return ParameterState(
            beta0=float(u[self.i_beta0]),
            beta=u[self.sl_beta].copy(),
            sigma=float(np.exp(u[self.i_s])),
            lam=float(expit(u[self.i_l])),
            alpha=alpha,
            kappa=kappa,
            nu=nu,
            z=z,
            b=b,
        )

    def unconstrain(self, state: ParameterState) -> np.ndarray:
        spec = self.spec
        u = np.empty(self.dim)
        u[self.i_beta0] = state.beta0
        u[self.sl_beta] = state.beta
        u[self.i_s] = np.log(state.sigma)
        u[self.i_l] = logit(state.lam)
        if spec.estimates_alpha:
            u[self.i_a] = np.arctanh(state.alpha)
        if spec.has_kappa:
            u[self.i_m] = np.log(state.nu)
            if spec.kappa_prior is KappaPrior.GAMMA:
                u[self.sl_kappa] = np.log(state.kappa)
            else:
                if state.z is None:
                    raise ValueError("log-PCAR state requires the auxiliary z vector")
                u[self.sl_kappa] = state.z
        u[self.sl_b] = state.b.T.ravel()
        return u

    def parameter_names(self, covariate_names: tuple[str, ...] = ()) -> list[str]:
        """Names of constrained quantities, aligned with :func:`constrained_draws`."""
        names = ["beta0"]
        for j in range(self.n_covariates):
            label = covariate_names[j] if j < len(covariate_names) else str(j)
            names.append(f"beta[{label}]")
        names += ["sigma", "lambda"]
        if self.spec.estimates_alpha:
            names.append("alpha")
        if self.spec.has_kappa:
            names += [f"kappa[{i}]" for i in range(self.n)]
            names.append("nu")
        names += [f"b[{t},{i}]" for t in range(self.n_times) for i in range(self.n)]
        return names

    def constrained_draws(self, draws_u: np.ndarray) -> np.ndarray:
        """Map unconstrained draws (S, dim) onto the constrained quantities."""
        draws_u = np.atleast_2d(draws_u)
        cols = [draws_u[:, [self.i_beta0]], draws_u[:, self.sl_beta]]
        cols.append(np.exp(draws_u[:, [self.i_s]]))
        cols.append(expit(draws_u[:, [self.i_l]]))
        if self.spec.estimates_alpha:
            cols.append(np.tanh(draws_u[:, [self.i_a]]))
        if self.spec.has_kappa:
            nu = np.exp(draws_u[:, [self.i_m]])
            if self.spec.kappa_prior is KappaPrior.GAMMA:
                cols.append(np.exp(draws_u[:, self.sl_kappa]))
            else:
                cols.append(np.exp(-0.5 * nu + draws_u[:, self.sl_kappa]))
            cols.append(nu)
        cols.append(draws_u[:, self.sl_b])
        return np.hstack(cols)


def _norm_logpdf(x: float, scale: float) -> float:
    return -0.5 * LN_2PI - np.log(scale) - x * x / (2.0 * scale * scale)


def log_likelihood(state: ParameterState, data: Dataset) -> float:
    """Full Poisson log-pmf of the panel at mean E_i * exp(beta0 + x_i'beta + b[i,t])."""
    eta = np.log(data.e)[:, None] + state.beta0 + (data.x @ state.beta)[:, None] + state.b
    with np.errstate(over="ignore"):
        mean = np.exp(eta)
    if not np.all(np.isfinite(mean)):
        return -np.inf
    return float(np.sum(data.y * eta - mean - gammaln(data.y + 1.0)))


def log_prior(state: ParameterState, spec: ModelSpec, g: SpatialGraph) -> float:
    """Joint log-prior including the latent-field terms; -inf when the Congdon
    precision at (lambda, kappa) is not positive definite."""
    if not (0.0 <= state.lam <= 1.0) or state.sigma <= 0.0:
        return -np.inf
    if spec.estimates_alpha and not -1.0 < state.alpha < 1.0:
        return -np.inf
    n, n_times = state.b.shape
    total = _norm_logpdf(state.beta0, spec.beta0_scale)
    total += sum(_norm_logpdf(bj, spec.beta_scale) for bj in state.beta)
    total += LN_2 + _norm_logpdf(state.sigma, spec.sigma_scale)  # half-normal, sigma > 0
    if spec.estimates_alpha:
        total += -LN_2  # uniform(-1, 1)
    if spec.has_kappa:
        rate = spec.resolved_nu_rate
        total += np.log(rate) - rate * state.nu
        if spec.kappa_prior is KappaPrior.GAMMA:
            half = 0.5 * state.nu
            total += float(
                n * (half * np.log(half) - gammaln(half))
                + (half - 1.0) * np.sum(np.log(state.kappa))
                - half * np.sum(state.kappa)
            )
        else:
            q_star, _ = build_scaled_pcar_precision(g, spec.rho)
            total += gmrf_log_density(state.z, np.zeros(n), q_star, np.sqrt(state.nu))
    precision = build_congdon_precision(g, state.lam, state.kappa)
    if not precision.positive_definite:
        return -np.inf
    total += gmrf_log_density(state.b[:, 0], np.zeros(n), precision, state.sigma)
    for t in range(1, n_times):
        total += gmrf_log_density(state.b[:, t], state.alpha * state.b[:, t - 1], precision, state.sigma)
    total += _norm_logpdf(float(np.sum(state.b[:, 0])), SUM_TO_ZERO_COEFF * n)
    return float(total)


class PosteriorTarget:
    """Fused log-posterior and gradient over the unconstrained vector.

    Precomputes everything that depends only on (data, spec, graph); one
    n x n factorization per evaluation serves all T transition layers.
    Evaluations are pure and safe to run concurrently.
    """

    def __init__(self, data: Dataset, spec: ModelSpec, g: SpatialGraph):
        if data.n != g.n:
            raise ValueError("dataset and graph disagree on the number of areas")
        self.data = data
        self.spec = spec
        self.graph = g
        self.layout = ParameterLayout(data.n, data.n_times, data.n_covariates, spec)
        self._w = dense_weights(g)
        self._deg = g.degree.astype(float)
        self._yt = data.y.T.astype(float)  # (T, n)
        self._x = data.x
        self._e = data.e
        self._ones = np.ones(data.n)
        self._eye = np.eye(data.n)
        self._lik_const = float(
            np.sum(data.y * np.log(data.e)[:, None]) - np.sum(gammaln(data.y + 1.0))
        )
        self._s0 = SUM_TO_ZERO_COEFF * data.n
        if spec.kappa_prior is KappaPrior.LOG_PCAR:
            q_star, _ = build_scaled_pcar_precision(g, spec.rho)
            self._q_star = q_star.dense()
            self._q_star_logdet = cholesky(q_star).log_det
        else:
            self._q_star = None
            self._q_star_logdet = 0.0

    @property
    def dim(self) -> int:
        return self.layout.dim

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        """Jittered start near the prior bulk (Congdon matrix safely PD there)."""
        lay, spec = self.layout, self.spec
        u = np.zeros(lay.dim)
        u[lay.i_beta0] = 0.1 * rng.standard_normal()
        u[lay.sl_beta] = 0.1 * rng.standard_normal(lay.n_covariates)
        u[lay.i_s] = np.log(0.1)
        u[lay.i_l] = 0.0  # lambda = 0.5
        if spec.estimates_alpha:
            u[lay.i_a] = np.arctanh(0.5)
        if spec.has_kappa:
            u[lay.sl_kappa] = 0.0  # kappa = 1 (gamma) / z = 0 (log-PCAR)
            u[lay.i_m] = np.log(1.0 / spec.resolved_nu_rate)  # nu at its prior mean
        u[lay.sl_b] = 0.01 * rng.standard_normal(lay.n * lay.n_times)
        return u

    def log_posterior(self, u: np.ndarray) -> float:
        return self._evaluate(u, want_grad=False)[0]

    def grad_log_posterior(self, u: np.ndarray) -> np.ndarray:
        value, grad = self._evaluate(u, want_grad=True)
        if grad is None:
            raise GradientUnavailableError(f"log-posterior is {value} at the requested point")
        return grad

    def logp_and_grad(self, u: np.ndarray) -> tuple[float, np.ndarray | None]:
        return self._evaluate(u, want_grad=True)

    def _evaluate(self, u: np.ndarray, want_grad: bool) -> tuple[float, np.ndarray | None]:
        lay, spec = self.layout, self.spec
        n, n_times = lay.n, lay.n_times
        u = np.asarray(u, dtype=float)
        if u.shape != (lay.dim,):
            raise ValueError(f"expected vector of length {lay.dim}, got {u.shape}")
        if not np.all(np.isfinite(u)):
            return -np.inf, None

        beta0 = u[lay.i_beta0]
        beta = u[lay.sl_beta]
        s = u[lay.i_s]
        sigma = np.exp(s)
        l = u[lay.i_l]
        lam = expit(l)
        alpha = np.tanh(u[lay.i_a]) if spec.estimates_alpha else 1.0
        if spec.has_kappa:
            m = u[lay.i_m]
            nu = np.exp(m)
            if spec.kappa_prior is KappaPrior.GAMMA:
                k_block = u[lay.sl_kappa]
                with np.errstate(over="ignore"):
                    kappa = np.exp(k_block)
            else:
                z = u[lay.sl_kappa]
                with np.errstate(over="ignore"):
                    kappa = np.exp(-0.5 * nu + z)
            if not (np.isfinite(nu) and nu > 0.0 and np.all(np.isfinite(kappa)) and np.all(kappa > 0.0)):
                return -np.inf, None
        else:
            kappa = self._ones
        if not np.isfinite(sigma) or sigma <= 0.0:
            return -np.inf, None

        b_mat = u[lay.sl_b].reshape(n_times, n)  # row t = b_{.t}

        # Poisson likelihood
        xb = self._x @ beta
        lp = beta0 + xb[None, :] + b_mat
        with np.errstate(over="ignore"):
            mu = self._e[None, :] * np.exp(lp)
        if not np.all(np.isfinite(mu)):
            return -np.inf, None
        loglik = float(np.vdot(self._yt, lp)) + self._lik_const - float(mu.sum())

        # Latent-field precision at (lambda, kappa), shared across the T layers
        wkk = self._w * ((-lam) * np.outer(kappa, kappa))
        q = wkk.copy()
        np.fill_diagonal(q, kappa * ((1.0 - lam) + lam * self._deg))
        try:
            chol = scipy.linalg.cholesky(q, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError:
            return -np.inf, None
        log_det_q = 2.0 * float(np.sum(np.log(np.diag(chol))))

        resid = b_mat.copy()
        resid[1:] -= alpha * b_mat[:-1]
        q_resid = resid @ q  # row t = (Q r_t)'
        quad_sum = float(np.vdot(resid, q_resid))
        sum_b0 = float(b_mat[0].sum())

        sig2 = sigma * sigma
        logp = loglik
        logp += 0.5 * n_times * log_det_q - n * n_times * s - 0.5 * n * n_times * LN_2PI
        logp -= quad_sum / (2.0 * sig2)
        logp += _norm_logpdf(sum_b0, self._s0)

        # Priors on the scalar block
        logp += _norm_logpdf(beta0, spec.beta0_scale)
        logp += -lay.n_covariates * (0.5 * LN_2PI + np.log(spec.beta_scale))
        logp -= float(beta @ beta) / (2.0 * spec.beta_scale**2)
        logp += LN_2 + _norm_logpdf(sigma, spec.sigma_scale)
        if spec.estimates_alpha:
            logp += -LN_2

        if spec.has_kappa:
            rate = spec.resolved_nu_rate
            logp += np.log(rate) - rate * nu
            if spec.kappa_prior is KappaPrior.GAMMA:
                half = 0.5 * nu
                sum_log_kappa = float(np.sum(k_block))
                logp += n * (half * np.log(half) - gammaln(half))
                logp += (half - 1.0) * sum_log_kappa - half * float(np.sum(kappa))
            else:
                qz = self._q_star @ z
                z_quad = float(z @ qz)
                logp += 0.5 * (self._q_star_logdet - n * m) - 0.5 * n * LN_2PI
                logp -= z_quad / (2.0 * nu)

        # Change-of-variables terms
        logp += s + (l - 2.0 * np.logaddexp(0.0, l))
        if spec.estimates_alpha:
            one_minus_a2 = 1.0 - alpha * alpha
            if one_minus_a2 <= 0.0:
                return -np.inf, None
            logp += np.log(one_minus_a2)
        if spec.has_kappa:
            logp += m
            if spec.kappa_prior is KappaPrior.GAMMA:
                logp += sum_log_kappa

        if not np.isfinite(logp):
            return -np.inf, None
        if not want_grad:
            return float(logp), None

        # ------------------------------------------------------------- gradient
        grad = np.empty(lay.dim)
        resid_lik = self._yt - mu  # (T, n)

        grad[lay.i_beta0] = float(resid_lik.sum()) - beta0 / spec.beta0_scale**2
        grad[lay.sl_beta] = resid_lik.sum(axis=0) @ self._x - beta / spec.beta_scale**2

        g_b = resid_lik - q_resid / sig2
        g_b[:-1] += (alpha / sig2) * q_resid[1:]
        g_b[0] -= sum_b0 / self._s0**2
        grad[lay.sl_b] = g_b.ravel()

        grad[lay.i_s] = -n * n_times + quad_sum / sig2 - sig2 / spec.sigma_scale**2 + 1.0

        # lambda and kappa gradients share the dense inverse of Q
        q_inv = scipy.linalg.cho_solve((chol, True), self._eye, check_finite=False)
        kd = kappa * (self._deg - 1.0)
        resid_sq = np.einsum("ti,ti->i", resid, resid)
        trace_lam = float(np.sum(np.diag(q_inv) * kd)) - float(np.vdot(q_inv, wkk)) / (-lam) if lam != 0.0 else float(
            np.sum(np.diag(q_inv) * kd)
        ) - float(np.vdot(q_inv, self._w * np.outer(kappa, kappa)))
        # note: wkk = -lam * (W o kk'); dividing by -lam recovers the Hadamard term
        quad_wkk = float(np.vdot(resid, resid @ (self._w * np.outer(kappa, kappa))))
        quad_lam = float(np.sum(kd * resid_sq)) - quad_wkk
        d_lam = 0.5 * n_times * trace_lam - quad_lam / (2.0 * sig2)
        grad[lay.i_l] = d_lam * lam * (1.0 - lam) + (1.0 - 2.0 * lam)

        if spec.estimates_alpha:
            d_alpha = float(np.vdot(b_mat[:-1], q_resid[1:])) / sig2
            grad[lay.i_a] = d_alpha * (1.0 - alpha * alpha) - 2.0 * alpha

        if spec.has_kappa:
            c_vec = (1.0 - lam) + lam * self._deg
            w_qinv = self._w * q_inv
            trace_k = np.diag(q_inv) * c_vec - 2.0 * lam * (w_qinv @ kappa)
            kr = resid * kappa[None, :]
            w_kr = kr @ self._w
            quad_k = resid_sq * c_vec - 2.0 * lam * np.einsum("ti,ti->i", resid, w_kr)
            d_kappa = 0.5 * n_times * trace_k - quad_k / (2.0 * sig2)
            if spec.kappa_prior is KappaPrior.GAMMA:
                d_kappa_prior = (half - 1.0) / kappa - half
                grad[lay.sl_kappa] = (d_kappa + d_kappa_prior) * kappa + 1.0
                d_nu = 0.5 * n * (np.log(half) + 1.0 - digamma(half))
                d_nu += 0.5 * (sum_log_kappa - float(np.sum(kappa)))
                d_nu -= rate
                grad[lay.i_m] = d_nu * nu + 1.0
            else:
                grad[lay.sl_kappa] = d_kappa * kappa - qz / nu
                d_nu = -0.5 * float(np.sum(d_kappa * kappa))
                d_nu += -0.5 * n / nu + z_quad / (2.0 * nu * nu)
                d_nu -= rate
                grad[lay.i_m] = d_nu * nu + 1.0

        if not np.all(np.isfinite(grad)):
            return -np.inf, None
        return float(logp), grad


def log_posterior(u: np.ndarray, data: Dataset, spec: ModelSpec, g: SpatialGraph) -> float:
    """Unconstrained-space target: likelihood + priors + log-Jacobians."""
    return PosteriorTarget(data, spec, g).log_posterior(u)


def grad_log_posterior(u: np.ndarray, data: Dataset, spec: ModelSpec, g: SpatialGraph) -> np.ndarray:
    return PosteriorTarget(data, spec, g).grad_log_posterior(u)


def constrain(u: np.ndarray, layout: ParameterLayout) -> ParameterState:
    return layout.constrain(u)


def unconstrain(state: ParameterState, layout: ParameterLayout) -> np.ndarray:
    return layout.unconstrain(state)


def predictive_quantities(
    draws_u: np.ndarray, data: Dataset, layout: ParameterLayout
) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw per-cell log-densities and the fitted count matrix.

    Returns ``(loglik, fitted)`` where ``loglik`` has shape (S, n*T) with
    cells stacked time-major, and ``fitted[i, t]`` is the posterior mean of
    E_i * exp(linear predictor) — the Bayes estimate of each Poisson mean.
    """
    draws_u = np.atleast_2d(draws_u)
    n, n_times = layout.n, layout.n_times
    b_all = draws_u[:, layout.sl_b].reshape(-1, n_times, n)
    lin = draws_u[:, [layout.i_beta0]][:, :, None] + (draws_u[:, layout.sl_beta] @ data.x.T)[:, None, :]
    lin = lin + b_all  # (S, T, n)
    mu = data.e[None, None, :] * np.exp(lin)
    yt = data.y.T[None, :, :]
    loglik = yt * (np.log(data.e)[None, None, :] + lin) - mu - gammaln(data.y.T + 1.0)[None, :, :]
    fitted = mu.mean(axis=0).T  # (n, T)
    return loglik.reshape(draws_u.shape[0], n * n_times), fitted
