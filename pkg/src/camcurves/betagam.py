"""Beta-family generalised additive models with a logit link.

The linear predictor combines treatment-coded factor effects (tuning,
dataset, architecture) with reduced-rank cubic spline smooths of
log(num_tr_images), one smooth per dataset level.  The response is a
(0,1)-valued metric modelled as Beta(mu*phi, (1-mu)*phi) with a single
global precision phi.

Fitting maximizes the penalized log-likelihood

    sum_i loglik(y_i; mu_i, phi) - 1/2 * sum_s lambda_s * gamma_s' S_s gamma_s

by Fisher-scoring steps for the coefficients and one-dimensional Newton
steps for log(phi), with step halving so the objective never decreases.
Smoothing parameters are chosen by AIC = -2*loglik + 2*(EDF + 1) over a
log-spaced grid, searched coordinate-wise with warm starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import stats
from scipy.special import digamma, gammaln

from ._numeric import inv_logit, logit, trigamma
from .errors import ConvergenceError, InputError
from .metrics import METRIC_KINDS, MetricObservation
from .splines import KnotVector, _cardinal_rows, _natural_spline_system, place_knots

DEFAULT_LAMBDA_GRID = tuple(10.0 ** np.linspace(-4.0, 6.0, 21))

_PHI_MIN, _PHI_MAX = 1e-2, 1e8

INTERCEPT = "(intercept)"


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorTerm:
    name: str
    reference: str


@dataclass(frozen=True)
class SmoothTerm:
    covariate: str = "num_tr_images"
    by_factor: str | None = "dataset"
    k: int = 5

    @property
    def label(self) -> str:
        if self.by_factor is None:
            return f"s({self.covariate})"
        return f"s({self.covariate}):{self.by_factor}"


DEFAULT_FACTORS = (
    FactorTerm("tuning", "deep"),
    FactorTerm("dataset", "AU"),
    FactorTerm("architecture", "dnsNet121"),
)


@dataclass(frozen=True)
class ModelSpec:
    """Which terms enter the model, and the squeeze width for boundary values."""

    response: str
    parametric_terms: tuple[FactorTerm, ...] = DEFAULT_FACTORS
    smooth_terms: tuple[SmoothTerm, ...] = (SmoothTerm(),)
    squeeze_eps: float = 1e-4

    def __post_init__(self):
        if self.response not in METRIC_KINDS:
            raise InputError(f"unknown metric kind {self.response!r}")
        names = [t.name for t in self.parametric_terms]
        if len(names) != len(set(names)):
            raise InputError("duplicate parametric terms")

    def without(self, term_label: str) -> "ModelSpec":
        """Copy of this spec with one term dropped."""
        if any(t.name == term_label for t in self.parametric_terms):
            return replace(
                self,
                parametric_terms=tuple(
                    t for t in self.parametric_terms if t.name != term_label
                ),
            )
        if any(t.label == term_label for t in self.smooth_terms):
            return replace(
                self,
                smooth_terms=tuple(t for t in self.smooth_terms if t.label != term_label),
            )
        raise InputError(f"unknown term {term_label!r}")


def default_spec(metric: str) -> ModelSpec:
    return ModelSpec(response=metric)


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------


def squeeze(y, eps: float = 1e-4):
    """Pull boundary values into the open interval: min(max(y, eps), 1-eps)."""
    if not 0.0 < eps < 0.5:
        raise InputError(f"squeeze eps must lie in (0, 0.5), got {eps}")
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InputError("values to squeeze must lie in [0, 1]")
    out = np.clip(arr, eps, 1.0 - eps)
    return float(out) if out.ndim == 0 else out


def beta_loglik(y, mu, phi):
    """Log Beta density at y under mean mu and precision phi, with gradient.

    Shapes are alpha = mu*phi and beta = (1-mu)*phi.  Returns
    (loglik, d/d logit(mu), d/d log(phi)), elementwise over broadcast inputs.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(y <= 0.0) or np.any(y >= 1.0):
        raise InputError("response values must lie strictly inside (0, 1); squeeze first")
    if np.any(mu <= 0.0) or np.any(mu >= 1.0):
        raise InputError("mean values must lie strictly inside (0, 1)")
    if np.any(phi <= 0.0):
        raise InputError("precision must be positive")
    a = mu * phi
    b = (1.0 - mu) * phi
    ylog = np.log(y)
    y1log = np.log1p(-y)
    ll = gammaln(phi) - gammaln(a) - gammaln(b) + (a - 1.0) * ylog + (b - 1.0) * y1log
    ystar = ylog - y1log
    mustar = digamma(a) - digamma(b)
    d_logit_mu = phi * (ystar - mustar) * mu * (1.0 - mu)
    d_log_phi = phi * (
        digamma(phi) - mu * digamma(a) - (1.0 - mu) * digamma(b) + mu * ylog + (1.0 - mu) * y1log
    )
    if ll.ndim == 0:
        return float(ll), float(d_logit_mu), float(d_log_phi)
    return ll, d_logit_mu, d_log_phi


def penalized_loglik(beta, log_phi: float, X, y, penalty):
    """Penalized objective and its analytic gradient in (beta, log_phi).

    `penalty` is the assembled coefficient penalty matrix P, so the
    objective is sum_i loglik_i - 1/2 beta' P beta.
    """
    beta = np.asarray(beta, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    penalty = np.asarray(penalty, dtype=float)
    phi = float(np.exp(log_phi))
    mu = inv_logit(X @ beta)
    ll, d_logit_mu, d_log_phi = beta_loglik(y, mu, phi)
    value = float(np.sum(ll)) - 0.5 * float(beta @ penalty @ beta)
    grad = np.empty(beta.size + 1)
    grad[:-1] = X.T @ d_logit_mu - penalty @ beta
    grad[-1] = float(np.sum(d_log_phi))
    return value, grad


def _ll_sum(y, eta, phi, ylog, y1log):
    mu = inv_logit(eta)
    a = mu * phi
    b = (1.0 - mu) * phi
    return float(
        np.sum(gammaln(phi) - gammaln(a) - gammaln(b) + (a - 1.0) * ylog + (b - 1.0) * y1log)
    )


# ---------------------------------------------------------------------------
# design assembly
# ---------------------------------------------------------------------------


@dataclass
class _Design:
    X: np.ndarray
    y: np.ndarray
    coef_names: list
    term_index: dict
    n_parametric: int
    smooth_blocks: list  # (label, by_level, columns, penalty k-1 x k-1, Z)
    knot_vector: KnotVector | None
    factor_levels: dict
    references: dict
    smooth_by: str | None
    observed_sizes: tuple


def _assemble(spec: ModelSpec, observations: Sequence[MetricObservation]) -> _Design:
    data = [o for o in observations if o.metric == spec.response]
    if not data:
        raise InputError(f"no observations with metric {spec.response!r}")
    y = np.array([o.value for o in data])
    if np.any(y <= 0.0) or np.any(y >= 1.0):
        raise InputError(
            "response contains boundary values; apply squeeze() before fitting"
        )
    n = len(data)

    factor_levels: dict = {}
    references: dict = {}
    cols = [np.ones(n)]
    names = [INTERCEPT]
    term_index: dict = {INTERCEPT: (0,)}
    for term in spec.parametric_terms:
        values = [getattr(o, term.name) for o in data]
        levels = sorted(set(values))
        if term.reference not in levels:
            raise InputError(
                f"reference level {term.reference!r} of factor {term.name!r} absent from data"
            )
        factor_levels[term.name] = tuple(levels)
        references[term.name] = term.reference
        idx = []
        arr = np.array(values)
        for level in levels:
            if level == term.reference:
                continue
            idx.append(len(names))
            names.append(f"{term.name}[{level}]")
            cols.append((arr == level).astype(float))
        term_index[term.name] = tuple(idx)

    X_par = np.column_stack(cols)
    n_par = X_par.shape[1]

    smooth_blocks = []
    knot_vector = None
    smooth_by = None
    blocks = []
    sizes = np.array([o.num_tr_images for o in data], dtype=float)
    for term in spec.smooth_terms:
        if term.covariate != "num_tr_images":
            raise InputError(f"unsupported smooth covariate {term.covariate!r}")
        x = np.log(sizes)
        knot_vector = place_knots(np.unique(x), k=term.k)
        raw = _cardinal_rows(x, knot_vector.knots)
        _, S = _natural_spline_system(knot_vector.knots)
        if term.by_factor is None:
            groups = [(None, np.ones(n, dtype=bool))]
        else:
            if term.by_factor not in factor_levels:
                raise InputError(
                    f"smooth by-factor {term.by_factor!r} is not a parametric term of the model"
                )
            smooth_by = term.by_factor
            arr = np.array([getattr(o, term.by_factor) for o in data])
            groups = [(level, arr == level) for level in factor_levels[term.by_factor]]
        for level, mask in groups:
            B = raw * mask[:, None]
            col_sums = B.sum(axis=0)
            norm = np.linalg.norm(col_sums)
            Q, _ = np.linalg.qr(col_sums.reshape(-1, 1) / norm, mode="complete")
            Z = Q[:, 1:]
            label = term.label if level is None else f"{term.label}[{level}]"
            first = len(names)
            names.extend(f"{label}.{j}" for j in range(Z.shape[1]))
            columns = tuple(range(first, first + Z.shape[1]))
            term_index[label] = columns
            smooth_blocks.append((label, level, columns, Z.T @ S @ Z, Z))
            blocks.append(B @ Z)

    X = np.column_stack([X_par] + blocks) if blocks else X_par
    _check_rank(X, names)
    return _Design(
        X=X,
        y=y,
        coef_names=names,
        term_index=term_index,
        n_parametric=n_par,
        smooth_blocks=smooth_blocks,
        knot_vector=knot_vector,
        factor_levels=factor_levels,
        references=references,
        smooth_by=smooth_by,
        observed_sizes=tuple(sorted(set(int(s) for s in sizes))),
    )


def _check_rank(X: np.ndarray, names: Sequence[str]):
    _, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    bad = diag < diag.max() * 1e-10
    if bad.any():
        offenders = [names[i] for i in np.flatnonzero(bad)]
        raise InputError(f"rank-deficient design; offending columns: {offenders}")


def _penalty_matrix(design: _Design, lambdas: Sequence[float]) -> np.ndarray:
    p = design.X.shape[1]
    P = np.zeros((p, p))
    for lam, (label, _level, columns, S, _Z) in zip(lambdas, design.smooth_blocks):
        i0, i1 = columns[0], columns[-1] + 1
        P[i0:i1, i0:i1] = lam * S
    return P


# ---------------------------------------------------------------------------
# penalized fit for a fixed penalty
# ---------------------------------------------------------------------------


def _fit_penalized(X, y, P, beta0, phi0, tol, max_iter):
    """Alternate coefficient Fisher scoring and log-phi Newton with step halving.

    Returns (beta, phi, penalized loglik, history of accepted objective values).
    Raises ConvergenceError when the objective change stays above `tol` for
    `max_iter` outer iterations.
    """
    ylog = np.log(y)
    y1log = np.log1p(-y)
    ystar = ylog - y1log
    beta = beta0.copy()
    phi = float(phi0)

    def objective(b, ph):
        return _ll_sum(y, X @ b, ph, ylog, y1log) - 0.5 * float(b @ P @ b)

    cur = objective(beta, phi)
    history = [cur]
    for it in range(1, max_iter + 1):
        base = cur
        eta = X @ beta
        mu = inv_logit(eta)
        a = mu * phi
        b = (1.0 - mu) * phi
        mm = mu * (1.0 - mu)
        u = phi * (ystar - (digamma(a) - digamma(b))) * mm
        w = phi * phi * (trigamma(a) + trigamma(b)) * mm * mm
        grad = X.T @ u - P @ beta
        step = np.linalg.solve((X.T * w) @ X + P, grad)
        t = 1.0
        for _ in range(40):
            cand = beta + t * step
            val = objective(cand, phi)
            if val >= cur - 1e-12:
                beta, cur = cand, val
                break
            t *= 0.5

        mu = inv_logit(X @ beta)
        a = mu * phi
        b = (1.0 - mu) * phi
        d1 = phi * float(
            np.sum(
                digamma(phi) - mu * digamma(a) - (1.0 - mu) * digamma(b)
                + mu * ylog + (1.0 - mu) * y1log
            )
        )
        d2 = d1 + phi * phi * float(
            np.sum(trigamma(phi) - mu * mu * trigamma(a) - (1.0 - mu) ** 2 * trigamma(b))
        )
        if d2 >= 0.0:  # not locally concave; fall back to a gradient step
            d2 = -abs(d1) - 1e-6
        log_step = float(np.clip(-d1 / d2, -2.0, 2.0))
        t = 1.0
        for _ in range(30):
            cand_phi = float(np.clip(np.exp(np.log(phi) + t * log_step), _PHI_MIN, _PHI_MAX))
            val = objective(beta, cand_phi)
            if val >= cur - 1e-12:
                phi, cur = cand_phi, val
                break
            t *= 0.5

        history.append(cur)
        if abs(cur - base) < tol:
            return beta, phi, cur, history
    raise ConvergenceError(
        f"penalized fit did not converge in {max_iter} iterations "
        f"(last objective change {abs(cur - base):.3e})",
        iterations=max_iter,
        last_change=abs(cur - base),
    )


def _initial_values(X, y, P):
    p = X.shape[1]
    z = logit(np.clip(y, 1e-3, 1.0 - 1e-3))
    beta0 = np.linalg.solve(X.T @ X + P + 1e-8 * np.eye(p), X.T @ z)
    mu0 = np.clip(inv_logit(X @ beta0), 1e-4, 1.0 - 1e-4)
    resid_var = float(np.var(y - mu0))
    if resid_var <= 0.0:
        phi0 = 1e4
    else:
        phi0 = float(np.clip(np.mean(mu0 * (1.0 - mu0)) / resid_var - 1.0, 0.5, 1e6))
    return beta0, phi0


@dataclass
class _FitResult:
    beta: np.ndarray
    phi: float
    loglik: float
    aic: float
    edf_by_coef: np.ndarray
    covariance: np.ndarray
    iterations: int
    pll_history: tuple


def _fit_at_lambda(design: _Design, lambdas, warm, tol, max_iter) -> _FitResult:
    P = _penalty_matrix(design, lambdas)
    X, y = design.X, design.y
    if warm is None:
        beta0, phi0 = _initial_values(X, y, P)
    else:
        beta0, phi0 = warm
    beta, phi, _, history = _fit_penalized(X, y, P, beta0, phi0, tol, max_iter)
    ylog = np.log(y)
    y1log = np.log1p(-y)
    ll = _ll_sum(y, X @ beta, phi, ylog, y1log)
    mu = inv_logit(X @ beta)
    a = mu * phi
    b = (1.0 - mu) * phi
    w = phi * phi * (trigamma(a) + trigamma(b)) * (mu * (1.0 - mu)) ** 2
    XtWX = (X.T * w) @ X
    covariance = np.linalg.inv(XtWX + P)
    edf_by_coef = np.einsum("ij,ji->i", covariance, XtWX)
    aic = -2.0 * ll + 2.0 * (float(edf_by_coef.sum()) + 1.0)
    return _FitResult(
        beta=beta,
        phi=phi,
        loglik=ll,
        aic=aic,
        edf_by_coef=edf_by_coef,
        covariance=covariance,
        iterations=len(history) - 1,
        pll_history=tuple(history),
    )


# ---------------------------------------------------------------------------
# fitted model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitStats:
    loglik: float
    aic: float
    deviance: float
    null_deviance: float
    deviance_explained: float
    adj_r_squared: float
    n_obs: int
    iterations: int


@dataclass(frozen=True)
class AdditiveModel:
    """A fitted Beta additive model; immutable value object."""

    spec: ModelSpec
    coef: np.ndarray
    coef_names: tuple
    term_index: dict
    factor_levels: dict
    references: dict
    knot_vector: KnotVector | None
    smooth_by: str | None
    smooth_constraints: dict  # smooth label -> k x (k-1) reparameterization
    lambdas: dict  # smooth label -> smoothing parameter
    phi: float
    covariance: np.ndarray
    edf_by_coef: np.ndarray
    fit_stats: FitStats
    observed_sizes: tuple
    pll_history: tuple = field(repr=False, default=())

    @property
    def metric(self) -> str:
        return self.spec.response

    def smooth_labels(self) -> tuple:
        return tuple(t for t in self.term_index if t.startswith("s("))

    def linear_predictor(self, cell: Mapping, num_tr_images) -> np.ndarray:
        """Linear predictor at one covariate cell over an array of sizes."""
        sizes = np.atleast_1d(np.asarray(num_tr_images, dtype=float))
        if np.any(sizes <= 0.0):
            raise InputError("num_tr_images must be positive")
        eta = float(self.coef[self.term_index[INTERCEPT][0]])
        for factor, levels in self.factor_levels.items():
            if factor not in cell:
                raise InputError(f"cell is missing a level for factor {factor!r}")
            level = cell[factor]
            if level not in levels:
                raise InputError(f"unknown level {level!r} for factor {factor!r}")
            if level != self.references[factor]:
                j = self.coef_names.index(f"{factor}[{level}]")
                eta += float(self.coef[j])
        eta = np.full(sizes.shape, eta)
        if self.smooth_labels():
            label = self._smooth_label_for(cell)
            Z = self.smooth_constraints[label]
            rows = _cardinal_rows(np.log(sizes), self.knot_vector.knots) @ Z
            eta += rows @ self.coef[list(self.term_index[label])]
        return eta

    def _smooth_label_for(self, cell: Mapping) -> str:
        labels = self.smooth_labels()
        if self.smooth_by is None:
            return labels[0]
        level = cell.get(self.smooth_by)
        for label in labels:
            if label.endswith(f"[{level}]"):
                return label
        raise InputError(f"no smooth for {self.smooth_by!r} level {level!r}")

    def predict(self, cell: Mapping) -> float:
        """Mean response at one covariate cell; cell must carry num_tr_images."""
        if "num_tr_images" not in cell:
            raise InputError("cell is missing num_tr_images")
        return float(inv_logit(self.linear_predictor(cell, cell["num_tr_images"]))[0])

    def predict_sizes(self, cell: Mapping, num_tr_images) -> np.ndarray:
        """Mean response at one covariate cell over an array of sizes."""
        return inv_logit(self.linear_predictor(cell, num_tr_images))


def predict(model: AdditiveModel, cell: Mapping) -> float:
    return model.predict(cell)


def term_edf(model: AdditiveModel) -> dict:
    """Effective degrees of freedom per model term."""
    out = {}
    for term, idx in model.term_index.items():
        out[term] = float(model.edf_by_coef[list(idx)].sum())
    return out


def wald_p(model: AdditiveModel, term: str) -> float:
    """Wald p-value for a term: normal test for single coefficients, joint
    chi-square for multi-level factors, chi-square with df = rounded EDF for
    smooth blocks."""
    if term in model.term_index:
        idx = list(model.term_index[term])
    elif term in model.coef_names:
        idx = [model.coef_names.index(term)]
    else:
        raise InputError(f"unknown term {term!r}")
    beta = model.coef[idx]
    V = model.covariance[np.ix_(idx, idx)]
    if term.startswith("s("):
        df = max(1, int(round(float(model.edf_by_coef[idx].sum()))))
        stat = float(beta @ np.linalg.solve(V, beta))
        return float(stats.chi2.sf(stat, df))
    if len(idx) == 1:
        z = float(beta[0]) / float(np.sqrt(V[0, 0]))
        return float(2.0 * stats.norm.sf(abs(z)))
    stat = float(beta @ np.linalg.solve(V, beta))
    return float(stats.chi2.sf(stat, len(idx)))


# ---------------------------------------------------------------------------
# saturated / null likelihood and fit statistics
# ---------------------------------------------------------------------------


def _saturated_loglik(y, phi):
    """Per-observation maximum of the Beta log-likelihood over mu, summed.

    Solves digamma(mu*phi) - digamma((1-mu)*phi) = logit-star(y) per
    observation by damped Newton (the left side is increasing in mu).
    """
    ystar = np.log(y) - np.log1p(-y)
    mu = np.clip(y, 1e-9, 1.0 - 1e-9).copy()
    for _ in range(100):
        a = mu * phi
        b = (1.0 - mu) * phi
        g = digamma(a) - digamma(b) - ystar
        gp = phi * (trigamma(a) + trigamma(b))
        step = -g / gp
        nxt = mu + step
        bad = (nxt <= 0.0) | (nxt >= 1.0)
        nxt[bad] = 0.5 * (mu[bad] + np.where(step[bad] > 0.0, 1.0, 0.0))
        mu = nxt
        if float(np.max(np.abs(step))) < 1e-13:
            break
    a = mu * phi
    b = (1.0 - mu) * phi
    return float(
        np.sum(
            gammaln(phi) - gammaln(a) - gammaln(b)
            + (a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y)
        )
    )


def _null_loglik(y, phi):
    """Intercept-only Beta log-likelihood at fixed phi."""
    ylog = np.log(y)
    y1log = np.log1p(-y)
    ystar = ylog - y1log
    eta = float(logit(np.clip(np.mean(y), 1e-6, 1.0 - 1e-6)))
    cur = _ll_sum(y, np.full_like(y, eta), phi, ylog, y1log)
    for _ in range(200):
        mu = inv_logit(eta)
        a = mu * phi
        b = (1.0 - mu) * phi
        u = float(np.sum(phi * (ystar - (digamma(a) - digamma(b))) * mu * (1.0 - mu)))
        w = float(np.sum(phi * phi * (trigamma(a) + trigamma(b)) * (mu * (1.0 - mu)) ** 2))
        step = u / w
        t = 1.0
        accepted = False
        for _ in range(30):
            cand = eta + t * step
            val = _ll_sum(y, np.full_like(y, cand), phi, ylog, y1log)
            if val >= cur - 1e-12:
                eta, cur = cand, val
                accepted = True
                break
            t *= 0.5
        if not accepted or abs(t * step) < 1e-12:
            break
    return cur


def _bulk_mean(model: AdditiveModel, data: Sequence[MetricObservation]) -> np.ndarray:
    """Predicted means for many observations, evaluating each smooth block once."""
    n = len(data)
    eta = np.full(n, float(model.coef[model.term_index[INTERCEPT][0]]))
    for factor, levels in model.factor_levels.items():
        coef_of = {
            level: (
                0.0
                if level == model.references[factor]
                else float(model.coef[model.coef_names.index(f"{factor}[{level}]")])
            )
            for level in levels
        }
        for i, o in enumerate(data):
            level = getattr(o, factor)
            if level not in coef_of:
                raise InputError(f"unknown level {level!r} for factor {factor!r}")
            eta[i] += coef_of[level]
    if model.smooth_labels():
        x = np.log(np.array([o.num_tr_images for o in data], dtype=float))
        raw = _cardinal_rows(x, model.knot_vector.knots)
        for label in model.smooth_labels():
            if model.smooth_by is None:
                mask = np.ones(n, dtype=bool)
            else:
                level = label[label.rindex("[") + 1 : -1]
                mask = np.array([getattr(o, model.smooth_by) == level for o in data])
            if not mask.any():
                continue
            Z = model.smooth_constraints[label]
            eta[mask] += (raw[mask] @ Z) @ model.coef[list(model.term_index[label])]
    return inv_logit(eta)


def fit_stats(model: AdditiveModel, observations: Sequence[MetricObservation]) -> dict:
    """Deviance explained and adjusted R^2 of a model on a dataset."""
    data = [o for o in observations if o.metric == model.metric]
    if not data:
        raise InputError(f"no observations with metric {model.metric!r}")
    y = np.array([o.value for o in data])
    if np.any(y <= 0.0) or np.any(y >= 1.0):
        raise InputError("observations contain boundary values; apply squeeze() first")
    mu = _bulk_mean(model, data)
    ll = float(np.sum(beta_loglik(y, mu, model.phi)[0]))
    ll_sat = _saturated_loglik(y, model.phi)
    ll_null = _null_loglik(y, model.phi)
    # the saturated likelihood is the supremum; tiny negatives are float noise
    deviance = max(2.0 * (ll_sat - ll), 0.0)
    null_deviance = max(2.0 * (ll_sat - ll_null), 0.0)
    dev_expl = 0.0 if null_deviance <= 1e-10 else 1.0 - deviance / null_deviance
    n = y.size
    edf_total = float(model.edf_by_coef.sum())
    tss = float(((y - y.mean()) ** 2).sum())
    rss = float(((y - mu) ** 2).sum())
    adj_r2 = 0.0 if tss <= 0.0 else 1.0 - (rss / max(n - edf_total, 1.0)) / (tss / (n - 1))
    return {"deviance_explained": dev_expl, "adj_r_squared": adj_r2}


# ---------------------------------------------------------------------------
# fitting with smoothing-parameter selection
# ---------------------------------------------------------------------------


def fit(
    spec: ModelSpec,
    observations: Sequence[MetricObservation],
    *,
    lambdas: Sequence[float] | None = None,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    tol: float = 1e-8,
    max_iter: int = 200,
    screen_tol: float = 1e-5,
) -> AdditiveModel:
    """Fit the Beta additive model described by `spec`.

    Parameters
    ----------
    spec : ModelSpec
        Terms, reference levels and squeeze width.
    observations : sequence of MetricObservation
        Observations of any metric; only those matching spec.response are
        used.  Values must already be strictly inside (0, 1).
    lambdas : optional
        Fixed smoothing parameters, one per smooth block, to bypass the AIC
        grid search.
    lambda_grid : sequence of float
        Candidate smoothing parameters for the coordinate-wise AIC search.
    tol, max_iter : float, int
        Convergence tolerance on the penalized log-likelihood change and the
        outer iteration budget of the final fit.
    screen_tol : float
        Looser tolerance used while screening grid candidates; the selected
        model is always refitted at `tol`.
    """
    design = _assemble(spec, observations)
    n_smooth = len(design.smooth_blocks)
    if lambdas is not None:
        if len(lambdas) != n_smooth:
            raise InputError(f"need {n_smooth} smoothing parameters, got {len(lambdas)}")
        if any(l < 0 for l in lambdas):
            raise InputError("smoothing parameters must be >= 0")
        chosen = [float(l) for l in lambdas]
        result = _fit_at_lambda(design, chosen, None, tol, max_iter)
    elif n_smooth == 0:
        chosen = []
        result = _fit_at_lambda(design, chosen, None, tol, max_iter)
    else:
        chosen, result = _search_lambdas(design, lambda_grid, tol, max_iter, screen_tol)
    return _package_model(spec, design, chosen, result, observations)


def _search_lambdas(design, lambda_grid, tol, max_iter, screen_tol):
    grid = sorted(float(g) for g in lambda_grid)
    n_smooth = len(design.smooth_blocks)
    start = min(grid, key=lambda g: abs(np.log10(g))) if grid else 1.0
    lam = [start] * n_smooth
    cache = {}

    def evaluate(lam_tuple, warm):
        if lam_tuple in cache:
            return cache[lam_tuple]
        res = _fit_at_lambda(design, list(lam_tuple), warm, screen_tol, max_iter)
        cache[lam_tuple] = res
        return res

    best = evaluate(tuple(lam), None)
    warm = (best.beta, best.phi)
    for _ in range(8):
        changed = False
        for k in range(n_smooth):
            candidates = []
            w = warm
            for g in grid:
                trial = tuple(lam[:k] + [g] + lam[k + 1 :])
                res = evaluate(trial, w)
                w = (res.beta, res.phi)
                candidates.append((res.aic, trial, res))
            candidates.sort(key=lambda c: (c[0], c[1]))
            _, trial, res = candidates[0]
            if list(trial) != lam:
                lam = list(trial)
                changed = True
            warm = (res.beta, res.phi)
        if not changed:
            break
    final = _fit_at_lambda(design, lam, warm, tol, max_iter)
    return lam, final


def _package_model(spec, design, chosen, result, observations) -> AdditiveModel:
    lambdas = {}
    constraints = {}
    for lam, (label, _level, _columns, _S, Z) in zip(chosen, design.smooth_blocks):
        lambdas[label] = float(lam)
        constraints[label] = Z
    model = AdditiveModel(
        spec=spec,
        coef=result.beta,
        coef_names=tuple(design.coef_names),
        term_index={k: tuple(v) for k, v in design.term_index.items()},
        factor_levels=design.factor_levels,
        references=design.references,
        knot_vector=design.knot_vector,
        smooth_by=design.smooth_by,
        smooth_constraints=constraints,
        lambdas=lambdas,
        phi=result.phi,
        covariance=result.covariance,
        edf_by_coef=result.edf_by_coef,
        fit_stats=FitStats(
            loglik=result.loglik,
            aic=result.aic,
            deviance=np.nan,
            null_deviance=np.nan,
            deviance_explained=np.nan,
            adj_r_squared=np.nan,
            n_obs=design.y.size,
            iterations=result.iterations,
        ),
        observed_sizes=design.observed_sizes,
        pll_history=result.pll_history,
    )
    extra = fit_stats(model, observations)
    ll_sat = _saturated_loglik(design.y, model.phi)
    ll_null = _null_loglik(design.y, model.phi)
    deviance = max(2.0 * (ll_sat - result.loglik), 0.0)
    null_deviance = max(2.0 * (ll_sat - ll_null), 0.0)
    return replace(
        model,
        fit_stats=FitStats(
            loglik=result.loglik,
            aic=result.aic,
            deviance=deviance,
            null_deviance=null_deviance,
            deviance_explained=extra["deviance_explained"],
            adj_r_squared=extra["adj_r_squared"],
            n_obs=design.y.size,
            iterations=result.iterations,
        ),
    )


# ---------------------------------------------------------------------------
# backward stepwise elimination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EliminationStep:
    dropped: str
    p_value: float


def _joint_term_p(model: AdditiveModel, term_labels) -> float:
    idx = [j for label in term_labels for j in model.term_index[label]]
    beta = model.coef[idx]
    V = model.covariance[np.ix_(idx, idx)]
    if term_labels[0].startswith("s("):
        df = max(1, int(round(float(model.edf_by_coef[idx].sum()))))
    else:
        df = len(idx)
    if len(idx) == 1 and not term_labels[0].startswith("s("):
        z = float(beta[0]) / float(np.sqrt(V[0, 0]))
        return float(2.0 * stats.norm.sf(abs(z)))
    stat = float(beta @ np.linalg.solve(V, beta))
    return float(stats.chi2.sf(stat, df))


def _candidate_terms(spec: ModelSpec, model: AdditiveModel):
    """Droppable terms and the block labels each covers.

    A factor serving as the by-factor of a retained smooth is structurally
    required and not a candidate.
    """
    protected = {t.by_factor for t in spec.smooth_terms if t.by_factor is not None}
    out = {}
    for t in spec.parametric_terms:
        if t.name in protected:
            continue
        out[t.name] = [t.name]
    for t in spec.smooth_terms:
        labels = [l for l in model.smooth_labels() if l == t.label or l.startswith(t.label + "[")]
        out[t.label] = labels
    return out


def backward_eliminate(
    full_spec: ModelSpec,
    observations: Sequence[MetricObservation],
    alpha: float = 0.05,
    **fit_kwargs,
):
    """Drop the least significant term with p > alpha, refit, repeat.

    Returns (final model, trace of EliminationStep).  Factors required by a
    retained nested smooth are never dropped before the smooth itself.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    spec = full_spec
    model = fit(spec, observations, **fit_kwargs)
    trace = []
    while True:
        candidates = _candidate_terms(spec, model)
        if not candidates:
            break
        pvals = {term: _joint_term_p(model, labels) for term, labels in candidates.items()}
        worst = max(pvals, key=lambda t: (pvals[t], t))
        if pvals[worst] <= alpha:
            break
        trace.append(EliminationStep(dropped=worst, p_value=pvals[worst]))
        spec = spec.without(worst)
        model = fit(spec, observations, **fit_kwargs)
    return model, trace
