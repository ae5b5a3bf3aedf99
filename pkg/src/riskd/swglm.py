"""Survey-weighted logistic regression and the per-factor association scan.

Fitting is iteratively reweighted least squares on the weight-scaled
Bernoulli log-likelihood, with step-halving so the likelihood never
decreases. Standard errors come from the sandwich estimator, which stays
correct under survey weighting. The scan fits one model per risk factor
(factor plus all controls), then applies Benjamini-Hochberg adjustment
across the factors that produced a fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .cartridges import StudyPlan
from .datastore import Dataset
from .errors import (
    AllFactorsSkipped,
    AnalysisError,
    IndexOutOfRange,
    InsufficientData,
    InvalidP,
    NotConverged,
    Separation,
    Singular,
    ValidationError,
)
from .preprocess import DesignMatrix, build_design

SEPARATION_BOUND = 15.0  # logistic coefficients beyond this are saturated
DEFAULT_MAX_ITER = 50
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class GlmFit:
    coefficients: np.ndarray
    robust_se: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    ll_trace: tuple = ()
    column_names: tuple = ()
    n_used: int = 0


@dataclass(frozen=True)
class AssociationResult:
    factor_id: str
    coefficient: float
    robust_se: float
    p_value: float
    adjusted_p: float
    significant: bool
    n_used: int
    direction: str  # "risk" or "protective"

    def to_json(self) -> dict:
        return {
            "factor_id": self.factor_id,
            "coefficient": self.coefficient,
            "robust_se": self.robust_se,
            "p_value": self.p_value,
            "adjusted_p": self.adjusted_p,
            "significant": self.significant,
            "n_used": self.n_used,
            "direction": self.direction,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AssociationResult":
        return cls(factor_id=obj["factor_id"],
                   coefficient=float(obj["coefficient"]),
                   robust_se=float(obj["robust_se"]),
                   p_value=float(obj["p_value"]),
                   adjusted_p=float(obj["adjusted_p"]),
                   significant=bool(obj["significant"]),
                   n_used=int(obj["n_used"]),
                   direction=obj["direction"])


@dataclass(frozen=True)
class SkippedFactor:
    factor_id: str
    reason: str

    def to_json(self) -> dict:
        return {"factor_id": self.factor_id, "reason": self.reason}


@dataclass(frozen=True)
class ScanReport:
    results: tuple  # AssociationResult, sorted by adjusted_p
    skipped: tuple  # SkippedFactor
    alpha: float


def weighted_log_likelihood(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                            beta: np.ndarray) -> float:
    """Sum_i w_i * [y_i log p_i + (1-y_i) log(1-p_i)], computed stably."""
    eta = X @ beta
    # log(1+e^eta) via logaddexp avoids overflow for large |eta|
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def fit_weighted_logistic(design: DesignMatrix,
                          max_iter: int = DEFAULT_MAX_ITER,
                          tol: float = DEFAULT_TOL) -> GlmFit:
    """IRLS fit of a weighted logistic model with robust (sandwich) errors."""
    X = np.asarray(design.values, dtype=np.float64)
    y = np.asarray(design.response, dtype=np.float64)
    w = np.asarray(design.weights, dtype=np.float64)
    n, k = X.shape
    if n <= k:
        raise InsufficientData(f"{n} rows cannot identify {k} coefficients")

    beta = np.zeros(k)
    ll = weighted_log_likelihood(X, y, w, beta)
    trace = [ll]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        eta = X @ beta
        p = special.expit(eta)
        irls_w = w * p * (1.0 - p)
        info = X.T @ (irls_w[:, None] * X)
        score = X.T @ (w * (y - p))
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise Singular("weighted information matrix is singular") from exc
        if not np.all(np.isfinite(step)):
            raise Singular("IRLS step is non-finite")

        # step-halving keeps the likelihood monotone
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            new_ll = weighted_log_likelihood(X, y, w, candidate)
            if new_ll >= ll - 1e-12:
                break
            scale /= 2.0
        else:
            candidate = beta
            new_ll = ll
        delta = np.max(np.abs(candidate - beta))
        beta = candidate
        ll = new_ll
        trace.append(ll)

        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise Separation(
                "coefficient exceeded the divergence bound; the classes are "
                "(quasi-)separated")
        if delta < tol:
            converged = True
            break

    # sandwich variance: bread = inverse information, meat from weighted residuals
    p = special.expit(X @ beta)
    irls_w = w * p * (1.0 - p)
    info = X.T @ (irls_w[:, None] * X)
    try:
        bread = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise Singular("information matrix singular at the optimum") from exc
    scaled_resid = w * (y - p)
    meat = X.T @ (scaled_resid[:, None] ** 2 * X)
    cov = bread @ meat @ bread
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))

    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, 0.0)
    pvals = special.erfc(np.abs(z) / np.sqrt(2.0))

    return GlmFit(coefficients=beta, robust_se=se, z_scores=z, p_values=pvals,
                  converged=converged, iterations=iterations,
                  log_likelihood=ll, ll_trace=tuple(trace),
                  column_names=design.column_names, n_used=n)


def wald_test(fit: GlmFit, k: int) -> tuple:
    """Two-sided normal test of coefficient k: returns (z, p)."""
    if not fit.converged:
        raise NotConverged("fit did not converge; Wald test unavailable")
    if not 0 <= k < len(fit.coefficients):
        raise IndexOutOfRange(
            f"coefficient index {k} out of range [0, {len(fit.coefficients)})")
    se = fit.robust_se[k]
    if se == 0:
        return 0.0, 1.0
    z = float(fit.coefficients[k] / se)
    p = float(special.erfc(abs(z) / np.sqrt(2.0)))
    return z, p


def adjust_fdr(p_values, method: str = "benjamini-hochberg") -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in the input order."""
    if method != "benjamini-hochberg":
        raise InvalidP(f"unknown FDR method {method!r}")
    p = np.asarray(p_values, dtype=np.float64)
    if p.size == 0:
        return p.copy()
    if np.any(np.isnan(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidP("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    # enforce monotonicity from the largest rank down
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    adjusted = np.minimum(adjusted, 1.0)
    out = np.empty(m)
    out[order] = adjusted
    return out


def ewas_scan(plan: StudyPlan, ds: Dataset, alpha: float | None = None,
              progress=None) -> ScanReport:
    """One weighted logistic fit per factor, BH-adjusted across the scan."""
    if alpha is None:
        alpha = plan.alpha
    fits = []
    skipped = []
    for position, factor in enumerate(plan.factor_ids, start=1):
        try:
            design = build_design(plan, ds, factor)
            fit = fit_weighted_logistic(design)
            if not fit.converged:
                raise NotConverged("IRLS hit the iteration cap")
        except (AnalysisError, ValidationError) as exc:
            skipped.append(SkippedFactor(
                factor_id=factor,
                reason=f"{type(exc).__name__}: {exc.message}"))
            continue
        finally:
            if progress is not None:
                progress(position, len(plan.factor_ids))
        fits.append((factor, fit, design.n))
    if not fits:
        raise AllFactorsSkipped(
            "every factor was skipped: "
            + "; ".join(f"{s.factor_id} ({s.reason})" for s in skipped))

    # factor coefficient sits right after the intercept in per-factor designs
    raw_p = np.array([fit.p_values[1] for _, fit, _ in fits])
    adjusted = adjust_fdr(raw_p, plan.workflow.hyperparams["fdr_method"])

    results = []
    for (factor, fit, n), p, q in zip(fits, raw_p, adjusted):
        coef = float(fit.coefficients[1])
        results.append(AssociationResult(
            factor_id=factor,
            coefficient=coef,
            robust_se=float(fit.robust_se[1]),
            p_value=float(p),
            adjusted_p=float(q),
            significant=bool(q < alpha),
            n_used=n,
            direction="risk" if coef >= 0 else "protective",
        ))
    results.sort(key=lambda r: (r.adjusted_p, r.p_value, r.factor_id))
    return ScanReport(results=tuple(results), skipped=tuple(skipped),
                      alpha=float(alpha))
