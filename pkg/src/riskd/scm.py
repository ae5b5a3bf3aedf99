"""Gated mixture of linear risk experts for subpopulation discovery.

Each cadre m has a center c^m and a linear expert w^m x + b_m. A shared
seminorm diagonal d and sharpness gamma turn distances to the centers into
soft membership probabilities:

    g_m(x) = softmax_m(-gamma * sum_p |d_p| (x_p - c^m_p)^2)

and the aggregate risk score is f(x) = sum_m g_m(x) (w^m x + b_m), pushed
through a sigmoid for binary outcomes. Training is minibatch SGD on the
survey-weighted cross-entropy plus elastic-net penalties on the expert
weights and on d; the L1 term on d drives irrelevant features out of the
distance, which is what makes the discovered cadres explainable.

Only columns with role factor, control, or cadre-feature participate in
the distance; the model's own bias terms stand in for the intercept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .datastore import Dataset
from .errors import (
    DimensionMismatch,
    DivergedLoss,
    EmptyBatch,
    InvalidSpec,
    NonBinaryLabel,
)
from .preprocess import DesignMatrix, binarize_response
from .swglm import ewas_scan


@dataclass(frozen=True)
class CadreModelParams:
    centers: np.ndarray  # M x P
    expert_weights: np.ndarray  # M x P
    expert_bias: np.ndarray  # M
    seminorm_diag: np.ndarray  # P
    gamma: float

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    @property
    def p(self) -> int:
        return self.centers.shape[1]

    def validate(self) -> None:
        m, p = self.centers.shape
        if m < 1:
            raise InvalidSpec("at least one cadre required")
        if self.gamma <= 0:
            raise InvalidSpec("gamma must be positive")
        if self.expert_weights.shape != (m, p):
            raise DimensionMismatch("expert_weights shape mismatch")
        if self.expert_bias.shape != (m,):
            raise DimensionMismatch("expert_bias shape mismatch")
        if self.seminorm_diag.shape != (p,):
            raise DimensionMismatch("seminorm_diag shape mismatch")
        for arr in (self.centers, self.expert_weights, self.expert_bias,
                    self.seminorm_diag):
            if not np.all(np.isfinite(arr)):
                raise InvalidSpec("model parameters must be finite")

    def to_json(self) -> dict:
        return {
            "M": self.m,
            "P": self.p,
            "centers": self.centers.tolist(),
            "expert_weights": self.expert_weights.tolist(),
            "expert_bias": self.expert_bias.tolist(),
            "seminorm_diag": self.seminorm_diag.tolist(),
            "gamma": self.gamma,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CadreModelParams":
        params = cls(
            centers=np.asarray(obj["centers"], dtype=np.float64),
            expert_weights=np.asarray(obj["expert_weights"], dtype=np.float64),
            expert_bias=np.asarray(obj["expert_bias"], dtype=np.float64),
            seminorm_diag=np.asarray(obj["seminorm_diag"], dtype=np.float64),
            gamma=float(obj["gamma"]),
        )
        params.validate()
        return params


@dataclass(frozen=True)
class ScmHyperparams:
    m: int
    gamma: float
    learning_rate: float
    epochs: int
    batch_size: int
    lambda_w: tuple = (0.0, 0.0)  # (L1, L2)
    lambda_d: tuple = (0.0, 0.0)
    seed: int = 0

    def validate(self) -> None:
        if self.m < 1:
            raise InvalidSpec("M must be >= 1")
        if self.gamma <= 0:
            raise InvalidSpec("gamma must be positive")
        if self.learning_rate <= 0:
            raise InvalidSpec("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidSpec("epochs and batch_size must be >= 1")
        for pair in (self.lambda_w, self.lambda_d):
            if len(pair) != 2 or any(v < 0 for v in pair):
                raise InvalidSpec("regularization strengths must be >= 0")

    @classmethod
    def from_workflow(cls, hyperparams: dict) -> "ScmHyperparams":
        hp = cls(
            m=int(hyperparams["M"]),
            gamma=float(hyperparams["gamma"]),
            learning_rate=float(hyperparams["learning_rate"]),
            epochs=int(hyperparams["epochs"]),
            batch_size=int(hyperparams["batch_size"]),
            lambda_w=tuple(float(v) for v in hyperparams["lambda_w"]),
            lambda_d=tuple(float(v) for v in hyperparams["lambda_d"]),
            seed=int(hyperparams["seed"]),
        )
        hp.validate()
        return hp

    def to_json(self) -> dict:
        return {
            "M": self.m,
            "gamma": self.gamma,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lambda_w": list(self.lambda_w),
            "lambda_d": list(self.lambda_d),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ScmGradients:
    centers: np.ndarray
    expert_weights: np.ndarray
    expert_bias: np.ndarray
    seminorm_diag: np.ndarray


@dataclass(frozen=True)
class CadreSummary:
    cadre: int
    count: int
    weighted_count: float
    continuous: dict  # var id -> {"mean", "sd", "n"}
    categorical: dict  # var id -> {label: weighted count}

    def to_json(self) -> dict:
        return {
            "cadre": self.cadre,
            "count": self.count,
            "weighted_count": self.weighted_count,
            "continuous": self.continuous,
            "categorical": self.categorical,
        }


@dataclass(frozen=True)
class CadreScan:
    cadre: int
    testable: bool
    reason: str
    results: tuple  # AssociationResult
    skipped: tuple  # SkippedFactor

    def to_json(self) -> dict:
        return {
            "cadre": self.cadre,
            "testable": self.testable,
            "reason": self.reason,
            "results": [r.to_json() for r in self.results],
            "skipped": [s.to_json() for s in self.skipped],
        }


@dataclass(frozen=True)
class ScmFitResult:
    params: CadreModelParams
    hyperparams: ScmHyperparams
    loss_trace: tuple
    cadre_assignments: np.ndarray
    feature_names: tuple
    summaries: tuple = ()  # CadreSummary, filled by the pipeline
    per_cadre_results: tuple = ()  # CadreScan, filled by the pipeline

    def model_json(self) -> dict:
        doc = self.params.to_json()
        doc["hyperparams"] = self.hyperparams.to_json()
        doc["seed"] = self.hyperparams.seed
        doc["feature_names"] = list(self.feature_names)
        doc["loss_trace"] = [float(v) for v in self.loss_trace]
        return doc


# --- scoring -------------------------------------------------------------------

def _check_features(X: np.ndarray, params: CadreModelParams) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != params.p:
        raise DimensionMismatch(
            f"expected {params.p} features, got {X.shape[1]}")
    return X


def gate_matrix(X: np.ndarray, params: CadreModelParams) -> np.ndarray:
    """Membership probabilities for each row: N x M, rows sum to 1."""
    X = _check_features(X, params)
    delta = X[:, None, :] - params.centers[None, :, :]
    dist = delta ** 2 @ np.abs(params.seminorm_diag)
    logits = -params.gamma * dist
    logits -= logits.max(axis=1, keepdims=True)
    expd = np.exp(logits)
    return expd / expd.sum(axis=1, keepdims=True)


def gate_probabilities(x: np.ndarray, params: CadreModelParams) -> np.ndarray:
    """g_m(x) for a single observation."""
    return gate_matrix(x, params)[0]


def expert_scores(X: np.ndarray, params: CadreModelParams) -> np.ndarray:
    X = _check_features(X, params)
    return X @ params.expert_weights.T + params.expert_bias


def risk_scores(X: np.ndarray, params: CadreModelParams) -> np.ndarray:
    """Aggregate risk f(x) = sum_m g_m(x) e_m(x) for each row."""
    X = _check_features(X, params)
    return np.sum(gate_matrix(X, params) * expert_scores(X, params), axis=1)


def risk_score(x: np.ndarray, params: CadreModelParams) -> float:
    return float(risk_scores(x, params)[0])


def assign_cadre(x: np.ndarray, params: CadreModelParams) -> int:
    """Hard assignment: argmax gate, ties to the lowest index."""
    return int(np.argmax(gate_probabilities(x, params)))


def assign_cadres(X: np.ndarray, params: CadreModelParams) -> np.ndarray:
    return np.argmax(gate_matrix(X, params), axis=1)


# --- loss and gradients ----------------------------------------------------------

def loss_and_gradients(X: np.ndarray, y: np.ndarray, weights: np.ndarray,
                       params: CadreModelParams,
                       hp: ScmHyperparams):
    """Penalized, weight-normalized cross-entropy and its exact gradients.

    Survey weights are rescaled to mean 1 within the batch, which keeps
    the learning-rate scale independent of batch size and makes the
    full-batch loss equal the weighted mean cross-entropy.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    n = X.shape[0]
    if n == 0:
        raise EmptyBatch("empty batch")
    y = np.asarray(y, dtype=np.float64).ravel()
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if y.shape != (n,) or weights.shape != (n,):
        raise DimensionMismatch("labels/weights do not match batch rows")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise NonBinaryLabel("labels must be 0 or 1")
    if X.shape[1] != params.p:
        raise DimensionMismatch(
            f"expected {params.p} features, got {X.shape[1]}")

    s_hat = weights / weights.mean()
    gamma = params.gamma
    abs_d = np.abs(params.seminorm_diag)
    sign_d = np.sign(params.seminorm_diag)

    delta = X[:, None, :] - params.centers[None, :, :]  # n x M x P
    sq = delta ** 2
    logits = -gamma * (sq @ abs_d)
    logits -= logits.max(axis=1, keepdims=True)
    expd = np.exp(logits)
    G = expd / expd.sum(axis=1, keepdims=True)  # n x M

    E = X @ params.expert_weights.T + params.expert_bias  # n x M
    f = np.sum(G * E, axis=1)

    # stable cross-entropy: softplus(f) - y f
    ce = np.logaddexp(0.0, f) - y * f
    lw1, lw2 = hp.lambda_w
    ld1, ld2 = hp.lambda_d
    loss = float(np.mean(s_hat * ce)
                 + lw1 * np.sum(np.abs(params.expert_weights))
                 + lw2 * np.sum(params.expert_weights ** 2)
                 + ld1 * np.sum(abs_d)
                 + ld2 * np.sum(params.seminorm_diag ** 2))

    r = special.expit(f) - y
    rs = (s_hat * r) / n  # premultiplied residuals
    T = G * (E - f[:, None])  # gate sensitivity: d f / d logit_m
    U = rs[:, None] * T

    grad_w = (G * rs[:, None]).T @ X
    grad_w += lw1 * np.sign(params.expert_weights)
    grad_w += 2.0 * lw2 * params.expert_weights
    grad_b = G.T @ rs
    grad_c = 2.0 * gamma * np.einsum("im,imp->mp", U, delta) * abs_d[None, :]
    grad_d = -gamma * sign_d * np.einsum("im,imp->p", U, sq)
    grad_d += ld1 * sign_d + 2.0 * ld2 * params.seminorm_diag

    return loss, ScmGradients(centers=grad_c, expert_weights=grad_w,
                              expert_bias=grad_b, seminorm_diag=grad_d)


# --- training --------------------------------------------------------------------

def _kmeanspp_centers(X: np.ndarray, m: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ row draws: spread-out initial centers."""
    n = X.shape[0]
    centers = [X[int(rng.integers(n))]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, m):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))  # all remaining rows identical
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers, dtype=np.float64)


def initialize_params(X: np.ndarray, hp: ScmHyperparams,
                      rng: np.random.Generator) -> CadreModelParams:
    """Centers from k-means++ draws; zero experts; unit seminorm.

    Zero expert weights make the initial loss exactly the trivial
    classifier's cross-entropy, a useful reference point.
    """
    p = X.shape[1]
    return CadreModelParams(
        centers=_kmeanspp_centers(X, hp.m, rng),
        expert_weights=np.zeros((hp.m, p)),
        expert_bias=np.zeros(hp.m),
        seminorm_diag=np.ones(p),
        gamma=hp.gamma,
    )


def feature_matrix(design: DesignMatrix):
    cols = design.feature_columns
    names = tuple(design.column_meta[i].name for i in cols)
    return design.values[:, cols], names


def _feature_scaling(X: np.ndarray, weights: np.ndarray):
    """Weighted location/scale per feature column, for SGD conditioning."""
    total = weights.sum()
    mu = (weights[:, None] * X).sum(axis=0) / total
    var = (weights[:, None] * (X - mu) ** 2).sum(axis=0) / total
    sigma = np.sqrt(var)
    degenerate = sigma < 1e-12
    mu = np.where(degenerate, 0.0, mu)
    sigma = np.where(degenerate, 1.0, sigma)
    return mu, sigma


def _unscale_params(params: CadreModelParams, mu: np.ndarray,
                    sigma: np.ndarray) -> CadreModelParams:
    """Map parameters learned on (x - mu) / sigma back to the raw columns.

    The model class is closed under affine feature maps, so the returned
    parameters score raw rows identically to the scaled-space model.
    """
    w_scaled = params.expert_weights / sigma[None, :]
    return CadreModelParams(
        centers=mu[None, :] + params.centers * sigma[None, :],
        expert_weights=w_scaled,
        expert_bias=params.expert_bias - (params.expert_weights
                                          * (mu / sigma)[None, :]).sum(axis=1),
        seminorm_diag=params.seminorm_diag / sigma ** 2,
        gamma=params.gamma,
    )


def train_scm(design: DesignMatrix, hp: ScmHyperparams,
              progress=None) -> ScmFitResult:
    """Minibatch SGD with a fixed epoch budget; deterministic per (design, hp).

    Feature columns are standardized internally so raw-scale controls
    (age, lab concentrations) cannot dominate the distance or destabilize
    the steps; the returned parameters are mapped back to raw columns and
    score raw rows directly. Penalties apply in the scaled space.

    ``progress(epoch, loss)`` is invoked after each epoch when given.
    Summaries and per-cadre scans are attached by the study pipeline,
    which has the dataset context this function does not.
    """
    hp.validate()
    design.validate()
    raw, feature_names = feature_matrix(design)
    y = design.response
    s = design.weights
    n = raw.shape[0]

    # optimize on unit-scale columns; parameters are mapped back afterwards
    mu, sigma = _feature_scaling(raw, s)
    X = (raw - mu) / sigma

    rng = np.random.default_rng(hp.seed)
    params = initialize_params(X, hp, rng)
    lr = hp.learning_rate
    trace = []

    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            batch = order[start:start + hp.batch_size]
            _, grads = loss_and_gradients(X[batch], y[batch], s[batch],
                                          params, hp)
            params = CadreModelParams(
                centers=params.centers - lr * grads.centers,
                expert_weights=params.expert_weights - lr * grads.expert_weights,
                expert_bias=params.expert_bias - lr * grads.expert_bias,
                seminorm_diag=params.seminorm_diag - lr * grads.seminorm_diag,
                gamma=params.gamma,
            )
        epoch_loss, _ = loss_and_gradients(X, y, s, params, hp)
        if not np.isfinite(epoch_loss):
            raise DivergedLoss(f"loss diverged at epoch {epoch}")
        trace.append(epoch_loss)
        if progress is not None:
            progress(epoch + 1, epoch_loss)

    final = _unscale_params(params, mu, sigma)
    return ScmFitResult(
        params=final,
        hyperparams=hp,
        loss_trace=tuple(trace),
        cadre_assignments=assign_cadres(raw, final),
        feature_names=feature_names,
    )


# --- reporting -------------------------------------------------------------------

def _weighted_stats(values: np.ndarray, weights: np.ndarray):
    present = ~np.isnan(values)
    if not present.any():
        return None
    v = values[present]
    w = weights[present]
    total = float(w.sum())
    mean = float(np.sum(w * v) / total)
    var = float(np.sum(w * (v - mean) ** 2) / total)
    return {"mean": mean, "sd": float(np.sqrt(var)), "n": int(present.sum())}


def cadre_summaries(design: DesignMatrix, ds: Dataset,
                    assignments: np.ndarray, m: int) -> tuple:
    """Per-cadre cohort statistics on the raw (untransformed) data.

    Continuous variables get survey-weighted mean and SD; demographic
    coded variables get weighted counts per category. Empty cadres are
    reported with count 0 and no statistics.
    """
    rows = np.asarray(design.row_index)
    weights = design.weights
    continuous_vars = [v for v in ds.dictionary
                       if v.kind == "continuous" and v.category != "weight"]
    coded_vars = [v for v in ds.dictionary
                  if v.kind in ("categorical", "binary")
                  and v.category == "demographic"]

    out = []
    for cadre in range(m):
        member = assignments == cadre
        if not member.any():
            out.append(CadreSummary(cadre=cadre, count=0, weighted_count=0.0,
                                    continuous={}, categorical={}))
            continue
        w = weights[member]
        cont = {}
        for v in continuous_vars:
            stats = _weighted_stats(ds.column(v.id)[rows][member], w)
            if stats is not None:
                cont[v.id] = stats
        cats = {}
        for v in coded_vars:
            col = ds.column(v.id)[rows][member]
            counts = {}
            for code_str, label in sorted(v.codebook.items(),
                                          key=lambda kv: float(kv[0])):
                mask = col == float(code_str)
                counts[label] = float(w[mask].sum())
            cats[v.id] = counts
        out.append(CadreSummary(cadre=cadre, count=int(member.sum()),
                                weighted_count=float(w.sum()),
                                continuous=cont, categorical=cats))
    return tuple(out)


def per_cadre_association(plan, ds: Dataset, assignments: np.ndarray,
                          alpha: float, row_index, m: int) -> tuple:
    """EWAS scan restricted to each cadre's members, FDR within cadre."""
    rows = np.asarray(row_index)
    k_budget = _single_factor_width(plan, ds)
    out = []
    for cadre in range(m):
        member_rows = rows[assignments == cadre]
        n_m = member_rows.size
        if n_m <= k_budget + 10:
            out.append(CadreScan(cadre=cadre, testable=False,
                                 reason=f"InsufficientN: {n_m} members",
                                 results=(), skipped=()))
            continue
        subset = ds.subset(member_rows)
        y = subset.column(plan.response.response_var)
        labels = _binary_labels(y, plan.response.positive_rule)
        if labels is None or len(set(labels)) < 2:
            out.append(CadreScan(cadre=cadre, testable=False,
                                 reason="AllOneClass: a single response class",
                                 results=(), skipped=()))
            continue
        try:
            report = ewas_scan(plan, subset, alpha)
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            out.append(CadreScan(cadre=cadre, testable=False,
                                 reason=f"{type(exc).__name__}: {exc}",
                                 results=(), skipped=()))
            continue
        out.append(CadreScan(cadre=cadre, testable=True, reason="",
                             results=report.results, skipped=report.skipped))
    return tuple(out)


def _binary_labels(values: np.ndarray, rule):
    present = values[~np.isnan(values)]
    if present.size == 0:
        return None
    return binarize_response(present, rule).tolist()


def _single_factor_width(plan, ds: Dataset) -> int:
    """Upper bound on columns in a one-factor design: the N_m precondition."""
    k = 2  # intercept + factor
    for ctl in plan.controls:
        var = ds.variable(ctl)
        if var.kind == "continuous":
            k += 1
        else:
            k += max(len(var.codebook) - 1, 1)
    if plan.creatinine_var:
        k += 1
    return k
