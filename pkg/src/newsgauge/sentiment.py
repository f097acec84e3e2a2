"""Regularized logistic outlook classifier and its cosine-similarity twin.

The binary model is trained by full-batch damped Newton iterations on the
L2-penalized negative log-likelihood (intercept unpenalized), which is
deterministic and drives the gradient to essentially machine precision.
The multinomial variant, used for topic classification, is parameterized
against a reference class so that the two-class case coincides exactly
with the binary model at the same penalty.

A `CosineScorer` built from the same anchors scores an article by the dot
product with the difference of the mean positive and mean negative anchor
embedding; for unit-norm inputs this equals the average cosine similarity
to the positive anchors minus the average to the negative ones. The
`equivalence_report` quantifies how closely the fitted logistic direction
tracks that difference vector.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit, logsumexp, softmax
from scipy.stats import pearsonr, spearmanr

logger = logging.getLogger(__name__)

GRAD_TOL = 1e-7
LOSS_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """Training failed to converge; message carries diagnostics."""


@dataclass
class LogisticModel:
    """Fitted L2-penalized binary logistic classifier."""

    weights: np.ndarray
    bias: float
    l2_lambda: float
    converged: bool
    n_iter: int
    final_grad_norm: float
    seed: Optional[int] = None

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[0])


@dataclass
class MultinomialModel:
    """Fitted penalized multinomial logistic classifier.

    ``weights`` holds one row per class; the first class is the reference
    and keeps a zero row, which makes the two-class model identical to
    `LogisticModel` at the same penalty.
    """

    classes: tuple[str, ...]
    weights: np.ndarray  # (T, D), row 0 all zeros
    biases: np.ndarray  # (T,), entry 0 zero
    l2_lambda: float
    converged: bool
    n_iter: int

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[1])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dimension:
            raise ValueError(
                f"dimension mismatch: model {self.dimension}, input {X.shape[1]}"
            )
        logits = X @ self.weights.T + self.biases
        return softmax(logits, axis=1)


def _penalized_nll(X, y, w, b, l2_lambda):
    z = X @ w + b
    # log(1 + exp(z)) - y*z, summed, written via log_expit for stability
    nll = -np.sum(y * log_expit(z) + (1.0 - y) * log_expit(-z))
    return nll + 0.5 * l2_lambda * float(w @ w)


def train_logistic(
    X: np.ndarray,
    y: np.ndarray,
    l2_lambda: float = 1.0,
    seed: Optional[int] = 0,
    max_iter: int = 100,
    grad_tol: float = GRAD_TOL,
    loss_tol: float = LOSS_TOL,
) -> LogisticModel:
    """Fit the penalized binary classifier by damped Newton iterations.

    Minimizes ``sum_i [log(1+exp(z_i)) - y_i z_i] + (lambda/2)||w||^2``
    with ``z = Xw + b``; the intercept is not penalized. Deterministic:
    iterations start from zero and use no randomness (``seed`` is only
    recorded). Converges when the gradient norm falls below ``grad_tol``
    or the relative loss change below ``loss_tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (N, D) with one label per row")
    n, d = X.shape
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("labels must be binary 0/1")
    if classes.size < 2:
        raise ValueError("need at least one example of each class")
    if l2_lambda < 0:
        raise ValueError("l2_lambda must be non-negative")
    if l2_lambda == 0.0 and n < d:
        raise ValueError("ill-posed without regularization (fewer rows than features)")

    w = np.zeros(d)
    b = 0.0
    loss = _penalized_nll(X, y, w, b, l2_lambda)
    grad_norm = np.inf
    for iteration in range(1, max_iter + 1):
        z = X @ w + b
        p = expit(z)
        residual = p - y
        grad_w = X.T @ residual + l2_lambda * w
        grad_b = float(residual.sum())
        grad_norm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
        if not np.isfinite(loss):
            raise ConvergenceError(f"non-finite loss at iteration {iteration}")
        if grad_norm <= grad_tol:
            return LogisticModel(w, b, l2_lambda, True, iteration - 1, grad_norm, seed)

        curvature = np.clip(p * (1.0 - p), 1e-12, None)
        Xw = X * curvature[:, None]
        hessian = np.empty((d + 1, d + 1))
        hessian[:d, :d] = X.T @ Xw + l2_lambda * np.eye(d)
        hessian[:d, d] = Xw.sum(axis=0)
        hessian[d, :d] = hessian[:d, d]
        hessian[d, d] = curvature.sum()
        step = np.linalg.solve(hessian, np.append(grad_w, grad_b))

        # Backtracking keeps Newton monotone on ill-scaled problems.
        scale = 1.0
        for _ in range(40):
            w_new = w - scale * step[:d]
            b_new = b - scale * step[d]
            loss_new = _penalized_nll(X, y, w_new, b_new, l2_lambda)
            if loss_new <= loss:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                f"line search failed at iteration {iteration} (grad norm {grad_norm:.3g})"
            )
        rel_change = abs(loss - loss_new) / max(abs(loss), 1.0)
        w, b, loss = w_new, b_new, loss_new
        if rel_change <= loss_tol:
            z = X @ w + b
            residual = expit(z) - y
            grad_w = X.T @ residual + l2_lambda * w
            grad_b = float(residual.sum())
            grad_norm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
            return LogisticModel(w, float(b), l2_lambda, True, iteration, grad_norm, seed)

    raise ConvergenceError(
        f"no convergence after {max_iter} iterations "
        f"(grad norm {grad_norm:.3g}, lambda {l2_lambda:.3g})"
    )


def penalized_loss(model: LogisticModel, X: np.ndarray, y: np.ndarray) -> float:
    """Training objective evaluated at the model's parameters."""
    return _penalized_nll(
        np.asarray(X, dtype=np.float64),
        np.asarray(y, dtype=np.float64).ravel(),
        model.weights,
        model.bias,
        model.l2_lambda,
    )


def penalized_gradient(
    model: LogisticModel, X: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, float]:
    """Analytic gradient (weights part, bias part) of the training objective."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    residual = expit(X @ model.weights + model.bias) - y
    return X.T @ residual + model.l2_lambda * model.weights, float(residual.sum())


def score(model: LogisticModel, vector: np.ndarray) -> float:
    """Probability of a positive outlook for one embedding."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (model.dimension,):
        raise ValueError(
            f"dimension mismatch: model {model.dimension}, vector {vector.shape}"
        )
    return float(expit(vector @ model.weights + model.bias))


def score_batch(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.dimension:
        raise ValueError(f"dimension mismatch: model {model.dimension}, input {X.shape[1]}")
    return expit(X @ model.weights + model.bias)


@dataclass
class CosineScorer:
    """Linear scorer along the mean-positive minus mean-negative direction."""

    positive_mean: np.ndarray
    negative_mean: np.ndarray
    direction: np.ndarray = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.positive_mean, dtype=np.float64)
        n = np.asarray(self.negative_mean, dtype=np.float64)
        object.__setattr__(self, "positive_mean", p)
        object.__setattr__(self, "negative_mean", n)
        direction = p - n
        if not np.any(direction):
            raise ValueError("positive and negative anchor means coincide")
        self.direction = direction

    @classmethod
    def from_anchors(cls, X: np.ndarray, y: np.ndarray) -> "CosineScorer":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).ravel()
        if not (np.any(y == 1) and np.any(y == 0)):
            raise ValueError("need anchors of both polarities")
        return cls(X[y == 1].mean(axis=0), X[y == 0].mean(axis=0))


def cosine_score(scorer: CosineScorer, vector: np.ndarray, strict: bool = True) -> float:
    """Dot product with the anchor-mean difference direction.

    For a unit-norm input and unit-norm anchors this equals the average
    cosine similarity to the positive anchors minus the average to the
    negative anchors. ``strict`` rejects inputs that are not unit norm.
    """
    vector = np.asarray(vector, dtype=np.float64)
    if strict:
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"input not unit-norm (norm {norm:.6g}); normalize first")
    return float(vector @ scorer.direction)


def cosine_score_batch(
    scorer: CosineScorer, X: np.ndarray, strict: bool = True
) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if strict:
        norms = np.linalg.norm(X, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("inputs not unit-norm; normalize first")
    return X @ scorer.direction


@dataclass
class EquivalenceReport:
    """Agreement between logistic probabilities and the cosine direction."""

    n: int
    pearson: Optional[float]
    spearman: Optional[float]
    angle_degrees: float
    insufficient_sample: bool


def equivalence_report(
    model: LogisticModel, scorer: CosineScorer, X: np.ndarray
) -> EquivalenceReport:
    """Correlate the two scoring routes on a sample and compare directions."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    logistic_scores = score_batch(model, X)
    linear_scores = cosine_score_batch(scorer, X, strict=False)
    cos_angle = float(
        model.weights
        @ scorer.direction
        / (np.linalg.norm(model.weights) * np.linalg.norm(scorer.direction))
    )
    angle = float(np.degrees(np.arccos(np.clip(cos_angle, -1.0, 1.0))))
    if X.shape[0] < 2:
        return EquivalenceReport(X.shape[0], None, None, angle, True)
    pearson = float(pearsonr(logistic_scores, linear_scores).statistic)
    spearman = float(spearmanr(logistic_scores, linear_scores).statistic)
    return EquivalenceReport(X.shape[0], pearson, spearman, angle, False)


def _multinomial_objective(theta, X1, Y, l2_lambda, n_classes, d):
    """Loss and gradient for the reference-class parameterization."""
    B = theta.reshape(n_classes - 1, d + 1)
    logits = np.zeros((X1.shape[0], n_classes))
    logits[:, 1:] = X1 @ B.T
    log_norm = logsumexp(logits, axis=1)
    nll = float(log_norm.sum() - np.sum(logits * Y))
    penalty_w = B[:, :d]
    loss = nll + 0.5 * l2_lambda * float(np.sum(penalty_w * penalty_w))
    P = np.exp(logits - log_norm[:, None])
    G = (P[:, 1:] - Y[:, 1:]).T @ X1
    G[:, :d] += l2_lambda * penalty_w
    return loss, G.ravel()


def train_multinomial(
    X: np.ndarray,
    labels: Sequence[str],
    l2_lambda: float = 1.0,
    seed: Optional[int] = 0,
    max_iter: int = 2000,
) -> MultinomialModel:
    """Fit the penalized multinomial classifier over the label alphabet.

    Classes are ordered alphabetically; the first is the reference class
    with fixed zero coefficients. Class biases are not penalized.
    Deterministic for fixed inputs.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = [str(label) for label in labels]
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise ValueError("X must be (N, D) with one label per row")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    counts = {c: 0 for c in classes}
    for label in labels:
        counts[label] += 1
    empty = [c for c, k in counts.items() if k == 0]
    if empty:
        raise ValueError(f"empty class {empty[0]!r}")
    if l2_lambda <= 0.0 and X.shape[0] < X.shape[1]:
        raise ValueError("ill-posed without regularization (fewer rows than features)")

    n, d = X.shape
    n_classes = len(classes)
    index = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), [index[label] for label in labels]] = 1.0
    X1 = np.hstack([X, np.ones((n, 1))])

    theta0 = np.zeros((n_classes - 1) * (d + 1))
    result = minimize(
        _multinomial_objective,
        theta0,
        args=(X1, Y, l2_lambda, n_classes, d),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": 1e-14, "gtol": 1e-9},
    )
    if not np.isfinite(result.fun):
        raise ConvergenceError("non-finite multinomial loss")
    B = result.x.reshape(n_classes - 1, d + 1)
    weights = np.zeros((n_classes, d))
    biases = np.zeros(n_classes)
    weights[1:] = B[:, :d]
    biases[1:] = B[:, d]
    if not result.success and float(np.max(np.abs(result.jac))) > 1e-4:
        raise ConvergenceError(
            f"multinomial training stopped without convergence: {result.message}"
        )
    return MultinomialModel(
        classes, weights, biases, l2_lambda, bool(result.success), int(result.nit)
    )


# --- serialization -----------------------------------------------------------

_SENT_MAGIC = b"SENT"
_MNOM_MAGIC = b"MNOM"
_BLOB_VERSION = 1


def save_logistic(model: LogisticModel, path: str | Path) -> None:
    with Path(path).open("wb") as handle:
        handle.write(_SENT_MAGIC)
        handle.write(struct.pack("<II", _BLOB_VERSION, model.dimension))
        handle.write(struct.pack("<dd", model.l2_lambda, model.bias))
        handle.write(model.weights.astype("<f8").tobytes())


def load_logistic(path: str | Path) -> LogisticModel:
    data = Path(path).read_bytes()
    if data[:4] != _SENT_MAGIC:
        raise ValueError(f"{path}: not a sentiment model blob")
    version, dimension = struct.unpack_from("<II", data, 4)
    if version != _BLOB_VERSION:
        raise ValueError(f"{path}: unsupported blob version {version}")
    l2_lambda, bias = struct.unpack_from("<dd", data, 12)
    weights = np.frombuffer(data, dtype="<f8", count=dimension, offset=28).copy()
    return LogisticModel(weights, bias, l2_lambda, True, 0, 0.0)


def save_multinomial(model: MultinomialModel, path: str | Path) -> None:
    class_blob = "\x00".join(model.classes).encode("utf-8")
    with Path(path).open("wb") as handle:
        handle.write(_MNOM_MAGIC)
        handle.write(
            struct.pack(
                "<IIIId",
                _BLOB_VERSION,
                model.dimension,
                len(model.classes),
                len(class_blob),
                model.l2_lambda,
            )
        )
        handle.write(class_blob)
        handle.write(model.biases.astype("<f8").tobytes())
        handle.write(model.weights.astype("<f8").tobytes())


def load_multinomial(path: str | Path) -> MultinomialModel:
    data = Path(path).read_bytes()
    if data[:4] != _MNOM_MAGIC:
        raise ValueError(f"{path}: not a topic model blob")
    version, dimension, n_classes, blob_len, l2_lambda = struct.unpack_from("<IIIId", data, 4)
    if version != _BLOB_VERSION:
        raise ValueError(f"{path}: unsupported blob version {version}")
    offset = 4 + struct.calcsize("<IIIId")
    classes = tuple(data[offset : offset + blob_len].decode("utf-8").split("\x00"))
    offset += blob_len
    biases = np.frombuffer(data, dtype="<f8", count=n_classes, offset=offset).copy()
    offset += 8 * n_classes
    weights = (
        np.frombuffer(data, dtype="<f8", count=n_classes * dimension, offset=offset)
        .reshape(n_classes, dimension)
        .copy()
    )
    return MultinomialModel(classes, weights, biases, l2_lambda, True, 0)
