"""Binary kernel SVM trained by sequential minimal optimization.

Solves the standard soft-margin dual with a maximal-violating-pair working
set: each iteration picks the pair that most violates the KKT conditions and
solves the two-variable subproblem analytically. Grid search over C and gamma
scores each point by mean positive-class F1 across stratified folds.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError, TrainingError, ValidationError

MODEL_FORMAT = "svm-model"
MODEL_VERSION = 1

# Alphas this close to a box bound are treated as sitting on it.
_BOUND_EPS = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str  # "rbf" | "poly" | "linear"
    gamma: float | None = None
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rbf", "poly", "linear"):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind in ("rbf", "poly"):
            if self.gamma is None or self.gamma <= 0:
                raise ConfigError(f"{self.kind} kernel needs gamma > 0")
        if self.degree < 1:
            raise ConfigError("polynomial degree must be >= 1")


@dataclass(frozen=True)
class SvmParams:
    c: float
    kernel: KernelSpec
    tol: float = 1e-3
    max_passes: int = 100_000

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError("C must be positive")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_passes < 1:
            raise ConfigError("max_passes must be >= 1")


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # (m, d)
    dual_coefs: np.ndarray       # (m,) signed alphas, alpha_i * y_i
    bias: float
    kernel: KernelSpec

    @property
    def n_support(self) -> int:
        return len(self.dual_coefs)


@dataclass(frozen=True)
class GridPoint:
    c: float
    gamma: float
    mean_f1: float
    fold_f1: tuple[float, ...]


@dataclass(frozen=True)
class CvReport:
    points: tuple[GridPoint, ...]
    best: SvmParams
    seed: int


@dataclass(frozen=True)
class DualSolution:
    """Raw SMO output over the full training set (before SV pruning)."""

    alpha: np.ndarray
    bias: float
    iterations: int
    residual: float  # final maximal KKT violation (m - M)
    converged: bool


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeError(f"kernel inputs differ in shape: {x.shape} vs {y.shape}")
    if spec.kind == "linear":
        return float(x @ y)
    if spec.kind == "poly":
        return float((spec.gamma * (x @ y) + spec.coef0) ** spec.degree)
    d = x - y
    return float(np.exp(-spec.gamma * (d @ d)))


def kernel_matrix(spec: KernelSpec, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """Pairwise kernel values, shape (len(xa), len(xb))."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    if xa.ndim != 2 or xb.ndim != 2 or xa.shape[1] != xb.shape[1]:
        raise ShapeError(f"kernel matrix inputs incompatible: {xa.shape} vs {xb.shape}")
    dots = xa @ xb.T
    if spec.kind == "linear":
        return dots
    if spec.kind == "poly":
        return (spec.gamma * dots + spec.coef0) ** spec.degree
    sq_a = np.einsum("ij,ij->i", xa, xa)
    sq_b = np.einsum("ij,ij->i", xb, xb)
    d2 = np.maximum(sq_a[:, None] + sq_b[None, :] - 2.0 * dots, 0.0)
    return np.exp(-spec.gamma * d2)


def _as_signed_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.dtype == bool:
        return np.where(y, 1.0, -1.0)
    y = y.astype(float)
    vals = set(np.unique(y).tolist())
    if vals <= {-1.0, 1.0}:
        return y
    if vals <= {0.0, 1.0}:
        return np.where(y > 0, 1.0, -1.0)
    raise ValidationError(f"labels must be boolean or +/-1, got values {sorted(vals)}")


def solve_dual(k: np.ndarray, y: np.ndarray, params: SvmParams) -> DualSolution:
    """SMO on a precomputed kernel matrix. y must be +/-1 floats.

    Working pair: i is the maximal violator; j is chosen by the standard
    second-order rule (largest analytic objective decrease among violators),
    which avoids stalling when many training points coincide. The reported
    residual is still the maximal-violating-pair gap.
    """
    n = len(y)
    c = params.c
    alpha = np.zeros(n)
    u = np.zeros(n)  # u_i = sum_j alpha_j y_j K_ij (decision without bias)

    m_val = mm_val = 0.0
    converged = False
    iterations = 0
    diag = np.diag(k).copy()
    for iterations in range(1, params.max_passes + 1):
        yu = y - u
        at_upper = alpha >= c - _BOUND_EPS
        at_lower = alpha <= _BOUND_EPS
        up_mask = np.where(y > 0, ~at_upper, ~at_lower)
        low_mask = np.where(y > 0, ~at_lower, ~at_upper)
        if not up_mask.any() or not low_mask.any():
            converged = True
            break
        i = int(np.argmax(np.where(up_mask, yu, -np.inf)))
        m_val = yu[i]
        mm_val = float(np.min(np.where(low_mask, yu, np.inf)))
        if m_val - mm_val <= params.tol:
            converged = True
            break
        gap = m_val - yu  # violation of each candidate j against i
        candidates = low_mask & (gap > 0)
        quad = np.maximum(diag[i] + diag - 2.0 * k[i], 1e-12)
        gain = np.where(candidates, gap * gap / quad, -np.inf)
        j = int(np.argmax(gain))

        # Two-variable analytic step on (i, j).
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        eta = max(float(quad[j]), 1e-12)
        a_j = alpha[j] + y[j] * (yu[j] - m_val) / eta
        a_j = min(max(a_j, lo), hi)
        if a_j < _BOUND_EPS:
            a_j = 0.0
        elif a_j > c - _BOUND_EPS:
            a_j = c
        delta_j = a_j - alpha[j]
        if delta_j == 0.0:
            # Pair cannot move (degenerate box corner); bail with a warning.
            break
        a_i = alpha[i] - y[i] * y[j] * delta_j
        if a_i < _BOUND_EPS:
            a_i = 0.0
        elif a_i > c - _BOUND_EPS:
            a_i = c
        delta_i = a_i - alpha[i]
        alpha[i], alpha[j] = a_i, a_j
        u += (delta_i * y[i]) * k[i] + (delta_j * y[j]) * k[j]
    residual = m_val - mm_val
    if not converged:
        warnings.warn(
            f"SMO hit the iteration cap ({params.max_passes}); "
            f"KKT violation {residual:.3e} > tol {params.tol:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    bias = 0.5 * (m_val + mm_val) if np.isfinite(m_val + mm_val) else 0.0
    return DualSolution(
        alpha=alpha, bias=float(bias), iterations=iterations,
        residual=float(residual), converged=converged,
    )


def kkt_residuals(k: np.ndarray, y: np.ndarray, alpha: np.ndarray, bias: float, c: float) -> np.ndarray:
    """Per-point KKT violation of a dual solution, given the kernel matrix."""
    margins = y * (k @ (alpha * y) + bias)
    res = np.abs(margins - 1.0)
    res = np.where(alpha <= _BOUND_EPS, np.maximum(0.0, 1.0 - margins), res)
    res = np.where(alpha >= c - _BOUND_EPS, np.maximum(0.0, margins - 1.0), res)
    return res


def train_smo(x, y, params: SvmParams) -> SvmModel:
    """Train on features x (n, d) and labels y (bool or +/-1)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise TrainingError(f"need a 2-D matrix with >= 2 samples, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("training features contain non-finite values")
    ys = _as_signed_labels(y)
    if len(ys) != len(x):
        raise ShapeError(f"{len(x)} samples but {len(ys)} labels")
    if np.all(ys > 0) or np.all(ys < 0):
        raise TrainingError("training data contains a single class")

    k = kernel_matrix(params.kernel, x, x)
    sol = solve_dual(k, ys, params)
    keep = sol.alpha > _BOUND_EPS
    return SvmModel(
        support_vectors=x[keep].copy(),
        dual_coefs=(sol.alpha * ys)[keep].copy(),
        bias=sol.bias,
        kernel=params.kernel,
    )


def decision(model: SvmModel, x) -> float:
    """Signed margin sum_i dual_coef_i * k(sv_i, x) + bias."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.support_vectors.shape[1]:
        raise ShapeError(
            f"input has shape {x.shape}; model expects ({model.support_vectors.shape[1]},)"
        )
    k = kernel_matrix(model.kernel, model.support_vectors, x[None, :])[:, 0]
    return float(model.dual_coefs @ k + model.bias)


def decision_batch(model: SvmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.support_vectors.shape[1]:
        raise ShapeError(
            f"input has shape {x.shape}; model expects (*, {model.support_vectors.shape[1]})"
        )
    k = kernel_matrix(model.kernel, x, model.support_vectors)
    return k @ model.dual_coefs + model.bias


def predict_proba(model: SvmModel, x) -> float:
    """Logistic of the margin; in (0, 1)."""
    return float(_sigmoid(decision(model, x)))


def predict_proba_batch(model: SvmModel, x: np.ndarray) -> np.ndarray:
    return _sigmoid(decision_batch(model, x))


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def f1_positive(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """F1 of the positive class; 0 when there are no true or predicted positives."""
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    tp = int(np.count_nonzero(y_true & y_pred))
    fp = int(np.count_nonzero(~y_true & y_pred))
    fn = int(np.count_nonzero(y_true & ~y_pred))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """k disjoint index folds, each with (near-)proportional class counts."""
    y = np.asarray(y, dtype=bool)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (True, False):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        for pos, sample in enumerate(idx):
            folds[pos % k].append(int(sample))
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def grid_search(
    x,
    y,
    cs,
    gammas,
    kernel_kind: str = "rbf",
    k: int = 4,
    seed: int = 0,
    tol: float = 1e-3,
    max_passes: int = 100_000,
    degree: int = 3,
    coef0: float = 0.0,
) -> CvReport:
    """Mean positive-class F1 over k stratified folds for each (C, gamma).

    Ties go to the smaller C, then the smaller gamma. Deterministic for a
    fixed (data, grid, seed).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    yb = y.astype(bool) if y.dtype != bool else y
    if not list(cs) or not list(gammas):
        raise ConfigError("empty parameter grid")
    minority = min(int(np.count_nonzero(yb)), int(np.count_nonzero(~yb)))
    if k < 2 or k > minority:
        raise ValidationError(
            f"cannot build {k} stratified folds with minority count {minority}"
        )
    rng = np.random.default_rng(seed)
    folds = stratified_folds(yb, k, rng)
    all_idx = np.arange(len(yb))

    points: list[GridPoint] = []
    best: GridPoint | None = None
    for c in sorted(set(float(v) for v in cs)):
        for gamma in sorted(set(float(v) for v in gammas)):
            spec = KernelSpec(kind=kernel_kind, gamma=gamma, degree=degree, coef0=coef0)
            params = SvmParams(c=c, kernel=spec, tol=tol, max_passes=max_passes)
            fold_scores = []
            for fold in folds:
                test_mask = np.zeros(len(yb), dtype=bool)
                test_mask[fold] = True
                train_idx = all_idx[~test_mask]
                model = train_smo(x[train_idx], yb[train_idx], params)
                preds = decision_batch(model, x[fold]) > 0
                fold_scores.append(f1_positive(yb[fold], preds))
            point = GridPoint(
                c=c, gamma=gamma,
                mean_f1=float(np.mean(fold_scores)),
                fold_f1=tuple(fold_scores),
            )
            points.append(point)
            if best is None or point.mean_f1 > best.mean_f1:
                best = point
    chosen = SvmParams(
        c=best.c,
        kernel=KernelSpec(kind=kernel_kind, gamma=best.gamma, degree=degree, coef0=coef0),
        tol=tol,
        max_passes=max_passes,
    )
    return CvReport(points=tuple(points), best=chosen, seed=seed)


def save_model(model: SvmModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kernel": {
            "kind": model.kernel.kind,
            "gamma": model.kernel.gamma,
            "degree": model.kernel.degree,
            "coef0": model.kernel.coef0,
        },
        "bias": model.bias,
        "dual_coefs": model.dual_coefs.tolist(),
        "support_vectors": model.support_vectors.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> SvmModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
        raise ValidationError(f"{path}: not a version-{MODEL_VERSION} {MODEL_FORMAT} file")
    kern = payload["kernel"]
    return SvmModel(
        support_vectors=np.array(payload["support_vectors"], dtype=float).reshape(
            len(payload["dual_coefs"]), -1
        ),
        dual_coefs=np.array(payload["dual_coefs"], dtype=float),
        bias=float(payload["bias"]),
        kernel=KernelSpec(
            kind=kern["kind"], gamma=kern["gamma"],
            degree=int(kern["degree"]), coef0=float(kern["coef0"]),
        ),
    )
