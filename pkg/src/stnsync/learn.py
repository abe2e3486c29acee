"""Kernels, soft-margin SVM dual solver, l_p-norm MKL and one-vs-rest wrapping.

MKL alternates between a binary SVM on the combined Gram ``sum_m d_m K_m``
and the closed-form weight update

    d_m = ||w_m||^(2/(p+1)) / (sum_k ||w_k||^(2p/(p+1)))^(1/p),
    ||w_m||^2 = d_m^2 (alpha*y)' K_m (alpha*y),

which keeps ``||d||_p = 1``.  The decision function is

    f(z) = sum_i sum_m alpha_i y_i d_m K_m(x_i, z) + w0.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ._smo import smo_solve
from .errors import ConfigError, ConvergenceError, DegenerateError, LabelError, ShapeError
from .signal_io import CLASSES

KERNEL_KINDS = ("linear", "polynomial", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    c: float = 0.0
    degree: int = 2
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ConfigError("polynomial degree must be a positive integer")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ConfigError("rbf gamma must be positive")
        if self.kind in ("linear", "polynomial") and self.c < 0:
            raise ConfigError("kernel offset c must be non-negative")

    def to_dict(self) -> Dict:
        if self.kind == "linear":
            return {"kind": "linear", "c": self.c}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "c": self.c, "degree": int(self.degree)}
        return {"kind": "rbf", "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d) -> "KernelSpec":
        return cls(**d)


def linear(c=0.0):
    return KernelSpec("linear", c=c)


def polynomial(c=1.0, degree=2):
    return KernelSpec("polynomial", c=c, degree=degree)


def rbf(gamma):
    return KernelSpec("rbf", gamma=gamma)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    return float(kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


def kernel_matrix(spec: KernelSpec, X, Z) -> np.ndarray:
    """K[i, j] = k(X[i], Z[j])."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if X.shape[1] != Z.shape[1]:
        raise ShapeError(f"feature dimensions differ: {X.shape[1]} vs {Z.shape[1]}")
    if spec.kind == "rbf":
        return np.exp(-spec.gamma * cdist(X, Z, "sqeuclidean"))
    lin = X @ Z.T + spec.c
    if spec.kind == "linear":
        return lin
    return lin ** int(spec.degree)


def trace_normalizer(K) -> float:
    """trace(K) / N: dividing by it gives trace(K) = N."""
    K = np.asarray(K)
    norm = float(np.trace(K)) / K.shape[0]
    if not np.isfinite(norm) or norm <= 0:
        raise DegenerateError(f"Gram matrix has non-positive trace ({norm})")
    return norm


def gram(spec: KernelSpec, rows) -> np.ndarray:
    """Trace-normalised Gram matrix of ``rows`` (trace equals N)."""
    K = kernel_matrix(spec, rows, rows)
    if not np.all(np.isfinite(K)):
        raise DegenerateError(f"{spec.kind} Gram matrix has non-finite entries")
    K = 0.5 * (K + K.T)
    return K / trace_normalizer(K)


def median_sq_distance(rows) -> float:
    X = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    d2 = pdist(X, "sqeuclidean")
    med = float(np.median(d2)) if d2.size else 0.0
    return med if med > 0 else 1.0


def default_bank(rows) -> Tuple[KernelSpec, ...]:
    """linear, quadratic and three RBF widths scaled by the median squared distance."""
    s2 = median_sq_distance(rows)
    return (linear(1.0), polynomial(1.0, 2), rbf(0.1 / s2), rbf(1.0 / s2), rbf(10.0 / s2))


@dataclass(frozen=True)
class TrainConfig:
    C: float = 100.0
    p: float = 1.5
    kernel_bank: Optional[Tuple[KernelSpec, ...]] = None  # None: default_bank(training rows)
    kkt_tol: float = 1e-8
    d_tol: float = 1e-4
    max_outer_iters: int = 100
    max_smo_iters: int = 100_000

    def __post_init__(self):
        if self.kernel_bank is not None:
            object.__setattr__(self, "kernel_bank", tuple(self.kernel_bank))
            if not self.kernel_bank:
                raise ConfigError("kernel bank must not be empty")
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if not self.p >= 1:
            raise ConfigError("p must be >= 1")
        if not self.kkt_tol > 0 or not self.d_tol > 0 or self.max_outer_iters < 1:
            raise ConfigError("tolerances must be positive and max_outer_iters >= 1")

    def bank_for(self, rows) -> Tuple[KernelSpec, ...]:
        return self.kernel_bank if self.kernel_bank is not None else default_bank(rows)

    def to_dict(self) -> Dict:
        return {
            "C": self.C, "p": self.p,
            "kernel_bank": None if self.kernel_bank is None else [k.to_dict() for k in self.kernel_bank],
            "kkt_tol": self.kkt_tol, "d_tol": self.d_tol,
            "max_outer_iters": self.max_outer_iters, "max_smo_iters": self.max_smo_iters,
        }

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        d = dict(d)
        if d.get("kernel_bank") is not None:
            d["kernel_bank"] = tuple(KernelSpec.from_dict(k) for k in d["kernel_bank"])
        return cls(**d)


def _as_pm1(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all((y == 1) | (y == -1)):
        raise LabelError("binary labels must be +1 or -1")
    if np.all(y == 1) or np.all(y == -1):
        raise LabelError("both classes must be present")
    return y


@dataclass
class SvmSolution:
    alpha: np.ndarray
    bias: float
    iterations: int
    residual: float
    objective: float  # dual objective sum(a) - 0.5 a'Qa (to be maximised)
    gradient: np.ndarray = field(repr=False, default=None)


def _bias_from_gradient(alpha, y, G, C) -> float:
    """w0 = mean over free vectors of y_i - sum_j a_j y_j K_ji; midpoint of the feasible interval otherwise."""
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return -float(np.mean(yG[free]))
    at_upper = alpha >= C
    at_lower = alpha <= 0
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = float(np.min(yG[ub_mask])) if np.any(ub_mask) else np.inf
    lb = float(np.max(yG[lb_mask])) if np.any(lb_mask) else -np.inf
    if np.isinf(ub):
        rho = lb
    elif np.isinf(lb):
        rho = ub
    else:
        rho = 0.5 * (ub + lb)
    return -rho


def solve_binary_svm(K, y, C: float = 100.0, tol: float = 1e-3, max_iter: int = 100_000,
                     alpha0=None) -> SvmSolution:
    """Soft-margin SVM dual on a precomputed Gram matrix."""
    K = np.asarray(K, dtype=np.float64)
    y = _as_pm1(y)
    n = y.shape[0]
    if K.shape != (n, n):
        raise ShapeError(f"Gram shape {K.shape} does not match {n} labels")
    if not C > 0:
        raise ConfigError("C must be positive")
    Q = np.ascontiguousarray(K * np.outer(y, y))
    alpha = np.zeros(n) if alpha0 is None else np.clip(np.array(alpha0, dtype=np.float64), 0.0, C)
    if alpha0 is not None and abs(alpha @ y) > 1e-12 * C * n:
        alpha = np.zeros(n)
    G = Q @ alpha - 1.0
    iters, gap = smo_solve(Q, y, float(C), float(tol), int(max_iter), alpha, G)
    if gap >= tol:
        raise ConvergenceError(f"SVM dual did not converge in {iters} iterations "
                               f"(KKT violation {gap:.3g} > {tol})", residual=float(gap))
    obj = float(alpha.sum() - 0.5 * alpha @ Q @ alpha)
    return SvmSolution(alpha, _bias_from_gradient(alpha, y, G, C), int(iters), float(gap), obj, G)


@dataclass
class MklModel:
    alphas: np.ndarray
    labels: np.ndarray
    support_rows: np.ndarray
    kernel_weights: np.ndarray
    bias: float
    bank: Tuple[KernelSpec, ...]
    trace_norms: np.ndarray
    C: float = 100.0
    p: float = 1.5
    objective_trajectory: List[float] = field(default_factory=list)
    weight_trajectory: List[np.ndarray] = field(default_factory=list)
    dual_objective: float = float("nan")
    outer_iterations: int = 0
    stop_reason: str = ""

    def decision_value(self, z) -> np.ndarray:
        return decision_value(self, z)

    def to_dict(self) -> Dict:
        return {
            "alphas": self.alphas.tolist(),
            "labels": self.labels.tolist(),
            "support_rows": self.support_rows.tolist(),
            "kernel_weights": self.kernel_weights.tolist(),
            "bias": float(self.bias),
            "bank": [k.to_dict() for k in self.bank],
            "trace_norms": self.trace_norms.tolist(),
            "C": self.C, "p": self.p,
            "objective_trajectory": [float(v) for v in self.objective_trajectory],
            "dual_objective": self.dual_objective,
            "outer_iterations": self.outer_iterations,
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, d) -> "MklModel":
        n_feat = len(d["support_rows"][0]) if d["support_rows"] else 0
        return cls(
            np.array(d["alphas"], dtype=np.float64), np.array(d["labels"], dtype=np.float64),
            np.array(d["support_rows"], dtype=np.float64).reshape(-1, n_feat),
            np.array(d["kernel_weights"], dtype=np.float64), float(d["bias"]),
            tuple(KernelSpec.from_dict(k) for k in d["bank"]),
            np.array(d["trace_norms"], dtype=np.float64), d["C"], d["p"],
            list(d.get("objective_trajectory", [])), [], d.get("dual_objective", float("nan")),
            d.get("outer_iterations", 0), d.get("stop_reason", ""))


def _pnorm(d, p) -> float:
    return float(np.sum(d ** p) ** (1.0 / p))


def _weight_update(w2, p) -> np.ndarray:
    """argmin_d sum_m w2_m / d_m subject to ||d||_p = 1, d >= 0."""
    num = w2 ** (1.0 / (p + 1.0))
    d = num / np.sum(w2 ** (p / (p + 1.0))) ** (1.0 / p)
    return d / _pnorm(d, p)


def _primal(d, q, margins_violation, C) -> float:
    """0.5 * sum_m ||w_m||^2 / d_m + C * sum(xi) at a dual point (||w_m||^2/d_m = d_m q_m)."""
    return 0.5 * float(np.dot(d, q)) + C * float(np.sum(margins_violation))


def mkl_train(rows, y, cfg: TrainConfig = TrainConfig()) -> MklModel:
    """l_p-norm MKL by alternating SVM solves and closed-form weight updates.

    Each accepted step is a block-coordinate descent step on the primal
    0.5 sum_m ||w_m||^2/d_m + C sum(xi); the recorded objective trajectory is
    that primal value.  An SVM solve that would raise it (possible only
    through solver tolerance) is rejected and the alternation stops.
    """
    X = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    y = _as_pm1(y)
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    bank = cfg.bank_for(X)
    M = len(bank)
    C, p = float(cfg.C), float(cfg.p)

    grams = []
    norms = []
    for spec in bank:
        K = kernel_matrix(spec, X, X)
        if not np.all(np.isfinite(K)):
            raise DegenerateError(f"{spec.kind} Gram matrix has non-finite entries")
        K = 0.5 * (K + K.T)
        nrm = trace_normalizer(K)
        grams.append(K / nrm)
        norms.append(nrm)
    grams = np.stack(grams)

    def solve(d, alpha0):
        Kc = np.tensordot(d, grams, axes=1)
        sol = solve_binary_svm(Kc, y, C, cfg.kkt_tol, cfg.max_smo_iters, alpha0)
        ay = sol.alpha * y
        q = np.einsum("i,mij,j->m", ay, grams, ay)
        f = Kc @ ay + sol.bias
        xi = np.maximum(0.0, 1.0 - y * f)
        return sol, np.maximum(q, 0.0), xi

    d = np.full(M, M ** (-1.0 / p))
    sol, q, xi = solve(d, None)
    primal = _primal(d, q, xi, C)
    traj = [primal]
    d_hist = [d.copy()]
    stop = "max_outer_iters"
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        w2 = d * d * q
        if not np.any(w2 > 0):
            raise DegenerateError("all kernel blocks have zero norm; MKL weights are undefined")
        d_new = _weight_update(w2, p)
        if np.max(np.abs(d_new - d)) < cfg.d_tol:
            stop = "converged"
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            reg = np.where(w2 > 0, w2 / d_new, 0.0)
        primal_after_d = 0.5 * float(reg.sum()) + C * float(xi.sum())
        sol_new, q_new, xi_new = solve(d_new, sol.alpha)
        primal_new = _primal(d_new, q_new, xi_new, C)
        if primal_new > min(primal_after_d, primal):
            stop = "solver_precision"
            break
        d, sol, q, xi, primal = d_new, sol_new, q_new, xi_new, primal_new
        traj.append(primal)
        d_hist.append(d.copy())

    sv = sol.alpha > 0
    return MklModel(
        alphas=sol.alpha[sv].copy(), labels=y[sv].copy(), support_rows=X[sv].copy(),
        kernel_weights=d.copy(), bias=float(sol.bias), bank=tuple(bank),
        trace_norms=np.array(norms), C=C, p=p, objective_trajectory=traj,
        weight_trajectory=d_hist, dual_objective=sol.objective, outer_iterations=it,
        stop_reason=stop)


def decision_value(model: MklModel, z) -> np.ndarray:
    """f(z) for one row (returns a float) or a stack of rows (returns an array)."""
    Z = np.asarray(z, dtype=np.float64)
    single = Z.ndim == 1
    Z = np.atleast_2d(Z)
    if model.support_rows.shape[0] == 0:
        out = np.full(Z.shape[0], model.bias)
        return float(out[0]) if single else out
    if Z.shape[1] != model.support_rows.shape[1]:
        raise ShapeError(f"row dimension {Z.shape[1]} != model dimension {model.support_rows.shape[1]}")
    ay = model.alphas * model.labels
    out = np.full(Z.shape[0], model.bias)
    for spec, dm, nrm in zip(model.bank, model.kernel_weights, model.trace_norms):
        if dm == 0:
            continue
        out += dm * (ay @ kernel_matrix(spec, model.support_rows, Z)) / nrm
    return float(out[0]) if single else out


@dataclass
class OneVsRest:
    classes: Tuple[str, ...]
    models: List[MklModel]

    def decision_matrix(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        return np.stack([decision_value(m, Z) for m in self.models], axis=1)

    def predict(self, Z) -> List[str]:
        """Largest decision value wins; ties go to the earliest class in canonical order."""
        D = self.decision_matrix(Z)
        return [self.classes[k] for k in np.argmax(D, axis=1)]

    def to_dict(self) -> Dict:
        return {"classes": list(self.classes), "models": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, d) -> "OneVsRest":
        return cls(tuple(d["classes"]), [MklModel.from_dict(m) for m in d["models"]])


def multiclass_train(rows, labels: Sequence[str], cfg: TrainConfig = TrainConfig(),
                     classes: Optional[Sequence[str]] = None) -> OneVsRest:
    """One MKL model per class (class k = +1, rest = -1), sharing one kernel bank."""
    X = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    labels = list(labels)
    if len(labels) != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {len(labels)} labels")
    present = set(labels)
    if classes is None:
        classes = [c for c in CLASSES if c in present] + sorted(present - set(CLASSES))
    else:
        classes = list(classes)
        missing = [c for c in classes if c not in present]
        if missing:
            raise LabelError(f"classes without training samples: {missing}")
        extra = present - set(classes)
        if extra:
            raise LabelError(f"labels outside the class list: {sorted(extra)}")
    if len(classes) < 2:
        raise LabelError("need at least two classes")
    cfg = replace(cfg, kernel_bank=cfg.bank_for(X))
    lab = np.array(labels)
    models = [mkl_train(X, np.where(lab == c, 1.0, -1.0), cfg) for c in classes]
    return OneVsRest(tuple(classes), models)
