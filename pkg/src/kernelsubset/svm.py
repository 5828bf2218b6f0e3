"""Kernel SVM dual solved by sequential minimal optimization.

The working pair is the maximal violating pair with second-order choice of
the second index (Fan, Chen & Lin 2005). Kernels are the subset Gaussian
kernel or a plain linear kernel restricted to the selected features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .alignment import subset_kernel_matrix
from .dataset import Dataset, SubsetMask

TAU = 1e-12


class SvmError(RuntimeError):
    pass


class ConvergenceError(SvmError):
    def __init__(self, message: str, dual_value: float):
        super().__init__(f"{message} (last dual objective {dual_value:.10g})")
        self.dual_value = dual_value


def dual_objective(alpha, y, K) -> float:
    """``sum(alpha) - 1/2 sum_ih alpha_i alpha_h y_i y_h K_ih``."""
    a = np.asarray(alpha, dtype=float) * np.asarray(y, dtype=float)
    return float(np.sum(alpha) - 0.5 * a @ np.asarray(K, dtype=float) @ a)


def smo(K, y, C: float = 1.0, tol: float = 1e-6, max_iter: int | None = None, record: bool = False):
    """Solve the dual for a precomputed kernel matrix.

    Returns ``(alpha, n_iter, trace)``; ``trace`` holds the dual objective
    after each update when ``record`` is set.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if K.shape != (n, n):
        raise SvmError(f"kernel shape {K.shape} does not match {n} labels")
    if not C > 0:
        raise SvmError("C must be positive")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SvmError("both classes are required")
    max_iter = max(100_000, 100 * n) if max_iter is None else max_iter

    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    trace = [0.0] if record else []
    pos = y > 0

    for it in range(max_iter):
        at_upper = alpha >= C
        at_lower = alpha <= 0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        score = -y * G
        if not up.any() or not low.any():
            return alpha, it, trace
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        g_max = score[i]
        g_min = score[low].min()
        if g_max - g_min < tol:
            return alpha, it, trace
        # second-order choice of j among violating members of I_low
        grad_diff = g_max - score
        cand = low & (grad_diff > 0)
        quad = QD[i] + QD - 2.0 * K[i]
        quad = np.where(quad > 0, quad, TAU)
        gain = np.where(cand, -(grad_diff**2) / quad, np.inf)
        j = int(np.argmin(gain))

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            qc = QD[i] + QD[j] + 2.0 * Q[i, j]
            qc = qc if qc > 0 else TAU
            delta = (-G[i] - G[j]) / qc
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            qc = QD[i] + QD[j] - 2.0 * Q[i, j]
            qc = qc if qc > 0 else TAU
            delta = (G[i] - G[j]) / qc
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        G += Q[:, i] * (ni - ai) + Q[:, j] * (nj - aj)
        if record:
            trace.append(dual_objective(alpha, y, K))

    raise ConvergenceError(f"SMO did not converge in {max_iter} iterations", dual_objective(alpha, y, K))


def bias_from_alpha(alpha, y, K, C: float) -> float:
    """Average ``y_i - f0(x_i)`` over free support vectors, else the midpoint of the feasible range."""
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.any(alpha > 0):
        raise SvmError("no support vectors")
    g = K @ (alpha * y)
    cand = y - g
    eps = 1e-12 * C
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        return float(cand[free].mean())
    at_c = alpha >= C - eps
    at_0 = ~at_c
    lower = ((y > 0) & at_0) | ((y < 0) & at_c)
    upper = ~lower
    lb = cand[lower].max() if lower.any() else None
    ub = cand[upper].min() if upper.any() else None
    if lb is None:
        return float(ub)
    if ub is None:
        return float(lb)
    return float((lb + ub) / 2.0)


def kernel_matrix(x, z, gamma: float | None, kind: str = "gaussian", x2=None) -> np.ndarray:
    z = z.array() if isinstance(z, SubsetMask) else np.asarray(z, dtype=float)
    if kind == "gaussian":
        return subset_kernel_matrix(x, z, gamma, x2)
    if kind == "linear":
        m = z.astype(bool)
        a = np.asarray(x, dtype=float)[:, m]
        b = a if x2 is None else np.asarray(x2, dtype=float)[:, m]
        return a @ b.T
    raise SvmError(f"unknown kernel {kind!r}")


@dataclass
class SvmModel:
    alpha: np.ndarray
    b: float
    C: float
    gamma: float | None
    z: tuple[int, ...]
    x_train: np.ndarray
    y_train: np.ndarray
    kernel: str = "gaussian"
    n_iter: int = 0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > 0)

    def decision_function(self, x_new) -> np.ndarray:
        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        sv = self.support
        K = kernel_matrix(self.x_train[sv], self.z, self.gamma, self.kernel, x_new)
        return (self.alpha[sv] * self.y_train[sv]) @ K + self.b

    def predict(self, x_new) -> np.ndarray:
        return np.where(self.decision_function(x_new) >= 0, 1, -1)

    def dual_value(self) -> float:
        K = kernel_matrix(self.x_train, self.z, self.gamma, self.kernel)
        return dual_objective(self.alpha, self.y_train, K)

    def to_dict(self) -> dict:
        sv = self.support
        return {
            "alpha": self.alpha.tolist(),
            "b": self.b,
            "C": self.C,
            "gamma": self.gamma,
            "z": list(self.z),
            "support_indices": sv.tolist(),
            "kernel": self.kernel,
            "support_x": self.x_train[sv].tolist(),
            "support_y": self.y_train[sv].tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        """Rebuild a predict-only model from its support vectors."""
        sv = d["support_indices"]
        alpha = np.asarray(d["alpha"], dtype=float)[sv]
        return cls(
            alpha=alpha,
            b=float(d["b"]),
            C=float(d["C"]),
            gamma=d["gamma"],
            z=tuple(d["z"]),
            x_train=np.asarray(d["support_x"], dtype=float).reshape(len(sv), len(d["z"])),
            y_train=np.asarray(d["support_y"], dtype=float),
            kernel=d.get("kernel", "gaussian"),
        )


def train(
    data,
    z,
    gamma: float | None = None,
    C: float = 1.0,
    tol: float = 1e-6,
    kernel: str = "gaussian",
    max_iter: int | None = None,
) -> SvmModel:
    """Train on ``data`` (a Dataset or ``(x, y)``) using only the features in ``z``."""
    if isinstance(data, Dataset):
        x, y = data.x, data.y
    else:
        x, y = data
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    zt = tuple(z.z) if isinstance(z, SubsetMask) else tuple(int(v) for v in z)
    if len(zt) != x.shape[1]:
        raise SvmError(f"mask length {len(zt)} != {x.shape[1]} features")
    if kernel == "gaussian" and not (gamma and gamma > 0):
        raise SvmError("gaussian kernel needs gamma > 0")
    K = kernel_matrix(x, zt, gamma, kernel)
    alpha, n_iter, _ = smo(K, y, C=C, tol=tol, max_iter=max_iter)
    b = bias_from_alpha(alpha, y, K, C)
    return SvmModel(alpha=alpha, b=b, C=C, gamma=gamma, z=zt, x_train=x, y_train=y, kernel=kernel, n_iter=n_iter)


def compute_bias(m: SvmModel) -> float:
    K = kernel_matrix(m.x_train, m.z, m.gamma, m.kernel)
    return bias_from_alpha(m.alpha, m.y_train, K, m.C)


def predict(m: SvmModel, x_new) -> np.ndarray:
    """Labels in {-1, +1}; a zero decision value maps to +1."""
    return m.predict(x_new)
