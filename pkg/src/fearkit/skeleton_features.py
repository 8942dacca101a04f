"""Skeleton feature reduction: flatten 25x3 joints and reduce by PCA.

The eigendecomposition is a cyclic Jacobi sweep over the 75x75 sample
covariance. Jacobi is slower than LAPACK but bit-reproducible across
platforms, and each component's sign is fixed by making its
largest-magnitude entry positive, so fitted models replay exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PcaError
from .ingest import KeypointFrame

PCA_SCHEMA_VERSION = 1
FLAT_DIM = 75


def flatten(frame: KeypointFrame) -> np.ndarray:
    """Flatten one complete frame to (x0, y0, z0, x1, ..., z24)."""
    out = np.empty(FLAT_DIM)
    for j, joint in enumerate(frame.joints):
        if joint is None:
            raise PcaError(f"cannot flatten a frame with joint {j} missing")
        out[3 * j: 3 * j + 3] = joint
    return out


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12,
                max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) sorted by decreasing eigenvalue;
    eigenvectors are the columns of the second array.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PcaError(f"matrix must be square, got {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10 * max(1.0, np.abs(a).max())):
        raise PcaError("matrix is not symmetric")
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    threshold = tol * scale
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= threshold / (n * n):
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], v[:, order]


@dataclass(frozen=True)
class PcaModel:
    """Fitted linear projection: rows of ``components`` are orthonormal."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    retained_ratio: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "schema_version": PCA_SCHEMA_VERSION,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "retained_ratio": self.retained_ratio,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PcaModel":
        if doc.get("schema_version") != PCA_SCHEMA_VERSION:
            raise PcaError(f"unsupported PCA schema_version {doc.get('schema_version')}")
        return cls(
            mean=np.array(doc["mean"]),
            components=np.array(doc["components"]),
            explained_variance=np.array(doc["explained_variance"]),
            retained_ratio=float(doc["retained_ratio"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PcaModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_pca(rows: np.ndarray, variance_target: float = 0.98,
            n_components: int | None = None) -> PcaModel:
    """Fit a PCA model on an (n, 75) matrix.

    The component count is the smallest k whose cumulative explained
    variance reaches ``variance_target``; passing ``n_components`` overrides
    the target (used to pin the dataset schema to a fixed width).
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise PcaError(f"expected a 2-D matrix, got shape {rows.shape}")
    n, d = rows.shape
    if n < 2:
        raise PcaError(f"need at least 2 rows to fit PCA, got {n}")
    if not (0 < variance_target <= 1):
        raise PcaError(f"variance_target must be in (0, 1], got {variance_target}")
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = jacobi_eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    total = eigvals.sum()
    if total <= 0.0:
        raise PcaError("zero total variance: all rows are identical")
    if n_components is not None:
        if not (1 <= n_components <= d):
            raise PcaError(f"n_components must be in [1, {d}], got {n_components}")
        k = n_components
    else:
        cumulative = np.cumsum(eigvals) / total
        k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
        k = min(k, d)
    components = eigvecs[:, :k].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance=eigvals[:k].copy(),
        retained_ratio=float(eigvals[:k].sum() / total),
    )


def apply_pca(model: PcaModel, rows: np.ndarray) -> np.ndarray:
    """Project (n, 75) rows onto the fitted components, giving (n, k)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != model.mean.shape[0]:
        raise PcaError(
            f"row width {rows.shape[1]} does not match model width {model.mean.shape[0]}")
    return (rows - model.mean) @ model.components.T
