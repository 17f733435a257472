"""Symmetric eigendecomposition and singular values for assembled operators.

Dense-first policy: everything at desk scale (dimension <= 8192) goes
through LAPACK's tridiagonalization + implicit-shift drivers via
scipy.linalg.eigh.  A Lanczos path (ARPACK through scipy.sparse.linalg,
restarts keep the Krylov basis reorthogonalized) is available for a few
extreme pairs of larger sparse operators.

Eigenvalues are repeated according to multiplicity throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotPositiveError, NumericError

DENSE_CAP = 8192


def _as_dense(A) -> np.ndarray:
    """Accept ndarray, scipy sparse, or anything exposing .matrix."""
    if hasattr(A, "matrix"):
        A = A.matrix
    if sp.issparse(A):
        A = A.toarray()
    M = np.asarray(A, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    return M


def _check_symmetric(M: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.abs(M).max() if M.size else 0.0
    if scale and np.abs(M - M.T).max() > rtol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class Spectrum:
    """Ordered real spectrum, multiplicities repeated.

    ascending for eigenvalues of (shifted) positive operators, descending
    for singular values and compact-operator sequences.
    """

    values: np.ndarray
    vectors: np.ndarray | None = None
    descriptor: str = ""
    order: str = "ascending"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        diffs = np.diff(v)
        ok = np.all(diffs >= -1e-12) if self.order == "ascending" else np.all(diffs <= 1e-12)
        if not ok:
            raise ValueError(f"values are not {self.order}")

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def residuals(self, A) -> np.ndarray:
        """Per-pair ||A v - lambda v|| / (||A|| ||v||); needs stored vectors."""
        if self.vectors is None:
            raise ValueError("spectrum was computed without eigenvectors")
        M = _as_dense(A)
        norm = np.linalg.norm(M, 2)
        rs = M @ self.vectors - self.vectors * self.values[None, :]
        return np.linalg.norm(rs, axis=0) / (norm * np.linalg.norm(self.vectors, axis=0))

    def to_csv(self, path) -> None:
        """Delimited text export, one (index, value) row per entry."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "value"])
            for j, val in enumerate(self.values, start=1):
                w.writerow([j, repr(float(val))])

    def record(self) -> dict:
        """Structured report record."""
        v = self.values
        return {
            "descriptor": self.descriptor,
            "count": int(v.size),
            "order": self.order,
            "min": float(v.min()) if v.size else None,
            "max": float(v.max()) if v.size else None,
            "sum": float(v.sum()),
            **self.meta,
        }


def sym_eig(A, want_vectors: bool = False, descriptor: str | None = None) -> Spectrum:
    """Full ascending spectrum of a symmetric matrix.

    The symmetrized matrix (A + A^T)/2 is what actually gets decomposed.
    """
    M = _as_dense(A)
    if M.shape[0] > DENSE_CAP:
        raise NumericError(
            f"dense eigendecomposition capped at {DENSE_CAP}, got {M.shape[0]}; "
            "use lanczos_extreme for a few pairs of a larger operator"
        )
    M = _check_symmetric(M)
    desc = descriptor if descriptor is not None else getattr(A, "descriptor", "")
    try:
        if want_vectors:
            w, v = scipy.linalg.eigh(M)
            return Spectrum(w, v, desc)
        w = scipy.linalg.eigvalsh(M)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise NumericError(f"symmetric eigensolver did not converge: {exc}") from exc
    return Spectrum(w, None, desc)


def singular_values(B, descriptor: str | None = None) -> Spectrum:
    """Descending singular values s_j = (eigenvalues of B^T B)^{1/2}.

    Computed through the symmetric embedding [[0, B], [B^T, 0]], whose
    eigenvalues are +-s_j plus zeros; this avoids squaring the condition
    number the way an explicit Gram product would.
    """
    M = _as_dense(B)
    m, n = M.shape
    emb = np.zeros((m + n, m + n))
    emb[:m, m:] = M
    emb[m:, :m] = M.T
    w = sym_eig(emb).values
    s = np.sort(w)[::-1][: min(m, n)]
    s[np.abs(s) < 1e-14 * max(np.abs(w).max(), 1.0)] = 0.0
    desc = descriptor if descriptor is not None else getattr(B, "descriptor", "")
    return Spectrum(s, None, desc, order="descending")


def lanczos_extreme(A, k: int = 6, which: str = "SA", tol: float = 1e-10) -> Spectrum:
    """A few extreme eigenvalues by Lanczos iteration (ascending order).

    which = "SA" for the smallest algebraic, "LA" for the largest.  Small
    inputs fall back to the dense path, where the request is exact.
    """
    mat = A.matrix if hasattr(A, "matrix") else A
    n = mat.shape[0]
    if n <= max(4 * k, 64):
        w = sym_eig(mat).values
        picked = w[:k] if which == "SA" else w[-k:]
        return Spectrum(picked, None, getattr(A, "descriptor", ""), meta={"path": "dense"})
    try:
        w = spla.eigsh(mat, k=k, which=which, return_eigenvectors=False, tol=tol)
    except spla.ArpackNoConvergence as exc:
        raise NumericError(f"Lanczos iteration did not converge for {k} pairs: {exc}") from exc
    return Spectrum(np.sort(w), None, getattr(A, "descriptor", ""), meta={"path": "lanczos"})


def min_eigenvalue_estimate(A) -> float:
    """Lower end of the spectrum, for positivity shifts."""
    return float(lanczos_extreme(A, k=1, which="SA").values[0])


def require_positive_definite(A, name: str = "operator") -> None:
    """Raise NotPositiveError unless the smallest eigenvalue is positive."""
    if min_eigenvalue_estimate(A) <= 0.0:
        raise NotPositiveError(f"{name} is not positive definite; add a positivity shift")
