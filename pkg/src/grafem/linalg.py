"""Sparse storage with a frozen pattern, preconditioned CG, and small pseudo-inverses."""

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["FixedPatternSparse", "CGResult", "cg_solve", "pinv_small"]


class FixedPatternSparse:
    """Square CSR matrix whose structure is fixed once at construction.

    The pattern is given as a list of (row, col) coordinates, duplicates
    allowed. :meth:`assemble` then takes one value per coordinate and sums
    duplicates with ``np.bincount``, a fixed-order reduction, so repeated
    assemblies of the same values are bitwise identical. Only the value
    array ever changes afterwards.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        n = int(shape)
        if rows.shape != cols.shape:
            raise ValueError("rows and cols must have equal length")
        diag = np.arange(n, dtype=np.int64)
        all_rows = np.concatenate([diag, rows])
        all_cols = np.concatenate([diag, cols])
        if all_rows.size and (all_rows.min() < 0 or all_rows.max() >= n or all_cols.min() < 0 or all_cols.max() >= n):
            raise ValueError("pattern coordinate out of range")
        keys, inverse = np.unique(all_rows * n + all_cols, return_inverse=True)
        self.n = n
        self.indices = (keys % n).astype(np.int64)
        self._row_of = (keys // n).astype(np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self._row_of, minlength=n), out=self.indptr[1:])
        self._diag_pos = inverse[:n]
        self._slot = inverse[n:]
        self.indices.setflags(write=False)
        self.indptr.setflags(write=False)
        self.data = np.zeros(keys.size)
        self._hash = self._compute_hash()

    def _compute_hash(self):
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(self.indptr.tobytes())
        h.update(self.indices.tobytes())
        return h.hexdigest()

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def nnz(self):
        return self.data.size

    @property
    def structure_hash(self):
        """SHA-256 of the current index arrays (recomputed on each access)."""
        return self._compute_hash()

    @property
    def initial_structure_hash(self):
        return self._hash

    def positions(self, rows, cols):
        """Value-array positions of existing pattern entries; KeyError if absent."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys = self._row_of * self.n + self.indices
        wanted = rows * self.n + cols
        pos = np.searchsorted(keys, wanted.ravel())
        pos = np.minimum(pos, keys.size - 1)
        if not np.array_equal(keys[pos], wanted.ravel()):
            raise KeyError("entry not in the fixed sparsity pattern")
        return pos.reshape(wanted.shape)

    def assemble(self, values):
        """Overwrite the values from one number per pattern coordinate."""
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != self._slot.size:
            raise ValueError(f"expected {self._slot.size} values, got {values.size}")
        self.data = np.bincount(self._slot, weights=values, minlength=self.nnz)
        return self

    def zero(self):
        self.data[:] = 0.0
        return self

    def add_diagonal(self, diag):
        self.data[self._diag_pos] += diag
        return self

    def diagonal(self):
        return self.data[self._diag_pos].copy()

    def scale(self, factor):
        self.data *= factor
        return self

    def add_scaled(self, other, factor=1.0):
        """``self += factor * other`` for another matrix with the same pattern."""
        if other.structure_hash != self.structure_hash:
            raise ValueError("patterns differ")
        self.data += factor * other.data
        return self

    def copy(self):
        new = object.__new__(FixedPatternSparse)
        new.__dict__.update(self.__dict__)
        new.data = self.data.copy()
        return new

    def apply_dirichlet(self, dofs):
        """Zero the rows and columns of ``dofs`` and put 1 on their diagonal."""
        dofs = np.asarray(dofs, dtype=np.int64)
        if dofs.size == 0:
            return self
        mask = np.zeros(self.n, dtype=bool)
        mask[dofs] = True
        self.data[mask[self._row_of] | mask[self.indices]] = 0.0
        self.data[self._diag_pos[dofs]] = 1.0
        return self

    def matvec(self, x):
        prod = self.data * np.asarray(x)[self.indices]
        out = np.add.reduceat(prod, self.indptr[:-1]) if prod.size else np.zeros(self.n)
        # reduceat repeats the next value for empty rows; every row has a diagonal, so none are empty
        return out

    def __matmul__(self, x):
        return self.matvec(x)

    def to_scipy(self):
        return sp.csr_matrix((self.data.copy(), self.indices.copy(), self.indptr.copy()), shape=self.shape)

    def to_dense(self):
        return self.to_scipy().toarray()

    def asymmetry(self):
        """max |A - A^T| relative to max |A| (0 for an all-zero matrix)."""
        A = self.to_scipy()
        scale = np.abs(self.data).max() if self.nnz else 0.0
        if scale == 0.0:
            return 0.0
        diff = (A - A.T).tocsr()
        return float(np.abs(diff.data).max() / scale) if diff.nnz else 0.0


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    indefinite: bool = False


def _as_operator(A):
    if isinstance(A, FixedPatternSparse):
        return A.matvec, A.diagonal()
    if sp.issparse(A):
        A = A.tocsr()
        return (lambda v: A @ v), A.diagonal()
    A = np.asarray(A, dtype=np.float64)
    return (lambda v: A @ v), np.diag(A).copy()


def cg_solve(A, b, x0=None, tol=1e-8, max_iters=None, preconditioner="jacobi"):
    """Preconditioned conjugate gradient for symmetric positive definite ``A``.

    Stops once ``||b - A x|| <= tol * ||b||``. A non-positive curvature
    ``p^T A p`` stops the iteration with ``indefinite=True`` so the caller can
    switch solvers. ``preconditioner`` is ``"jacobi"``, ``None`` or an array
    holding the inverse diagonal.
    """
    matvec, diag = _as_operator(A)
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    if max_iters is None:
        max_iters = max(10 * n, 100)
    if isinstance(preconditioner, str):
        if preconditioner != "jacobi":
            raise ValueError(f"unknown preconditioner {preconditioner!r}")
        inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    elif preconditioner is None:
        inv_diag = np.ones(n)
    else:
        inv_diag = np.asarray(preconditioner, dtype=np.float64)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, True)
    r = b - matvec(x)
    res = np.linalg.norm(r) / b_norm
    if res <= tol:
        return CGResult(x, 0, res, True)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iters + 1):
        Ap = matvec(p)
        curv = p @ Ap
        if not curv > 0.0:
            return CGResult(x, it, res, False, indefinite=True)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / b_norm
        if res <= tol:
            return CGResult(x, it, res, True)
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(x, max_iters, res, False)


def pinv_small(M, rcond=1e-12, return_rank=False):
    """Moore-Penrose pseudo-inverse by SVD, dropping singular values below ``rcond * s_max``."""
    M = np.asarray(M, dtype=np.float64)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    cutoff = rcond * (s[0] if s.size else 0.0)
    keep = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    P = (Vt.T * s_inv) @ U.T
    if return_rank:
        return P, int(keep.sum())
    return P
