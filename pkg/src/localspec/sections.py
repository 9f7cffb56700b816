"""Uneven rectangular sections and certified smallest-singular-value intervals.

For a finite-range operator, the section maps the window B_L(x) into the
padded window B_{L+m}(x); its smallest singular value upper-bounds the lower
norm at lambda and is certified here by bisection: t is below the smallest
singular value iff Q*Q - t^2 is positive definite, which a Cholesky
factorization decides.

Floating-point safety is one-sided by construction: a factorization is only
trusted after shifting the diagonal down by ``pivot_floor``, so certified
lower endpoints carry that margin, while failures (possibly spurious) only
ever shrink the reported upper endpoint.  One-dimensional windows produce
banded Gram matrices and use the banded Cholesky, which keeps window sizes in
the hundred-thousands tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import get_lapack_funcs

from .geometry import BOUNDARY_TOL
from .operators import CatalogError, MatrixLike, Operator, Patch

HERMITIAN_RTOL = 1e-10
BAND_MIN_COLS = 48  # below this a dense factorization is cheaper


@dataclass(frozen=True)
class CertifiedValue:
    """A real quantity enclosed in [lo, hi] with provenance."""

    lo: float
    hi: float
    width: float
    note: str = ""

    def __post_init__(self):
        if self.lo > self.hi + 1e-15:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")


@dataclass
class UnevenSection:
    """Rectangular restriction of H - lambda from a window to its padded window."""

    rows: np.ndarray
    cols: np.ndarray
    matrix: MatrixLike
    scale: float
    cutoff: float
    lam: complex
    patch_label: str = ""

    @property
    def shape(self):
        return (len(self.rows), len(self.cols))

    def dense(self, limit: int = 4096) -> np.ndarray:
        if sp.issparse(self.matrix):
            if self.matrix.shape[1] > limit:
                raise CatalogError("section too large to densify")
            return np.asarray(self.matrix.todense(), dtype=complex)
        return np.asarray(self.matrix, dtype=complex)


def build_uneven_section(
    op: Operator, patch: Patch, lam: complex, col_scale: Optional[float] = None
) -> UnevenSection:
    """Section of (H - lambda) with columns on patch points inside B_L(0).

    The patch must live at scale at least L + m so that every row reachable
    from the columns is present; by default L = patch scale - m.
    """
    m = op.finite_range
    if m is None:
        raise ValueError("uneven sections need a finite-range operator (trim first)")
    patch_scale = _patch_scale(op, patch)
    if col_scale is None:
        col_scale = patch_scale - m
    if col_scale <= 0:
        raise ValueError("column scale must be positive")
    if patch_scale < col_scale + m - BOUNDARY_TOL:
        raise CatalogError(
            f"patch at scale {patch_scale} cannot pad columns at scale {col_scale} by {m}"
        )
    col_idx = np.flatnonzero(
        np.max(np.abs(patch.points), axis=1) < col_scale - BOUNDARY_TOL
    )
    if col_idx.size == 0:
        raise CatalogError(f"no patch points inside the column window (L={col_scale})")
    if sp.issparse(patch.matrix):
        mat = patch.matrix.tocsc()[:, col_idx].tolil()
        for j, r in enumerate(col_idx):
            mat[r, j] = mat[r, j] - lam
        mat = mat.tocsr()
    else:
        mat = np.array(patch.matrix, dtype=complex)[:, col_idx]
        mat[col_idx, np.arange(col_idx.size)] -= lam
    return UnevenSection(
        rows=patch.points.copy(),
        cols=patch.points[col_idx].copy(),
        matrix=mat,
        scale=float(col_scale),
        cutoff=float(m),
        lam=complex(lam),
        patch_label=patch.label,
    )


def _patch_scale(op: Operator, patch: Patch) -> float:
    if patch.scale > 0.0:
        return float(patch.scale)
    # fallback: tightest box certainly containing the offsets
    return float(np.max(np.abs(patch.points))) + float(op.separation)


# ---------------------------------------------------------------------------
# positive-definiteness with a one-sided floating-point floor
# ---------------------------------------------------------------------------


def _pivot_floor(diag_max: float, dim: int) -> float:
    return dim * np.finfo(float).eps * max(diag_max, 0.0)


def _potrf_ok(a: np.ndarray) -> bool:
    (potrf,) = get_lapack_funcs(("potrf",), (a,))
    _, info = potrf(a, lower=True, overwrite_a=False)
    return info == 0


def _pbtrf_ok(ab: np.ndarray) -> bool:
    (pbtrf,) = get_lapack_funcs(("pbtrf",), (ab,))
    _, info = pbtrf(ab, lower=True, overwrite_ab=False)
    return info == 0


def is_positive_definite(a: np.ndarray) -> bool:
    """Cholesky test with the pivot floor folded in (trusted successes only).

    The input must be hermitian up to a relative 1e-10 deviation; it is
    symmetrized before testing.
    """
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if dev > HERMITIAN_RTOL * scale:
        raise ValueError(f"matrix is not hermitian (deviation {dev:.3e})")
    h = (m + m.conj().T) / 2.0
    n = h.shape[0]
    if n == 0:
        return True
    diag = h.diagonal().real
    if np.min(diag) <= 0:
        return False
    shifted = h - _pivot_floor(float(np.max(diag)), n) * np.eye(n)
    return _potrf_ok(np.asarray(shifted, dtype=complex))


def _bisect_sigma(test, upper: float, width: float, lo: float = 0.0):
    """Shrink [lo, upper] around the smallest singular value.

    ``test(t)`` must certify t < s1 on success; failures move the upper
    endpoint.  Returns (lo, hi) with hi - lo <= width unless floating point
    runs out of resolution first.
    """
    hi = upper
    while hi - lo > width:
        t = 0.5 * (lo + hi)
        if t <= lo or t >= hi:
            break
        if test(t):
            lo = t
        else:
            hi = t
    return lo, hi


class _Workspace:
    """Per-patch factorization workspace for one (operator, scale) pair.

    Precomputes everything lambda-independent: the column block A of H on
    rows x cols, the Gram block A*A, and the square col-section B = E*A, so
    that the Gram matrix of the shifted section assembles in O(window) per
    lambda:  G(lam) = A*A - lam B* - conj(lam) B + |lam|^2 I.
    """

    def __init__(self, patch: Patch, col_scale: float, cutoff: float):
        self.label = patch.label
        pts = patch.points
        col_idx = np.flatnonzero(
            np.max(np.abs(pts), axis=1) < col_scale - BOUNDARY_TOL
        )
        if col_idx.size == 0:
            raise CatalogError(f"no columns inside window L={col_scale}")
        self.ncols = int(col_idx.size)
        a = patch.matrix.tocsr()[:, col_idx] if sp.issparse(patch.matrix) else np.asarray(
            patch.matrix, dtype=complex
        )[:, col_idx]
        self.col_row_idx = col_idx  # columns are these rows of the patch
        if sp.issparse(a):
            self.col_sq = np.asarray(abs(a).multiply(abs(a)).sum(axis=0)).ravel()
            self.diag_a = np.asarray(a.tocsc()[col_idx, np.arange(self.ncols)]).ravel()
        else:
            self.col_sq = np.sum(np.abs(a) ** 2, axis=0)
            self.diag_a = a[col_idx, np.arange(self.ncols)]
        self.bandwidth = self._gram_bandwidth(a)
        self.banded = (
            pts.shape[1] == 1
            and self.ncols >= BAND_MIN_COLS
            and self.bandwidth + 1 < self.ncols
        )
        if self.banded:
            asp = sp.csr_matrix(a)
            gram = (asp.conj().T @ asp).tocsc()
            b = sp.csc_matrix(asp[col_idx, :])
            bw = self.bandwidth
            self.g0 = _lower_bands(gram, bw, self.ncols)
            self.b_low = _lower_bands(b, bw, self.ncols)
            self.b_up = _upper_bands(b, bw, self.ncols)
        else:
            self.a_dense = np.asarray(
                a.todense() if sp.issparse(a) else a, dtype=complex
            )

    @staticmethod
    def _gram_bandwidth(a) -> int:
        if sp.issparse(a):
            acsr = a.tocsr()
            bw = 0
            indptr, indices = acsr.indptr, acsr.indices
            for r in range(acsr.shape[0]):
                cols = indices[indptr[r] : indptr[r + 1]]
                if cols.size:
                    bw = max(bw, int(cols.max() - cols.min()))
            return bw
        nz = np.abs(np.asarray(a)) > 0
        bw = 0
        for r in range(nz.shape[0]):
            cols = np.flatnonzero(nz[r])
            if cols.size:
                bw = max(bw, int(cols[-1] - cols[0]))
        return bw

    # ---- per-lambda pieces ---------------------------------------------------
    def shifted_col_norms(self, lam: complex) -> np.ndarray:
        vals = (
            self.col_sq
            - 2.0 * np.real(np.conj(lam) * self.diag_a)
            + abs(lam) ** 2
        )
        return np.sqrt(np.maximum(vals, 0.0))

    def gram_bands(self, lam: complex) -> np.ndarray:
        ab = self.g0 - lam * np.conj(self.b_up) - np.conj(lam) * self.b_low
        ab[0] += abs(lam) ** 2
        return ab

    def gram_dense(self, lam: complex) -> np.ndarray:
        q = self.a_dense.copy()
        q[self.col_row_idx, np.arange(self.ncols)] -= lam
        return q.conj().T @ q

    def sigma_interval(self, lam: complex, width: float, upper_cap: float = math.inf):
        """Certified enclosure of the smallest singular value at this lambda.

        The enclosure is valid whenever s1 <= upper_cap; the cap lets callers
        skip resolving patches that cannot attain a running minimum.
        """
        norms = self.shifted_col_norms(lam)
        mn = float(np.min(norms))
        if mn == 0.0:
            return 0.0, 0.0
        upper = min(mn * (1.0 + 1e-12), upper_cap)
        if self.banded:
            ab0 = self.gram_bands(lam)
            floor = _pivot_floor(float(np.max(ab0[0].real)), self.ncols)

            def test(t):
                ab = ab0.copy()
                ab[0] -= t * t + floor
                return _pbtrf_ok(ab)

        else:
            g0 = self.gram_dense(lam)
            floor = _pivot_floor(float(np.max(g0.diagonal().real)), self.ncols)
            eye = np.eye(self.ncols)

            def test(t):
                return _potrf_ok(g0 - (t * t + floor) * eye)

        return _bisect_sigma(test, upper, width)


def _lower_bands(s: sp.spmatrix, bw: int, n: int) -> np.ndarray:
    """ab[i, j] = S[j+i, j] in the LAPACK lower banded layout."""
    ab = np.zeros((bw + 1, n), dtype=complex)
    for i in range(bw + 1):
        d = s.diagonal(-i)
        ab[i, : d.size] = d
    return ab


def _upper_bands(s: sp.spmatrix, bw: int, n: int) -> np.ndarray:
    """ab[i, j] = S[j, j+i]."""
    ab = np.zeros((bw + 1, n), dtype=complex)
    for i in range(bw + 1):
        d = s.diagonal(i)
        ab[i, : d.size] = d
    return ab


class SectionEngine:
    """All patch workspaces of one operator at one column scale L."""

    def __init__(self, op: Operator, col_scale: float):
        m = op.finite_range
        if m is None:
            raise ValueError("finite-range operator required")
        if col_scale <= m:
            raise ValueError(f"column scale {col_scale} must exceed the range {m}")
        self.op = op
        self.col_scale = float(col_scale)
        self.cutoff = float(m)
        catalog = op.catalog(col_scale + m)
        self.workspaces = [
            _Workspace(p, self.col_scale, self.cutoff) for p in catalog
        ]
        if not self.workspaces:
            raise CatalogError("empty catalog")

    def epsilon_interval(self, lam: complex, width: float):
        """Enclosure of the infimum over window positions of the smallest
        singular value, as the componentwise min over patch classes.

        Returns (lo, hi, witness_label).
        """
        min_lo = math.inf
        min_hi = math.inf
        witness = self.workspaces[0].label
        for ws in self.workspaces:
            lo, hi = ws.sigma_interval(lam, width, upper_cap=min_hi)
            if hi < min_hi:
                min_hi = hi
                witness = ws.label
            min_lo = min(min_lo, lo)
        return min_lo, min_hi, witness


def smallest_singular_interval(
    q: Union[UnevenSection, np.ndarray], width: float
) -> CertifiedValue:
    """Certified enclosure [lo, hi] of the smallest singular value of Q.

    Bisection over t with the positive-definiteness test on Q*Q - t^2; the
    starting upper endpoint is the smallest column norm (always a rigorous
    upper bound), and an exact zero column short-circuits to [0, 0].
    """
    if width <= 0:
        raise ValueError("width must be positive")
    if isinstance(q, UnevenSection):
        mat = q.matrix
        label = q.patch_label
    else:
        mat = q
        label = "matrix"
    if sp.issparse(mat):
        mat = sp.csr_matrix(mat, dtype=complex)
        col_norms = np.sqrt(
            np.asarray(abs(mat).multiply(abs(mat)).sum(axis=0)).ravel()
        )
    else:
        mat = np.asarray(mat, dtype=complex)
        col_norms = np.linalg.norm(mat, axis=0)
    if mat.shape[1] == 0:
        raise ValueError("section has no columns")
    if float(np.min(col_norms)) == 0.0:
        return CertifiedValue(0.0, 0.0, width, note=f"zero column in {label}")
    upper = float(np.min(col_norms)) * (1.0 + 1e-12)

    n = mat.shape[1]
    if sp.issparse(mat):
        gram = (mat.conj().T @ mat).tocsc()
        bw = 0
        coo = gram.tocoo()
        if coo.nnz:
            bw = int(np.max(np.abs(coo.row - coo.col)))
        if n >= BAND_MIN_COLS and bw + 1 < n:
            ab0 = _lower_bands(gram, bw, n)
            floor = _pivot_floor(float(np.max(ab0[0].real)), n)

            def test(t):
                ab = ab0.copy()
                ab[0] -= t * t + floor
                return _pbtrf_ok(ab)

        else:
            g0 = np.asarray(gram.todense(), dtype=complex)
            floor = _pivot_floor(float(np.max(g0.diagonal().real)), n)
            eye = np.eye(n)

            def test(t):
                return _potrf_ok(g0 - (t * t + floor) * eye)

    else:
        g0 = mat.conj().T @ mat
        floor = _pivot_floor(float(np.max(g0.diagonal().real)), n)
        eye = np.eye(n)

        def test(t):
            return _potrf_ok(g0 - (t * t + floor) * eye)

    lo, hi = _bisect_sigma(test, upper, width)
    return CertifiedValue(lo, hi, width, note=f"cholesky bisection on {label}")
