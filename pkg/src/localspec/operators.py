"""Discrete infinite-volume operators described by finite local patch data.

An operator is presented through a patch oracle: for any window half-side L it
returns the finite list of equivalence classes of local environments, each an
offset cloud inside the open box B_L(0) together with the local matrix of the
operator on those sites.  Two environments are equivalent when a translation
maps one onto the other and the local matrices agree up to conjugation by a
diagonal unitary (site-wise gauge phases).

Everything downstream (uneven sections, gap bounds, grid sweeps) consumes this
interface only, so a model is fully specified by its enumerator plus range /
decay metadata and a certified norm bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .geometry import BOUNDARY_TOL

MatrixLike = Union[np.ndarray, sp.spmatrix]

GAUGE_TOL = 1e-10
POINT_TOL = 1e-9
DENSE_LIMIT = 4096  # patches above this site count refuse densification


class CatalogError(ValueError):
    """Raised when a patch catalog cannot serve a request."""


def _dense(matrix: MatrixLike, limit: int = DENSE_LIMIT) -> np.ndarray:
    if sp.issparse(matrix):
        if matrix.shape[0] > limit:
            raise CatalogError(
                f"patch with {matrix.shape[0]} sites is too large to densify"
            )
        return np.asarray(matrix.todense(), dtype=complex)
    return np.asarray(matrix, dtype=complex)


def lexsorted_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting points lexicographically by coordinates."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.lexsort(tuple(pts[:, k] for k in range(pts.shape[1] - 1, -1, -1)))


@dataclass(eq=False)
class Patch:
    """One local environment class: offset cloud plus local matrix.

    ``points`` are offsets from the window center, lexicographically sorted;
    ``matrix[i, j]`` is the operator entry between sites points[i], points[j].
    Large one-dimensional windows keep the matrix sparse.  ``scale`` is the
    half-side of the open box known to contain the offsets.
    """

    label: str
    points: np.ndarray
    matrix: MatrixLike
    scale: float = 0.0
    _canonical: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        order = lexsorted_order(self.points)
        if not np.array_equal(order, np.arange(len(order))):
            self.points = self.points[order]
            if sp.issparse(self.matrix):
                self.matrix = self.matrix.tocsr()[order][:, order]
            else:
                self.matrix = np.asarray(self.matrix, dtype=complex)[np.ix_(order, order)]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def dense_matrix(self) -> np.ndarray:
        return _dense(self.matrix)

    def canonical_matrix(self) -> np.ndarray:
        if self._canonical is None:
            self._canonical = canonical_gauge(self.dense_matrix())
        return self._canonical


def canonical_gauge(matrix: np.ndarray, zero_tol: float = 1e-12) -> np.ndarray:
    """Canonical representative of a local matrix under diagonal-unitary
    conjugation M -> diag(u) M diag(u)^*.

    Phases are fixed by a breadth-first sweep in index order that makes one
    spanning-tree entry per edge real positive; the result is independent of
    which gauge the input carried (connected components each get a unique
    form, and cross-component entries vanish).
    """
    m = np.array(matrix, dtype=complex)
    n = m.shape[0]
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    tol = zero_tol * scale
    u = np.ones(n, dtype=complex)
    seen = np.zeros(n, dtype=bool)
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        queue = [root]
        while queue:
            i = queue.pop(0)
            for j in range(n):
                if seen[j] or i == j:
                    continue
                if abs(m[i, j]) > tol:
                    u[j] = u[i] * m[i, j] / abs(m[i, j])
                elif abs(m[j, i]) > tol:
                    u[j] = u[i] * abs(m[j, i]) / m[j, i]
                else:
                    continue
                seen[j] = True
                queue.append(j)
    return (u[:, None] * m) * np.conj(u)[None, :]


def gauge_equivalent(a: np.ndarray, b: np.ndarray, tol: float = GAUGE_TOL) -> bool:
    """Entrywise comparison of canonical forms with scale-aware tolerance."""
    if a.shape != b.shape:
        return False
    ca, cb = canonical_gauge(a), canonical_gauge(b)
    scale = max(1.0, float(np.max(np.abs(ca))), float(np.max(np.abs(cb))))
    return bool(np.max(np.abs(ca - cb)) <= tol * scale)


class PatchCatalog:
    """Finite list of patch classes at one scale.

    ``match`` decides membership of a sampled environment up to translation
    plus gauge; enumerators may subclass to answer it analytically when the
    class list is too large to materialize.
    """

    def __init__(self, scale: float, dim: int, patches: Sequence[Patch]):
        self.scale = float(scale)
        self.dim = int(dim)
        self._patches = list(patches)
        for p in self._patches:
            if p.scale <= 0.0:
                p.scale = self.scale

    def __iter__(self) -> Iterator[Patch]:
        return iter(self._patches)

    def __len__(self) -> int:
        return len(self._patches)

    @property
    def patches(self) -> Sequence[Patch]:
        return self._patches

    def match(self, points: np.ndarray, matrix: MatrixLike) -> Optional[str]:
        """Label of an equivalent catalog entry, or None."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        order = lexsorted_order(pts)
        pts = pts[order]
        mat = _dense(matrix)[np.ix_(order, order)]
        canon = None
        for patch in self:
            if patch.size != len(pts):
                continue
            shift = patch.points[0] - pts[0]
            if not np.allclose(pts + shift, patch.points, atol=POINT_TOL, rtol=0.0):
                continue
            if canon is None:
                canon = canonical_gauge(mat)
            ref = patch.canonical_matrix()
            scale = max(1.0, float(np.max(np.abs(ref))), float(np.max(np.abs(canon))))
            if np.max(np.abs(ref - canon)) <= GAUGE_TOL * scale:
                return patch.label
        return None


@dataclass(eq=False)
class OperatorSpec:
    """A short-range or finite-range flc operator given by its patch oracle.

    Exactly one of ``finite_range`` / ``decay`` may be None.  ``norm_bound``
    must dominate the Schur bound computed from any catalog; ``normal`` is a
    model declaration, not something inferred from samples.
    """

    dim: int
    separation: float
    patch_oracle: Callable[[float], PatchCatalog]
    norm_bound: float
    finite_range: Optional[float] = None
    decay: Optional[tuple] = None  # (C, eps): |H_xy| <= C d(x,y)^-(dim+eps)
    normal: bool = False
    name: str = "operator"
    catalog_complete: bool = True
    trim_error: float = 0.0
    _catalogs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.separation <= 0:
            raise ValueError("separation must be positive")
        if self.finite_range is None and self.decay is None:
            raise ValueError("operator needs a finite range or decay metadata")
        if self.decay is not None:
            c, eps = self.decay
            if c <= 0 or eps <= 0:
                raise ValueError("decay constants must be positive")

    def catalog(self, scale: float) -> PatchCatalog:
        """Patch classes at the requested scale (memoized; deterministic)."""
        key = round(float(scale), 9)
        got = self._catalogs.get(key)
        if got is None:
            got = self.patch_oracle(scale)
            self._catalogs[key] = got
        return got


@dataclass(eq=False)
class TrimmedOperator:
    """Finite-range trimming of a short-range operator, with certified error.

    Entries at hopping distance beyond ``cutoff`` are zeroed; ``trim_error``
    bounds the operator-norm difference to the base operator via the Schur
    test and the decay-sum estimate, never via sampling.
    """

    base: OperatorSpec
    cutoff: float
    trim_error: float
    _catalogs: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def separation(self) -> float:
        return self.base.separation

    @property
    def finite_range(self) -> float:
        return self.cutoff

    @property
    def decay(self):
        return None

    @property
    def normal(self) -> bool:
        return self.base.normal

    @property
    def norm_bound(self) -> float:
        # row/column sums only shrink under trimming, so the base bound stands
        return self.base.norm_bound

    @property
    def name(self) -> str:
        return f"{self.base.name}|trim[{self.cutoff:g}]"

    @property
    def catalog_complete(self) -> bool:
        return self.base.catalog_complete

    def catalog(self, scale: float) -> PatchCatalog:
        key = round(float(scale), 9)
        got = self._catalogs.get(key)
        if got is None:
            base_cat = self.base.catalog(scale)
            patches = [
                trim_patch(p, self.cutoff) for p in base_cat
            ]
            got = PatchCatalog(scale=base_cat.scale, dim=base_cat.dim, patches=patches)
            self._catalogs[key] = got
        return got


Operator = Union[OperatorSpec, TrimmedOperator]


def trim_patch(patch: Patch, cutoff: float) -> Patch:
    """Zero all entries between sites at max-distance beyond the cutoff."""
    pts = patch.points
    if sp.issparse(patch.matrix):
        coo = patch.matrix.tocoo()
        dist = np.max(np.abs(pts[coo.row] - pts[coo.col]), axis=1)
        keep = dist <= cutoff + BOUNDARY_TOL
        mat = sp.csr_matrix(
            (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=coo.shape
        )
    else:
        dense = np.array(patch.matrix, dtype=complex)
        dist = np.max(np.abs(pts[:, None, :] - pts[None, :, :]), axis=2)
        dense[dist > cutoff + BOUNDARY_TOL] = 0.0
        mat = dense
    return Patch(label=patch.label, points=pts.copy(), matrix=mat, scale=patch.scale)


def decay_tail_constant(n: int, eps_decay: float, l: float) -> float:
    """Constant C2 with sum_{d(x,y) > m} d(x,y)^-(n+eps) <= C2 * m^-eps over any
    uniformly discrete set with separation l.

    Closed form of the comparison-integral estimate: bound the lattice sum by
    the radial integral over ||x-y||_2 > m/4 after packing disjoint side-l/2
    cubes at the points, which evaluates to
    n^((n+eps)/2) * (l/2)^-n * (2*pi)^(n-1) * 4^eps / eps.
    """
    if n < 1 or eps_decay <= 0 or l <= 0:
        raise ValueError("all arguments must be positive")
    return (
        n ** ((n + eps_decay) / 2.0)
        * (l / 2.0) ** (-n)
        * (2.0 * math.pi) ** (n - 1)
        * 4.0**eps_decay
        / eps_decay
    )


def trim(op: OperatorSpec, m: float) -> TrimmedOperator:
    """Trim to hopping range m with a certified operator-norm error bound."""
    if m <= 0:
        raise ValueError("cutoff must be positive")
    if op.decay is not None:
        c, eps = op.decay
        c2 = decay_tail_constant(op.dim, eps, op.separation)
        err = c * c2 * m ** (-eps)
    elif op.finite_range is not None and m >= op.finite_range:
        err = 0.0
    else:
        raise ValueError(
            "cannot certify a trim error below the declared range without decay metadata"
        )
    return TrimmedOperator(base=op, cutoff=float(m), trim_error=err)


def cutoff_length(op: OperatorSpec, delta: float) -> float:
    """Smallest power-of-two hopping range whose trim error is at most delta.

    Finite-range operators return their declared range (nothing to remove).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if op.decay is None:
        return float(op.finite_range)
    c, eps = op.decay
    c2 = decay_tail_constant(op.dim, eps, op.separation)
    m_min = (c * c2 / delta) ** (1.0 / eps)
    return float(2.0 ** math.ceil(math.log2(m_min) - 1e-12))


def norm_shift_bound(op: Operator, lam: complex) -> float:
    """Upper bound on ||H - lambda||."""
    return float(op.norm_bound) + abs(lam)


def schur_norm_bound(op: Operator, probe_scale: Optional[float] = None) -> float:
    """Upper bound on the operator norm via sqrt(row-sum-sup * column-sum-sup).

    Row/column sums are read off catalog points whose full hopping
    neighborhood lies inside the window.  Every site class appears with an
    interior representative (enumerators center odd windows on a site), so the
    supremum over the whole point set is attained among the candidates.  For
    short-range operators the out-of-window tail is bounded by the decay-sum
    constant at the candidate's boundary margin.
    """
    m = op.finite_range
    if probe_scale is None:
        probe_scale = (m + 1.0) if m is not None else max(2.0, 2.0 * op.separation)
    cat = op.catalog(probe_scale)
    scale = cat.scale
    if m is not None and scale <= m:
        raise CatalogError(
            f"probe scale {scale} does not exceed the range {m}; row sums would be cut off"
        )
    best_row = 0.0
    best_col = 0.0
    found = False
    for patch in cat:
        margins = scale - np.max(np.abs(patch.points), axis=1)
        if m is not None:
            candidates = margins > m
            tails = np.zeros(patch.size)
        else:
            candidates = margins >= scale / 2.0
            c, eps = op.decay
            c2 = decay_tail_constant(op.dim, eps, op.separation)
            with np.errstate(divide="ignore"):
                tails = np.where(candidates, c * c2 * margins ** (-eps), 0.0)
        if not np.any(candidates):
            continue
        found = True
        absmat = abs(patch.matrix)
        if sp.issparse(absmat):
            row_sums = np.asarray(absmat.sum(axis=1)).ravel()
            col_sums = np.asarray(absmat.sum(axis=0)).ravel()
        else:
            row_sums = absmat.sum(axis=1)
            col_sums = absmat.sum(axis=0)
        best_row = max(best_row, float(np.max((row_sums + tails)[candidates])))
        best_col = max(best_col, float(np.max((col_sums + tails)[candidates])))
    if not found:
        raise CatalogError("no catalog point has a complete hopping neighborhood")
    return math.sqrt(best_row * best_col)


# ---------------------------------------------------------------------------
# catalog serialization (structured text, versioned)
# ---------------------------------------------------------------------------

CATALOG_FORMAT = "localspec-catalog"
CATALOG_VERSION = 1


def catalog_to_json(catalog: PatchCatalog) -> dict:
    """Serializable form: scale, per-patch point list, row-major entries."""
    patches = []
    for p in catalog:
        dense = p.dense_matrix()
        patches.append(
            {
                "label": p.label,
                "points": [[float(c) for c in row] for row in p.points],
                "matrix": {
                    "shape": list(dense.shape),
                    "entries": [
                        [float(z.real), float(z.imag)] for z in dense.ravel(order="C")
                    ],
                },
            }
        )
    return {
        "format": CATALOG_FORMAT,
        "version": CATALOG_VERSION,
        "scale": catalog.scale,
        "dim": catalog.dim,
        "patches": patches,
    }


def catalog_from_json(data: dict) -> PatchCatalog:
    if data.get("format") != CATALOG_FORMAT:
        raise ValueError("not a catalog file")
    patches = []
    for entry in data["patches"]:
        shape = tuple(entry["matrix"]["shape"])
        flat = np.array(
            [complex(re, im) for re, im in entry["matrix"]["entries"]], dtype=complex
        )
        patches.append(
            Patch(
                label=entry["label"],
                points=np.array(entry["points"], dtype=float),
                matrix=flat.reshape(shape, order="C"),
            )
        )
    return PatchCatalog(scale=data["scale"], dim=data["dim"], patches=patches)


def save_catalog(catalog: PatchCatalog, path) -> None:
    with open(path, "w") as fh:
        json.dump(catalog_to_json(catalog), fh)


def load_catalog(path) -> PatchCatalog:
    with open(path) as fh:
        return catalog_from_json(json.load(fh))
