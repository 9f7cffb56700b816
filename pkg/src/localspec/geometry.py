"""Max-distance geometry on R^n plus the complex-plane grids used by the sweeps.

Two metrics live side by side and are deliberately kept under distinct names:

* ``max_dist`` is the maximum (Chebyshev) distance on the point set Gamma,
  where all balls are open hypercubes.
* ``euclid_dist``/``hausdorff_distance`` act on subsets of the complex plane,
  where covering-radius arithmetic for the sampling grids is Euclidean.

Boundary convention: ball membership is strict (open balls) and a symmetric
floating-point tolerance ``BOUNDARY_TOL`` is applied, i.e. points within the
tolerance of the boundary count as *on* the boundary and are excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

BOUNDARY_TOL = 1e-12


def _as_points(a) -> np.ndarray:
    """Coerce to an (npts, n) float array; accepts complex 1-D input as R^2."""
    arr = np.asarray(a)
    if arr.ndim == 1 and np.iscomplexobj(arr):
        return np.column_stack([arr.real, arr.imag])
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    return arr


def max_dist(a: Sequence[float], b: Sequence[float]) -> float:
    """Maximum distance max_k |a_k - b_k| between two points of R^n."""
    av = np.asarray(a, dtype=float).ravel()
    bv = np.asarray(b, dtype=float).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"dimension mismatch: {av.shape[0]} vs {bv.shape[0]}")
    return float(np.max(np.abs(av - bv))) if av.size else 0.0


def euclid_dist(a: complex, b: complex) -> float:
    """Euclidean distance between two points of the complex plane."""
    return abs(complex(a) - complex(b))


@dataclass(frozen=True)
class Box:
    """Open max-metric ball: the hypercube of side 2*half_side around center."""

    center: tuple
    half_side: float

    def __post_init__(self):
        if self.half_side <= 0:
            raise ValueError("half_side must be positive")

    def contains(self, point) -> bool:
        """Strict membership; points within BOUNDARY_TOL of the boundary are out."""
        return max_dist(self.center, point) < self.half_side - BOUNDARY_TOL

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points)
        c = np.asarray(self.center, dtype=float)
        return np.max(np.abs(pts - c), axis=1) < self.half_side - BOUNDARY_TOL


def directed_hausdorff(a, b) -> float:
    """sup_{x in a} d(x, b) in the Euclidean metric."""
    pa, pb = _as_points(a), _as_points(b)
    if pa.size == 0 or pb.size == 0:
        raise ValueError("directed Hausdorff distance needs nonempty sets")
    if len(pa) * len(pb) <= 40_000:
        diff = pa[:, None, :] - pb[None, :, :]
        return float(np.max(np.min(np.linalg.norm(diff, axis=2), axis=1)))
    dists, _ = cKDTree(pb).query(pa, k=1)
    return float(np.max(dists))


def hausdorff_distance(a, b) -> float:
    """Two-sided Hausdorff distance between finite nonempty subsets of C (or R^k).

    Accepts complex 1-D arrays (treated as points of R^2) or (npts, k) arrays.
    """
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def set_distance(point, points) -> float:
    """Euclidean distance from one point to a finite set."""
    pts = _as_points(points)
    if pts.size == 0:
        return math.inf
    p = _as_points([point])[0] if not np.iscomplexobj(np.asarray(point)) else np.array(
        [np.asarray(point).real, np.asarray(point).imag], dtype=float
    )
    return float(np.min(np.linalg.norm(pts - p, axis=1)))


def covering_grid(radius_bound: float, spacing: float) -> np.ndarray:
    """All points of spacing*Z^2 needed to cover the closed box of half-side
    ``radius_bound`` with Euclidean covering radius spacing/sqrt(2).

    Returns a complex 1-D array in row-major (deterministic) order.  Grid
    points whose closed spacing/sqrt(2)-neighborhood meets the box are kept,
    so the covering property holds on the closed box even when
    radius_bound/spacing is not an integer.
    """
    if radius_bound <= 0 or spacing <= 0:
        raise ValueError("radius_bound and spacing must be positive")
    cover = spacing / math.sqrt(2.0)
    kmax = int(math.floor((radius_bound + cover) / spacing + 1e-12))
    ks = np.arange(-kmax, kmax + 1)
    xs = spacing * ks
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    dx = np.maximum(np.abs(X) - radius_bound, 0.0)
    dy = np.maximum(np.abs(Y) - radius_bound, 0.0)
    keep = dx * dx + dy * dy <= cover * cover + 1e-15
    return (X[keep] + 1j * Y[keep]).ravel()


@dataclass(frozen=True)
class GridFamily:
    """The r interlacing grid families on R^n used by the mass-splitting bound.

    J_i = [-m, m] + 2(L+m)(Z + i/r + 1/2) on the line, for i = 1..r; the set
    A_i consists of the points with at least one coordinate in J_i, and its
    complement is the disjoint union of the open boxes B_L(x) over the center
    lattice Z_i = 2(L+m)(Z^n + (i/r)(1,..,1)).
    """

    dim: int
    count: int
    half_side: float
    cutoff: float

    @property
    def period(self) -> float:
        return 2.0 * (self.half_side + self.cutoff)

    def offset(self, i: int) -> float:
        """Center of the i-th 1-D band pattern inside one period."""
        self._check_index(i)
        return self.period * (i / self.count + 0.5)

    def _check_index(self, i: int) -> None:
        if not 1 <= i <= self.count:
            raise ValueError(f"family index {i} outside 1..{self.count}")

    def in_band(self, i: int, x: float) -> bool:
        """Whether the scalar x lies in J_i (closed bands of half-width m)."""
        self._check_index(i)
        y = (x - self.offset(i)) / self.period
        frac = y - round(y)
        return abs(frac) * self.period <= self.cutoff + BOUNDARY_TOL

    def in_edge_set(self, i: int, point) -> bool:
        """Whether a point of R^n lies in A_i (some coordinate in J_i)."""
        pt = np.asarray(point, dtype=float).ravel()
        if pt.size != self.dim:
            raise ValueError("dimension mismatch")
        return any(self.in_band(i, float(c)) for c in pt)

    def edge_membership_counts(self, points: np.ndarray) -> np.ndarray:
        """For each point, the number of families A_i containing it."""
        pts = _as_points(points)
        counts = np.zeros(len(pts), dtype=int)
        for i in range(1, self.count + 1):
            off = self.offset(i)
            y = (pts - off) / self.period
            frac = np.abs(y - np.round(y)) * self.period
            counts += np.any(frac <= self.cutoff + BOUNDARY_TOL, axis=1)
        return counts

    def box_center(self, i: int, k: Sequence[int]) -> np.ndarray:
        """The Z_i lattice point with integer index vector k."""
        self._check_index(i)
        kk = np.asarray(k, dtype=float)
        if kk.size != self.dim:
            raise ValueError("index vector has wrong dimension")
        return self.period * (kk + i / self.count)

    def centers_near(self, i: int, point, margin: float = 0.0) -> np.ndarray:
        """All Z_i centers whose box B_{L+margin} could contain the point."""
        pt = np.asarray(point, dtype=float).ravel()
        reach = self.half_side + margin
        lo = np.floor((pt - reach) / self.period - i / self.count).astype(int)
        hi = np.ceil((pt + reach) / self.period - i / self.count).astype(int)
        grids = np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij")
        ks = np.stack([g.ravel() for g in grids], axis=1)
        return self.period * (ks + i / self.count)


def disjoint_grid_family(n: int, r: int, half_side: float, cutoff: float) -> GridFamily:
    """Build the r-member interlacing family; requires half_side > (r-1)*cutoff
    so that the 1-D bands J_i are mutually disjoint.
    """
    if n < 1 or r < 1:
        raise ValueError("need n >= 1 and r >= 1")
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if not half_side > (r - 1) * cutoff:
        raise ValueError(
            f"half_side {half_side} must exceed (r-1)*cutoff = {(r - 1) * cutoff}; "
            "the bands would overlap"
        )
    return GridFamily(dim=n, count=r, half_side=half_side, cutoff=cutoff)
