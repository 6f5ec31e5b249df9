"""Box geometry on the integer lattice.

A simulation box is the discrete hypercube ``{0..N}^d`` (optionally
shifted by an integer offset).  Sites split into the boundary (sites with
a neighbour outside the box), the interior, and the inner boundary
(interior sites adjacent to the boundary).  The default summation region
for pinning energies is the shifted cube ``{1..N}^d``, which is the
interior plus one face of the boundary; that choice makes the quenched
free energy superadditive under box doubling.

The coarse grid decomposes the bulk ``{N0+1..N1-N0}^d`` of a larger box
into disjoint blocks of edge N0, each wrapped in a halo of Euclidean
width N0/2.  Block indices are grouped into 2^d parity classes; halos of
blocks in the same class are pairwise disjoint, which is what makes
block-local conditioning arguments work.

All site sets are materialized lazily, cached, and iterated in row-major
order over coordinates so seeded Monte Carlo runs are bit-reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

Site = tuple[int, ...]


class SiteClass(Enum):
    BOUNDARY = "boundary"
    INNER_BOUNDARY = "inner-boundary"
    DEEP_INTERIOR = "deep-interior"


class ConfigError(ValueError):
    """Raised when geometric parameters violate a structural constraint."""


def _cartesian(ranges: Iterable[range]) -> np.ndarray:
    """Row-major integer grid over the given per-axis ranges, shape (n, d)."""
    axes = [np.asarray(r, dtype=np.int64) for r in ranges]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass(frozen=True)
class Box:
    """The lattice box ``{0..N}^d + offset``; immutable value object."""

    d: int
    N: int
    offset: tuple[int, ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got d={self.d}")
        if self.N < 1:
            raise ValueError(f"edge parameter must be >= 1, got N={self.N}")
        if not self.offset:
            object.__setattr__(self, "offset", (0,) * self.d)
        elif len(self.offset) != self.d:
            raise ValueError("offset length must match dimension")

    # -- site sets (cached, canonical row-major order) --------------------

    def _cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N + 1,) * self.d

    @property
    def n_sites(self) -> int:
        return (self.N + 1) ** self.d

    @property
    def sites(self) -> np.ndarray:
        return self._cached(
            "sites",
            lambda: _cartesian(range(o, o + self.N + 1) for o in self.offset),
        )

    def _rel(self, sites: np.ndarray) -> np.ndarray:
        return sites - np.asarray(self.offset, dtype=np.int64)

    @property
    def boundary_mask(self) -> np.ndarray:
        def build():
            rel = self._rel(self.sites)
            return ((rel == 0) | (rel == self.N)).any(axis=1)

        return self._cached("boundary_mask", build)

    @property
    def boundary_sites(self) -> np.ndarray:
        return self._cached("boundary", lambda: self.sites[self.boundary_mask])

    @property
    def interior_sites(self) -> np.ndarray:
        return self._cached("interior", lambda: self.sites[~self.boundary_mask])

    @property
    def inner_boundary_sites(self) -> np.ndarray:
        def build():
            rel = self._rel(self.interior_sites)
            adj = ((rel == 1) | (rel == self.N - 1)).any(axis=1)
            return self.interior_sites[adj]

        return self._cached("inner_boundary", build)

    @property
    def tilde_sites(self) -> np.ndarray:
        """The shifted cube {1..N}^d: interior plus the upper boundary faces."""
        return self._cached(
            "tilde",
            lambda: _cartesian(range(o + 1, o + self.N + 1) for o in self.offset),
        )

    def region_sites(self, region: str) -> np.ndarray:
        if region == "tilde":
            return self.tilde_sites
        if region == "interior":
            return self.interior_sites
        if region == "all":
            return self.sites
        raise ValueError(f"unknown region {region!r}")

    def contains(self, site) -> bool:
        rel = np.asarray(site, dtype=np.int64) - np.asarray(self.offset)
        return rel.shape == (self.d,) and bool(((rel >= 0) & (rel <= self.N)).all())

    def flat_index(self, sites: np.ndarray) -> np.ndarray:
        """Row-major flat indices into an array of shape ``box.shape``."""
        rel = self._rel(np.atleast_2d(np.asarray(sites, dtype=np.int64)))
        return np.ravel_multi_index(tuple(rel.T), self.shape)

    def dist_to_boundary(self, site) -> float:
        """Euclidean distance to the nearest boundary site.

        For a cube the closest boundary point is the orthogonal projection
        onto the nearest face, so the distance is min_i min(c_i, N - c_i).
        """
        if not self.contains(site):
            raise ValueError(f"site {site!r} outside box")
        rel = np.asarray(site, dtype=np.int64) - np.asarray(self.offset)
        return float(np.minimum(rel, self.N - rel).min())


def classify(box: Box, site) -> tuple[SiteClass, float]:
    """Classify a site and return its distance to the boundary set."""
    if not box.contains(site):
        raise ValueError(f"site {site!r} outside box")
    rel = np.asarray(site, dtype=np.int64) - np.asarray(box.offset)
    dist = box.dist_to_boundary(site)
    if ((rel == 0) | (rel == box.N)).any():
        return SiteClass.BOUNDARY, 0.0
    if ((rel == 1) | (rel == box.N - 1)).any():
        return SiteClass.INNER_BOUNDARY, dist
    return SiteClass.DEEP_INTERIOR, dist


@dataclass(frozen=True)
class CoarseGrid:
    """Blocks and halos tiling the bulk of the box {0..N1}^d.

    ``blocks[j]`` is the cube of edge N0 whose sites x satisfy
    ceil(x_i/N0) = j_i; block indices run over J = {2..N1/N0-1}^d so the
    union of the blocks is exactly {N0+1..N1-N0}^d.  ``halos[j]`` dilates
    the block by Euclidean distance N0/2.
    """

    d: int
    N1: int
    N0: int
    J: tuple[tuple[int, ...], ...]
    J_w: dict
    blocks: dict
    halos: dict

    @property
    def bulk_sites(self) -> np.ndarray:
        return _cartesian(range(self.N0 + 1, self.N1 - self.N0 + 1) for _ in range(self.d))


def _block_sites(d: int, N0: int, j: tuple[int, ...]) -> np.ndarray:
    return _cartesian(range((ji - 1) * N0 + 1, ji * N0 + 1) for ji in j)


def _halo_sites(d: int, N0: int, j: tuple[int, ...]) -> np.ndarray:
    r = N0 // 2
    lo = [(ji - 1) * N0 + 1 for ji in j]
    hi = [ji * N0 for ji in j]
    cand = _cartesian(range(lo[i] - r, hi[i] + r + 1) for i in range(d))
    gap = np.maximum(np.maximum(np.array(lo) - cand, cand - np.array(hi)), 0)
    return cand[(gap * gap).sum(axis=1) <= r * r]


def build_coarse_grid(d: int, N1: int, N0: int) -> CoarseGrid:
    """Build the block/halo decomposition; requires N1/N0 even and >= 4."""
    if N0 < 1 or N1 % N0 != 0:
        raise ConfigError(f"N1={N1} must be a multiple of N0={N0}")
    ratio = N1 // N0
    if ratio % 2 != 0 or ratio < 4:
        raise ConfigError(f"N1/N0 must be an even integer >= 4, got {ratio}")
    J = tuple(itertools.product(range(2, ratio), repeat=d))
    J_w = {}
    for w in itertools.product((0, 1), repeat=d):
        J_w[w] = tuple(j for j in J if all(ji % 2 == wi for ji, wi in zip(j, w)))
    blocks = {j: _block_sites(d, N0, j) for j in J}
    halos = {j: _halo_sites(d, N0, j) for j in J}
    return CoarseGrid(d=d, N1=N1, N0=N0, J=J, J_w=J_w, blocks=blocks, halos=halos)
