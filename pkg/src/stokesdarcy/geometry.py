"""Two-rectangle coupled geometry, boundary segments, and collocation sampling.

The free-flow and porous rectangles share exactly one full edge (the
interface).  Outer boundaries are partitioned into typed segments; the
sampler draws uniform interior, boundary-arclength, and interface points
from a single seeded generator stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, UsageError

_TOL = 1e-12

# fixed lexicographic order; also the corner-ownership priority
SIDES = ("bottom", "left", "right", "top")


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def validate(self) -> "Rect":
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigError(f"rectangle has non-positive extent: {self}")
        return self

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def side_edge(self, side: str) -> tuple[str, float, float, float]:
        """(axis of the fixed coordinate, fixed value, span lo, span hi)."""
        if side == "bottom":
            return ("y", self.ymin, self.xmin, self.xmax)
        if side == "top":
            return ("y", self.ymax, self.xmin, self.xmax)
        if side == "left":
            return ("x", self.xmin, self.ymin, self.ymax)
        if side == "right":
            return ("x", self.xmax, self.ymin, self.ymax)
        raise UsageError(f"unknown side {side!r}")

    def contains(self, x, y, tol: float = _TOL):
        return ((x >= self.xmin - tol) & (x <= self.xmax + tol)
                & (y >= self.ymin - tol) & (y <= self.ymax + tol))


def _edges_match(e1, e2) -> bool:
    return e1[0] == e2[0] and all(abs(a - b) <= _TOL for a, b in zip(e1[1:], e2[1:]))


class CoupledGeometry:
    """Free-flow rectangle, porous rectangle, and their shared interface edge.

    ``normal_s`` points from the free-flow region into the porous one;
    the tangent is ``normal_s`` rotated by +90 degrees.
    """

    # (side of S, side of D, normal_s) for each admissible adjacency
    _ADJACENT = (
        ("top", "bottom", (0.0, 1.0)),
        ("bottom", "top", (0.0, -1.0)),
        ("right", "left", (1.0, 0.0)),
        ("left", "right", (-1.0, 0.0)),
    )

    def __init__(self, rect_s: Rect, rect_d: Rect):
        self.rect_s = rect_s.validate()
        self.rect_d = rect_d.validate()
        if self._interiors_overlap():
            raise ConfigError("subdomain interiors overlap")

        match = None
        for side_s, side_d, normal in self._ADJACENT:
            if _edges_match(rect_s.side_edge(side_s), rect_d.side_edge(side_d)):
                match = (side_s, side_d, normal)
                break
        if match is None:
            raise ConfigError("rectangles do not share a full edge")
        self.side_s, self.side_d, normal = match
        axis, coord, lo, hi = rect_s.side_edge(self.side_s)
        self.interface_axis = axis   # axis of the fixed coordinate
        self.interface_coord = coord
        self.interface_span = (lo, hi)
        self.normal_s = np.array(normal)
        self.normal_d = -self.normal_s
        # +90 degree rotation of the normal
        self.tangent = np.array([-self.normal_s[1], self.normal_s[0]])

    def _interiors_overlap(self) -> bool:
        s, d = self.rect_s, self.rect_d
        return (s.xmin < d.xmax - _TOL and d.xmin < s.xmax - _TOL
                and s.ymin < d.ymax - _TOL and d.ymin < s.ymax - _TOL)

    def rect(self, region: str) -> Rect:
        if region == "S":
            return self.rect_s
        if region == "D":
            return self.rect_d
        raise UsageError(f"region must be 'S' or 'D', got {region!r}")

    def interface_side(self, region: str) -> str:
        return self.side_s if region == "S" else self.side_d

    def outer_sides(self, region: str) -> tuple[str, ...]:
        skip = self.interface_side(region)
        return tuple(s for s in SIDES if s != skip)

    def on_interface(self, x, y, tol: float = _TOL):
        lo, hi = self.interface_span
        if self.interface_axis == "y":
            return (np.abs(y - self.interface_coord) <= tol) & (x >= lo - tol) & (x <= hi + tol)
        return (np.abs(x - self.interface_coord) <= tol) & (y >= lo - tol) & (y <= hi + tol)

    def interface_points(self, n: int) -> np.ndarray:
        """n evenly spaced points along the interface, endpoints included."""
        if n < 2:
            raise UsageError("need at least 2 interface points")
        lo, hi = self.interface_span
        along = np.linspace(lo, hi, n)
        fixed = np.full(n, self.interface_coord)
        if self.interface_axis == "y":
            return np.stack([along, fixed], axis=-1)
        return np.stack([fixed, along], axis=-1)


def interface_frame(geom: CoupledGeometry) -> tuple[np.ndarray, np.ndarray]:
    """(normal from free-flow into porous region, tangent along interface)."""
    return geom.normal_s.copy(), geom.tangent.copy()


# -- boundary segments ----------------------------------------------------------

CONDITIONS = ("dirichlet_velocity", "dirichlet_pressure", "neumann_flux")


@dataclass(frozen=True)
class BoundarySegment:
    """One full outer edge of a region with its boundary condition.

    ``data`` evaluates the prescribed boundary values at points on the
    edge: a pair of arrays for velocity conditions, one array otherwise.
    """
    region: str                 # "S" or "D"
    side: str                   # "bottom" | "left" | "right" | "top"
    condition: str
    data: Callable

    def validate(self, geom: CoupledGeometry) -> "BoundarySegment":
        if self.region not in ("S", "D"):
            raise ConfigError(f"segment region must be S or D: {self}")
        if self.side not in SIDES:
            raise ConfigError(f"unknown segment side {self.side!r}")
        if self.condition not in CONDITIONS:
            raise ConfigError(f"unknown condition {self.condition!r}")
        if self.side == geom.interface_side(self.region):
            raise ConfigError(
                f"segment on region {self.region} side {self.side} lies on the interface")
        if self.region == "S" and self.condition != "dirichlet_velocity":
            raise ConfigError("free-flow boundary segments take velocity data")
        if self.region == "D" and self.condition == "dirichlet_velocity":
            raise ConfigError("porous boundary segments take pressure or flux data")
        return self


def check_segments(geom: CoupledGeometry, segments) -> None:
    """Segments of each region must cover its outer sides exactly once."""
    for region in ("S", "D"):
        sides = [s.side for s in segments if s.region == region]
        needed = geom.outer_sides(region)
        if sorted(sides) != sorted(needed):
            raise ConfigError(
                f"region {region} segments cover sides {sorted(sides)}, "
                f"expected exactly {sorted(needed)}")
    for s in segments:
        s.validate(geom)


def outward_normal(side: str) -> np.ndarray:
    return {"bottom": np.array([0.0, -1.0]), "top": np.array([0.0, 1.0]),
            "left": np.array([-1.0, 0.0]), "right": np.array([1.0, 0.0])}[side]


def classify_boundary_point(geom: CoupledGeometry, region: str, x: float, y: float) -> str:
    """Side owning an outer-boundary point; corners go to the first side
    in lexicographic order."""
    rect = geom.rect(region)
    for side in geom.outer_sides(region):
        axis, coord, lo, hi = rect.side_edge(side)
        val, along = (y, x) if axis == "y" else (x, y)
        if abs(val - coord) <= _TOL and lo - _TOL <= along <= hi + _TOL:
            return side
    raise UsageError(f"point ({x}, {y}) is not on the outer boundary of {region}")


# -- sampling --------------------------------------------------------------------

@dataclass(frozen=True)
class BatchSizes:
    interior_s: int = 400
    interior_d: int = 400
    boundary_s: int = 100
    boundary_d: int = 100
    interface: int = 100

    def validate(self) -> "BatchSizes":
        if min(self.interior_s, self.interior_d, self.boundary_s,
               self.boundary_d, self.interface) < 0:
            raise ConfigError("batch sizes must be nonnegative")
        return self


@dataclass
class SampleBatch:
    interior_s: np.ndarray                 # (n, 2)
    interior_d: np.ndarray
    boundary_s: list                       # [(BoundarySegment, (n_k, 2) points)]
    boundary_d: list
    interface: np.ndarray

    def counts(self) -> dict[str, int]:
        return {
            "interior_s": len(self.interior_s),
            "interior_d": len(self.interior_d),
            "boundary_s": sum(len(p) for _, p in self.boundary_s),
            "boundary_d": sum(len(p) for _, p in self.boundary_d),
            "interface": len(self.interface),
        }


def _uniform_rect(rect: Rect, n: int, rng) -> np.ndarray:
    u = rng.random((n, 2))
    return np.stack([rect.xmin + u[:, 0] * (rect.xmax - rect.xmin),
                     rect.ymin + u[:, 1] * (rect.ymax - rect.ymin)], axis=-1)


def _edge_points(rect: Rect, side: str, offsets: np.ndarray) -> np.ndarray:
    axis, coord, lo, hi = rect.side_edge(side)
    along = lo + offsets
    fixed = np.full(len(offsets), coord)
    if axis == "y":
        return np.stack([along, fixed], axis=-1)
    return np.stack([fixed, along], axis=-1)


def _sample_outer_boundary(geom: CoupledGeometry, region: str, n: int,
                           rng, segments) -> list:
    """Uniform over total arclength of the region's outer boundary."""
    rect = geom.rect(region)
    sides = geom.outer_sides(region)
    lengths = np.array([rect.side_edge(s)[3] - rect.side_edge(s)[2] for s in sides])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    by_side = {s.side: s for s in segments if s.region == region}

    s = rng.random(n) * cum[-1]
    idx = np.minimum(np.searchsorted(cum, s, side="right") - 1, len(sides) - 1)
    out = []
    for i, side in enumerate(sides):
        mask = idx == i
        if not np.any(mask):
            continue
        pts = _edge_points(rect, side, s[mask] - cum[i])
        out.append((by_side[side], pts))
    return out


def draw_batch(geom: CoupledGeometry, sizes: BatchSizes, rng,
               segments) -> SampleBatch:
    """One collocation batch: uniform interiors, arclength-uniform outer
    boundaries, uniform interface points.  Pure function of the rng state."""
    sizes.validate()
    interior_s = _uniform_rect(geom.rect_s, sizes.interior_s, rng)
    interior_d = _uniform_rect(geom.rect_d, sizes.interior_d, rng)
    boundary_s = (_sample_outer_boundary(geom, "S", sizes.boundary_s, rng, segments)
                  if sizes.boundary_s else [])
    boundary_d = (_sample_outer_boundary(geom, "D", sizes.boundary_d, rng, segments)
                  if sizes.boundary_d else [])

    lo, hi = geom.interface_span
    along = lo + rng.random(sizes.interface) * (hi - lo)
    fixed = np.full(sizes.interface, geom.interface_coord)
    if geom.interface_axis == "y":
        interface = np.stack([along, fixed], axis=-1)
    else:
        interface = np.stack([fixed, along], axis=-1)

    return SampleBatch(interior_s, interior_d, boundary_s, boundary_d, interface)
