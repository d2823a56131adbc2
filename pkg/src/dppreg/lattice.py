"""
Lattice discretization of a domain together with its exterior strip.

Nodes live on the integer lattice ``h * Z^n`` (``n`` in {1, 2}), so lattices
with spacings ``h`` and ``h / 2`` are nested. Every field is stored on the
rectangular index box that bounds the node set; box points that are not nodes
carry no value and may never be read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .exceptions import EmptyDomain, InvalidParams, NonConformingStep, OutOfHull

# relative tolerance (in units of the spacing) for snapping coordinates onto nodes
_SNAP = 1e-9


@dataclass(frozen=True)
class EllipticityParams:
    """Weights and scales ``(alpha, beta, Lambda, epsilon)`` of a DPP.

    ``strict=False`` admits ``beta = 0`` (the pure two-point chain), which is
    not uniformly elliptic and only used by the coset examples.
    """

    alpha: float
    beta: float
    lam: float
    epsilon: float
    strict: bool = True

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha, self.beta, self.lam, self.epsilon)):
            raise InvalidParams("parameters must be finite")
        if self.alpha < 0:
            raise InvalidParams(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 0 or (self.strict and self.beta == 0):
            raise InvalidParams(f"beta must be > 0, got {self.beta}")
        if abs(self.alpha + self.beta - 1.0) > 2 * np.finfo(float).eps:
            raise InvalidParams(f"alpha + beta must equal 1, got {self.alpha + self.beta!r}")
        if self.lam <= 0:
            raise InvalidParams(f"lambda must be > 0, got {self.lam}")
        if self.epsilon <= 0:
            raise InvalidParams(f"epsilon must be > 0, got {self.epsilon}")

    @classmethod
    def from_alpha(cls, alpha: float, epsilon: float, lam: float = 1.0) -> "EllipticityParams":
        return cls(alpha=alpha, beta=1.0 - alpha, lam=lam, epsilon=epsilon)

    @classmethod
    def two_point(cls, epsilon: float, lam: float = 1.0) -> "EllipticityParams":
        return cls(alpha=1.0, beta=0.0, lam=lam, epsilon=epsilon, strict=False)

    def with_epsilon(self, epsilon: float) -> "EllipticityParams":
        return EllipticityParams(self.alpha, self.beta, self.lam, epsilon, self.strict)


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball; an interval in 1D, a disk in 2D."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.radius <= 0:
            raise EmptyDomain(f"radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def _r(self, points):
        return np.linalg.norm(np.asarray(points, float) - np.asarray(self.center), axis=-1)

    def contains(self, points, tol=0.0):
        return self._r(points) < self.radius - tol

    def boundary_distance(self, points):
        """Distance to the boundary, for points inside."""
        return np.maximum(self.radius - self._r(points), 0.0)

    def outside_distance(self, points):
        return np.maximum(self._r(points) - self.radius, 0.0)


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box ``prod (lo_i, hi_i)``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi):
            raise InvalidParams("lo and hi must have equal length")
        if any(b <= a for a, b in zip(lo, hi)):
            raise EmptyDomain(f"box {lo} x {hi} is empty")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def bounds(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    def contains(self, points, tol=0.0):
        p = np.asarray(points, float)
        return np.all((p > np.asarray(self.lo) + tol) & (p < np.asarray(self.hi) - tol), axis=-1)

    def boundary_distance(self, points):
        p = np.asarray(points, float)
        d = np.minimum(p - np.asarray(self.lo), np.asarray(self.hi) - p)
        return np.maximum(d.min(axis=-1), 0.0)

    def outside_distance(self, points):
        p = np.asarray(points, float)
        d = np.maximum(np.maximum(np.asarray(self.lo) - p, p - np.asarray(self.hi)), 0.0)
        return np.linalg.norm(d, axis=-1)


def Interval(a: float, b: float) -> Box:
    return Box((a,), (b,))


def Disk(center, radius: float) -> Ball:
    return Ball(tuple(center), radius)


def Rectangle(lo, hi) -> Box:
    return Box(tuple(lo), tuple(hi))


# ---------------------------------------------------------------------------
# Regions


@dataclass(frozen=True, eq=False)
class LatticeRegion:
    """Nodes of ``h Z^n`` inside the domain (interior) or in its exterior strip.

    Arrays are indexed over a bounding box; ``offset`` is the integer lattice
    index of box entry ``(0, ..., 0)``.
    """

    dimension: int
    spacing: float
    domain: Ball | Box
    params: EllipticityParams
    strip_width: float
    ratio: int
    offset: np.ndarray
    node_mask: np.ndarray
    interior_mask: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple:
        return self.node_mask.shape

    @property
    def size(self) -> int:
        return self.node_mask.size

    @property
    def exterior_mask(self) -> np.ndarray:
        return self.node_mask & ~self.interior_mask

    @property
    def interpolation(self) -> str:
        return "nearest" if self.dimension == 1 else "multilinear"

    def box_coords(self) -> np.ndarray:
        """Coordinates of every box point, shape ``shape + (dimension,)``."""
        if "box_coords" not in self._cache:
            axes = [(np.arange(n) + o) * self.spacing for n, o in zip(self.shape, self.offset)]
            grids = np.meshgrid(*axes, indexing="ij")
            self._cache["box_coords"] = np.stack(grids, axis=-1)
        return self._cache["box_coords"]

    def coords(self, mask: np.ndarray) -> np.ndarray:
        return self.box_coords()[mask]

    @property
    def nodes(self) -> np.ndarray:
        return self.coords(self.node_mask)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.coords(self.interior_mask)

    @property
    def exterior_nodes(self) -> np.ndarray:
        return self.coords(self.exterior_mask)

    def lattice_index(self, points) -> np.ndarray:
        """Box multi-index of each point, or raise if a point is off-lattice."""
        t = np.asarray(points, float).reshape(-1, self.dimension) / self.spacing - self.offset
        r = np.rint(t)
        if np.any(np.abs(t - r) > _SNAP * max(1.0, np.abs(t).max())):
            raise OutOfHull("point is not a lattice point")
        return r.astype(np.int64)

    def flat_index(self, points, mask: np.ndarray | None = None) -> np.ndarray:
        """Flat box index of node points; OutOfHull if any is not in ``mask``."""
        mask = self.node_mask if mask is None else mask
        idx = self.lattice_index(points)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=1)
        if not inside.all():
            raise OutOfHull("point outside the lattice box")
        flat = np.ravel_multi_index(tuple(idx.T), self.shape)
        if not mask.ravel()[flat].all():
            raise OutOfHull("point is not a readable node")
        return flat

    def interp(self, points, mask: np.ndarray | None = None):
        """Interpolation stencils for ``points`` without raising.

        Returns ``(flat_indices, weights, ok)``; the first two have shape
        ``(P, K)`` and ``ok[i]`` tells whether every contributing node of point
        ``i`` is in ``mask`` (defaults to the node set). 1D uses the nearest
        node, 2D bilinear weights.
        """
        mask = self.node_mask if mask is None else mask
        p = np.asarray(points, float).reshape(-1, self.dimension)
        t = p / self.spacing - self.offset
        shape = np.asarray(self.shape)
        if self.interpolation == "nearest":
            idx = np.floor(t + 0.5).astype(np.int64)[:, None, :]
            w = np.ones(idx.shape[:2])
        else:
            r = np.rint(t)
            t = np.where(np.abs(t - r) <= _SNAP, r, t)
            i0 = np.floor(t).astype(np.int64)
            frac = t - i0
            corners, weights = [], []
            for bits in np.ndindex(*(2,) * self.dimension):
                b = np.asarray(bits)
                corners.append(i0 + b * (frac > 0))
                weights.append(np.prod(np.where(b, frac, 1.0 - frac), axis=1))
            idx = np.stack(corners, axis=1)
            w = np.stack(weights, axis=1)
        in_box = np.all((idx >= 0) & (idx < shape), axis=2)
        idx = np.clip(idx, 0, shape - 1)
        flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), self.shape)
        readable = in_box & mask.ravel()[flat]
        ok = np.all(readable | (w == 0), axis=1)
        return flat, w, ok

    def read_weights(self, points, mask: np.ndarray | None = None):
        """Like :meth:`interp` but raise OutOfHull unless every point resolves."""
        flat, w, ok = self.interp(points, mask)
        if not ok.all():
            bad = np.asarray(points, float).reshape(-1, self.dimension)[~ok][0]
            raise OutOfHull(f"read at {bad} is outside the covered set")
        return flat, w

    def read_matrix(self, points, mask: np.ndarray | None = None) -> sp.csr_matrix:
        """Sparse ``(P, size)`` matrix mapping box values to interpolated reads."""
        flat, w = self.read_weights(points, mask)
        rows = np.repeat(np.arange(flat.shape[0]), flat.shape[1])
        return sp.csr_matrix((w.ravel(), (rows, flat.ravel())), shape=(flat.shape[0], self.size))

    def boundary_distance(self, points) -> np.ndarray:
        return self.domain.boundary_distance(points)


def _strip(epsilon: float, lam: float, h: float) -> float:
    reach = epsilon * max(1.0, lam)
    return math.ceil(reach / h - _SNAP) * h


def build_region(dimension: int, domain: Ball | Box, spacing: float, params: EllipticityParams) -> LatticeRegion:
    """Discretize ``domain`` with step ``spacing`` plus an exterior strip.

    The strip has width ``epsilon * max(1, Lambda)`` rounded up to a multiple of
    the spacing. In 2D one extra ring of nodes (``sqrt(2) h``) is added so
    that bilinear reads anywhere inside the strip have all four corners.
    """
    if dimension not in (1, 2):
        raise InvalidParams(f"dimension must be 1 or 2, got {dimension}")
    if domain.dimension != dimension:
        raise InvalidParams(f"domain has dimension {domain.dimension}, expected {dimension}")
    if not spacing > 0:
        raise InvalidParams(f"spacing must be positive, got {spacing}")
    ratio = params.epsilon / spacing
    m = round(ratio)
    if m < 1 or abs(ratio - m) > _SNAP * max(1.0, ratio):
        raise NonConformingStep(f"epsilon={params.epsilon} is not a positive integer multiple of h={spacing}")

    h = spacing
    w = _strip(params.epsilon, params.lam, h)
    support = w if dimension == 1 else w + math.sqrt(dimension) * h
    lo, hi = domain.bounds()
    ilo = np.floor((lo - support) / h - _SNAP).astype(np.int64)
    ihi = np.ceil((hi + support) / h + _SNAP).astype(np.int64)
    shape = tuple(int(n) for n in ihi - ilo + 1)
    axes = [(np.arange(n) + o) * h for n, o in zip(shape, ilo)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    tol = _SNAP * h
    interior = domain.contains(pts, tol=tol)
    node = interior | (domain.outside_distance(pts) <= support + tol)
    if not interior.any():
        raise EmptyDomain("no lattice node lies inside the domain")
    region = LatticeRegion(
        dimension=dimension,
        spacing=float(h),
        domain=domain,
        params=params,
        strip_width=float(w),
        ratio=int(m),
        offset=ilo,
        node_mask=node,
        interior_mask=interior,
    )
    region._cache["box_coords"] = pts
    return region


# ---------------------------------------------------------------------------
# Fields


class ScalarField:
    """Real values on the nodes of a region.

    ``defined`` restricts which nodes may be read (defaults to every node);
    it is used for derived fields, such as difference quotients, that only
    exist on part of the node set.
    """

    def __init__(self, region: LatticeRegion, values, defined: np.ndarray | None = None):
        values = np.array(values, dtype=float, copy=True).reshape(region.shape)
        defined = region.node_mask.copy() if defined is None else np.asarray(defined, bool) & region.node_mask
        if not np.isfinite(values[defined]).all():
            raise InvalidParams("field values must be finite on defined nodes")
        values[~defined] = 0.0
        values.setflags(write=False)
        defined.setflags(write=False)
        self.region = region
        self.values = values
        self.defined = defined

    @classmethod
    def from_function(cls, region: LatticeRegion, fn: Callable, mask: np.ndarray | None = None) -> "ScalarField":
        """Evaluate ``fn`` (taking an ``(P, dim)`` array) at every node in ``mask``."""
        mask = region.node_mask if mask is None else mask
        values = np.zeros(region.shape)
        values[mask] = np.asarray(fn(region.coords(mask)), float).reshape(-1)
        return cls(region, values, mask)

    @classmethod
    def zeros(cls, region: LatticeRegion) -> "ScalarField":
        return cls(region, np.zeros(region.shape))

    @property
    def interpolation(self) -> str:
        return self.region.interpolation

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.region, values, self.defined)

    def read(self, points) -> np.ndarray | float:
        """Value at ``points``; exact at nodes, interpolated elsewhere."""
        p = np.asarray(points, float)
        single = p.ndim <= 1 and p.size == self.region.dimension
        flat, w = self.region.read_weights(p, self.defined)
        out = (self.values.ravel()[flat] * w).sum(axis=1)
        return float(out[0]) if single else out

    def at(self, mask: np.ndarray) -> np.ndarray:
        return self.values[mask]

    def sup_norm(self, mask: np.ndarray | None = None) -> float:
        mask = self.defined if mask is None else mask & self.defined
        v = self.values[mask]
        return float(np.abs(v).max()) if v.size else 0.0

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.region, self.values + other.values, self.defined & other.defined)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.region, self.values - other.values, self.defined & other.defined)

    def __neg__(self) -> "ScalarField":
        return self.with_values(-self.values)

    def __mul__(self, c: float) -> "ScalarField":
        return self.with_values(c * self.values)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# Ball average


@dataclass(frozen=True, eq=False)
class BallStencil:
    """Lattice offsets with ``|offset| <= epsilon`` and normalized weights."""

    offsets: np.ndarray
    weights: np.ndarray
    index_offsets: np.ndarray


def ball_average_stencil(region: LatticeRegion, params: EllipticityParams | None = None) -> BallStencil:
    """Quadrature weights for the average of ``u(x + epsilon y)`` over the unit ball.

    1D: composite trapezoid over the ``2m + 1`` nodes of ``[-epsilon, epsilon]``.
    2D: uniform weights over lattice offsets inside the closed ball.
    """
    params = region.params if params is None else params
    m = round(params.epsilon / region.spacing)
    if region.dimension == 1:
        k = np.arange(-m, m + 1)[:, None]
        w = np.ones(2 * m + 1)
        w[0] = w[-1] = 0.5
    else:
        i, j = np.mgrid[-m : m + 1, -m : m + 1]
        keep = i * i + j * j <= m * m
        k = np.stack([i[keep], j[keep]], axis=1)
        w = np.ones(len(k))
    w = w / w.sum()
    return BallStencil(offsets=k * region.spacing, weights=w, index_offsets=k)
