"""
Discrete DPP operators on lattice fields.

Every operator has the form

    L u(x) = (alpha * S(x) + beta * A(x)) / (2 eps^2)

where ``A`` is the stencil average of the second difference over the ball
and ``S`` depends on the variant (sup, inf, fixed direction, sup over a set,
sup-inf / inf-sup over a family of sets, or the tug-of-war-with-noise
``sup + inf`` over the eps-ball).

Evaluation goes through :class:`OperatorPlan`, which stores the sparse read
matrices for a fixed set of evaluation points so repeated application (value
iteration, exhaustive checks) costs a few sparse mat-vecs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidParams, NotAdmissible, OutOfHull
from .lattice import (
    BallStencil,
    EllipticityParams,
    LatticeRegion,
    ScalarField,
    ball_average_stencil,
    build_region,
)

_NORM_TOL = 1e-12


class Variant(enum.Enum):
    PUCCI_MAX = "pucci_max"
    PUCCI_MIN = "pucci_min"
    FIXED_DIRECTION = "fixed_direction"
    SUP_OVER_SET = "sup_over_set"
    ISAACS = "isaacs"
    TUG_OF_WAR_NOISE = "tug_of_war_noise"


class DirectionSet:
    """Finite set of control directions ``nu`` with ``|nu| <= Lambda``."""

    def __init__(self, vectors, lam: float):
        v = np.asarray(vectors, float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or len(v) == 0:
            raise InvalidParams("a direction set needs at least one vector")
        if np.any(np.linalg.norm(v, axis=1) > lam + _NORM_TOL):
            raise InvalidParams(f"direction outside the closed ball of radius {lam}")
        v.setflags(write=False)
        self.vectors = v
        self.lam = float(lam)

    @classmethod
    def ball(cls, dimension: int, lam: float, radii=(0.0, 0.5, 1.0), angles: int = 16) -> "DirectionSet":
        """Discretization of the closed ball ``B_Lambda``.

        ``radii`` are fractions of ``lam``. In 2D each positive radius gets
        ``angles`` equally spaced directions starting on the first axis.
        """
        vecs = [np.zeros(dimension)]
        for r in radii:
            if r <= 0:
                continue
            if dimension == 1:
                vecs += [np.array([r * lam]), np.array([-r * lam])]
            else:
                th = 2 * np.pi * np.arange(angles) / angles
                vecs += list(r * lam * np.stack([np.cos(th), np.sin(th)], axis=1))
        v = np.array(vecs)
        # keep exact axis values so +-Lambda e_i are represented without rounding noise
        v[np.abs(v) < 1e-15] = 0.0
        return cls(v, lam)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.vectors)

    def covers_axes(self) -> bool:
        """True if the set holds ``0`` and ``+-Lambda e_i`` for every axis."""
        targets = [np.zeros(self.dimension)]
        for i in range(self.dimension):
            e = np.zeros(self.dimension)
            e[i] = self.lam
            targets += [e, -e]
        return all(np.min(np.linalg.norm(self.vectors - t, axis=1)) <= _NORM_TOL for t in targets)

    def union(self, *others: "DirectionSet") -> "DirectionSet":
        return DirectionSet(_unique_rows(np.vstack([self.vectors, *[o.vectors for o in others]])), self.lam)


def _unique_rows(v: np.ndarray) -> np.ndarray:
    out: list[np.ndarray] = []
    for row in v:
        if not any(np.linalg.norm(row - o) <= _NORM_TOL for o in out):
            out.append(row)
    return np.array(out)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Which DPP operator to apply, with its parameters and direction sets.

    ``directions`` discretizes ``B_Lambda`` for the extremal operators. For the
    other variants the vectors they use are merged into ``directions`` so that
    the extremal envelope always dominates them.
    """

    variant: Variant
    params: EllipticityParams
    directions: DirectionSet
    nu: np.ndarray | None = None
    subset: DirectionSet | None = None
    family: tuple = ()
    order: str = "sup_inf"

    def __post_init__(self):
        lam = self.params.lam
        used = []
        if self.variant is Variant.FIXED_DIRECTION:
            if self.nu is None:
                raise InvalidParams("FixedDirection needs nu")
            nu = np.atleast_1d(np.asarray(self.nu, float))
            if np.linalg.norm(nu) > lam + _NORM_TOL:
                raise InvalidParams(f"|nu| = {np.linalg.norm(nu)} exceeds Lambda = {lam}")
            object.__setattr__(self, "nu", nu)
            used.append(DirectionSet(nu[None, :], lam))
        elif self.variant is Variant.SUP_OVER_SET:
            if self.subset is None:
                raise InvalidParams("SupOverSet needs a direction subset")
            used.append(self.subset)
        elif self.variant is Variant.ISAACS:
            if not self.family or any(len(s) == 0 for s in self.family):
                raise InvalidParams("Isaacs family must be a nonempty list of nonempty sets")
            if self.order not in ("sup_inf", "inf_sup"):
                raise InvalidParams(f"order must be 'sup_inf' or 'inf_sup', got {self.order!r}")
            object.__setattr__(self, "family", tuple(self.family))
            used.extend(self.family)
        if used:
            object.__setattr__(self, "directions", self.directions.union(*used))

    @property
    def admissible(self) -> bool:
        return self.variant is not Variant.TUG_OF_WAR_NOISE

    @property
    def key(self) -> tuple:
        """Hashable description; equal keys give identical operators."""
        def arr(a):
            return None if a is None else (a.shape, a.tobytes())

        p = self.params
        return (
            self.variant.value,
            (p.alpha, p.beta, p.lam, p.epsilon),
            arr(self.directions.vectors),
            arr(self.nu),
            None if self.subset is None else arr(self.subset.vectors),
            tuple(arr(s.vectors) for s in self.family),
            self.order,
        )

    @property
    def dimension(self) -> int:
        return self.directions.dimension

    def extremal(self, sign: int) -> "OperatorSpec":
        """``L+`` (sign > 0) or ``L-`` over this spec's direction set."""
        v = Variant.PUCCI_MAX if sign > 0 else Variant.PUCCI_MIN
        return OperatorSpec(v, self.params, self.directions)

    def with_params(self, params: EllipticityParams) -> "OperatorSpec":
        return OperatorSpec(self.variant, params, self.directions, self.nu, self.subset, self.family, self.order)


def _ball(params, dimension, directions):
    return directions if directions is not None else DirectionSet.ball(dimension, params.lam)


def pucci_max(params: EllipticityParams, dimension: int, directions: DirectionSet | None = None) -> OperatorSpec:
    return OperatorSpec(Variant.PUCCI_MAX, params, _ball(params, dimension, directions))


def pucci_min(params: EllipticityParams, dimension: int, directions: DirectionSet | None = None) -> OperatorSpec:
    return OperatorSpec(Variant.PUCCI_MIN, params, _ball(params, dimension, directions))


def fixed_direction(params: EllipticityParams, nu, directions: DirectionSet | None = None) -> OperatorSpec:
    nu = np.atleast_1d(np.asarray(nu, float))
    return OperatorSpec(Variant.FIXED_DIRECTION, params, _ball(params, len(nu), directions), nu=nu)


def sup_over_set(params: EllipticityParams, subset, directions: DirectionSet | None = None) -> OperatorSpec:
    if not isinstance(subset, DirectionSet):
        subset = DirectionSet(subset, params.lam)
    return OperatorSpec(Variant.SUP_OVER_SET, params, _ball(params, subset.dimension, directions), subset=subset)


def isaacs(params: EllipticityParams, family: Sequence, order: str = "sup_inf", directions: DirectionSet | None = None) -> OperatorSpec:
    fam = tuple(s if isinstance(s, DirectionSet) else DirectionSet(s, params.lam) for s in family)
    if not fam:
        raise InvalidParams("Isaacs family must be nonempty")
    return OperatorSpec(Variant.ISAACS, params, _ball(params, fam[0].dimension, directions), family=fam, order=order)


def tug_of_war_noise(params: EllipticityParams, dimension: int) -> OperatorSpec:
    return OperatorSpec(Variant.TUG_OF_WAR_NOISE, params, DirectionSet.ball(dimension, params.lam))


def mixed_two_point(epsilon: float, alpha: float) -> OperatorSpec:
    """The 1D DPP ``u = alpha (u(x+e) + u(x-e))/2 + beta * avg_{(x-e, x+e)} u``."""
    params = EllipticityParams.from_alpha(alpha, epsilon) if alpha < 1 else EllipticityParams.two_point(epsilon)
    return fixed_direction(params, [1.0])


# ---------------------------------------------------------------------------
# Evaluation plans


def _vector_index(vectors: np.ndarray, v: np.ndarray) -> int:
    d = np.linalg.norm(vectors - v, axis=1)
    i = int(np.argmin(d))
    if d[i] > _NORM_TOL:
        raise InvalidParams(f"direction {v} missing from the plan")
    return i


def _half_directions(vectors: np.ndarray):
    """Representatives of ``{nu, -nu}`` pairs and, per vector, its representative."""
    reps: list[np.ndarray] = []
    owner = []
    for v in vectors:
        for k, r in enumerate(reps):
            if np.linalg.norm(v - r) <= _NORM_TOL or np.linalg.norm(v + r) <= _NORM_TOL:
                owner.append(k)
                break
        else:
            owner.append(len(reps))
            reps.append(v)
    return np.array(reps), np.array(owner)


@dataclass(eq=False)
class OperatorPlan:
    """Precomputed sparse reads of one operator at a fixed list of points.

    ``points`` are evaluation coordinates (usually interior nodes);
    ``read_mask`` is the set of nodes the field may be read at.
    """

    spec: OperatorSpec
    region: LatticeRegion
    points: np.ndarray
    read_mask: np.ndarray
    stencil: BallStencil = field(init=False)

    def __post_init__(self):
        spec, region = self.spec, self.region
        if spec.dimension != region.dimension:
            raise InvalidParams("operator and region dimensions differ")
        eps = spec.params.epsilon
        pts = np.asarray(self.points, float).reshape(-1, region.dimension)
        self.points = pts
        n = len(pts)
        self.stencil = ball_average_stencil(region, spec.params)

        self.center = region.read_matrix(pts, self.read_mask)
        reads = [region.read_matrix(pts + o, self.read_mask) for o in self.stencil.offsets]
        self.average = sum(w * r for w, r in zip(self.stencil.weights, reads)).tocsr()

        if spec.variant is Variant.TUG_OF_WAR_NOISE:
            self.neighbours = sp.vstack(reads).tocsr()
            self.directions = None
            return
        reps, owner = _half_directions(spec.directions.vectors)
        self.directions = reps
        self.owner = owner
        mats = [region.read_matrix(pts + eps * v, self.read_mask) + region.read_matrix(pts - eps * v, self.read_mask) for v in reps]
        self.pairs = sp.vstack(mats).tocsr()
        self._n = n
        vec = spec.directions.vectors
        if spec.variant is Variant.FIXED_DIRECTION:
            self.sel = owner[_vector_index(vec, spec.nu)]
        elif spec.variant is Variant.SUP_OVER_SET:
            self.sel = np.unique(owner[[_vector_index(vec, v) for v in spec.subset.vectors]])
        elif spec.variant is Variant.ISAACS:
            self.sel = [np.unique(owner[[_vector_index(vec, v) for v in s.vectors]]) for s in spec.family]

    def __len__(self):
        return len(self.points)

    def midpoint_term(self, values: np.ndarray) -> np.ndarray:
        """The variant's sup/inf/etc. of midpoint values ``(u(x+e nu) + u(x-e nu)) / 2``."""
        v = values.ravel()
        spec = self.spec
        if spec.variant is Variant.TUG_OF_WAR_NOISE:
            nb = (self.neighbours @ v).reshape(-1, len(self.points))
            return 0.5 * (nb.max(axis=0) + nb.min(axis=0))
        mids = 0.5 * (self.pairs @ v).reshape(len(self.directions), len(self.points))
        var = spec.variant
        if var is Variant.PUCCI_MAX:
            return mids.max(axis=0)
        if var is Variant.PUCCI_MIN:
            return mids.min(axis=0)
        if var is Variant.FIXED_DIRECTION:
            return mids[self.sel]
        if var is Variant.SUP_OVER_SET:
            return mids[self.sel].max(axis=0)
        if spec.order == "sup_inf":
            return np.max([mids[s].min(axis=0) for s in self.sel], axis=0)
        return np.min([mids[s].max(axis=0) for s in self.sel], axis=0)

    def average_term(self, values: np.ndarray) -> np.ndarray:
        return self.average @ values.ravel()

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Operator values at every plan point."""
        p = self.spec.params
        c = self.center @ values.ravel()
        s = self.midpoint_term(values)
        a = self.average_term(values)
        return (p.alpha * (s - c) + p.beta * (a - c)) / p.epsilon**2

    def dpp_map(self, values: np.ndarray, f: np.ndarray | float = 0.0) -> np.ndarray:
        """Right-hand side of the fixed-point form ``u = alpha S + beta A - eps^2 f``."""
        p = self.spec.params
        return p.alpha * self.midpoint_term(values) + p.beta * self.average_term(values) - p.epsilon**2 * f


def resolvable_mask(spec: OperatorSpec, region: LatticeRegion, read_mask: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Subset of ``candidates`` where every read of ``spec`` lands on ``read_mask``."""
    pts = region.coords(candidates)
    ok = region.interp(pts, read_mask)[2]
    st = ball_average_stencil(region, spec.params)
    for o in st.offsets:
        ok &= region.interp(pts + o, read_mask)[2]
    if spec.variant is not Variant.TUG_OF_WAR_NOISE:
        eps = spec.params.epsilon
        for v in spec.directions.vectors:
            ok &= region.interp(pts + eps * v, read_mask)[2]
            ok &= region.interp(pts - eps * v, read_mask)[2]
    out = np.zeros_like(candidates)
    out[candidates] = ok
    return out


def plan_for(spec: OperatorSpec, region: LatticeRegion, mask: np.ndarray | None = None, read_mask: np.ndarray | None = None) -> OperatorPlan:
    """Plan evaluating ``spec`` at the nodes in ``mask`` (default: interior nodes)."""
    mask = region.interior_mask if mask is None else mask
    read_mask = region.node_mask if read_mask is None else read_mask
    key = ("plan", spec.key, mask.tobytes(), read_mask.tobytes())
    cache = region._cache
    if key not in cache:
        cache[key] = OperatorPlan(spec, region, region.coords(mask), read_mask)
    return cache[key]


# ---------------------------------------------------------------------------
# Public operations


def second_difference(field: ScalarField, x, displacement) -> float:
    """``u(x + d) + u(x - d) - 2 u(x)``."""
    x = np.asarray(x, float)
    d = np.asarray(displacement, float)
    return float(field.read(x + d) + field.read(x - d) - 2.0 * field.read(x))


def apply_operator(spec: OperatorSpec, field: ScalarField, x) -> float:
    """Value of the operator at a single point ``x``."""
    plan = OperatorPlan(spec, field.region, np.asarray(x, float), field.defined)
    return float(plan.apply(field.values)[0])


def operator_values(spec: OperatorSpec, field: ScalarField, mask: np.ndarray | None = None) -> np.ndarray:
    """Operator values at the nodes of ``mask`` (default interior), in mask order."""
    return plan_for(spec, field.region, mask, field.defined).apply(field.values)


def residual_field(spec: OperatorSpec, field: ScalarField, f: ScalarField | float | None = None) -> ScalarField:
    """``L u - f`` at interior nodes; exterior nodes carry 0."""
    region = field.region
    mask = region.interior_mask
    lu = operator_values(spec, field, mask)
    fv = _rhs_values(f, region, mask)
    out = np.zeros(region.shape)
    out[mask] = lu - fv
    return ScalarField(region, out)


def _rhs_values(f, region: LatticeRegion, mask: np.ndarray):
    if f is None:
        return 0.0
    if isinstance(f, ScalarField):
        return f.values[mask]
    if callable(f):
        return np.asarray(f(region.coords(mask)), float).reshape(-1)
    return float(f)


@dataclass(frozen=True)
class SandwichH1Report:
    max_violation: float
    nodes_checked: int
    lower_gap: float
    upper_gap: float


def check_h1_sandwich(spec: OperatorSpec, u: ScalarField, v: ScalarField, mask: np.ndarray | None = None) -> SandwichH1Report:
    """Check ``L- v <= L(u + v) - L(u) <= L+ v`` node by node.

    ``lower_gap``/``upper_gap`` are the smallest slacks of the two inequalities;
    ``max_violation`` is the largest amount by which either fails (0 if none).
    """
    if not spec.admissible:
        raise NotAdmissible(f"{spec.variant.value} is not uniformly elliptic")
    region = u.region
    mask = region.interior_mask if mask is None else mask
    read = u.defined & v.defined
    w = ScalarField(region, u.values + v.values, read)
    plan = plan_for(spec, region, mask, read)
    diff = plan.apply(w.values) - plan.apply(u.values)
    lo = plan_for(spec.extremal(-1), region, mask, read).apply(v.values)
    hi = plan_for(spec.extremal(+1), region, mask, read).apply(v.values)
    lower = diff - lo
    upper = hi - diff
    viol = max(0.0, float(-lower.min()), float(-upper.min()))
    return SandwichH1Report(viol, int(mask.sum()), float(lower.min()), float(upper.min()))


@dataclass(frozen=True)
class TranslationReport:
    max_difference: float
    nodes_compared: int


def shift_field(field: ScalarField, shift) -> ScalarField:
    """``u_shift(x) = u(x + shift)`` for a lattice vector ``shift``; defined where ``x + shift`` is."""
    region = field.region
    k = region.lattice_index(np.asarray(shift, float).reshape(1, -1))[0] + region.offset
    values = np.zeros(region.shape)
    defined = np.zeros(region.shape, bool)
    src = [slice(max(0, s), n + min(0, s)) for s, n in zip(k, region.shape)]
    dst = [slice(max(0, -s), n + min(0, -s)) for s, n in zip(k, region.shape)]
    values[tuple(dst)] = field.values[tuple(src)]
    defined[tuple(dst)] = field.defined[tuple(src)]
    return ScalarField(region, values, defined & region.node_mask)


def check_h2_translation(spec: OperatorSpec, u: ScalarField, shift) -> TranslationReport:
    """Compare ``L(u_shift)(x)`` with ``L(u)(x + shift)`` on common nodes."""
    region = u.region
    shift = np.asarray(shift, float).reshape(-1)
    us = shift_field(u, shift)
    back = shift_field(ScalarField(region, region.interior_mask.astype(float)), shift).values > 0.5
    ok_s = resolvable_mask(spec, region, us.defined, region.interior_mask)
    ok_u = shift_field(ScalarField(region, resolvable_mask(spec, region, u.defined, region.interior_mask).astype(float)), shift).values > 0.5
    mask = ok_s & ok_u & back
    if not mask.any():
        return TranslationReport(0.0, 0)
    left = operator_values(spec, us, mask)
    pts = region.coords(mask) + shift
    right = OperatorPlan(spec, region, pts, u.defined).apply(u.values)
    return TranslationReport(float(np.abs(left - right).max()), int(mask.sum()))


@dataclass(frozen=True)
class ScalingReport:
    max_difference: float
    budget: float
    samples: int

    @property
    def ratio(self) -> float:
        return self.max_difference / self.budget if self.budget > 0 else 0.0


def check_scaling_identity(
    spec: OperatorSpec,
    u_analytic: Callable,
    R: float,
    domain,
    spacing: float,
    samples: int = 20,
    seed: int = 0,
    refine: int = 8,
) -> ScalingReport:
    """Compare ``L+_{eps/R} u~(x)`` with ``R^2 L+_eps u(Rx)`` where ``u~(x) = u(Rx)``.

    The scale-1 lattice has step ``spacing / R`` and the scale-R lattice step
    ``spacing``. ``budget`` is ``R^2`` times the largest quadrature error of
    the scale-R evaluation against a ``refine``-times finer lattice.
    """
    from .lattice import Ball, Box

    p = spec.params
    lplus = spec.extremal(+1)
    d = spec.dimension
    if isinstance(domain, Ball):
        big = Ball(tuple(R * c for c in domain.center), R * domain.radius)
    else:
        big = Box(tuple(R * c for c in domain.lo), tuple(R * c for c in domain.hi))
    small_params = p.with_epsilon(p.epsilon / R)
    small = build_region(d, domain, spacing / R, small_params)
    large = build_region(d, big, spacing, p)
    fine = build_region(d, big, spacing / refine, p)
    u_small = ScalarField.from_function(small, lambda x: u_analytic(R * x))
    u_large = ScalarField.from_function(large, u_analytic)
    u_fine = ScalarField.from_function(fine, u_analytic)

    rng = np.random.default_rng(seed)
    nodes = small.interior_nodes
    pick = nodes[rng.choice(len(nodes), size=min(samples, len(nodes)), replace=False)]
    pick = pick[np.lexsort(pick.T[::-1])]
    lhs = OperatorPlan(lplus.with_params(small_params), small, pick, small.node_mask).apply(u_small.values)
    rhs = R**2 * OperatorPlan(lplus, large, R * pick, large.node_mask).apply(u_large.values)
    ref = R**2 * OperatorPlan(lplus, fine, R * pick, fine.node_mask).apply(u_fine.values)
    budget = float(np.abs(rhs - ref).max())
    return ScalingReport(float(np.abs(lhs - rhs).max()), budget, len(pick))
