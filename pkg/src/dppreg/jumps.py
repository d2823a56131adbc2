"""
Jump sizes of 1D solutions and the exponential-decay bound on them.

A solution of ``u = alpha (two-point term) + beta (average)`` can only jump
by ``2 ||g|| alpha^ceil(dist(x, boundary) / eps)`` at ``x``; this module
measures adjacent-node jumps on lattice solutions and compares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParams
from .lattice import EllipticityParams, Interval, ScalarField, build_region
from .operators import mixed_two_point
from .solver import solve_coset_1d, solve_dpp, step_data

_CEIL_TOL = 1e-9


@dataclass(frozen=True)
class JumpProxies:
    """Adjacent-node differences ``|u(x_{j+1}) - u(x_j)|`` between interior nodes.

    ``dist`` is the smaller boundary distance of the two nodes.
    """

    x: np.ndarray
    proxy: np.ndarray
    dist: np.ndarray


def jump_proxy_field(field: ScalarField) -> JumpProxies:
    reg = field.region
    if reg.dimension != 1:
        raise InvalidParams("jump proxies are only defined for 1D fields")
    inside = reg.interior_mask
    pair = inside[:-1] & inside[1:]
    u = field.values
    x = reg.box_coords()[:, 0]
    dist = reg.boundary_distance(reg.box_coords())
    return JumpProxies(
        x=x[:-1][pair],
        proxy=np.abs(u[1:] - u[:-1])[pair],
        dist=np.minimum(dist[:-1], dist[1:])[pair],
    )


def sup_norm_g(g, region=None) -> float:
    """``||g||_inf``: a number is taken as the norm itself; fields use their exterior nodes."""
    if isinstance(g, ScalarField):
        return g.sup_norm(g.region.exterior_mask)
    if callable(g):
        if region is None:
            raise InvalidParams("a region is needed to evaluate callable boundary data")
        return float(np.abs(g(region.exterior_nodes)).max())
    return abs(float(g))


def jump_exponent(dist, epsilon: float):
    """``ceil(dist / eps)``, with exact multiples ``k eps`` mapped to ``k``."""
    return np.ceil(np.asarray(dist, float) / epsilon - _CEIL_TOL).clip(min=0)


def predicted_jump_bound(x, g, alpha: float, epsilon: float, domain) -> np.ndarray | float:
    """``2 ||g|| alpha^ceil(dist(x, boundary) / eps)``."""
    dist = domain.boundary_distance(np.asarray(x, float).reshape(-1, domain.dimension))
    out = 2.0 * sup_norm_g(g) * np.power(float(alpha), jump_exponent(dist, epsilon))
    return float(out[0]) if np.ndim(x) <= 1 and np.size(x) == domain.dimension else out


@dataclass(frozen=True)
class JumpProfile:
    x: np.ndarray
    jump_proxy: np.ndarray
    dist_to_boundary: np.ndarray
    predicted_bound: np.ndarray
    margin: np.ndarray
    allowance: float

    @property
    def violation(self) -> np.ndarray:
        return self.jump_proxy > self.predicted_bound + self.allowance

    @property
    def violations(self) -> int:
        return int(self.violation.sum())


def verify_jump_bound(field: ScalarField, g, params: EllipticityParams, allowance: float) -> JumpProfile:
    reg = field.region
    jp = jump_proxy_field(field)
    gnorm = sup_norm_g(g, reg)
    bound = 2.0 * gnorm * np.power(params.alpha, jump_exponent(jp.dist, params.epsilon))
    return JumpProfile(jp.x, jp.proxy, jp.dist, bound, bound - jp.proxy, float(allowance))


def solve_family_member(alpha: float, epsilon: float = 0.2, refine: int = 64, g=step_data, tol: float = 1e-12):
    """Solve ``u = alpha (u(x+e) + u(x-e))/2 + (1-alpha) avg u`` on ``(0, 1)`` with ``h = eps / refine``."""
    spec = mixed_two_point(epsilon, alpha)
    region = build_region(1, Interval(0.0, 1.0), epsilon / refine, spec.params)
    return spec, solve_dpp(spec, region, g, tol=tol)


def calibrate_allowance(epsilon: float = 0.2, refine: int = 64, g=step_data) -> float:
    """``C_smooth * h`` from the largest interior jump proxy of the alpha = 0 solve."""
    _, rep = solve_family_member(0.0, epsilon, refine, g)
    return float(jump_proxy_field(rep.solution).proxy.max())


# ---------------------------------------------------------------------------
# Figures


@dataclass(frozen=True)
class Curve:
    name: str
    x: np.ndarray
    u: np.ndarray
    step: bool
    approximate: bool


def sample_points(n: int = 512) -> np.ndarray:
    """Cell midpoints of ``(0, 1)``; none is a multiple of 1/5 or of the fine lattice."""
    return (np.arange(n) + 0.5) / n


def reproduce_figures(epsilon: float = 0.2, samples: int = 512, refine: int = 64, alpha: float = 0.5, tol: float = 1e-12):
    """Sampled solutions of the two 1D step-data DPPs.

    The first is the exact coset staircase of the pure two-point DPP, the
    second the value-iteration solution of the mixed DPP with
    ``alpha = beta = 1/2`` on ``h = eps / refine``. Returns the two curves and
    the second solve's report.
    """
    if samples < 2:
        raise InvalidParams("need at least two samples")
    x = sample_points(samples)
    stair = solve_coset_1d("pure-two-point", epsilon)
    spec, rep = solve_family_member(alpha, epsilon, refine, tol=tol)
    fig2 = rep.solution.read(x[:, None])
    return (
        Curve("two_point", x, stair(x), step=True, approximate=False),
        Curve("two_point_plus_average", x, fig2, step=True, approximate=True),
        rep,
    )


def staircase_levels(epsilon: float = 0.2) -> np.ndarray:
    """Distinct interior values ``k / (n + 1)`` of the staircase, ``n = 1/eps`` (integer)."""
    n = round(1.0 / epsilon)
    if not math.isclose(n * epsilon, 1.0):
        raise InvalidParams("staircase levels need 1/eps integral")
    return np.arange(1, n + 1) / (n + 1)
