"""
Value iteration for ``L_eps u = f`` in the domain with ``u = g`` outside,
and the exact coset solution of the 1D pure two-point DPP.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import InvalidParams, MaxIterExceeded, NonFiniteValue, UnsupportedVariant
from .lattice import EllipticityParams, LatticeRegion, ScalarField, build_region, Interval
from .operators import OperatorSpec, mixed_two_point, plan_for

_CHAIN_TOL = 1e-9


@dataclass(frozen=True)
class SolveReport:
    solution: ScalarField
    iterations: int
    final_sup_diff: float
    residual_sup: float
    converged: bool
    tol: float
    residual_tol: float


def boundary_values(g, region: LatticeRegion, mask: np.ndarray) -> np.ndarray:
    """Evaluate boundary data (callable, ScalarField or constant) on ``mask``."""
    if isinstance(g, ScalarField):
        return g.values[mask]
    if callable(g):
        return np.asarray(g(region.coords(mask)), float).reshape(-1)
    return np.full(int(mask.sum()), float(g))


def solve_dpp(
    spec: OperatorSpec,
    region: LatticeRegion,
    g,
    f=None,
    tol: float = 1e-10,
    residual_tol: float | None = None,
    max_iter: int = 200_000,
    damping: float = 1.0,
) -> SolveReport:
    """Solve the DPP by damped Jacobi value iteration.

    Iterates ``u <- (1 - w) u + w T(u)`` with ``T(u) = alpha S(u) + beta A(u) - eps^2 f``
    on interior nodes, exterior nodes pinned to ``g``, starting from the mean
    of ``g`` over the strip. Stops once ``sup |u_{k+1} - u_k| <= tol``.

    :param g: boundary data; a callable on ``(P, dim)`` points, a ScalarField or a constant.
    :param f: running cost, same forms as ``g``; ``None`` means zero.
    :param residual_tol: defaults to ``10 * tol / eps^2``.
    :param damping: relaxation weight ``w`` in ``(0, 1]``.
    """
    if not 0 < damping <= 1:
        raise InvalidParams(f"damping must lie in (0, 1], got {damping}")
    eps = spec.params.epsilon
    if abs(eps - region.params.epsilon) > 1e-12 * eps:
        raise InvalidParams("operator and region disagree on epsilon")
    if residual_tol is None:
        residual_tol = 10.0 * tol / eps**2
    inside = region.interior_mask
    outside = region.exterior_mask
    plan = plan_for(spec, region)

    values = np.zeros(region.shape)
    gv = boundary_values(g, region, outside)
    values[outside] = gv
    values[inside] = gv.mean()
    fv = 0.0 if f is None else boundary_values(f, region, inside)

    current = values[inside]
    diff = math.inf
    it = 0
    while it < max_iter:
        new = plan.dpp_map(values, fv)
        if damping != 1.0:
            new = (1.0 - damping) * current + damping * new
        if not np.isfinite(new).all():
            raise NonFiniteValue(f"non-finite iterate at iteration {it + 1}")
        diff = float(np.abs(new - current).max())
        values[inside] = new
        current = new
        it += 1
        if diff <= tol:
            break

    residual = float(np.abs(plan.apply(values) - fv).max())
    converged = diff <= tol and residual <= residual_tol
    if diff > tol:
        warnings.warn(f"value iteration stopped after {it} iterations (sup diff {diff:.3e} > tol {tol:.1e})", MaxIterExceeded, stacklevel=2)
    return SolveReport(ScalarField(region, values), it, diff, residual, converged, tol, residual_tol)


# ---------------------------------------------------------------------------
# 1D coset chains


@dataclass(frozen=True)
class CosetSolution:
    """Exact solution of ``u(x) = (u(x + eps) + u(x - eps)) / 2`` on ``(0, 1)``.

    The DPP only couples points of ``x + eps Z``; on each such chain the
    solution is linear in the chain index between its two exterior reads.
    """

    epsilon: float
    g: Callable

    approximate = False

    def steps(self, x):
        """Number of eps-steps from ``x`` to the left and right exterior reads."""
        x = np.asarray(x, float)
        left = np.ceil(x / self.epsilon - _CHAIN_TOL).astype(np.int64)
        right = np.ceil((1.0 - x) / self.epsilon - _CHAIN_TOL).astype(np.int64)
        return left, right

    def __call__(self, x):
        x = np.asarray(x, float)
        if np.any((x <= 0) | (x >= 1)):
            raise InvalidParams("coset solution is defined on the open interval (0, 1)")
        jl, jr = self.steps(x)
        gl = _eval1d(self.g, x - jl * self.epsilon)
        gr = _eval1d(self.g, x + jr * self.epsilon)
        return gl + (gr - gl) * jl / (jl + jr)


@dataclass(frozen=True)
class LatticeSolution:
    """Fine-lattice solve of a 1D DPP, evaluated with the nearest-node rule."""

    report: SolveReport

    approximate = True

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.report.solution.read(x.reshape(-1, 1)).reshape(x.shape)


def _eval1d(g, x):
    x = np.asarray(x, float)
    if callable(g):
        return np.asarray(g(x.reshape(-1, 1)), float).reshape(x.shape)
    return np.full(x.shape, float(g))


def step_data(points) -> np.ndarray:
    """0 left of the unit interval, 1 right of it (``g(x) = 1`` iff ``x >= 1``)."""
    x = np.asarray(points, float)[..., 0]
    return (x >= 0.5).astype(float)


def solve_coset_1d(variant: str, epsilon: float, g=step_data, alpha: float = 1.0, beta: float = 0.0, refine: int = 64):
    """Solve a 1D DPP on ``(0, 1)`` with exterior data ``g``.

    ``variant="pure-two-point"`` returns the exact :class:`CosetSolution`.
    ``variant="eq52"`` (two-point term plus interval average) returns a
    :class:`LatticeSolution` from value iteration with ``h = eps / refine``,
    flagged approximate.
    """
    if variant == "pure-two-point":
        return CosetSolution(epsilon, g)
    if variant == "eq52":
        spec = mixed_two_point(epsilon, alpha)
        if abs(spec.params.beta - beta) > 1e-12:
            raise InvalidParams(f"alpha={alpha} and beta={beta} do not sum to 1")
        region = build_region(1, Interval(0.0, 1.0), epsilon / refine, spec.params)
        return LatticeSolution(solve_dpp(spec, region, g))
    raise UnsupportedVariant(f"unknown 1D coset variant {variant!r}")
