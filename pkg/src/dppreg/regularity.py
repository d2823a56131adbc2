"""
Empirical regularity diagnostics for lattice solutions.

Every estimator reports a *measured* constant; nothing here assumes values
for the unknown constants of the asymptotic estimates. Sub-regions are closed
balls of lattice nodes, by default concentric with the solve domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import InvalidParams, OutOfHull, RegionTooSmall
from .lattice import Ball, Box, EllipticityParams, LatticeRegion, ScalarField
from .operators import DirectionSet, OperatorSpec, Variant, plan_for, resolvable_mask

MAX_EXHAUSTIVE_PAIRS = 4_000_000
_CHUNK = 2_000_000

# slack budget: C1 * scale * tol / eps^2 + C2 * h
SLACK_C1 = 4.0
# frozen from calibrate_slack_c2() on the quadratic test (affine quotients are exact)
SLACK_C2 = 0.0


def domain_ball(domain) -> Ball:
    """Largest ball concentric with ``domain`` (the domain itself for balls)."""
    if isinstance(domain, Ball):
        return domain
    lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
    return Ball(tuple((lo + hi) / 2), float(((hi - lo) / 2).min()))


def sub_ball(domain, fraction: float) -> Ball:
    b = domain_ball(domain)
    return Ball(b.center, fraction * b.radius)


def ball_nodes(region: LatticeRegion, ball: Ball, defined: np.ndarray | None = None) -> np.ndarray:
    """Mask of interior nodes in the open ball (and in ``defined``)."""
    tol = 1e-9 * region.spacing
    pts = region.box_coords()
    r = np.linalg.norm(pts - np.asarray(ball.center), axis=-1)
    mask = region.interior_mask & (r < ball.radius - tol)
    if defined is not None:
        mask &= defined
    return mask


# ---------------------------------------------------------------------------
# Difference quotients


@dataclass(frozen=True)
class QuotientSpec:
    """``R^gamma (u(x + e h) - u(x)) / (|h|^gamma + eps^gamma)``."""

    direction: tuple
    offset: float
    gamma: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        e = np.atleast_1d(np.asarray(self.direction, float))
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise InvalidParams(f"direction must be a unit vector, got {e}")
        if self.offset == 0:
            raise InvalidParams("offset must be nonzero")
        if not 0 < self.gamma <= 1:
            raise InvalidParams(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.scale <= 0:
            raise InvalidParams("scale must be positive")
        object.__setattr__(self, "direction", tuple(float(v) for v in e))

    @property
    def shift(self) -> np.ndarray:
        return self.offset * np.asarray(self.direction)

    def factor(self, epsilon: float) -> float:
        return self.scale**self.gamma / (abs(self.offset) ** self.gamma + epsilon**self.gamma)


def difference_quotient(field: ScalarField, spec: QuotientSpec, params: EllipticityParams) -> ScalarField:
    """Difference quotient as a new field, defined on nodes where ``x + e h`` resolves."""
    region = field.region
    pts = region.coords(field.defined)
    flat, w, ok = region.interp(pts + spec.shift, field.defined)
    shifted = (field.values.ravel()[flat] * w).sum(axis=1)
    if not ok.any():
        raise OutOfHull("no node has a resolvable shifted read")
    values = np.zeros(region.shape)
    values[field.defined] = np.where(ok, spec.factor(params.epsilon) * (shifted - field.values[field.defined]), 0.0)
    defined = np.zeros(region.shape, bool)
    defined[field.defined] = ok
    return ScalarField(region, values, defined)


# ---------------------------------------------------------------------------
# Pair maximization


@dataclass(frozen=True)
class SeminormReport:
    """Measured constant ``max ratio`` over node pairs of a sub-ball."""

    kind: str
    center: tuple
    radius: float
    p: float
    q: float
    epsilon: float
    constant: float
    witness: tuple
    pairs_evaluated: int
    sampling: str
    seed: int | None = None

    def recompute(self, field: ScalarField, grad: "GradientField | None" = None) -> float:
        """Re-evaluate the ratio at the witness pair."""
        if not self.witness:
            return 0.0
        x, z = (np.asarray(w, float) for w in self.witness)
        d = np.linalg.norm(x - z)
        if self.kind == "holder":
            num = abs(field.read(x) - field.read(z))
            return num / (d**self.p + self.epsilon**self.q)
        if self.kind == "second_difference":
            num = abs(field.read(x) - 2 * field.read((x + z) / 2) + field.read(z))
            return num / (d**self.p + self.epsilon**self.q)
        if self.kind == "taylor":
            gx = grad.at_point(x)
            num = abs(field.read(z) - field.read(x) - gx @ (z - x))
            return num / (d**self.p + self.epsilon)
        raise InvalidParams(f"unknown report kind {self.kind}")


def _pair_max(n: int, ratio: Callable, ordered: bool, seed: int, max_pairs: int):
    """Maximize ``ratio(i, j)`` over index pairs of ``range(n)``.

    Exhaustive when the pair count is at most ``max_pairs``, else a uniform
    random sample of ``max_pairs`` pairs from ``default_rng(seed)``.
    Returns ``(best, i, j, evaluated, sampling)``.
    """
    total = n * (n - 1) if ordered else n * (n - 1) // 2
    best, bi, bj = 0.0, -1, -1
    if total == 0:
        return best, bi, bj, 0, "exhaustive"
    if total <= max_pairs:
        rows = max(1, _CHUNK // n)
        for start in range(0, n, rows):
            i = np.arange(start, min(n, start + rows))
            ii, jj = np.meshgrid(i, np.arange(n), indexing="ij")
            keep = (ii != jj) if ordered else (jj > ii)
            ii, jj = ii[keep], jj[keep]
            if ii.size == 0:
                continue
            r = ratio(ii, jj)
            k = int(np.argmax(r))
            if r[k] > best:
                best, bi, bj = float(r[k]), int(ii[k]), int(jj[k])
        return best, bi, bj, total, "exhaustive"
    rng = np.random.default_rng(seed)
    done = 0
    while done < max_pairs:
        m = min(_CHUNK, max_pairs - done)
        ii = rng.integers(0, n, m)
        jj = rng.integers(0, n - 1, m)
        jj = jj + (jj >= ii)
        r = ratio(ii, jj)
        k = int(np.argmax(r))
        if r[k] > best:
            best, bi, bj = float(r[k]), int(ii[k]), int(jj[k])
        done += m
    return best, bi, bj, max_pairs, "random"


def _report(kind, ball, p, q, eps, X, res, seed):
    best, i, j, count, sampling = res
    witness = () if i < 0 else (tuple(X[i]), tuple(X[j]))
    return SeminormReport(
        kind, tuple(ball.center), float(ball.radius), p, q, eps, best, witness, count, sampling,
        seed if sampling == "random" else None,
    )


def asym_seminorm(
    field: ScalarField,
    region: Ball,
    p: float,
    q: float,
    params: EllipticityParams,
    seed: int = 0,
    max_pairs: int = MAX_EXHAUSTIVE_PAIRS,
) -> SeminormReport:
    """Max of ``|u(x) - u(z)| / (|x - z|^p + eps^q)`` over node pairs in ``region``."""
    if p <= 0 or q <= 0:
        raise InvalidParams("exponents must be positive")
    mask = ball_nodes(field.region, region, field.defined)
    X = field.region.coords(mask)
    U = field.values[mask]
    if len(X) < 2:
        raise RegionTooSmall(f"only {len(X)} node(s) in the sub-ball")
    eq = params.epsilon**q

    def ratio(i, j):
        d = np.linalg.norm(X[i] - X[j], axis=1)
        return np.abs(U[i] - U[j]) / (d**p + eq)

    return _report("holder", region, p, q, params.epsilon, X, _pair_max(len(X), ratio, False, seed, max_pairs), seed)


def second_diff_seminorm(
    field: ScalarField,
    region: Ball,
    gamma: float,
    params: EllipticityParams,
    seed: int = 0,
    max_pairs: int = MAX_EXHAUSTIVE_PAIRS,
) -> SeminormReport:
    """Max of ``|u(x) - 2u((x+y)/2) + u(y)| / (|x-y|^(1+gamma) + eps^(1+gamma))``.

    Only pairs whose midpoint is a lattice node are used (same index parity
    in every coordinate).
    """
    reg = field.region
    mask = ball_nodes(reg, region, field.defined)
    idx = np.argwhere(mask)
    if len(idx) < 2:
        raise RegionTooSmall(f"only {len(idx)} node(s) in the sub-ball")
    e = 1.0 + gamma
    eps_e = params.epsilon**e
    coords = reg.box_coords()
    parity = ((idx + reg.offset) % 2) @ (2 ** np.arange(reg.dimension))
    classes = [idx[parity == c] for c in np.unique(parity)]
    total = sum(len(c) * (len(c) - 1) // 2 for c in classes)
    budget = max_pairs if total > max_pairs else total

    best = (0.0, -1, -1, 0, "exhaustive")
    best_pair = None
    evaluated, sampling = 0, "exhaustive"
    for c in classes:
        if len(c) < 2:
            continue
        share = len(c) * (len(c) - 1) // 2
        cap = share if total <= max_pairs else max(1, round(budget * share / total))
        X = coords[tuple(c.T)]
        U = field.values[tuple(c.T)]

        def ratio(i, j, c=c, X=X, U=U):
            mid = (c[i] + c[j]) // 2
            um = field.values[tuple(mid.T)]
            d = np.linalg.norm(X[i] - X[j], axis=1)
            return np.abs(U[i] - 2 * um + U[j]) / (d**e + eps_e)

        res = _pair_max(len(c), ratio, False, seed, cap)
        evaluated += res[3]
        if res[4] == "random":
            sampling = "random"
        if res[1] >= 0 and (best_pair is None or res[0] > best[0]):
            best = res
            best_pair = (tuple(X[res[1]]), tuple(X[res[2]]))
    return SeminormReport(
        "second_difference", tuple(region.center), float(region.radius), e, e, params.epsilon,
        best[0], best_pair or (), evaluated, sampling, seed if sampling == "random" else None,
    )


# ---------------------------------------------------------------------------
# Extremal sandwich for difference quotients


@dataclass(frozen=True)
class QuotientSandwichReport:
    max_violation: float
    slack: float
    min_upper: float
    max_lower: float
    band: float
    nodes_checked: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.slack


def slack_budget(quotient: QuotientSpec, params: EllipticityParams, spacing: float, tol: float) -> float:
    """``C1 * factor * tol / eps^2 + C2 * h`` with ``factor`` the quotient normalization."""
    return SLACK_C1 * quotient.factor(params.epsilon) * tol / params.epsilon**2 + SLACK_C2 * spacing


def sandwich_check(
    field: ScalarField,
    quotient: QuotientSpec,
    operator_directions: DirectionSet,
    lip_f: float,
    params: EllipticityParams,
    region: Ball | None = None,
    tol: float = 1e-10,
    slack: float | None = None,
) -> QuotientSandwichReport:
    """Measure how far the quotient violates ``L+ q >= -R Lip(f)`` and ``L- q <= R Lip(f)``.

    Evaluated at nodes of ``region`` (default: the half-radius sub-ball) where
    all reads of ``q`` resolve. ``tol`` is the solver tolerance feeding the
    default slack budget.
    """
    reg = field.region
    q = difference_quotient(field, quotient, params)
    region = sub_ball(reg.domain, 0.5) if region is None else region
    lplus = OperatorSpec(Variant.PUCCI_MAX, params, operator_directions)
    lminus = OperatorSpec(Variant.PUCCI_MIN, params, operator_directions)
    cand = ball_nodes(reg, region)
    mask = resolvable_mask(lplus, reg, q.defined, cand)
    if not mask.any():
        raise RegionTooSmall("no node in the sub-ball has resolvable quotient reads")
    band = quotient.scale * lip_f
    up = plan_for(lplus, reg, mask, q.defined).apply(q.values)
    lo = plan_for(lminus, reg, mask, q.defined).apply(q.values)
    viol = max(0.0, float((-up - band).max()), float((lo - band).max()))
    if slack is None:
        slack = slack_budget(quotient, params, reg.spacing, tol)
    return QuotientSandwichReport(viol, slack, float(up.min()), float(lo.max()), band, int(mask.sum()))


def calibrate_slack_c2(dimension: int = 1, ratio: int = 8) -> float:
    """Sandwich violation per unit ``h`` on ``u = |x|^2`` (whose quotients are affine)."""
    from .lattice import build_region
    from .operators import pucci_max

    params = EllipticityParams(0.5, 0.5, 1.0, 0.2)
    dom = Ball((0.0,) * dimension, 1.0)
    reg = build_region(dimension, dom, params.epsilon / ratio, params)
    u = ScalarField.from_function(reg, lambda x: (x**2).sum(axis=1))
    spec = pucci_max(params, dimension)
    e = np.zeros(dimension)
    e[0] = 1.0
    qs = QuotientSpec(tuple(e), 2 * reg.spacing, 0.5)
    rep = sandwich_check(u, qs, spec.directions, 0.0, params, slack=0.0)
    return rep.max_violation / reg.spacing


# ---------------------------------------------------------------------------
# Dyadic profile


def dyadic_profile(
    field: ScalarField,
    x,
    e,
    r0: float,
    levels: int,
    sigma_plus_tau: float,
    params: EllipticityParams,
) -> np.ndarray:
    """``|w(r) - 2 w(r/2)| / (|r/2|^s + eps^s)`` for ``r = r0, r0/2, ...``, ``w(r) = u(x + e r) - u(x)``."""
    x = np.asarray(x, float)
    e = np.asarray(e, float)
    s = sigma_plus_tau
    r = r0 / 2.0 ** np.arange(levels)
    ux = field.read(x)
    w = field.read(x + r[:, None] * e) - ux
    w2 = field.read(x + (r / 2)[:, None] * e) - ux
    return np.abs(w - 2 * w2) / ((r / 2) ** s + params.epsilon**s)


# ---------------------------------------------------------------------------
# Discrete gradient and Taylor remainder


@dataclass(frozen=True, eq=False)
class GradientField:
    """Forward differences ``(u(x + eps e_i) - u(x)) / eps`` per axis."""

    region: LatticeRegion
    components: np.ndarray  # (dim,) + region.shape
    defined: np.ndarray
    epsilon: float

    def at(self, mask: np.ndarray) -> np.ndarray:
        """``(P, dim)`` gradient vectors at the nodes of ``mask``."""
        return np.stack([c[mask] for c in self.components], axis=1)

    def at_point(self, x) -> np.ndarray:
        flat = self.region.flat_index(np.asarray(x, float).reshape(1, -1), self.defined)[0]
        return np.array([c.ravel()[flat] for c in self.components])

    def sup_norm(self, mask: np.ndarray | None = None) -> float:
        mask = self.defined if mask is None else mask & self.defined
        if not mask.any():
            return 0.0
        return float(np.linalg.norm(self.at(mask), axis=1).max())


def discrete_gradient(field: ScalarField, params: EllipticityParams) -> GradientField:
    reg = field.region
    m = round(params.epsilon / reg.spacing)
    comps = np.zeros((reg.dimension,) + reg.shape)
    defined = field.defined.copy()
    for i in range(reg.dimension):
        fwd = np.zeros(reg.shape)
        ok = np.zeros(reg.shape, bool)
        src = [slice(None)] * reg.dimension
        dst = [slice(None)] * reg.dimension
        src[i] = slice(m, None)
        dst[i] = slice(0, reg.shape[i] - m)
        fwd[tuple(dst)] = field.values[tuple(src)]
        ok[tuple(dst)] = field.defined[tuple(src)]
        comps[i] = (fwd - field.values) / params.epsilon
        defined &= ok
    comps[:, ~defined] = 0.0
    return GradientField(reg, comps, defined, params.epsilon)


def taylor_remainder(
    field: ScalarField,
    grad: GradientField,
    region: Ball,
    gamma: float,
    params: EllipticityParams,
    seed: int = 0,
    max_pairs: int = MAX_EXHAUSTIVE_PAIRS,
) -> SeminormReport:
    """Max of ``|u(y) - u(x) - grad(x).(y - x)| / (|x - y|^(1+gamma) + eps)`` over ordered pairs."""
    mask = ball_nodes(field.region, region, field.defined & grad.defined)
    X = field.region.coords(mask)
    U = field.values[mask]
    G = grad.at(mask)
    if len(X) < 2:
        raise RegionTooSmall(f"only {len(X)} node(s) in the sub-ball")
    e = 1.0 + gamma
    eps = params.epsilon

    def ratio(i, j):
        dx = X[j] - X[i]
        d = np.linalg.norm(dx, axis=1)
        return np.abs(U[j] - U[i] - (G[i] * dx).sum(axis=1)) / (d**e + eps)

    return _report("taylor", region, e, 1.0, eps, X, _pair_max(len(X), ratio, True, seed, max_pairs), seed)


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class ProblemFamily:
    """A DPP posed for a range of ``eps`` with ``h = eps / spacing_ratio``.

    ``operator`` maps ``EllipticityParams`` to an :class:`OperatorSpec`.
    """

    operator: Callable[[EllipticityParams], OperatorSpec]
    domain: Ball | Box
    alpha: float
    lam: float = 1.0
    spacing_ratio: int = 4
    g: Callable | float = 0.0
    f: Callable | float | None = None
    lip_f: float = 0.0
    tol: float = 1e-10
    max_iter: int = 200_000
    damping: float = 1.0

    def params(self, epsilon: float) -> EllipticityParams:
        return EllipticityParams(self.alpha, 1.0 - self.alpha, self.lam, epsilon)

    def solve(self, epsilon: float):
        from .lattice import build_region
        from .solver import solve_dpp

        params = self.params(epsilon)
        spec = self.operator(params)
        region = build_region(len(domain_ball(self.domain).center), self.domain, epsilon / self.spacing_ratio, params)
        return spec, solve_dpp(spec, region, self.g, self.f, tol=self.tol, max_iter=self.max_iter, damping=self.damping)


def run_check(check: dict, spec: OperatorSpec, report, family: ProblemFamily) -> dict:
    """Run one configured check on a solved field; returns flat result columns.

    ``check["kind"]`` is one of ``seminorm``, ``second_diff``, ``sandwich``,
    ``taylor`` or ``dyadic``.
    """
    u = report.solution
    reg = u.region
    params = spec.params
    kind = check["kind"]
    name = check.get("name", kind)
    ball = sub_ball(reg.domain, check.get("radius_fraction", 0.25))
    seed = int(check.get("seed", 0))
    max_pairs = int(check.get("max_pairs", MAX_EXHAUSTIVE_PAIRS))
    if kind == "seminorm":
        r = asym_seminorm(u, ball, check.get("p", 1.0), check.get("q", 1.0), params, seed, max_pairs)
        return {f"{name}_C": r.constant, f"{name}_pairs": r.pairs_evaluated}
    if kind == "second_diff":
        r = second_diff_seminorm(u, ball, check.get("gamma", 0.5), params, seed, max_pairs)
        return {f"{name}_C": r.constant, f"{name}_pairs": r.pairs_evaluated}
    if kind == "taylor":
        r = taylor_remainder(u, discrete_gradient(u, params), ball, check.get("gamma", 0.5), params, seed, max_pairs)
        return {f"{name}_C": r.constant, f"{name}_pairs": r.pairs_evaluated}
    if kind == "sandwich":
        e = check.get("direction", [1.0] + [0.0] * (reg.dimension - 1))
        offset = check.get("offset_steps", 1) * reg.spacing
        qs = QuotientSpec(tuple(e), offset, check.get("gamma", 1.0), check.get("scale", 1.0))
        ball = sub_ball(reg.domain, check.get("radius_fraction", 0.5))
        lip = check.get("lip_f", family.lip_f)
        r = sandwich_check(u, qs, spec.directions, lip, params, ball, tol=report.tol)
        return {f"{name}_violation": r.max_violation, f"{name}_slack": r.slack, f"{name}_pass": r.passed}
    if kind == "dyadic":
        c = domain_ball(reg.domain).center
        e = check.get("direction", [1.0] + [0.0] * (reg.dimension - 1))
        r0 = check.get("r0", 0.25 * domain_ball(reg.domain).radius)
        prof = dyadic_profile(u, c, e, r0, int(check.get("levels", 5)), check.get("sigma_plus_tau", 1.0), params)
        return {f"{name}_max": float(prof.max())}
    raise InvalidParams(f"unknown check kind {kind!r}")


def common_nodes(reg_a: LatticeRegion, mask_a: np.ndarray, reg_b: LatticeRegion, mask_b: np.ndarray):
    """Box indices ``(in a, in b)`` of lattice points that are nodes of both masks."""
    ia = np.argwhere(mask_a)
    t = (ia + reg_a.offset) * reg_a.spacing / reg_b.spacing - reg_b.offset
    ib = np.rint(t).astype(np.int64)
    ok = np.all(np.abs(t - ib) < 1e-9, axis=1) & np.all((ib >= 0) & (ib < np.asarray(reg_b.shape)), axis=1)
    ia, ib = ia[ok], ib[ok]
    keep = mask_b[tuple(ib.T)]
    return tuple(ia[keep].T), tuple(ib[keep].T)


def sweep_study(
    family: ProblemFamily,
    epsilons: Sequence[float],
    checks: Sequence[dict] = (),
    cauchy_fraction: float = 0.5,
    threads: int = 1,
) -> list[dict]:
    """Solve for each eps, run ``checks``, and record Cauchy differences.

    Each row has ``epsilon``, solve diagnostics, one or more columns per check,
    and ``cauchy_u`` / ``cauchy_grad``: sup-norm differences to the previous
    row's solution and discrete gradient over common nodes of the
    ``cauchy_fraction`` sub-ball (NaN on the first row). A failed solve marks
    the row (``converged=False``); the sweep continues.
    """
    eps = list(epsilons)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidParams("epsilons must be strictly decreasing")

    def one(e):
        import warnings

        from .exceptions import MaxIterExceeded

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MaxIterExceeded)
            try:
                spec, rep = family.solve(e)
            except Exception as exc:  # a failed row must not abort the sweep
                return e, None, None, {"error": type(exc).__name__}
        cols = {}
        for c in checks:
            cols.update(run_check(c, spec, rep, family))
        return e, spec, rep, cols

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, eps))
    else:
        results = [one(e) for e in eps]

    rows = []
    prev = None
    for e, spec, rep, cols in results:
        row = {"epsilon": e}
        if rep is None:
            row.update({"converged": False, "iterations": 0, "residual_sup": math.nan, "cauchy_u": math.nan, "cauchy_grad": math.nan})
            row.update(cols)
            rows.append(row)
            prev = None
            continue
        u = rep.solution
        reg = u.region
        grad = discrete_gradient(u, spec.params)
        ball = sub_ball(reg.domain, cauchy_fraction)
        mask_u = ball_nodes(reg, ball)
        mask_g = mask_u & grad.defined
        row.update({"converged": rep.converged, "iterations": rep.iterations, "residual_sup": rep.residual_sup})
        if prev is None:
            row["cauchy_u"] = math.nan
            row["cauchy_grad"] = math.nan
        else:
            pu, pmask_u, pgrad, pmask_g = prev
            ia, ib = common_nodes(pu.region, pmask_u, reg, mask_u)
            row["cauchy_u"] = float(np.abs(pu.values[ia] - u.values[ib]).max()) if ia[0].size else math.nan
            ia, ib = common_nodes(pgrad.region, pmask_g, reg, mask_g)
            if ia[0].size:
                dg = np.stack([c[ia] for c in pgrad.components]) - np.stack([c[ib] for c in grad.components])
                row["cauchy_grad"] = float(np.linalg.norm(dg, axis=0).max())
            else:
                row["cauchy_grad"] = math.nan
        row.update(cols)
        rows.append(row)
        prev = (u, mask_u, grad, mask_g)
    return rows
