"""
Command line driver: ``dpp <solve|regularity|jumps|figure|sweep> --config FILE``.

The config is a JSON document; see README.md for the keys. Exit codes:
0 success, 1 solver did not converge, 2 invalid config, 3 a check found a
violation above its slack.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import jumps as jmod
from . import operators as ops
from .exceptions import ConfigError, DPPError, MaxIterExceeded
from .lattice import Ball, Box, EllipticityParams, build_region
from .regularity import (
    MAX_EXHAUSTIVE_PAIRS,
    ProblemFamily,
    QuotientSpec,
    asym_seminorm,
    discrete_gradient,
    domain_ball,
    dyadic_profile,
    sandwich_check,
    second_diff_seminorm,
    sub_ball,
    sweep_study,
    taylor_remainder,
)
from .reporting import config_hash, write_csv, write_svg
from .solver import solve_dpp

EXIT_OK, EXIT_NONCONVERGED, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2, 3
COMMANDS = ("solve", "regularity", "jumps", "figure", "sweep")


# ---------------------------------------------------------------------------
# Config parsing


def _get(d: dict, key: str, path: str, default: Any = ..., kind=None):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    v = d[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
        return v
    if kind is list and not isinstance(v, list):
        raise ConfigError(f"{path}.{key}: expected a list")
    if kind is dict and not isinstance(v, dict):
        raise ConfigError(f"{path}.{key}: expected an object")
    if kind is str and not isinstance(v, str):
        raise ConfigError(f"{path}.{key}: expected a string")
    return v


def _domain(d: dict, dimension: int):
    kind = _get(d, "type", "region.domain", kind=str)
    if kind == "interval":
        lo, hi = _get(d, "lo", "region.domain", 0.0, float), _get(d, "hi", "region.domain", 1.0, float)
        dom = Box((lo,), (hi,))
    elif kind == "disk":
        c = _get(d, "center", "region.domain", [0.0] * dimension, list)
        dom = Ball(tuple(c), _get(d, "radius", "region.domain", 1.0, float))
    elif kind == "rectangle":
        dom = Box(tuple(_get(d, "lo", "region.domain", kind=list)), tuple(_get(d, "hi", "region.domain", kind=list)))
    else:
        raise ConfigError(f"region.domain.type: unknown domain {kind!r}")
    if dom.dimension != dimension:
        raise ConfigError(f"region.domain: dimension {dom.dimension} does not match region.dimension {dimension}")
    return dom


def _nearest(samples, path: str):
    from scipy.spatial import cKDTree

    arr = np.asarray(samples, float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ConfigError(f"{path}.samples: expected rows [coords..., value]")
    tree = cKDTree(arr[:, :-1])
    vals = arr[:, -1]

    def fn(x):
        return vals[tree.query(np.asarray(x, float))[1]]

    return fn


def boundary_function(d: dict, domain, path: str = "boundary") -> Callable:
    """Build boundary data from a preset name or tabulated samples."""
    if "samples" in d:
        return _nearest(d["samples"], path)
    preset = _get(d, "preset", path, kind=str)
    if preset == "constant":
        c = _get(d, "value", path, 0.0, float)
        return lambda x: np.full(len(x), c)
    if preset == "step":
        mid = domain_ball(domain).center[0]
        return lambda x: (np.asarray(x)[:, 0] >= mid).astype(float)
    if preset == "quadratic":
        return lambda x: (np.asarray(x) ** 2).sum(axis=1)
    if preset == "affine":
        a = np.asarray(_get(d, "slope", path, kind=list), float)
        b = _get(d, "offset", path, 0.0, float)
        return lambda x: np.asarray(x) @ a + b
    if preset == "smooth":
        def smooth(x):
            x = np.asarray(x)
            out = np.sin(1.3 * x[:, 0] + 0.4)
            if x.shape[1] > 1:
                out = out * np.exp(0.7 * x[:, 1])
            return out
        return smooth
    raise ConfigError(f"{path}.preset: unknown preset {preset!r}")


def running_cost(d: dict | None, path: str = "running_cost"):
    """Return ``(f, lipschitz_constant)``; ``f`` is None for zero cost."""
    if d is None:
        return None, 0.0
    if "samples" in d:
        return _nearest(d["samples"], path), _get(d, "lipschitz", path, kind=float)
    preset = _get(d, "preset", path, kind=str)
    if preset == "zero":
        return None, 0.0
    if preset == "constant":
        c = _get(d, "value", path, 0.0, float)
        return (lambda x: np.full(len(x), c)), 0.0
    if preset == "sine":
        a = _get(d, "amplitude", path, 1.0, float)
        k = _get(d, "frequency", path, 1.0, float)
        return (lambda x: a * np.sin(k * np.asarray(x)[:, 0])), abs(a * k)
    raise ConfigError(f"{path}.preset: unknown preset {preset!r}")


def operator_builder(d: dict, dimension: int) -> Callable[[EllipticityParams], ops.OperatorSpec]:
    """Map params to an OperatorSpec according to the ``operator`` section."""
    variant = _get(d, "variant", "operator", kind=str)
    radii = tuple(_get(d, "radii", "operator", [0.0, 0.5, 1.0], list))
    angles = _get(d, "angles", "operator", 16, int)

    def dirs(p):
        return ops.DirectionSet.ball(dimension, p.lam, radii, angles)

    if variant == "pucci_max":
        return lambda p: ops.pucci_max(p, dimension, dirs(p))
    if variant == "pucci_min":
        return lambda p: ops.pucci_min(p, dimension, dirs(p))
    if variant == "fixed_direction":
        nu = _get(d, "nu", "operator", kind=list)
        return lambda p: ops.fixed_direction(p, nu, dirs(p))
    if variant == "sup_over_set":
        subset = _get(d, "subset", "operator", kind=list)
        return lambda p: ops.sup_over_set(p, subset, dirs(p))
    if variant == "isaacs":
        fam = _get(d, "family", "operator", kind=list)
        order = _get(d, "order", "operator", "sup_inf", str)
        return lambda p: ops.isaacs(p, fam, order, dirs(p))
    if variant == "tug_of_war_noise":
        return lambda p: ops.tug_of_war_noise(p, dimension)
    raise ConfigError(f"operator.variant: unknown variant {variant!r}")


@dataclass
class ExperimentConfig:
    raw: dict
    dimension: int
    domain: Any
    epsilon: float
    spacing: float
    alpha: float
    lam: float
    operator: Callable
    g: Callable
    f: Callable | None
    lip_f: float
    tol: float
    residual_tol: float | None
    max_iter: int
    damping: float
    checks: list = field(default_factory=list)

    def params(self, alpha: float | None = None, epsilon: float | None = None) -> EllipticityParams:
        a = self.alpha if alpha is None else alpha
        e = self.epsilon if epsilon is None else epsilon
        if a == 1.0:
            return EllipticityParams.two_point(e, self.lam)
        return EllipticityParams(a, 1.0 - a, self.lam, e)

    def seeds(self) -> list[int]:
        return sorted({int(c.get("seed", 0)) for c in self.checks}) or [int(self.raw.get("seed", 0))]


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    reg = _get(raw, "region", "config", {}, dict)
    dimension = _get(reg, "dimension", "region", 1, int)
    if dimension not in (1, 2):
        raise ConfigError(f"region.dimension: must be 1 or 2, got {dimension}")
    domain = _domain(_get(reg, "domain", "region", {"type": "interval", "lo": 0.0, "hi": 1.0} if dimension == 1 else {"type": "disk"}, dict), dimension)
    epsilon = _get(reg, "epsilon", "region", 0.2, float)
    spacing = _get(reg, "spacing", "region", epsilon / 4, float)
    op = _get(raw, "operator", "config", {"variant": "pucci_max"}, dict)
    alpha = _get(op, "alpha", "operator", 0.5, float)
    lam = _get(op, "lambda", "operator", 1.0, float)
    if not 0 <= alpha <= 1:
        raise ConfigError(f"operator.alpha: must lie in [0, 1], got {alpha}")
    if epsilon <= 0 or spacing <= 0 or lam <= 0:
        raise ConfigError("region.epsilon, region.spacing and operator.lambda must be positive")
    ratio = epsilon / spacing
    if abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise ConfigError(f"region.spacing: epsilon={epsilon} is not an integer multiple of spacing={spacing}")
    solver = _get(raw, "solver", "config", {}, dict)
    f, lip = running_cost(_get(raw, "running_cost", "config", None))
    checks = _get(raw, "checks", "config", [], list)
    for i, c in enumerate(checks):
        if not isinstance(c, dict) or "kind" not in c:
            raise ConfigError(f"checks[{i}]: each check needs a 'kind'")
        if c["kind"] not in ("seminorm", "second_diff", "sandwich", "taylor", "dyadic"):
            raise ConfigError(f"checks[{i}].kind: unknown check {c['kind']!r}")
    return ExperimentConfig(
        raw=raw,
        dimension=dimension,
        domain=domain,
        epsilon=epsilon,
        spacing=spacing,
        alpha=alpha,
        lam=lam,
        operator=operator_builder(op, dimension),
        g=boundary_function(_get(raw, "boundary", "config", {"preset": "constant", "value": 0.0}, dict), domain),
        f=f,
        lip_f=lip,
        tol=_get(solver, "tol", "solver", 1e-10, float),
        residual_tol=_get(solver, "residual_tol", "solver", None, float) if "residual_tol" in solver else None,
        max_iter=_get(solver, "max_iter", "solver", 200_000, int),
        damping=_get(solver, "damping", "solver", 1.0, float),
        checks=checks,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# Subcommands


def _meta(cfg: ExperimentConfig, command: str) -> dict:
    return {"config_sha256": config_hash(cfg.raw), "seeds": ";".join(map(str, cfg.seeds())), "command": command}


def _solve(cfg: ExperimentConfig, alpha: float | None = None):
    params = cfg.params(alpha)
    spec = cfg.operator(params)
    region = build_region(cfg.dimension, cfg.domain, cfg.spacing, params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        rep = solve_dpp(spec, region, cfg.g, cfg.f, cfg.tol, cfg.residual_tol, cfg.max_iter, cfg.damping)
    return spec, rep


def _axes(dim: int) -> list[str]:
    return ["x", "y"][:dim]


def cmd_solve(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    spec, rep = _solve(cfg)
    reg = rep.solution.region
    mask = reg.node_mask
    pts = reg.coords(mask)
    tags = np.where(reg.interior_mask[mask], "interior", "exterior")
    rows = [(*p, t, v) for p, t, v in zip(pts, tags, rep.solution.values[mask])]
    meta = _meta(cfg, "solve")
    write_csv(out / "solve_field.csv", [*_axes(reg.dimension), "tag", "u"], rows, meta)
    write_csv(
        out / "solve_report.csv",
        ["iterations", "final_sup_diff", "residual_sup", "converged", "tol", "residual_tol"],
        [(rep.iterations, rep.final_sup_diff, rep.residual_sup, rep.converged, rep.tol, rep.residual_tol)],
        meta,
    )
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_regularity(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    spec, rep = _solve(cfg)
    u = rep.solution
    reg = u.region
    params = spec.params
    checks = cfg.checks or [{"kind": "seminorm", "p": 1.0, "q": 1.0}]
    meta = _meta(cfg, "regularity")
    rows = []
    failed = False
    for i, c in enumerate(checks):
        kind = c["kind"]
        name = c.get("name", f"{kind}_{i}")
        seed = int(c.get("seed", 0))
        max_pairs = int(c.get("max_pairs", MAX_EXHAUSTIVE_PAIRS))
        ball = sub_ball(reg.domain, c.get("radius_fraction", 0.5 if kind == "sandwich" else 0.25))
        if kind in ("seminorm", "second_diff", "taylor"):
            if kind == "seminorm":
                r = asym_seminorm(u, ball, c.get("p", 1.0), c.get("q", 1.0), params, seed, max_pairs)
            elif kind == "second_diff":
                r = second_diff_seminorm(u, ball, c.get("gamma", 0.5), params, seed, max_pairs)
            else:
                r = taylor_remainder(u, discrete_gradient(u, params), ball, c.get("gamma", 0.5), params, seed, max_pairs)
            wx, wz = (r.witness if r.witness else ((), ()))
            rows.append((name, kind, r.p, r.q, r.constant, r.pairs_evaluated, r.sampling, seed,
                         " ".join(map(repr, map(float, wx))), " ".join(map(repr, map(float, wz))), "", "", "measured"))
        elif kind == "sandwich":
            e = c.get("direction", [1.0] + [0.0] * (reg.dimension - 1))
            qs = QuotientSpec(tuple(e), c.get("offset_steps", 1) * reg.spacing, c.get("gamma", 1.0), c.get("scale", 1.0))
            r = sandwich_check(u, qs, spec.directions, c.get("lip_f", cfg.lip_f), params, ball, tol=rep.tol)
            failed |= not r.passed
            rows.append((name, kind, qs.gamma, qs.gamma, "", r.nodes_checked, "exhaustive", seed, "", "",
                         r.max_violation, r.slack, "pass" if r.passed else "fail"))
        else:
            center = np.asarray(c.get("point", domain_ball(reg.domain).center), float)
            e = np.asarray(c.get("direction", [1.0] + [0.0] * (reg.dimension - 1)), float)
            r0 = c.get("r0", 0.25 * domain_ball(reg.domain).radius)
            levels = int(c.get("levels", 5))
            prof = dyadic_profile(u, center, e, r0, levels, c.get("sigma_plus_tau", 1.0), params)
            write_csv(out / f"dyadic_{name}.csv", ["level", "r", "value"],
                      [(j, r0 / 2**j, v) for j, v in enumerate(prof)], meta)
            rows.append((name, kind, "", "", float(prof.max()), levels, "exhaustive", seed, "", "", "", "", "measured"))
    write_csv(out / "regularity.csv",
              ["name", "kind", "p", "q", "constant", "count", "sampling", "seed", "witness_x", "witness_z",
               "violation", "slack", "status"], rows, meta)
    if not rep.converged:
        return EXIT_NONCONVERGED
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_jumps(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    if cfg.dimension != 1:
        raise ConfigError("region.dimension: jumps requires a 1D region")
    jc = _get(cfg.raw, "jumps", "config", {}, dict)
    alphas = [float(a) for a in _get(jc, "alphas", "jumps", [cfg.alpha], list)]
    if "allowance" in jc:
        allowance = _get(jc, "allowance", "jumps", kind=float)
    else:
        _, base = _solve(cfg, 0.0)
        allowance = float(jmod.jump_proxy_field(base.solution).proxy.max())
    rows = []
    bad = 0
    converged = True
    for a in alphas:
        spec, rep = _solve(cfg, a)
        converged &= rep.converged
        prof = jmod.verify_jump_bound(rep.solution, cfg.g, spec.params, allowance)
        bad += prof.violations
        rows += [(a, x, p, d, b, m, allowance, v) for x, p, d, b, m, v in zip(
            prof.x, prof.jump_proxy, prof.dist_to_boundary, prof.predicted_bound, prof.margin, prof.violation)]
    write_csv(out / "jumps.csv", ["alpha", "x", "jump_proxy", "dist_to_boundary", "predicted_bound", "margin", "allowance", "violation"],
              rows, _meta(cfg, "jumps"))
    if not converged:
        return EXIT_NONCONVERGED
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_figure(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    fc = _get(cfg.raw, "figure", "config", {}, dict)
    eps = _get(fc, "epsilon", "figure", 0.2, float)
    fig1, fig2, rep = jmod.reproduce_figures(
        eps, _get(fc, "samples", "figure", 512, int), _get(fc, "refine", "figure", 64, int), _get(fc, "alpha", "figure", 0.5, float)
    )
    meta = _meta(cfg, "figure")
    for k, c in enumerate((fig1, fig2), start=1):
        write_csv(out / f"figure{k}.csv", ["x", "u"], zip(c.x, c.u), meta)
        write_svg(out / f"figure{k}.svg", c.x, c.u, title=f"{c.name}, eps={eps:g}", step=c.step)
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    sc = _get(cfg.raw, "sweep", "config", {}, dict)
    eps = [float(e) for e in _get(sc, "epsilons", "sweep", kind=list)]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("sweep.epsilons: must be strictly decreasing")
    ratio = _get(sc, "spacing_ratio", "sweep", 4, int)
    fam = ProblemFamily(
        operator=cfg.operator, domain=cfg.domain, alpha=cfg.alpha, lam=cfg.lam, spacing_ratio=ratio,
        g=cfg.g, f=cfg.f, lip_f=cfg.lip_f, tol=cfg.tol, max_iter=cfg.max_iter, damping=cfg.damping,
    )
    rows = sweep_study(fam, eps, cfg.checks, _get(sc, "cauchy_fraction", "sweep", 0.5, float), threads)
    cols: list[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    write_csv(out / "sweep.csv", cols, [[r.get(k, "") for k in cols] for r in rows], _meta(cfg, "sweep"))
    if not all(r["converged"] for r in rows):
        return EXIT_NONCONVERGED
    failed = any(v is False for r in rows for k, v in r.items() if k.endswith("_pass"))
    return EXIT_VIOLATION if failed else EXIT_OK


HANDLERS = {"solve": cmd_solve, "regularity": cmd_regularity, "jumps": cmd_jumps, "figure": cmd_figure, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpp", description="Solve uniformly elliptic DPPs and measure regularity constants.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--out", default=None, help="output directory (default: config 'output' or ./dpp_out)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads for sweeps (env DPP_THREADS)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads or int(os.environ.get("DPP_THREADS", "1") or 1)
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.raw.get("output", "dpp_out"))
        return HANDLERS[args.command](cfg, out, max(1, threads))
    except (ConfigError, DPPError) as exc:
        print(f"dpp: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TypeError, ValueError) as exc:
        print(f"dpp: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
