"""Command-line batch interface.

Exit codes: 0 success, 2 configuration or usage error, 3 boundary solver
did not converge, 4 a validation check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .boundary import residual, solve
from .config import ConfigError
from .hedging import hedge_backtest
from .io import fmt, read_surface, write_surface
from .kernels import european_put, premium
from .model import OptionContract, bond_price
from .montecarlo import PathConfig, PathSource, estimate_discounted, ls_american, mc_premium, terminal_source
from .pricer import price

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("vasicek_put")


class UsageError(Exception):
    pass


def _write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def _solve(cfg):
    obj = cfgmod.build(cfg)
    surf, diag = solve(obj["model"], obj["contract"], obj["grid"], obj["eps"], obj["max_iter"], obj["quad"],
                       threads=obj["threads"], residual_quad=obj["quad"])
    return surf, diag


def _surface(cfg, allow_solve: bool):
    if cfg["surface"]:
        path = Path(cfg["surface"])
        if not path.exists() or not path.with_suffix(".json").exists():
            raise UsageError(f"surface file not found: {path}")
        surf, _ = read_surface(path)
        return surf
    if not allow_solve:
        raise UsageError("no surface given; pass --surface or --solve")
    surf, diag = _solve(cfg)
    if not diag.converged:
        raise UsageError("boundary solver did not converge")
    return surf


def cmd_solve_boundary(cfg, out: Path) -> int:
    surf, diag = _solve(cfg)
    meta = {"config": cfg, "eps": cfg["solver"]["eps"], "diagnostics": diag.to_dict()}
    write_surface(out / "surface.csv", surf, meta)
    print(f"sweeps={diag.iterations} last_step={diag.sup_diffs[-1]:.3e} converged={diag.converged}")
    return EXIT_OK if diag.converged else EXIT_NONCONVERGED


def cmd_price(cfg, out: Path) -> int:
    obj = cfgmod.build(cfg)
    surf = _surface(cfg, cfg["price"]["solve"])
    pts = cfg["price"]["points"] or [[cfg["point"]["t"], cfg["point"]["r"], cfg["point"]["x"]]]
    results = []
    for t, r, x in pts:
        res = price(obj["model"], obj["contract"], surf, float(t), float(r), float(x), obj["quad"])
        results.append({"t": t, "r": r, "x": x, **res.to_dict(),
                        "decision": "stop" if res.exercise_now else "continue"})
    _write_json(out / "price.json", {"config": cfg, "results": results})
    for row in results:
        print(json.dumps(row, default=_jsonable))
    return EXIT_OK


SWEEP_MODEL_AXES = ("kappa", "rho", "sigma")
SWEEP_POINT_AXES = ("r", "x", "t")


def cmd_sweep(cfg, out: Path) -> int:
    axis, vals = cfg["sweep"]["axis"], cfg["sweep"]["values"]
    if axis not in SWEEP_MODEL_AXES + SWEEP_POINT_AXES:
        raise UsageError(f"unknown sweep axis {axis!r}")
    if not vals:
        raise UsageError("sweep values must be nonempty")
    pt = cfg["point"]
    rows = []
    if axis in SWEEP_MODEL_AXES:
        for v in vals:
            c = cfgmod.with_model(cfg, **{axis: float(v)})
            obj = cfgmod.build(c)
            surf, diag = _solve(c)
            if not diag.converged:
                raise UsageError(f"solver did not converge at {axis}={v}")
            res = price(obj["model"], obj["contract"], surf, pt["t"], pt["r"], pt["x"], obj["quad"])
            for t in cfg["sweep"]["t"]:
                for r in obj["grid"].r_nodes:
                    rows.append((v, t, r, "", float(surf(t, r)), ""))
            rows.append((v, pt["t"], pt["r"], pt["x"], res.boundary_at_point, res.value))
    else:
        obj = cfgmod.build(cfg)
        surf = _surface(cfg, True)
        for v in vals:
            q = dict(pt, **{axis: float(v)})
            res = price(obj["model"], obj["contract"], surf, q["t"], q["r"], q["x"], obj["quad"])
            rows.append((v, q["t"], q["r"], q["x"], res.boundary_at_point, res.value))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"sweep_{axis}.csv", "w", newline="\n") as fh:
        fh.write("axis,value,t,r,x,boundary,price\n")
        for v, t, r, x, b, p in rows:
            cells = [axis] + [fmt(c) if c != "" else "" for c in (v, t, r, x, b, p)]
            fh.write(",".join(cells) + "\n")
    _write_json(out / f"sweep_{axis}.json", {"config": cfg, "rows": len(rows)})
    print(f"wrote {len(rows)} rows to {out / f'sweep_{axis}.csv'}")
    return EXIT_OK


def run_checks(cfg, surf) -> list[dict]:
    """Monte Carlo and residual checks against the closed forms and the pricer."""
    obj = cfgmod.build(cfg)
    model, contract, quad, mc = obj["model"], obj["contract"], obj["quad"], obj["mc"]
    t, r, x = cfg["point"]["t"], cfg["point"]["r"], cfg["point"]["x"]
    T, K = contract.maturity, contract.strike
    h = T - t
    checks = []

    def add(name, value, reference, tol, ok, **extra):
        checks.append({"check": name, "value": value, "reference": reference, "tolerance": tol,
                       "pass": bool(ok), **extra})

    src = terminal_source(model, r, x, h, mc.n_paths, seed=mc.seed, antithetic=mc.antithetic)
    bond = estimate_discounted(src, lambda *_: 1.0)
    ref = float(bond_price(model.rates, t, r, T))
    tol = 3 * bond.stderr
    add("bond", bond.estimate, ref, tol, abs(bond.estimate - ref) <= tol + 1e-14, stderr=bond.stderr)

    eur = estimate_discounted(src, lambda _r, _i, xt: np.maximum(K - xt, 0.0))
    ref = float(european_put(model, contract, t, r, x))
    add("european", eur.estimate, ref, 3 * eur.stderr, abs(eur.estimate - ref) <= 3 * eur.stderr,
        stderr=eur.stderr)

    steps = int(cfg["validate"]["premium_steps"])
    psrc = PathSource(model, r, x, h, PathConfig(mc.n_paths, steps, mc.seed, mc.antithetic, mc.block_size))
    mcp = mc_premium(psrc, surf, contract, t0=t)
    ref = float(premium(model, contract, t, r, x, surf, quad))
    tol = max(3 * mcp.stderr, 2 * mcp.extra.get("bias_bound", 0.0))
    add("premium", mcp.estimate, ref, tol, abs(mcp.estimate - ref) <= tol, stderr=mcp.stderr,
        bias_bound=mcp.extra.get("bias_bound"))

    v = price(model, contract, surf, t, r, x, quad)
    ls_cfg = PathConfig(int(cfg["validate"]["ls_paths"]), int(cfg["validate"]["ls_steps"]), mc.seed,
                        mc.antithetic, mc.block_size)
    # time-homogeneous model: the remaining life is all that matters
    ls = ls_american(model, OptionContract(K, h), r, x, ls_cfg)
    rel = abs(v.value - ls.estimate) / v.value
    ok = v.value >= v.european - 1e-12 and v.value >= ls.estimate - 3 * ls.stderr and rel < 0.02
    add("ls_bracket", ls.estimate, v.value, 0.02, ok, stderr=ls.stderr, relative_gap=rel)

    res = residual(model, contract, surf, quad.doubled())
    worst = float(np.nanmax(np.abs(res))) if np.isfinite(res).any() else 0.0
    tol = 5 * cfg["solver"]["eps"]
    add("residual", worst, 0.0, tol, worst < tol)
    return checks


def cmd_validate(cfg, out: Path) -> int:
    surf = _surface(cfg, True)
    checks = run_checks(cfg, surf)
    ok = all(c["pass"] for c in checks)
    _write_json(out / "validate.json", {"config": cfg, "checks": checks, "pass": ok})
    for c in checks:
        print(f"{c['check']:<12} {'PASS' if c['pass'] else 'FAIL'}  value={c['value']:.6g} "
              f"reference={c['reference']:.6g} tol={c['tolerance']:.3g}")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_hedge(cfg, out: Path) -> int:
    obj = cfgmod.build(cfg)
    surf = _surface(cfg, True)
    mc = obj["mc"]
    hc = PathConfig(int(cfg["hedge"]["n_paths"]), 1, mc.seed, mc.antithetic, mc.block_size)
    pt = cfg["point"]
    reports = hedge_backtest(obj["model"], obj["contract"], surf, pt["r"], pt["x"], hc,
                             cfg["hedge"]["rebalance_steps"])
    _write_json(out / "hedge.json", {"config": cfg, "reports": [r.to_dict() for r in reports]})
    for r in reports:
        print(f"steps={r.rebalance_steps:<4d} rms_error={r.rms_replication_error:.4f} "
              f"mean_consumption={r.mean_consumption:.4f} max_shortfall={r.max_shortfall:.4f}")
    return EXIT_OK


COMMANDS = {
    "solve-boundary": cmd_solve_boundary,
    "price": cmd_price,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "hedge": cmd_hedge,
}


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vasicek-put", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--seed", type=int, help="Monte Carlo seed (u64)")
        s.add_argument("--threads", type=int, help="worker threads for the boundary sweep")
        s.add_argument("--max-iter", type=int, dest="max_iter")
        s.add_argument("--eps", type=float)
        if name in ("price", "sweep", "validate", "hedge"):
            s.add_argument("--surface", help="surface CSV written by solve-boundary")
        if name == "price":
            s.add_argument("--t", type=float)
            s.add_argument("--r", type=float)
            s.add_argument("--x", type=float)
            s.add_argument("--solve", action="store_true", help="solve the boundary if no surface is given")
        if name == "sweep":
            s.add_argument("--axis")
            s.add_argument("--values", help="comma-separated values")
    return p


def _overrides(args) -> dict:
    o: dict = {}
    if args.seed is not None:
        o.setdefault("mc", {})["seed"] = args.seed
    if args.threads is not None:
        o["threads"] = args.threads
    if args.max_iter is not None:
        o.setdefault("solver", {})["max_iter"] = args.max_iter
    if args.eps is not None:
        o.setdefault("solver", {})["eps"] = args.eps
    if getattr(args, "surface", None):
        o["surface"] = args.surface
    for k in ("t", "r", "x"):
        if getattr(args, k, None) is not None:
            o.setdefault("point", {})[k] = getattr(args, k)
    if getattr(args, "solve", False):
        o.setdefault("price", {})["solve"] = True
    if getattr(args, "axis", None):
        o.setdefault("sweep", {})["axis"] = args.axis
    if getattr(args, "values", None) is not None:
        vals = [v for v in args.values.split(",") if v.strip()]
        try:
            o.setdefault("sweep", {})["values"] = [float(v) for v in vals]
        except ValueError as exc:
            raise ConfigError(f"bad --values: {exc}") from exc
    return o


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config, _overrides(args))
        return COMMANDS[args.command](cfg, Path(args.out))
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
