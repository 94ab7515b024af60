"""Command-line entry point: ``ccn32 {distance,heatkernel,regime,verify,sweep}``.

Exit codes: 0 ok, 1 a verify check failed, 2 usage or malformed input,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import distance as dist
from . import heatkernel as hk
from . import maps
from . import specfun as sf
from . import verify
from .distance import GroupPoint
from .errors import NumericError, ToleranceNotMet

SCHEMA = "cc-n32/1"
EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    x: tuple[float, float, float] | None = None
    t: tuple[float, float, float] | None = None
    quadrature: hk.QuadratureSpec = field(default_factory=hk.QuadratureSpec)
    output_format: str = "json"
    output_path: str | None = None
    suite: str | None = None
    threads: int = 1
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def point(self) -> GroupPoint:
        if self.x is None or self.t is None:
            raise UsageError("--x and --t are required")
        return GroupPoint(self.x, self.t)


# ----------------------------------------------------------------- parsing


def _vec3(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated vector: {text!r}")
    if len(parts) != 3 or not all(math.isfinite(p) for p in parts):
        raise argparse.ArgumentTypeError(f"expected three finite numbers, got {text!r}")
    return parts


def _vec2(text: str) -> tuple[float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated pair: {text!r}")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}")
    return parts


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:n`` with n >= 1 points (endpoints included)."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"malformed range {text!r}; expected lo:hi:n")
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)):
        raise UsageError(f"range {text!r} needs finite bounds and a positive count")
    return np.linspace(lo, hi, n)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ccn32", description="Distance and heat kernel on the free step-two Carnot group N(3,2).")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", dest="output_format", choices=("json", "csv", "human"), default="json")
    common.add_argument("--json", dest="output_format", action="store_const", const="json")
    common.add_argument("--csv", dest="output_format", action="store_const", const="csv")
    common.add_argument("--human", dest="output_format", action="store_const", const="human")
    common.add_argument("--output", dest="output_path", default=None, help="write to this file instead of stdout")
    common.add_argument("--threads", type=int, default=None, help="worker threads (fallback: CC_N32_THREADS, then 1)")
    common.add_argument("--seed", type=int, default=0)
    d = hk.DEFAULT_SPEC
    common.add_argument("--radial-cutoff", type=float, default=d.radial_cutoff)
    common.add_argument("--osc-nodes", type=int, default=d.osc_nodes)
    common.add_argument("--rel-tol", type=float, default=d.rel_tol)
    common.add_argument("--abs-tol", type=float, default=d.abs_tol)
    common.add_argument("--max-subdivisions", type=int, default=d.max_subdivisions)

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--x", type=_vec3, help="horizontal part, e.g. 1,0,0")
    point.add_argument("--t", type=_vec3, help="vertical part, e.g. 0.25,0.25,0")

    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("distance", parents=[common, point], help="squared distance d(g)^2 and its case")
    hp = sub.add_parser("heatkernel", parents=[common, point], help="heat kernel p_h(g)")
    hp.add_argument("--h", type=float, default=1.0, help="time (default 1)")
    hp.add_argument("--route", choices=("auto", "fourier", "laplace", "both"), default="auto")
    hp.add_argument("--best-effort", action="store_true", help="report the best estimate instead of failing on tolerance")
    sub.add_parser("regime", parents=[common, point], help="regime parameters and asymptotic regimes")
    vp = sub.add_parser("verify", parents=[common], help="run invariant suites")
    vp.add_argument("--suite", choices=verify.SUITES + ("all",), default="all")
    sp = sub.add_parser("sweep", parents=[common, point], help="evaluate an observable over a grid")
    sp.add_argument("--observable", required=True, choices=("mu", "H", "d2", "heatkernel", "bound_ratio"))
    sp.add_argument("--range", dest="grid", required=True, help="lo:hi:n; the argument for mu and H, the target distance d otherwise")
    sp.add_argument("--u", type=_vec2, default=None, help="u1,u2 for the H profile")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    threads = ns.threads
    if threads is None:
        env = os.environ.get("CC_N32_THREADS", "")
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise UsageError(f"CC_N32_THREADS={env!r} is not an integer")
    if threads < 1:
        raise UsageError("--threads must be positive")
    try:
        q = hk.QuadratureSpec(ns.radial_cutoff, ns.osc_nodes, ns.rel_tol, ns.abs_tol, ns.max_subdivisions)
    except ValueError as e:
        raise UsageError(str(e))
    extra = {k: getattr(ns, k) for k in ("h", "route", "best_effort", "observable", "grid", "u") if hasattr(ns, k)}
    return RunConfig(
        command=ns.command,
        x=getattr(ns, "x", None),
        t=getattr(ns, "t", None),
        quadrature=q,
        output_format=ns.output_format,
        output_path=ns.output_path,
        suite=getattr(ns, "suite", None),
        threads=threads,
        seed=ns.seed,
        extra=extra,
    )


# ------------------------------------------------------------------ output


def _clean(v):
    if isinstance(v, float):
        return v if math.isfinite(v) else None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.floating):
        return _clean(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = ";".join("" if x is None else repr(x) if isinstance(x, float) else str(x) for x in v)
        else:
            out[key] = v
    return out


def _input_record(cfg: RunConfig) -> dict:
    rec = {"command": cfg.command}
    if cfg.x is not None:
        rec["x"] = list(cfg.x)
    if cfg.t is not None:
        rec["t"] = list(cfg.t)
    if cfg.suite:
        rec["suite"] = cfg.suite
    rec["seed"] = cfg.seed
    for k, v in sorted(cfg.extra.items()):
        rec[k] = list(v) if isinstance(v, tuple) else v
    return rec


def render(cfg: RunConfig, records: list[dict]) -> str:
    records = [_clean(r) for r in records]
    if cfg.output_format == "json":
        doc = {"schema": SCHEMA, "input": _clean(_input_record(cfg)), "records": records}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    flat = [_flatten(r) for r in records]
    cols: list[str] = []
    for r in flat:
        cols += [c for c in r if c not in cols]
    if cfg.output_format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", restval="")
        w.writeheader()
        for r in flat:
            w.writerow({k: repr(v) if isinstance(v, float) else ("" if v is None else v) for k, v in r.items()})
        return buf.getvalue()
    lines = []
    for r in flat:
        width = max(len(c) for c in r) if r else 0
        lines += [f"{k.ljust(width)}  {'-' if v is None else (f'{v:.12g}' if isinstance(v, float) else v)}" for k, v in r.items()]
        lines.append("")
    return "\n".join(lines)


def emit(cfg: RunConfig, records: list[dict]) -> None:
    text = render(cfg, records)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def _theta_record(theta: maps.ThetaData | None):
    if theta is None:
        return None
    return {"theta1": theta.theta1, "theta2": theta.theta2, "r": theta.r, "region": theta.region.value}


def _regime_record(rp: dist.RegimeParams) -> dict:
    return {"m": rp.m, "L1": rp.L1, "L2": rp.L2, "epsilon": rp.epsilon, "wbar": rp.wbar}


def distance_record(g: GroupPoint) -> dict:
    res = dist.cc_distance_squared(g)
    rp = dist.regime_params(g, res)
    return {
        "d2": res.d2,
        "case_tag": res.case.value,
        "theta": _theta_record(res.theta),
        "u": list(res.u) if res.u is not None else None,
        "chain": list(res.chain) if res.chain is not None else None,
        "regime_params": _regime_record(rp),
    }


def cmd_distance(cfg: RunConfig) -> int:
    emit(cfg, [distance_record(cfg.point())])
    return EXIT_OK


def _kernel(g: GroupPoint, route: str, q: hk.QuadratureSpec, best_effort: bool) -> tuple[hk.KernelResult, bool]:
    fn = {"auto": hk.log_p, "fourier": hk.p_fourier, "laplace": hk.p_laplace}[route]
    try:
        return fn(g, q), True
    except ToleranceNotMet as e:
        if best_effort and isinstance(e.best, hk.KernelResult):
            return e.best, False
        raise


def _kernel_record(res: hk.KernelResult, log_shift: float, converged: bool) -> dict:
    lv = res.log_value + log_shift
    return {
        "value": math.exp(lv) if lv > -745 else 0.0,
        "log_value": lv,
        "rel_error": res.rel_error,
        "route": res.route.value,
        "method": res.method,
        "converged": converged,
    }


def heatkernel_record(g: GroupPoint, h: float, route: str, q: hk.QuadratureSpec, best_effort: bool = False) -> dict:
    if not h > 0:
        raise UsageError("--h must be positive")
    g1 = g.dilate(1.0 / math.sqrt(h))
    shift = -4.5 * math.log(h)
    routes = ("fourier", "laplace") if route == "both" else (route,)
    outs = {r: _kernel(g1, r, q, best_effort) for r in routes}
    first, ok = outs[routes[0]]
    rec = _kernel_record(first, shift, ok)
    rec["h"] = h
    rec["est_error"] = rec["value"] * rec["rel_error"]
    lb = hk.log_bnd(g1)
    rec["bnd"] = math.exp(lb + shift) if lb + shift > -745 else 0.0
    rec["bound_ratio"] = math.exp(first.log_value - lb)
    if route == "both":
        rec["routes"] = {r: _kernel_record(res, shift, c) for r, (res, c) in outs.items()}
        a, b = (outs[r][0].log_value for r in routes)
        rec["route_gap"] = abs(math.expm1(a - b))
    return rec


def cmd_heatkernel(cfg: RunConfig) -> int:
    e = cfg.extra
    emit(cfg, [heatkernel_record(cfg.point(), e["h"], e["route"], cfg.quadrature, e["best_effort"])])
    return EXIT_OK


def cmd_regime(cfg: RunConfig) -> int:
    g = cfg.point()
    res = dist.cc_distance_squared(g)
    rp = dist.regime_params(g, res)
    rec = {"d2": res.d2, "case_tag": res.case.value, "regime_params": _regime_record(rp),
           "regimes": [r.value for r in dist.classify_params(rp)]}
    emit(cfg, [rec])
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    checks = verify.run_suites([cfg.suite or "all"], seed=cfg.seed, threads=cfg.threads)
    emit(cfg, [c.as_dict() for c in checks])
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def _sweep_row(obs: str, v: float, cfg: RunConfig) -> dict:
    if obs == "mu":
        return {"arg": v, "mu": sf.mu(v)}
    if obs == "H":
        u = cfg.extra.get("u")
        if u is None:
            raise UsageError("--u is required for the H profile")
        up = maps.classify_region(*u)
        theta = maps.lambda_inverse(up)
        A, U, H = dist.h_family(up, theta, v)
        return {"w": v, "A": A, "U": U, "H": H}
    g = cfg.point()
    d0 = math.sqrt(dist.cc_distance_squared(g).d2)
    if d0 == 0.0:
        raise UsageError("the sweep direction must not be the origin")
    gd = g.dilate(v / d0)
    row = {"d": v, "x": list(gd.x), "t": list(gd.t)}
    if obs == "d2":
        row["d2"] = dist.cc_distance_squared(gd).d2
    elif obs == "heatkernel":
        k = hk.log_p(gd, cfg.quadrature)
        row.update(log_value=k.log_value, rel_error=k.rel_error, method=k.method)
    else:
        row["bound_ratio"] = math.exp(hk.log_bound_ratio(gd, cfg.quadrature))
    return row


def cmd_sweep(cfg: RunConfig) -> int:
    obs = cfg.extra["observable"]
    grid = parse_range(cfg.extra["grid"])
    if obs == "mu" and np.any(np.abs(grid) >= math.pi):
        raise UsageError("mu needs arguments inside (-pi, pi)")
    if obs in ("d2", "heatkernel", "bound_ratio") and np.any(grid <= 0):
        raise UsageError("target distances must be positive")
    work = lambda v: _sweep_row(obs, float(v), cfg)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            rows = list(ex.map(work, grid))
    else:
        rows = [work(v) for v in grid]
    emit(cfg, rows)
    return EXIT_OK


COMMANDS = {
    "distance": cmd_distance,
    "heatkernel": cmd_heatkernel,
    "regime": cmd_regime,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except UsageError as e:
        print(f"ccn32: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        print(f"ccn32: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
