"""Command-line experiment harness.

Every command takes one JSON config (``--config``), writes into ``--out``,
and stamps each output with the tool version, a digest of the effective
config and the seed. Reruns with the same inputs produce identical bytes.
The exit status is 0 exactly when every assertion the command makes passes.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__, prob, routing, schedule, tradeoff, verify

SORN_MODES = ("semi", "oblivious", "failover", "mixed")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def meta(cfg: dict, seed: int) -> dict:
    return {"tool": "ornlab", "version": __version__, "config_digest": config_digest(cfg), "seed": seed, "config": cfg}


def meta_comment(cfg: dict, seed: int) -> str:
    return f"# ornlab {__version__} config={config_digest(cfg)} seed={seed}\n"


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _frac(q: Fraction) -> dict:
    return {"num": q.numerator, "den": q.denominator, "value": float(q)}


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing {key!r}")
    return cfg[key]


def _load_schedule(cfg: dict, base: Path) -> schedule.Schedule:
    path = Path(_require(cfg, "schedule"))
    if not path.is_absolute():
        path = base / path
    return schedule.from_dict(json.loads(path.read_text()))


def _demand(cfg: dict, sched: schedule.Schedule, seed: int, base: Path) -> tuple[routing.PermDemand, int]:
    rate = routing.as_rate(str(cfg.get("rate", "0")))
    spec = cfg.get("demand", {"seed": seed})
    if "file" in spec:
        path = Path(spec["file"])
        if not path.is_absolute():
            path = base / path
        return routing.demand_from_json(path.read_text(), rate, sched.N), seed
    if spec.get("identity"):
        return routing.PermDemand.identity(sched.N, rate), seed
    dseed = int(spec.get("seed", seed))
    return routing.demand_random(sched.N, rate, dseed), dseed


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_build(cfg: dict, out: Path, seed: int) -> int:
    r = routing.as_rate(str(_require(cfg, "r")))
    p = int(_require(cfg, "p"))
    mode = cfg.get("mode", schedule.ORN)
    params = tradeoff.derive_params(r, p, mode, C=cfg.get("C"))
    m = meta(cfg, seed)
    write_json(out / "params.json", {"meta": m, "params": params.to_dict()})
    lines = [meta_comment(cfg, seed).rstrip("\n")]
    for key in ("r", "p", "mode", "g", "N", "eps", "h", "eps_o", "theta", "gamma_orn", "gamma_sorn", "delta", "C"):
        lines.append(f"{key:<12} {getattr(params, key)}")
    lines.append("hypotheses:")
    for c in params.checks:
        lines.append(f"  {_verdict(c.holds)}  {c.lhs}")
    (out / "params.txt").write_text("\n".join(lines) + "\n")
    if params.C is None:
        print("no schedule: C is undefined for these parameters; set C in the config", file=sys.stderr)
        return 1
    relabel = None
    if cfg.get("relabel"):
        relabel = schedule.random_relabel(p**params.g, np.random.default_rng(seed))
    cls = schedule.OrnSchedule if mode == schedule.ORN else schedule.SornSchedule
    try:
        sched = cls(p, params.g, params.C, relabel)
    except ValueError as exc:
        print(f"no schedule: {exc}", file=sys.stderr)
        return 1
    doc = sched.to_dict()
    doc["meta"] = m
    write_json(out / "schedule.json", doc)
    return 0


def _hop_checks(sched, demand, load_kind: str) -> tuple[dict, list]:
    r = demand.rate
    p, g = sched.p, sched.g
    if load_kind == "failover":
        hl = routing.failover_hop_loads(sched, demand)
        bound = r * (g + 1) * (p - 1) ** g / Fraction((p - 2) ** g)
        first, last = hl.hop_max(0), hl.hop_max(1)
        name = "failover per-hop load <= r(g+1)(p-1)^g/(p-2)^g"
    else:
        hl = routing.hop_loads(sched, demand)
        bound = Fraction(p - 1, p - 2) * r
        first, last = hl.hop_max(0), hl.hop_max(g)
        name = "first/last hop flow <= (p-1)/(p-2) r"
    ext = {"first_hop_max": _frac(first), "last_hop_max": _frac(last), "bound": _frac(bound)}
    checks = []
    if load_kind == "failover" or sched.kind == schedule.ORN:
        checks.append({"name": name, "verdict": _verdict(first <= bound and last <= bound)})
    return ext, checks


def cmd_load(cfg: dict, out: Path, seed: int, base: Path) -> int:
    sched = _load_schedule(cfg, base)
    demand, dseed = _demand(cfg, sched, seed, base)
    scheme = cfg.get("scheme", "semi" if sched.kind == schedule.SORN else "oblivious")
    if sched.kind == schedule.ORN and scheme != "oblivious":
        raise ConfigError("ORN schedules only support the oblivious scheme")
    if scheme not in SORN_MODES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    summary: dict = {"meta": meta(cfg, dseed), "scheme": scheme}
    if scheme == "oblivious":
        load, mode, kind = routing.induced_load_oblivious(sched, demand), "GPlusOneHop", "oblivious"
    elif scheme == "failover":
        load, mode, kind = routing.induced_load_failover(sched, demand), "TwoHopFailover", "failover"
    elif scheme == "semi":
        dec = routing.semi_oblivious_route(sched, demand)
        load, mode = dec.load, dec.mode.value
        kind = "failover" if dec.mode is routing.Mode.TWO_HOP_FAILOVER else "oblivious"
        summary["overloaded_edges"] = [list(e) for e in dec.overloaded_edges]
    else:
        mixed = routing.mixed_route(sched, demand)
        load, kind = mixed.load, "mixed"
        mode = "Mixed" if mixed.applied else "TwoHopFailover"
        bound = routing.mixed_bound(sched, demand.rate, len(mixed.contentious))
        summary["contentious"] = sorted(mixed.contentious)
        summary["k_max"] = mixed.k_max
        summary.setdefault("checks", []).append(
            {"name": "mixed per-edge load <= (1+d')(g+1)r + 2rk(p-1)/(p-2)^g",
             "verdict": _verdict(not mixed.applied or routing.max_load(load)[0] <= bound)})
    ml, edge = routing.max_load(load)
    summary.update(max_load=_frac(ml), max_load_edge=None if edge is None else list(edge),
                   feasible=routing.is_feasible(load), mode=mode)
    if kind == "failover":
        summary["max_latency"] = routing.failover_max_latency(sched, demand)
    elif kind == "oblivious":
        summary["max_latency"] = routing.scheme_max_latency(sched, demand)
    if kind in ("oblivious", "failover"):
        ext, checks = _hop_checks(sched, demand, kind)
        summary["hop_extremes"] = ext
        summary.setdefault("checks", []).extend(checks)
    summary.setdefault("checks", [])
    (out / "loads.csv").write_text(meta_comment(cfg, dseed) + routing.loadmap_to_csv(load, sched))
    write_json(out / "summary.json", summary)
    return 0 if all(c["verdict"] == "PASS" for c in summary["checks"]) else 1


def _mc_trial(sched, rate, scheme: str, seed: int, i: int) -> dict:
    demand = routing.PermDemand.random(sched.N, rate, np.random.default_rng([seed, i]))
    if scheme == "semi":
        dec = routing.semi_oblivious_route(sched, demand)
        ml, _ = routing.max_load(routing.induced_load_oblivious(sched, demand))
        final, _ = routing.max_load(dec.load)
        return {"trial": i, "primary_max_load": _frac(ml), "final_max_load": _frac(final),
                "overloaded": ml > 1, "mode": dec.mode.value}
    ml, _ = routing.max_load(routing.induced_load_oblivious(sched, demand))
    return {"trial": i, "primary_max_load": _frac(ml), "overloaded": ml > 1}


def cmd_montecarlo(cfg: dict, out: Path, seed: int, base: Path, threads: int) -> int:
    sched = _load_schedule(cfg, base)
    rate = routing.as_rate(str(cfg.get("rate", "0")))
    trials = int(cfg.get("trials", 10))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    scheme = cfg.get("scheme", "semi" if sched.kind == schedule.SORN else "oblivious")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda i: _mc_trial(sched, rate, scheme, seed, i), range(trials)))
    loads = np.array([r["primary_max_load"]["value"] for r in rows])
    n_over = sum(r["overloaded"] for r in rows)
    report = {
        "meta": meta(cfg, seed),
        "trials": rows,
        "overload_count": n_over,
        "overload_frequency": n_over / trials,
        "max_load_quantiles": {str(q): float(np.quantile(loads, q)) for q in (0.0, 0.5, 0.9, 1.0)},
    }
    write_json(out / "montecarlo.json", report)
    return 0


def generated_corpus(count: int, seed: int) -> list[prob.BilinearSpec]:
    """Specs with C_ratio >= 4: two-level or uniform vectors, permutation or averaged D."""
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, 7919, i])
        N = int(rng.choice([64, 96, 128]))
        u = np.where(rng.random(N) < 0.5, 1.0, 0.5) if i % 2 == 0 else rng.uniform(0.25, 1.0, N)
        v = rng.uniform(0.25, 1.0, N) if i % 3 else np.where(rng.random(N) < 0.3, 1.0, 0.2)
        if i % 4 == 3:
            D = np.zeros((N, N), dtype=object)
            for _ in range(3):
                D[np.arange(N), rng.permutation(N)] += Fraction(1, 3)
            spec = prob.BilinearSpec(tuple(u), tuple(v), D=tuple(tuple(Fraction(x) for x in r) for r in D))
        else:
            spec = prob.BilinearSpec(tuple(u), tuple(v), sigma=tuple(int(x) for x in rng.permutation(N)))
        out.append(spec)
    return out


def cmd_tails(cfg: dict, out: Path, seed: int) -> int:
    results = []
    na = verify.check_negative_association(seed, int(cfg.get("na_cases", 500)))
    results.append(na.to_dict())
    results.append(verify.check_coloring(int(cfg.get("coloring_max_n", 6))).to_dict())
    tcfg = cfg.get("tail", {})
    trials = int(tcfg.get("trials", 20000))
    gammas = [float(g) for g in tcfg.get("gammas", [0.3, 0.5, 1.0])]
    reports = []
    for spec in generated_corpus(int(tcfg.get("specs", 4)), seed):
        for gamma in gammas:
            for sided in ("single", "double"):
                reports.append(prob.tail_experiment(spec, gamma, sided, trials, seed).to_dict())
    results.append({"name": "tail_bounds", "passed": all(r["passes"] for r in reports),
                    "detail": f"{len(reports)} experiments"})
    scfg = cfg.get("submatrix", {})
    subs = []
    for spec in generated_corpus(int(scfg.get("specs", 2)), seed + 1):
        for gamma in [g for g in gammas if g < 1]:
            for K in (spec.N // 8, spec.N // 4, spec.N // 2):
                subs.append(prob.submatrix_experiment(spec.u, spec.v, K, gamma, trials, seed).to_dict())
    results.append({"name": "submatrix_bounds", "passed": all(s["passes"] for s in subs),
                    "detail": f"{len(subs)} experiments"})
    write_json(out / "tails.json", {"meta": meta(cfg, seed), "checks": results, "tail_reports": reports,
                                    "submatrix_reports": subs})
    return 0 if all(r["passed"] for r in results) else 1


def cmd_curves(cfg: dict, out: Path, seed: int) -> int:
    N = float(cfg.get("N", 1e20))
    rates = tradeoff.curve_grid(N, int(cfg.get("count", 200)))
    rows = [tradeoff.curve_row(r, N) for r in rates]
    cols = ["r", "N", "L_upp", "L_low", "L_obl", "L_sem", "vlb_line"]
    lines = [",".join(cols)] + [",".join(repr(row[c]) for c in cols) for row in rows]
    (out / "curves.csv").write_text(meta_comment(cfg, seed) + "\n".join(lines) + "\n")
    rmin = Fraction(str(cfg.get("plot_rmin", "1/20")))
    half_ok, vlb_ok = True, True
    order_violations = []
    for r, row in zip(rates, rows):
        g, eps = tradeoff.exact_g_eps(r)
        if eps >= Fraction(1, 2**g):
            half_ok &= row["L_low"] >= row["L_upp"] / 2
        if row["L_low"] > row["L_upp"]:
            order_violations.append(row["r"])
        if r >= rmin:
            vlb_ok &= max(row["L_low"], row["L_upp"]) <= row["vlb_line"]
    checks = [
        {"name": "L_low >= L_upp/2 where eps >= 2^-g", "passed": half_ok},
        {"name": f"L_low, L_upp <= VLB line for r >= {rmin}", "passed": vlb_ok},
    ]
    info = {"L_low > L_upp at": len(order_violations), "of": len(rows),
            "largest such r": max(order_violations, default=None)}
    report = {"meta": meta(cfg, seed), "points": len(rows), "checks": checks, "ordering": info}
    if "dual" in cfg:
        d = cfg["dual"]
        sched = schedule.OrnSchedule(int(d.get("p", 7)), int(d.get("g", 2)), int(d.get("C", 2)))
        theta = int(d.get("theta", sched.g + 1))
        L = int(d.get("L", routing.scheme_max_latency(sched)))
        est = tradeoff.expected_dual_bound(sched, theta, L, int(d.get("trials", 5)), seed)
        report["dual"] = {"theta": theta, "L": L, "mean": est.mean, "halfwidth": est.halfwidth,
                          "closed_form": est.closed_form, "values": list(est.values)}
    write_json(out / "curves.json", report)
    return 0 if all(c["passed"] for c in checks) else 1


def cmd_verify(cfg: dict, out: Path, seed: int) -> int:
    results = verify.run_suite(seed)
    write_json(out / "verify.json", {"meta": meta(cfg, seed), "checks": [r.to_dict() for r in results]})
    for r in results:
        print(f"{_verdict(r.passed)}  {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ornlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ornlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("build", "load", "montecarlo", "tails", "curves", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, required=name not in ("verify", "curves", "tails"))
        sp.add_argument("--out", type=Path, default=Path("."))
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg: dict = {}
    base = Path(".")
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 2
        base = args.config.resolve().parent
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    if not 0 <= seed < 2**64:
        print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    handlers: dict[str, Callable[[], int]] = {
        "build": lambda: cmd_build(cfg, args.out, seed),
        "load": lambda: cmd_load(cfg, args.out, seed, base),
        "montecarlo": lambda: cmd_montecarlo(cfg, args.out, seed, base, args.threads),
        "tails": lambda: cmd_tails(cfg, args.out, seed),
        "curves": lambda: cmd_curves(cfg, args.out, seed),
        "verify": lambda: cmd_verify(cfg, args.out, seed),
    }
    try:
        return handlers[args.command]()
    except tradeoff.EpsilonOne as exc:
        print(f"EpsilonOne: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
