"""Command line runner: ``geolab <command> [flags]``.

Exit codes: 0 pass, 1 fail verdict, 2 budget exceeded, 3 configuration error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .dynamics import flow_sl2, reduce_frames
from .covers import (
    cover_equidistribution,
    kernel_delta,
    mass_nonescape_check,
    parse_hom,
)
from .errors import BudgetExceeded, ConfigError, GeolabError, UnsupportedGroup
from .groups import Family, enumerate_closed_geodesics, enumerate_orbit, preset
from .io import census_record, make_report, write_csv, write_jsonl, write_report, write_svg
from .spectral import DeltaMethod, delta_from_ball, estimate_delta
from .statistics import (
    average,
    beta_tail_counts,
    builtin,
    covering_number_experiment,
    entropy_bound_check,
    geodesic_measure,
    profiles,
    trajectory_measure,
)

EXIT_PASS, EXIT_FAIL, EXIT_BUDGET, EXIT_CONFIG = 0, 1, 2, 3

# every key a config file may set, with its default and parser
DEFAULTS: Dict[str, tuple] = {
    "group": ("modular", str),
    "seed": (0, int),
    "budget": (50_000_000, int),
    "output_dir": ("geolab_out", str),
    "threads": (1, int),
    "T": (10.0, float),
    "Y": (2.0, float),
    "rmin": (None, float),
    "rmax": (None, float),
    "method": ("orbit_count", str),
    "f": ("cusp", str),
    "betas": ("0.2,0.4,0.6", str),
    "n": (6, int),
    "eps": (0.5, float),
    "hom": ("a", str),
    "experiment": ("delta", str),
    "N": (6, int),
    "sample_size": (2000, int),
    "samples_per_unit": (10, int),
    "primitive": (False, lambda v: str(v).lower() in ("1", "true", "yes")),
    "svg": (False, lambda v: str(v).lower() in ("1", "true", "yes")),
    "out": ("", str),
}

LIOUVILLE_CUSP = 3.0 / math.pi  # modular: mass of {height >= Y} is (3/pi)/Y
EQUI_TOL = 0.12
TREND_SLACK = 0.02


def read_config(path) -> Dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; unknown keys are errors."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            key = key.strip()
            if not eq:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = val.strip()
    return out


def resolve(args: argparse.Namespace) -> Dict[str, object]:
    raw: Dict[str, object] = {}
    if args.config:
        raw.update(read_config(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    if "threads" not in raw and os.environ.get("GEOLAB_THREADS"):
        raw["threads"] = os.environ["GEOLAB_THREADS"]
    cfg = {}
    for key, (default, parse) in DEFAULTS.items():
        try:
            cfg[key] = parse(raw[key]) if raw.get(key) is not None else default
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw[key]!r}") from exc
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def _out(cfg, name: str) -> Path:
    d = Path(cfg["output_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _finish(cfg, experiment: str, params: dict, table, verdict: bool, slack, extra=None) -> int:
    rep = make_report(experiment, params, table, verdict, slack, cfg, extra)
    write_report(_out(cfg, f"{experiment}.json"), rep)
    print(f"PASS slack={slack}" if verdict else "FAIL")
    return EXIT_PASS if verdict else EXIT_FAIL


def _window(cfg, default):
    lo = cfg["rmin"] if cfg["rmin"] is not None else default[0]
    hi = cfg["rmax"] if cfg["rmax"] is not None else default[1]
    return lo, hi


def _delta_of(spec, cfg) -> float:
    if spec.delta_hint is not None:
        return spec.delta_hint
    lo, hi = (8.0, 14.0) if spec.family is Family.SCHOTTKY else (7.0, 11.0)
    return estimate_delta(spec, None, (lo, hi)).delta_hat


# --------------------------------------------------------------------------
# commands


def cmd_census(cfg) -> int:
    spec = preset(cfg["group"])
    T = cfg["T"]
    census = enumerate_closed_geodesics(spec, T, primitive_only=cfg["primitive"], budget=cfg["budget"])
    path = Path(cfg["out"]) if cfg["out"] else _out(cfg, "census.jsonl")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(path, (census_record(g) for g in census))
    n = len(census)
    print(f"count {n}")
    if T > 0:
        d = _delta_of(spec, cfg)
        ref = math.exp(d * T) / (d * T)
        print(f"ratio {n / ref:.6g}  (count / (exp(dT)/(dT)), delta_hat = {d:.6g})")
    return EXIT_PASS


def cmd_delta(cfg) -> int:
    spec = preset(cfg["group"])
    lo, hi = _window(cfg, (7.0, 12.0))
    est = estimate_delta(spec, None, (lo, hi), DeltaMethod(cfg["method"]))
    if spec.delta_hint is not None:
        verdict = abs(est.delta_hat - spec.delta_hint) <= 0.1
    else:
        verdict = 0 < est.delta_hat <= spec.d - 1
    print(f"delta_hat {est.delta_hat:.6f}  CI [{est.ci_low:.6f}, {est.ci_high:.6f}]")
    write_csv(_out(cfg, "delta_counts.csv"), ["radius", "count"], est.table)
    return _finish(cfg, "delta", {"group": spec.name, "r_window": [lo, hi]},
                   est.table, verdict, 0.1, {"estimate": est.to_dict()})


def cmd_excursions(cfg) -> int:
    spec = preset(cfg["group"])
    census = enumerate_closed_geodesics(spec, cfg["T"], primitive_only=True, budget=cfg["budget"])
    prof = profiles(spec, census, cfg["Y"], cfg["threads"])
    write_jsonl(_out(cfg, "excursions.jsonl"), (p.to_dict() for p in prof))
    fr = [p.total_fraction for p in prof]
    mean = float(math.fsum(fr) / len(fr)) if fr else 0.0
    ok = all(0.0 <= x <= 1.0 for x in fr)
    print(f"classes {len(census)}  mean cusp fraction {mean:.6f}")
    return _finish(cfg, "excursions", {"group": spec.name, "T": cfg["T"], "Y": cfg["Y"]},
                   [{"classes": len(census), "mean_fraction": mean}], ok, 0.0)


def _birkhoff_reference(spec, f, seed: int, length: float = 1e5, chunk: float = 8.0) -> float:
    """Average of ``f`` along one trajectory, re-reduced every ``chunk`` time units
    so matrix entries stay of size exp(chunk / 2)."""
    rng = np.random.default_rng(seed)
    th = rng.uniform(0, 2 * math.pi)
    start = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    n = int(length // chunk)
    acc = []
    for _ in range(n):
        acc.append(average(spec, trajectory_measure(spec, start, chunk, 10), f))
        start = reduce_frames(spec, flow_sl2(start, chunk))[0]
    return float(math.fsum(acc) / n)


def cmd_equidistribute(cfg) -> int:
    spec = preset(cfg["group"])
    if spec.family is not Family.MODULAR:
        raise ConfigError("the equidistribution reference is only available for the modular preset")
    f = builtin(cfg["f"], cfg["Y"])
    if cfg["f"] == "cusp":
        ref = LIOUVILLE_CUSP / cfg["Y"]
        ref_note = "analytic: (3/pi)/Y"
    else:
        ref = _birkhoff_reference(spec, f, cfg["seed"])
        ref_note = "Birkhoff average along one trajectory of length 1e5"
    T = cfg["T"]
    census = enumerate_closed_geodesics(spec, T, primitive_only=True, budget=cfg["budget"])
    table = []
    for t in (T - 3, T):
        sub = [g for g in census if g.length <= t + 1e-9]
        val = average(spec, geodesic_measure(spec, sub, cfg["samples_per_unit"]), f)
        table.append({"T": t, "classes": len(sub), "value": val, "error": abs(val - ref)})
    verdict = table[-1]["error"] <= EQUI_TOL and table[-1]["error"] <= table[0]["error"] + TREND_SLACK
    print(f"value {table[-1]['value']:.6f}  reference {ref:.6f}")
    return _finish(cfg, "equidistribute", {"group": spec.name, "T": T, "f": f.describe()}, table,
                   verdict, EQUI_TOL, {"reference": ref, "reference_note": ref_note})


def cmd_beta_tails(cfg) -> int:
    spec = preset(cfg["group"])
    betas = [float(b) for b in cfg["betas"].split(",")]
    d = _delta_of(spec, cfg)
    bt = beta_tail_counts(spec, cfg["T"], cfg["Y"], betas, delta_hat=d)
    table = bt.table()
    write_csv(_out(cfg, "beta_tails.csv"), ["beta", "rate", "bound"],
              [(r["beta"], r["rate"], r["bound"]) for r in table])
    if cfg["svg"]:
        write_svg(_out(cfg, "beta_tails.svg"),
                  [("rate", [(r["beta"], r["rate"]) for r in table]),
                   ("bound", [(r["beta"], r["bound"]) for r in table])], xlabel="beta", ylabel="rate")
    verdict = bt.passed and bt.strictly_decreasing()
    return _finish(cfg, "beta-tails", {"group": spec.name, "T": cfg["T"], "Y": cfg["Y"], "betas": betas},
                   table, verdict, bt.slack, {"strictly_decreasing": bt.strictly_decreasing()})


def cmd_entropy(cfg) -> int:
    spec = preset(cfg["group"])
    census = enumerate_closed_geodesics(spec, cfg["T"], primitive_only=True, budget=cfg["budget"])
    prof = profiles(spec, census, cfg["Y"], cfg["threads"])
    heavy = [g for g, p in zip(census, prof) if p.total_fraction >= 0.5]
    d = _delta_of(spec, cfg)
    rows = []
    for label, sub in (("full", census), ("cusp_heavy", heavy)):
        mu = geodesic_measure(spec, sub, cfg["samples_per_unit"])
        r = entropy_bound_check(spec, mu, cfg["Y"], cfg["n"], cfg["eps"], d, cfg["sample_size"], cfg["seed"])
        r["measure"] = label
        r["classes"] = len(sub)
        rows.append(r)
    verdict = all(r["passed"] for r in rows) and rows[1]["rhs"] < rows[0]["rhs"]
    return _finish(cfg, "entropy-check", {"group": spec.name, "T": cfg["T"], "Y": cfg["Y"],
                                          "n": cfg["n"], "eps": cfg["eps"]}, rows, verdict, rows[0]["slack"])


def cmd_cover(cfg) -> int:
    spec = preset(cfg["group"])
    cover = parse_hom(spec, cfg["hom"])
    exp = cfg["experiment"]
    params = {"group": spec.name, "hom": cfg["hom"], "experiment": exp, "T": cfg["T"]}
    if exp == "delta":
        lo, hi = _window(cfg, (8.0, 14.0))
        ball = enumerate_orbit(spec, None, hi, cfg["budget"])
        base = delta_from_ball(ball, (lo, hi))
        ker = kernel_delta(cover, None, (lo, hi), ball=ball)
        gap = ker.delta_hat - base.delta_hat
        print(f"delta_hat base {base.delta_hat:.6f}  kernel {ker.delta_hat:.6f}  gap {gap:+.6f}")
        table = [{"base": base.to_dict(), "kernel": ker.to_dict(), "gap": gap}]
        return _finish(cfg, "cover-delta", params, table, abs(gap) <= 0.05, 0.05)
    if exp == "equi":
        T = cfg["T"]
        if spec.family is Family.SCHOTTKY and cfg["f"] == "cusp":
            f = builtin("bump", z0=1j, radius=0.5)
        else:
            f = builtin(cfg["f"], cfg["Y"])
        rep = cover_equidistribution(cover, [T - 4, T - 2, T], f, cfg["samples_per_unit"])
        return _finish(cfg, "cover-equi", params, rep["table"], rep["passed"], rep["slack"],
                       {"reference": rep["reference"], "reference_note": rep["reference_note"]})
    if exp == "mass":
        T = cfg["T"]
        rep = mass_nonescape_check(cover, [T - 2, T - 1, T], cfg["Y"])
        return _finish(cfg, "cover-mass", params, rep.get("table", []), rep["passed"],
                       rep.get("threshold", 0.05), {"status": rep["status"], "beta0": rep.get("beta0")})
    raise ConfigError(f"unknown cover experiment {exp!r}")


def cmd_covering(cfg) -> int:
    spec = preset(cfg["group"])
    d = _delta_of(spec, cfg)
    rep = covering_number_experiment(spec, cfg["Y"], cfg["N"], cfg["sample_size"], cfg["T"],
                                     delta_hat=d, seed=cfg["seed"])
    write_csv(_out(cfg, "covering_trend.csv"), ["cusp_times", "mean_exponent", "itineraries"], rep["trend"])
    verdict = rep["passed"] and rep["monotone"]
    return _finish(cfg, "covering-exponents", {"group": spec.name, "Y": cfg["Y"], "N": cfg["N"]},
                   rep["rows"], verdict, rep["slack"],
                   {"trend": rep["trend"], "trend_slope": rep["trend_slope"],
                    "itineraries": rep["itineraries"], "itinerary_bound": rep["itinerary_bound"]})


COMMANDS = {
    "census": (cmd_census, ["group", "T", "primitive", "out"]),
    "delta": (cmd_delta, ["group", "rmin", "rmax", "method"]),
    "excursions": (cmd_excursions, ["group", "T", "Y"]),
    "equidistribute": (cmd_equidistribute, ["group", "T", "f", "Y"]),
    "beta-tails": (cmd_beta_tails, ["group", "T", "Y", "betas"]),
    "entropy-check": (cmd_entropy, ["group", "T", "Y", "n", "eps"]),
    "cover": (cmd_cover, ["group", "hom", "T", "experiment", "f", "Y", "rmin", "rmax"]),
    "covering-exponents": (cmd_covering, ["group", "Y", "N", "T"]),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geolab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"geolab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, flags) in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--seed")
        sp.add_argument("--threads")
        sp.add_argument("--budget")
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--sample-size", dest="sample_size")
        sp.add_argument("--samples-per-unit", dest="samples_per_unit")
        sp.add_argument("--svg", action="store_const", const="true")
        for flag in flags:
            if flag == "primitive":
                sp.add_argument("--primitive", action="store_const", const="true")
            else:
                sp.add_argument(f"--{flag}")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        fn = COMMANDS[args.command][0]
        return fn(cfg)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, UnsupportedGroup, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeolabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
