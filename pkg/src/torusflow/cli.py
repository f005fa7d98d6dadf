"""Command line front end.

Subcommands: build (emit a construction manifest), trace (integrate a
trajectory to CSV), verify (run certification checks), probe (commutant
dimension), basin (backward census of base samples).  Outputs are
deterministic for a fixed config and seed: identical invocations produce
byte-identical files.

Exit codes: 0 success, 1 a verification check failed, 2 bad input or
config, 3 numerical failure (integrator or solver breakdown).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .construction import (
    build_line_describing,
    build_planar_demo,
    build_s5,
)
from .fields import E, SingularFiber
from .flow import FlowError, IntegratorConfig, basin_census, integrate
from .radial import RadialSolverError
from .verify import commutant_dimension_probe, verify_manifest

SCHEMA_VERSION = 1

_SCENARIO_DEFAULTS = {
    "line": {"n": 1, "frequencies": [1.0]},
    "circle": {"n": 2, "frequencies": [1.0, 2.0 ** 0.5]},
    "planar": {"n": 2, "frequencies": [1.0, 2.0 ** 0.5],
               "orders": [2, 4, 6], "radius": 1.0},
    "s5": {"frequencies": [1.0, E, E * E]},
}


class ConfigError(ValueError):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = cfg.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    return cfg


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _merged_config(scenario, cfg):
    merged = dict(_SCENARIO_DEFAULTS.get(scenario, {}))
    merged.update(cfg)
    return merged


def _build_manifest(scenario, cfg):
    if scenario in ("line", "circle"):
        return build_line_describing(
            scenario, n=int(cfg["n"]),
            freqs=tuple(float(f) for f in cfg["frequencies"]),
        )
    if scenario == "planar":
        return build_planar_demo(
            orders=tuple(int(m) for m in cfg["orders"]),
            radius=float(cfg["radius"]),
            n=int(cfg["n"]),
            freqs=tuple(float(f) for f in cfg["frequencies"]),
        )
    if scenario == "s5":
        return build_s5(tuple(float(f) for f in cfg["frequencies"]))
    raise ConfigError(f"unknown scenario {scenario!r}")


def _provenance(cfg, seed):
    return {
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config_sha256": hashlib.sha256(_canonical(cfg).encode()).hexdigest(),
        "seed": seed,
    }


def _write_json(path, payload, quiet):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
        if not quiet:
            print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def _csv_float(x):
    return format(float(x), ".17g")


def cmd_build(args):
    cfg = _merged_config(args.scenario, _load_config(args.config))
    manifest = _build_manifest(args.scenario, cfg)
    payload = manifest.to_dict()
    payload["provenance"] = _provenance(cfg, args.seed)
    _write_json(args.out, payload, args.quiet)
    return 0


def cmd_trace(args):
    cfg = _merged_config(args.scenario, _load_config(args.config))
    manifest = _build_manifest(args.scenario, cfg)
    fld = manifest.field
    dim = fld.chart.dim
    p0 = np.asarray(cfg.get("p0", [0.5] * dim), dtype=float)
    if p0.size != dim:
        raise ConfigError(f"p0 must have {dim} coordinates")
    t_span = cfg.get("t_span", [0.0, 10.0])
    n_eval = int(cfg.get("n_eval", 200))
    icfg = IntegratorConfig(
        rtol=float(cfg.get("rtol", 1e-9)),
        atol=float(cfg.get("atol", 1e-12)),
    )
    t_eval = np.linspace(t_span[0], t_span[1], n_eval)
    traj = integrate(fld, p0, t_span, icfg, t_eval=t_eval)
    prov = _provenance(cfg, args.seed)
    lines = [f"# {key}={prov[key]}" for key in sorted(prov)]
    lines.append("t," + ",".join(f"y{i}" for i in range(dim)))
    for t, p in zip(traj.times, traj.points):
        lines.append(",".join([_csv_float(t)] + [_csv_float(v) for v in p]))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        if not args.quiet:
            print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args):
    cfg = _merged_config(args.scenario, _load_config(args.config))
    manifest = _build_manifest(args.scenario, cfg)
    if args.sabotage:
        # negative control: corrupt one declared order so a check must fail
        fld = manifest.field
        fibs = list(fld.singular_fibers)
        if len(fibs) >= 2:
            fibs[0] = SingularFiber(fibs[0].label, fibs[0].base_point,
                                    fibs[1].order)
        object.__setattr__(fld, "singular_fibers", tuple(fibs))
    report = verify_manifest(manifest, seed=args.seed,
                             check_orders=bool(cfg.get("check_orders")))
    payload = {
        "name": report.name,
        "passed": report.passed,
        "checks": report.checks,
        "provenance": _provenance(cfg, args.seed),
    }
    _write_json(args.out, payload, args.quiet)
    if not args.quiet:
        print(report.summary())
    return 0 if report.passed else 1


def cmd_probe(args):
    cfg = _merged_config("probe", _load_config(args.config))
    k = int(cfg.get("k", 2))
    a = [float(v) for v in cfg.get("frequencies", [1.0, 2.0 ** 0.5])]
    rep = commutant_dimension_probe(
        k, a,
        degree=int(cfg.get("degree", 2)),
        max_freq=int(cfg.get("max_freq", 2)),
        n_points=int(cfg.get("n_points", 500)),
        seed=args.seed,
    )
    payload = {
        "dimension": rep.dimension,
        "expected_dimension": rep.expected_dimension,
        "matches_expected": rep.matches_expected,
        "gap": rep.gap if np.isfinite(rep.gap) else "inf",
        "nullity_x": rep.nullity_x,
        "nullity_theta": rep.nullity_theta,
        "n_basis": rep.n_basis,
        "provenance": _provenance(cfg, args.seed),
    }
    _write_json(args.out, payload, args.quiet)
    return 0


def cmd_basin(args):
    cfg = _merged_config(args.scenario, _load_config(args.config))
    manifest = _build_manifest(args.scenario, cfg)
    rep = basin_census(
        manifest.field,
        n_samples=int(cfg.get("n_samples", 200)),
        seed=args.seed,
    )
    payload = {
        "n_samples": rep.n_samples,
        "counts": rep.counts,
        "source_fraction": rep.source_fraction,
        "unclassified_fraction": rep.unclassified_fraction,
        "provenance": _provenance(cfg, args.seed),
    }
    _write_json(args.out, payload, args.quiet)
    return 0


def _parser():
    p = argparse.ArgumentParser(
        prog="torusflow",
        description="construct and certify describing fields for torus actions",
    )
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True,
                            choices=sorted(_SCENARIO_DEFAULTS))
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("build", help="emit a construction manifest")
    common(sp)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("trace", help="integrate a trajectory to CSV")
    common(sp)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("verify", help="run certification checks")
    common(sp)
    sp.add_argument("--sabotage", action="store_true",
                    help="corrupt the manifest so verification must fail")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("probe", help="commutant dimension probe")
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("basin", help="backward census of base samples")
    common(sp)
    sp.set_defaults(func=cmd_basin)
    return p


def main(argv=None):
    threads = os.environ.get("TORUSFLOW_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FlowError, RadialSolverError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
