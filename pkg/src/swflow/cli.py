"""Command-line experiment driver.

Every probe in the library is exposed as a subcommand taking a JSON
config and writing CSV/JSON outputs into a directory:

    swflow descend     --config cfg.json --out outdir
    swflow perturb     --config cfg.json --out outdir
    swflow criticality --config cfg.json --out outdir
    swflow sweep       --config cfg.json --out outdir
    swflow cells       --config cfg.json --out outdir

Common flags: --threads K (worker cap, falls back to the SWFLOW_THREADS
environment variable), --seed S (overrides the config seed), --plot
(also render matplotlib figures next to the CSV files).

Exit codes: 0 on success, 2 on any configuration problem (malformed
JSON, unknown fields, invalid values), 3 when the initial cloud has
coincident particles.

Every CSV starts with a comment line recording the format version, the
SHA-256 of the canonical config, and the convention of the reported
values (F = half the squared sliced distance, or sw2_squared).  Floats
are written with shortest round-trip formatting so outputs are diffable
across platforms and worker counts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys

import numpy as np

from . import landscape
from .descent import (DescentConfig, check_separation_bound, run_descent,
                      step_size_sweep, uniform_box_cloud)
from .directions import DirectionSet, equispaced_circle, sampled_sphere
from .landscape import TieInDirection
from .swgrad import OnDiagonal, PointCloud, SlicedEvaluator
from .targets import (EmpiricalCloud, IsotropicGaussian, LineSegmentUniform,
                      ProjectedTarget, SlicedUniformDisk, shell_cloud)

FORMAT_VERSION = 1

log = logging.getLogger("swflow")


class ConfigError(Exception):
    pass


def _require_keys(spec, allowed, required, context):
    if not isinstance(spec, dict):
        raise ConfigError(f"{context}: expected an object")
    unknown = set(spec) - set(allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown fields {sorted(unknown)}")
    missing = set(required) - set(spec)
    if missing:
        raise ConfigError(f"{context}: missing fields {sorted(missing)}")


def config_hash(cfg) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _header(cfg, convention):
    return (f"# format_version={FORMAT_VERSION} "
            f"config_sha256={config_hash(cfg)} convention={convention}\n")


def build_target(spec) -> ProjectedTarget:
    _require_keys(spec, {"kind", "radius", "dim", "sigma", "path", "p", "q",
                         "sampler", "r_in", "r_out", "M", "seed"},
                  {"kind"}, "target")
    kind = spec["kind"]
    if kind == "sliced_uniform_disk":
        _require_keys(spec, {"kind", "radius"}, {"kind"}, "target")
        return SlicedUniformDisk(radius=spec.get("radius", 1.0))
    if kind == "gaussian":
        _require_keys(spec, {"kind", "dim", "sigma"}, {"kind"}, "target")
        return IsotropicGaussian(dim=spec.get("dim", 2),
                                 sigma=spec.get("sigma", 1.0))
    if kind == "segment_uniform":
        _require_keys(spec, {"kind", "p", "q"}, {"kind", "p", "q"}, "target")
        return LineSegmentUniform(spec["p"], spec["q"])
    if kind == "empirical":
        if spec.get("sampler") == "shell":
            _require_keys(spec, {"kind", "sampler", "r_in", "r_out", "M",
                                 "seed"},
                          {"kind", "sampler", "r_in", "r_out", "M", "seed"},
                          "target")
            pts = shell_cloud(spec["r_in"], spec["r_out"], spec["M"],
                              spec["seed"])
            return EmpiricalCloud(pts)
        _require_keys(spec, {"kind", "path", "dim"}, {"kind", "path"},
                      "target")
        return EmpiricalCloud.from_csv(spec["path"], dim=spec.get("dim"))
    raise ConfigError(f"target: unknown kind {kind!r}")


def build_dirs(spec) -> DirectionSet:
    _require_keys(spec, {"kind", "L", "phase", "dim", "seed"},
                  {"kind", "L"}, "dirs")
    kind = spec["kind"]
    if kind == "equispaced":
        _require_keys(spec, {"kind", "L", "phase"}, {"kind", "L"}, "dirs")
        phase = spec.get("phase", 0.0)
        if isinstance(phase, str):
            phase = _parse_phase(phase)
        return equispaced_circle(spec["L"], phase=phase)
    if kind == "sampled":
        _require_keys(spec, {"kind", "L", "dim", "seed"},
                      {"kind", "L", "dim", "seed"}, "dirs")
        return sampled_sphere(spec["dim"], spec["L"], spec["seed"])
    raise ConfigError(f"dirs: unknown kind {kind!r}")


def _parse_phase(text):
    """Accept symbolic phases like 'pi/2' or 'pi/2+pi/L-style' fractions."""
    try:
        allowed = {"pi": math.pi}
        if not set(text) <= set("0123456789.+-*/pi() "):
            raise ValueError
        return float(eval(text, {"__builtins__": {}}, allowed))
    except Exception:
        raise ConfigError(f"dirs: cannot parse phase {text!r}")


def build_cloud(spec, dirs=None, seed=0) -> PointCloud:
    _require_keys(spec, {"kind", "N", "lo", "hi", "dim", "path", "points",
                         "n_segment", "n_ring"}, {"kind"}, "cloud")
    kind = spec["kind"]
    if kind == "segment":
        _require_keys(spec, {"kind", "N"}, {"kind", "N"}, "cloud")
        return landscape.segment_critical_cloud(spec["N"])
    if kind == "gaussian_line":
        _require_keys(spec, {"kind", "N", "dim"}, {"kind", "N"}, "cloud")
        if dirs is None:
            raise ConfigError("cloud: gaussian_line needs a direction set")
        return landscape.gaussian_line_critical_cloud(
            spec["N"], spec.get("dim", 2), dirs)
    if kind == "dumbbell":
        _require_keys(spec, {"kind", "n_segment", "n_ring"}, {"kind"},
                      "cloud")
        cloud, _ = landscape.dumbbell_cloud(
            n_segment=spec.get("n_segment", 50),
            n_ring=spec.get("n_ring", 25))
        return cloud
    if kind == "uniform_box":
        _require_keys(spec, {"kind", "N", "lo", "hi", "dim"},
                      {"kind", "N", "lo", "hi"}, "cloud")
        return uniform_box_cloud(spec["N"], spec["lo"], spec["hi"],
                                 dim=spec.get("dim", 2), seed=seed)
    if kind == "file":
        _require_keys(spec, {"kind", "path"}, {"kind", "path"}, "cloud")
        return PointCloud(np.loadtxt(spec["path"], delimiter=",",
                                     comments="#", ndmin=2))
    if kind == "explicit":
        _require_keys(spec, {"kind", "points"}, {"kind", "points"}, "cloud")
        return PointCloud(np.asarray(spec["points"], dtype=float))
    raise ConfigError(f"cloud: unknown kind {kind!r}")


def _build_ts(spec):
    if spec is None:
        return np.linspace(-0.5, 0.5, 201)
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    _require_keys(spec, {"lo", "hi", "num"}, {"lo", "hi", "num"}, "ts")
    return np.linspace(spec["lo"], spec["hi"], spec["num"])


def _build_xi(spec, cloud: PointCloud):
    if spec is None:
        spec = {"kind": "alternating"}
    _require_keys(spec, {"kind", "axis", "mask", "vectors"}, {"kind"}, "xi")
    kind = spec["kind"]
    if kind == "alternating":
        mask = spec.get("mask")
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
        return landscape.alternating_field(cloud.n_points, cloud.dim,
                                           axis=spec.get("axis", 1),
                                           mask=mask)
    if kind == "explicit":
        _require_keys(spec, {"kind", "vectors"}, {"kind", "vectors"}, "xi")
        return np.asarray(spec["vectors"], dtype=float)
    raise ConfigError(f"xi: unknown kind {kind!r}")


def _write_points_csv(path, cfg, points):
    with open(path, "w") as f:
        f.write(_header(cfg, "coordinates"))
        f.write(",".join(f"x{j}" for j in range(points.shape[1])) + "\n")
        for row in points:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_descend(cfg, out, threads, plot):
    _require_keys(cfg, {"format_version", "target", "dirs", "init",
                        "step_multiple", "iters", "grad_tol", "seed"},
                  {"target", "dirs", "init", "step_multiple", "iters"},
                  "config")
    target = build_target(cfg["target"])
    dirs = build_dirs(cfg["dirs"])
    x0 = build_cloud(cfg["init"], dirs=dirs, seed=cfg.get("seed", 0))
    dcfg = DescentConfig(step_multiple=cfg["step_multiple"],
                         max_iters=cfg["iters"],
                         grad_tol=cfg.get("grad_tol"),
                         seed=cfg.get("seed", 0))
    final, trace = run_descent(x0, target, dirs, dcfg, threads=threads)
    trace_path = os.path.join(out, "trace.csv")
    with open(trace_path, "w") as f:
        f.write(_header(cfg, "F"))
        trace.write_csv(f)
    _write_points_csv(os.path.join(out, "cloud.csv"), cfg, final.points)
    bound, satisfied = check_separation_bound(final, target)
    _write_json(os.path.join(out, "summary.json"), {
        "format_version": FORMAT_VERSION,
        "config_sha256": config_hash(cfg),
        "stop_reason": trace.stop_reason,
        "iterations": trace.n_rows - 1,
        "final_energy": trace.energy[-1],
        "final_grad_norm": trace.grad_norm[-1],
        "min_sep": trace.min_sep[-1],
        "separation_bound": bound,
        "separation_bound_satisfied": satisfied,
    })
    if plot:
        from . import report
        report.plot_descent(trace, final.points, out)
    return 0


def cmd_perturb(cfg, out, threads, plot):
    _require_keys(cfg, {"format_version", "target", "dirs", "mode", "cloud",
                        "xi", "n_hat", "ts", "deltas", "seed"},
                  {"target", "dirs", "mode", "cloud"}, "config")
    target = build_target(cfg["target"])
    dirs = build_dirs(cfg["dirs"])
    cloud = build_cloud(cfg["cloud"], dirs=dirs, seed=cfg.get("seed", 0))
    ts = _build_ts(cfg.get("ts"))
    mode = cfg["mode"]
    slope_jump = None
    if mode == "vector_field":
        xi = _build_xi(cfg.get("xi"), cloud)
        curve = landscape.perturb_vector_field(cloud, xi, ts, target, dirs,
                                               threads=threads)
    elif mode == "split_translation":
        n_hat = np.asarray(cfg.get("n_hat", [0.0, 1.0]), dtype=float)
        curve = landscape.perturb_split_translation(cloud, n_hat, ts, target,
                                                    dirs, threads=threads)
    elif mode == "kink":
        xi = _build_xi(cfg.get("xi"), cloud)
        if not np.any(ts == 0.0):
            raise ConfigError("kink mode requires t = 0 on the grid")
        curve, slope_jump = landscape.kink_scan(cloud, xi, target, dirs, ts,
                                                threads=threads)
    else:
        raise ConfigError(f"unknown perturbation mode {mode!r}")
    with open(os.path.join(out, "curve.csv"), "w") as f:
        f.write(_header(cfg, "sw2_squared"))
        curve.write_csv(f)
    deltas = cfg.get("deltas", [0.01, 0.02, 0.05])
    local_max = None
    try:
        local_max = curve.is_local_max_at_zero(deltas)
    except ValueError:
        pass
    summary = {
        "format_version": FORMAT_VERSION,
        "config_sha256": config_hash(cfg),
        "mode": mode,
        "local_max": local_max,
        "value_at_zero": _try_value(curve, 0.0),
    }
    if slope_jump is not None:
        summary["slope_jump"] = slope_jump
    _write_json(os.path.join(out, "summary.json"), summary)
    if plot:
        from . import report
        report.plot_curve(curve, out)
    return 0


def _try_value(curve, t):
    try:
        return curve.value_at(t)
    except ValueError:
        return None


def cmd_criticality(cfg, out, threads, plot):
    _require_keys(cfg, {"format_version", "target", "dirs", "cloud", "tol",
                        "seed"},
                  {"target", "dirs", "cloud"}, "config")
    target = build_target(cfg["target"])
    dirs = build_dirs(cfg["dirs"])
    cloud = build_cloud(cfg["cloud"], dirs=dirs, seed=cfg.get("seed", 0))
    evaluator = SlicedEvaluator(target, dirs, cloud.n_points, threads)
    rep = evaluator.grad_p2(cloud.points)
    norms = np.linalg.norm(rep.residuals, axis=1)
    tol = cfg.get("tol", 1e-2)
    with open(os.path.join(out, "residuals.csv"), "w") as f:
        f.write(_header(cfg, "residual_v_mu"))
        f.write("i,residual_norm,"
                + ",".join(f"r{j}" for j in range(cloud.dim)) + "\n")
        for i, (nrm, vec) in enumerate(zip(norms, rep.residuals)):
            f.write(f"{i},{float(nrm)!r},"
                    + ",".join(repr(float(v)) for v in vec) + "\n")
    _write_json(os.path.join(out, "summary.json"), {
        "format_version": FORMAT_VERSION,
        "config_sha256": config_hash(cfg),
        "energy": rep.energy,
        "grad_norm": rep.grad_norm,
        "max_residual": float(norms.max()),
        "mean_residual": float(norms.mean()),
        "tol": tol,
        "critical_at_tol": bool(norms.max() <= tol),
    })
    if plot:
        from . import report
        report.plot_residuals(norms, out)
    return 0


def cmd_sweep(cfg, out, threads, plot):
    _require_keys(cfg, {"format_version", "target", "dirs", "init",
                        "multiples", "iters", "seed"},
                  {"target", "dirs", "init", "multiples", "iters"}, "config")
    target = build_target(cfg["target"])
    dirs = build_dirs(cfg["dirs"])
    x0 = build_cloud(cfg["init"], dirs=dirs, seed=cfg.get("seed", 0))
    results = step_size_sweep(x0, target, dirs, cfg["multiples"],
                              cfg["iters"], threads=threads)
    with open(os.path.join(out, "sweep.csv"), "w") as f:
        f.write(_header(cfg, "F"))
        f.write("multiple,k,energy,grad_norm,min_sep,lemma_slack\n")
        for m, _, trace in results:
            for k, e, g, s, slack in trace.rows():
                slack_txt = "" if math.isnan(slack) else repr(slack)
                f.write(f"{m!r},{k},{e!r},{g!r},{s!r},{slack_txt}\n")
    _write_json(os.path.join(out, "summary.json"), {
        "format_version": FORMAT_VERSION,
        "config_sha256": config_hash(cfg),
        "runs": [{"multiple": m, "stop_reason": t.stop_reason,
                  "final_energy": t.energy[-1]} for m, _, t in results],
    })
    if plot:
        from . import report
        report.plot_sweep(results, out)
    return 0


def cmd_cells(cfg, out, threads, plot):
    _require_keys(cfg, {"format_version", "target", "dirs", "cloud", "seed"},
                  {"target", "dirs", "cloud"}, "config")
    target = build_target(cfg["target"])
    dirs = build_dirs(cfg["dirs"])
    cloud = build_cloud(cfg["cloud"], dirs=dirs, seed=cfg.get("seed", 0))
    try:
        descriptor = landscape.analyze_cell(cloud, target, dirs)
    except TieInDirection as exc:
        print(f"swflow: {exc}", file=sys.stderr)
        return 2
    payload = json.loads(descriptor.to_json())
    payload["format_version"] = FORMAT_VERSION
    payload["config_sha256"] = config_hash(cfg)
    payload["decomposition_gap"] = abs(descriptor.fl_value
                                       - descriptor.quadratic_value
                                       - descriptor.c0)
    _write_json(os.path.join(out, "cell.json"), payload)
    if plot:
        from . import report
        report.plot_cells(descriptor, out)
    return 0


_COMMANDS = {
    "descend": cmd_descend,
    "perturb": cmd_perturb,
    "criticality": cmd_criticality,
    "sweep": cmd_sweep,
    "cells": cmd_cells,
}


def _resolve_threads(flag_value):
    if flag_value is not None:
        return flag_value
    env = os.environ.get("SWFLOW_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SWFLOW_THREADS is not an integer: {env!r}")
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swflow",
        description="Sliced-Wasserstein gradient dynamics experiment driver")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: SWFLOW_THREADS or 1)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--plot", action="store_true",
                        help="also render figures next to the CSV output")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        with open(args.config) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"swflow: bad config: {exc}", file=sys.stderr)
        return 2
    if not isinstance(cfg, dict):
        print("swflow: config must be a JSON object", file=sys.stderr)
        return 2
    if cfg.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        print("swflow: unsupported format_version", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed

    try:
        threads = _resolve_threads(args.threads)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](cfg, args.out, threads, args.plot)
    except ConfigError as exc:
        print(f"swflow: bad config: {exc}", file=sys.stderr)
        return 2
    except OnDiagonal:
        print("swflow: initial cloud has coincident particles",
              file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"swflow: bad config: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
