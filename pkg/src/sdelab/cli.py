"""Declarative experiment runner: JSON scenarios in, JSON report and CSV tables out.

The config schema is strict: unknown keys are errors, every validation
failure names the offending key, and the normalized config (defaults filled)
is echoed in the report header.  Numeric payloads are deterministic given the
config, independent of worker count; run-varying data (timestamp, wall clock,
output directory) lives only in the report header.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import coefficients as cf
from . import stopping
from . import verification as vf
from .coefficients import CoefficientField
from .engine import StepPolicy, path_entropy, simulate_path
from .errors import InvalidInputError, NumericalBlowupError

SCHEMA_VERSION = 1

EXPERIMENTS = ("hitting", "sqrt-bound", "displacement", "level-change",
               "persistence", "dyadic-escape", "integral-1d",
               "engine-validation")

# Experiments whose output is a Monte Carlo estimate with a CI; these enforce
# the configurable path-count floor.
CI_EXPERIMENTS = {"hitting", "sqrt-bound", "displacement", "level-change",
                  "persistence"}

_DEFAULT_POLICY = {"kind": "level-adaptive", "h_max": 1e-3, "h_min": 1e-7,
                   "level_fraction": 0.01}


def _fail(path: str, msg: str):
    raise InvalidInputError(f"{path}: {msg}")


def _pop(obj: dict, key: str, path: str, required: bool = False, default=None):
    if key in obj:
        return obj.pop(key)
    if required:
        _fail(f"{path}.{key}" if path else key, "missing required key")
    return default


def _no_leftovers(obj: dict, path: str):
    if obj:
        _fail(path or "<root>", f"unknown keys: {sorted(obj)}")


def _positive(val, path: str) -> float:
    try:
        out = float(val)
    except (TypeError, ValueError):
        _fail(path, f"expected a number, got {val!r}")
    if not out > 0:
        _fail(path, f"must be positive, got {out}")
    return out


def _pos_int(val, path: str) -> int:
    if not isinstance(val, int) or isinstance(val, bool) or val < 1:
        _fail(path, f"expected a positive integer, got {val!r}")
    return val


@dataclass
class ScenarioConfig:
    """Fully validated experiment description with defaults recorded."""

    field_name: str
    field_params: dict
    start: list[float]
    horizon: float
    policy: StepPolicy
    n_paths: int
    master_seed: int
    experiment: str
    params: dict
    bridge: object = "auto"
    lipschitz: dict = dc_field(default_factory=lambda: {"mode": "declared"})
    n_paths_floor: int = 100

    def build_field(self) -> CoefficientField:
        return cf.make_field(self.field_name, **self.field_params)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "field": {"name": self.field_name, "params": self.field_params},
            "start": self.start,
            "horizon": self.horizon,
            "policy": {"kind": self.policy.kind, "h_max": self.policy.h_max,
                       "h_min": self.policy.h_min,
                       "level_fraction": self.policy.level_fraction},
            "n_paths": self.n_paths,
            "master_seed": self.master_seed,
            "experiment": self.experiment,
            "params": self.params,
            "bridge": self.bridge,
            "lipschitz": self.lipschitz,
            "n_paths_floor": self.n_paths_floor,
        }


_PARAM_SPECS = {
    "hitting": {"required": ["eps_grid"], "optional": ["ci_method"]},
    "sqrt-bound": {"required": ["A", "k"], "optional": ["t_grid"]},
    "displacement": {"required": ["A", "k", "t"], "optional": []},
    "level-change": {"required": ["A", "k", "t"], "optional": []},
    "persistence": {"required": ["A", "k"], "optional": ["t0"]},
    "dyadic-escape": {"required": ["depth"], "optional": ["t0"]},
    "integral-1d": {"required": ["a"],
                    "optional": ["trend_windows", "max_windows"]},
    "engine-validation": {"required": [], "optional": ["h_exponents"]},
}


def _parse_policy(raw, path: str) -> StepPolicy:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        _fail(path, "policy must be an object")
    raw = dict(raw)
    kind = _pop(raw, "kind", path, default=_DEFAULT_POLICY["kind"])
    if kind not in ("fixed", "level-adaptive"):
        _fail(f"{path}.kind", f"must be 'fixed' or 'level-adaptive', got {kind!r}")
    h_max = _positive(_pop(raw, "h_max", path, default=_DEFAULT_POLICY["h_max"]),
                      f"{path}.h_max")
    default_h_min = h_max if kind == "fixed" else min(
        h_max, _DEFAULT_POLICY["h_min"])
    h_min = _positive(_pop(raw, "h_min", path, default=default_h_min),
                      f"{path}.h_min")
    frac = _positive(_pop(raw, "level_fraction", path,
                          default=_DEFAULT_POLICY["level_fraction"]),
                     f"{path}.level_fraction")
    _no_leftovers(raw, path)
    if h_min > h_max:
        _fail(f"{path}.h_min", f"h_min={h_min} exceeds h_max={h_max}")
    return StepPolicy(kind=kind, h_max=h_max, h_min=h_min, level_fraction=frac)


def _validate_params(experiment: str, raw: dict) -> dict:
    spec = _PARAM_SPECS[experiment]
    raw = dict(raw)
    out = {}
    path = "params"
    for key in spec["required"]:
        out[key] = _pop(raw, key, path, required=True)
    for key in spec["optional"]:
        if key in raw:
            out[key] = raw.pop(key)
    _no_leftovers(raw, path)

    if "A" in out:
        out["A"] = _positive(out["A"], "params.A")
    if "k" in out:
        out["k"] = _pos_int(out["k"], "params.k")
    if "t" in out:
        out["t"] = _positive(out["t"], "params.t")
        if out["t"] > 1.0:
            _fail("params.t", "must be <= 1")
    if "t0" in out:
        out["t0"] = _positive(out["t0"], "params.t0")
    if "depth" in out:
        out["depth"] = _pos_int(out["depth"], "params.depth")
    if "a" in out:
        out["a"] = _positive(out["a"], "params.a")
    if "eps_grid" in out:
        grid = out["eps_grid"]
        if not isinstance(grid, list) or not grid:
            _fail("params.eps_grid", "must be a nonempty list")
        grid = [_positive(e, "params.eps_grid") for e in grid]
        if any(b >= a for a, b in zip(grid, grid[1:])):
            _fail("params.eps_grid", "must be strictly decreasing")
        out["eps_grid"] = grid
    if "t_grid" in out:
        grid = out["t_grid"]
        if not isinstance(grid, list) or not grid:
            _fail("params.t_grid", "must be a nonempty list")
        out["t_grid"] = [_positive(t, "params.t_grid") for t in grid]
    if "ci_method" in out and out["ci_method"] not in ("wilson",
                                                       "clopper-pearson"):
        _fail("params.ci_method", f"unknown method {out['ci_method']!r}")
    if "h_exponents" in out:
        exps = out["h_exponents"]
        if not isinstance(exps, list) or len(exps) < 2:
            _fail("params.h_exponents", "must be a list of >= 2 integers")
        out["h_exponents"] = [_pos_int(e, "params.h_exponents") for e in exps]
    if "trend_windows" in out:
        out["trend_windows"] = _pos_int(out["trend_windows"],
                                        "params.trend_windows")
    if "max_windows" in out:
        out["max_windows"] = _pos_int(out["max_windows"], "params.max_windows")
    return out


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and fully validate a JSON scenario document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config is not well-formed JSON: {exc}") from None
    if not isinstance(raw, dict):
        _fail("<root>", "config must be a JSON object")
    raw = dict(raw)

    version = _pop(raw, "schema_version", "", default=SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {version!r}")

    field_spec = _pop(raw, "field", "", required=True)
    if not isinstance(field_spec, dict):
        _fail("field", "must be an object {name, params}")
    field_spec = dict(field_spec)
    field_name = _pop(field_spec, "name", "field", required=True)
    field_params = _pop(field_spec, "params", "field", default={})
    _no_leftovers(field_spec, "field")
    if not isinstance(field_params, dict):
        _fail("field.params", "must be an object")
    try:
        field = cf.make_field(field_name, **field_params)
    except InvalidInputError as exc:
        _fail("field", str(exc))

    start = _pop(raw, "start", "", required=True)
    if not isinstance(start, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in start):
        _fail("start", "must be a list of numbers")
    if len(start) != field.d:
        _fail("start", f"dimension {len(start)} does not match field "
                       f"dimension {field.d}")

    horizon = _positive(_pop(raw, "horizon", "", required=True), "horizon")
    policy = _parse_policy(_pop(raw, "policy", "", default=None), "policy")
    n_paths = _pos_int(_pop(raw, "n_paths", "", required=True), "n_paths")
    master_seed = _pop(raw, "master_seed", "", required=True)
    if not isinstance(master_seed, int) or isinstance(master_seed, bool) \
            or master_seed < 0:
        _fail("master_seed", f"expected a nonnegative integer, got {master_seed!r}")

    experiment = _pop(raw, "experiment", "", required=True)
    if experiment not in EXPERIMENTS:
        _fail("experiment",
              f"unknown experiment {experiment!r}; valid: {list(EXPERIMENTS)}")

    params_raw = _pop(raw, "params", "", default={})
    if not isinstance(params_raw, dict):
        _fail("params", "must be an object")
    params = _validate_params(experiment, params_raw)

    bridge = _pop(raw, "bridge", "", default="auto")
    if bridge not in ("auto", True, False):
        _fail("bridge", f"must be 'auto', true, or false, got {bridge!r}")

    lipschitz = _pop(raw, "lipschitz", "", default={"mode": "declared"})
    if not isinstance(lipschitz, dict):
        _fail("lipschitz", "must be an object")
    lipschitz = dict(lipschitz)
    mode = _pop(lipschitz, "mode", "lipschitz", default="declared")
    if mode not in ("declared", "estimated"):
        _fail("lipschitz.mode", f"must be 'declared' or 'estimated', got {mode!r}")
    lip_out = {"mode": mode}
    if mode == "estimated":
        lip_out["samples"] = _pos_int(
            _pop(lipschitz, "samples", "lipschitz", default=4000),
            "lipschitz.samples")
        lip_out["seed"] = _pop(lipschitz, "seed", "lipschitz", default=0)
        lip_out["safety"] = _positive(
            _pop(lipschitz, "safety", "lipschitz", default=1.25),
            "lipschitz.safety")
        region = _pop(lipschitz, "region", "lipschitz", default=None)
        if region is not None:
            if (not isinstance(region, list) or len(region) != 2):
                _fail("lipschitz.region", "must be [lo, hi]")
        lip_out["region"] = region
    _no_leftovers(lipschitz, "lipschitz")

    floor = _pos_int(_pop(raw, "n_paths_floor", "", default=100),
                     "n_paths_floor")
    if experiment in CI_EXPERIMENTS and n_paths < floor:
        _fail("n_paths", f"{experiment!r} produces confidence intervals and "
                         f"requires n_paths >= {floor}")

    if experiment == "integral-1d" and field.d != 1:
        _fail("field", "integral-1d requires a 1-d field")
    if experiment == "engine-validation" and field_name != "linear-1d":
        _fail("field", "engine-validation uses the linear-1d closed form")

    _no_leftovers(raw, "")
    return ScenarioConfig(
        field_name=field_name, field_params=field_params, start=list(start),
        horizon=horizon, policy=policy, n_paths=n_paths,
        master_seed=master_seed, experiment=experiment, params=params,
        bridge=bridge, lipschitz=lip_out, n_paths_floor=floor)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    version: str
    timestamp_utc: str
    wall_clock_s: float
    payload: dict
    tables: dict          # table name -> list of row dicts
    checks: list          # satisfied flags of all bound checks in the run
    output_files: list = dc_field(default_factory=list)

    @property
    def all_satisfied(self) -> bool:
        return all(self.checks)

    def header_dict(self, out_dir: str | None) -> dict:
        return {"artifact_version": self.version,
                "timestamp_utc": self.timestamp_utc,
                "wall_clock_s": self.wall_clock_s,
                "out_dir": out_dir,
                "config": self.config}


def _resolve_lipschitz(config: ScenarioConfig, field: CoefficientField,
                       start: np.ndarray):
    """Lipschitz bound per the config: declared on the field, or estimated."""
    lip = config.lipschitz
    if lip["mode"] == "declared":
        if field.lipschitz_k is None:
            raise InvalidInputError(
                f"field {field.name!r} has no declared Lipschitz bound; "
                "set lipschitz.mode to 'estimated'")
        return float(field.lipschitz_k), {"mode": "declared",
                                          "value": float(field.lipschitz_k)}
    region = lip.get("region")
    if region is None:
        radius = float(np.linalg.norm(start)) + 1.0
        region = (start - radius, start + radius)
    value = cf.estimate_lipschitz(field, region, lip["samples"], lip["seed"],
                                  lip["safety"])
    return value, {"mode": "estimated", "value": value,
                   "samples": lip["samples"], "seed": lip["seed"],
                   "safety": lip["safety"],
                   "region": [np.asarray(region[0]).tolist(),
                              np.asarray(region[1]).tolist()]}


def _estimates_table(eps_grid, estimates):
    return [{"eps": e, **est.to_dict()} for e, est in zip(eps_grid, estimates)]


def _bound_table_row(report):
    row = {k: v for k, v in report.parameters.items()
           if not isinstance(v, dict)}
    row.update({"bound_name": report.bound_name,
                "point": report.lhs_estimate.point,
                "ci_low": report.lhs_estimate.ci_low,
                "ci_high": report.lhs_estimate.ci_high,
                "n": report.lhs_estimate.n,
                "censored_n": report.lhs_estimate.censored_n,
                "rhs": report.rhs_value,
                "satisfied": report.satisfied,
                "slack": report.slack})
    return row


def run_scenario(config: ScenarioConfig, workers: int = 1,
                 debug_paths: bool = False) -> RunReport:
    """Execute the configured experiment and assemble the in-memory report."""
    t_start = time.perf_counter()
    field = config.build_field()
    start = np.asarray(config.start, dtype=float)
    policy = config.policy
    seed = config.master_seed
    exp = config.experiment
    p = config.params
    payload: dict = {}
    tables: dict = {}
    checks: list = []

    if exp == "hitting":
        method = p.get("ci_method", "wilson")
        ests = vf.estimate_zero_hitting(field, start, config.horizon,
                                        p["eps_grid"], config.n_paths, policy,
                                        seed, workers=workers, method=method)
        payload = {"eps_grid": p["eps_grid"],
                   "estimates": [e.to_dict() for e in ests]}
        tables["hitting"] = _estimates_table(p["eps_grid"], ests)

    elif exp == "sqrt-bound":
        k_val, k_source = _resolve_lipschitz(config, field, start)
        c = vf.escape_rate_constant(field.m, k_val)
        t_grid = p.get("t_grid") or vf.default_escape_time_grid(c)
        reports = vf.check_escape_probability_bound(
            field, start, p["A"], p["k"], t_grid, config.n_paths, policy,
            seed, lipschitz_k=k_val, bridge=config.bridge, workers=workers)
        slope = vf.fitted_escape_exponent(reports)
        payload = {"constant": c, "t0": vf.persistence_window(c),
                   "t_grid": t_grid, "k_source": k_source,
                   "fitted_exponent": slope,
                   "reports": [r.to_json_dict() for r in reports]}
        tables["sqrt_bound"] = [_bound_table_row(r) for r in reports]
        checks += [r.satisfied for r in reports]

    elif exp == "displacement":
        report = vf.check_displacement_bound(
            field, start, p["A"], p["k"], p["t"], config.n_paths, policy,
            seed, bridge=config.bridge, workers=workers)
        payload = {"report": report.to_json_dict()}
        tables["bound_checks"] = [_bound_table_row(report)]
        checks.append(report.satisfied)

    elif exp == "level-change":
        k_val, k_source = _resolve_lipschitz(config, field, start)
        report = vf.check_level_change_bound(
            field, start, p["A"], p["k"], p["t"], config.n_paths, policy,
            seed, lipschitz_k=k_val, bridge=config.bridge, workers=workers)
        payload = {"report": report.to_json_dict(), "k_source": k_source}
        tables["bound_checks"] = [_bound_table_row(report)]
        checks.append(report.satisfied)

    elif exp == "persistence":
        t0 = p.get("t0")
        k_source = None
        if t0 is None:
            k_val, k_source = _resolve_lipschitz(config, field, start)
            t0 = vf.persistence_window(vf.escape_rate_constant(field.m, k_val))
        report = vf.check_halving_persistence(
            field, [start], p["A"], p["k"], config.n_paths, policy, seed,
            t0=t0, bridge=config.bridge, workers=workers)
        payload = {"report": report.to_json_dict(), "t0": t0,
                   "k_source": k_source}
        tables["bound_checks"] = [_bound_table_row(report)]
        checks.append(report.satisfied)

    elif exp == "dyadic-escape":
        t0 = p.get("t0")
        k_source = None
        if t0 is None:
            k_val, k_source = _resolve_lipschitz(config, field, start)
            t0 = vf.persistence_window(vf.escape_rate_constant(field.m, k_val))
        bridge = vf._resolve_bridge(field, config.bridge)
        records = stopping.dyadic_escape_batch(
            field, start, p["depth"], config.horizon, policy, seed,
            config.n_paths, t0=t0, bridge=bridge, workers=workers)
        depth = p["depth"]
        inc = np.array([r.increments for r in records])
        cen = np.array([r.censored for r in records])
        per_k = []
        for k in range(depth):
            live = ~cen[:, k]
            per_k.append({
                "k": k,
                "n_censored": int(cen[:, k].sum()),
                "mean_increment": (float(np.mean(inc[live, k]))
                                   if live.any() else None),
                "count_ge_t0": int(np.sum(inc[live, k] >= t0)),
            })
        payload = {"depth": depth, "t0": t0, "n_paths": config.n_paths,
                   "start_level": records[0].start_level,
                   "count_ge_t0_total": int(sum(r.count_ge_t0 for r in records)),
                   "per_band": per_k, "k_source": k_source}
        tables["dyadic_escape"] = stopping.escape_csv_rows(records)

    elif exp == "integral-1d":
        sigma_1d = lambda y: float(np.asarray(
            field.sigma(np.array([y])))[0, 0])
        kwargs = {}
        if "trend_windows" in p:
            kwargs["trend_windows"] = p["trend_windows"]
        if "max_windows" in p:
            kwargs["max_windows"] = p["max_windows"]
        verdict = vf.accessibility_integral_1d(sigma_1d, p["a"], **kwargs)
        payload = {"verdict": verdict.kind, "value": verdict.value,
                   "error": verdict.error, "windows": verdict.windows}
        tables["integral"] = [payload.copy()]

    elif exp == "engine-validation":
        exps = p.get("h_exponents", list(range(4, 11)))
        res = vf.strong_order_study(config.n_paths, exps, config.horizon,
                                    start_x=float(start[0]),
                                    master_seed=seed, workers=workers)
        payload = res
        tables["strong_order"] = [
            {"h": h, "strong_error": e, "n": config.n_paths}
            for h, e in zip(res["h_grid"], res["strong_errors"])]
        checks.append(res["satisfied"])

    report = RunReport(
        config=config.to_dict(), version=__version__,
        timestamp_utc=datetime.now(timezone.utc).isoformat(),
        wall_clock_s=time.perf_counter() - t_start,
        payload=payload, tables=tables, checks=checks)

    if debug_paths:
        report.debug_trajectories = _debug_trajectories(config, field)
    return report


def _debug_trajectories(config: ScenarioConfig, field: CoefficientField,
                        count: int = 10):
    out = []
    for i in range(min(count, config.n_paths)):
        path = simulate_path(field, config.start, config.horizon,
                             config.policy,
                             path_entropy(config.master_seed, i))
        levels = cf.level_batch(field, path.states)
        rows = []
        for j in range(path.times.size):
            row = {"t": float(path.times[j])}
            row.update({f"x_{kk + 1}": float(path.states[j, kk])
                        for kk in range(field.d)})
            row["level"] = float(levels[j])
            rows.append(row)
        out.append((i, rows))
    return out


def write_report(report: RunReport, out_dir) -> list[str]:
    """Write report.json and one CSV per table; returns the file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    doc = {"header": report.header_dict(str(out.resolve())),
           "payload": report.payload,
           "tables": sorted(f"table_{name}.csv" for name in report.tables)}
    report_path = out / "report.json"
    report_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.append(str(report_path))

    for name, rows in sorted(report.tables.items()):
        path = out / f"table_{name}.csv"
        if rows:
            fields = list(rows[0].keys())
            with open(path, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=fields)
                writer.writeheader()
                writer.writerows(rows)
        else:
            path.write_text("")
        written.append(str(path))

    for i, rows in getattr(report, "debug_trajectories", []):
        path = out / f"path_{i:03d}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        written.append(str(path))

    report.output_files = written
    return written


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    config = parse_scenario(Path(args.config).read_text())
    report = run_scenario(config, workers=args.workers,
                          debug_paths=args.debug_paths)
    written = write_report(report, args.out)
    for path in written:
        print(path)
    if report.checks:
        n_ok = sum(report.checks)
        print(f"bound checks: {n_ok}/{len(report.checks)} satisfied")
    return 0 if report.all_satisfied else 2


def _cmd_validate(args) -> int:
    config = parse_scenario(Path(args.config).read_text())
    print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_catalog(_args) -> int:
    for entry in cf.catalog():
        fld = entry.field
        k = "n/a" if fld.lipschitz_k is None else f"{fld.lipschitz_k:g}"
        print(f"{entry.name}  (d={fld.d}, m={fld.m}, K={k})")
        print(f"    {entry.analytic_notes}")
    return 0


def _cmd_replay(args) -> int:
    config = parse_scenario(Path(args.config).read_text())
    master = args.seed if args.seed is not None else config.master_seed
    field = config.build_field()
    path = simulate_path(field, config.start, config.horizon, config.policy,
                         path_entropy(master, args.path))
    levels = cf.level_batch(field, path.states)
    writer = csv.writer(args.out_file or sys.stdout)
    writer.writerow(["t"] + [f"x_{i + 1}" for i in range(field.d)] + ["level"])
    for j in range(path.times.size):
        writer.writerow([path.times[j], *path.states[j], levels[j]])
    print(f"# path {args.path} seed={master} steps={path.times.size - 1} "
          f"absorbed={path.absorbed} final_level={levels[-1]:g}",
          file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sdelab",
        description="Level-set hitting experiments for SDE coefficient fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--debug-paths", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a config and echo it")
    p_val.add_argument("config")
    p_val.set_defaults(fn=_cmd_validate)

    p_cat = sub.add_parser("catalog", help="list built-in coefficient fields")
    p_cat.set_defaults(fn=_cmd_catalog)

    p_rep = sub.add_parser("replay", help="re-simulate one path for debugging")
    p_rep.add_argument("config")
    p_rep.add_argument("--path", type=int, required=True)
    p_rep.add_argument("--seed", type=int, default=None)
    p_rep.add_argument("--out-file", type=argparse.FileType("w"), default=None)
    p_rep.set_defaults(fn=_cmd_replay)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalBlowupError as exc:
        print(f"numerical blowup: {exc} (step {exc.step_index}, "
              f"path {exc.path_index}, seed {exc.seed})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
