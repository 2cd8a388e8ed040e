"""Command-line front end: config-driven experiments emitting CSV.

Config files are JSON; see the README for the schema.  Each run
produces one CSV row per (sweep value, discipline, class, method) and
a short human-readable summary on stdout.  Exit codes: 0 success,
1 invalid config or parameters, 2 unsupported model combination,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import re
import sys

from .dist import (
    Deterministic,
    Exponential,
    Gamma,
    MixtureDistribution,
    ServiceDistribution,
    Uniform,
)
from .errors import NumericalError, UnsupportedModelError, ValidationError
from .exact_mm import ClassSpec, PAoIComponents, SystemSpec, paoi_exact
from .bounds_mg import paoi_upper_bound, rejection_probs
from .exact_mm import buffer_full_prob, build_rate_matrix, stationary
from .bounds_mg import RejectionProfile, _common_service
from .infinite import (
    fcfs_average_for_order,
    fcfs_average_paoi,
    fcfs_paoi,
    lcfs_paoi_upper_bound,
    optimal_priority_order,
)
from .sim import Discipline, SimConfig, estimate_from_run, run_simulation

CSV_COLUMNS = [
    "sweep_param", "sweep_value", "discipline", "class", "method",
    "paoi", "ci_halfwidth", "E_P", "E_W", "E_I", "E_G",
]

_SWEEP_PATH = re.compile(
    r"^class(?:es)?\[(\d+)\]\.(arrival_rate|service\.(rate|value|lower|upper|shape))$"
)


def _fail(path: str, message: str) -> ValidationError:
    return ValidationError(f"{path}: {message}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise _fail(f"{path}.{key}", "missing required field")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _positive(value, path: str) -> float:
    x = _number(value, path)
    if not math.isfinite(x) or x <= 0:
        raise _fail(path, f"expected a positive finite number, got {value!r}")
    return x


def parse_service(obj, path: str) -> ServiceDistribution:
    if not isinstance(obj, dict):
        raise _fail(path, "service must be an object")
    kind = _require(obj, "kind", path)
    try:
        if kind == "exponential":
            return Exponential(_positive(_require(obj, "rate", path), f"{path}.rate"))
        if kind == "deterministic":
            return Deterministic(_positive(_require(obj, "value", path), f"{path}.value"))
        if kind == "uniform":
            lower = _number(_require(obj, "lower", path), f"{path}.lower")
            upper = _positive(_require(obj, "upper", path), f"{path}.upper")
            return Uniform(lower, upper)
        if kind == "gamma":
            return Gamma(
                _positive(_require(obj, "shape", path), f"{path}.shape"),
                _positive(_require(obj, "rate", path), f"{path}.rate"),
            )
        if kind == "mixture":
            comps = _require(obj, "components", path)
            if not isinstance(comps, list) or not comps:
                raise _fail(f"{path}.components", "expected a nonempty list")
            parsed = []
            for n, comp in enumerate(comps):
                cpath = f"{path}.components[{n}]"
                if not isinstance(comp, dict):
                    raise _fail(cpath, "expected an object")
                weight = _positive(_require(comp, "weight", cpath), f"{cpath}.weight")
                inner = {key: val for key, val in comp.items() if key != "weight"}
                parsed.append((weight, parse_service(inner, cpath)))
            return MixtureDistribution(tuple(parsed))
    except ValidationError:
        raise
    raise _fail(f"{path}.kind", f"unknown service kind {kind!r}")


def parse_system(obj, path: str = "classes") -> SystemSpec:
    if not isinstance(obj, list) or not obj:
        raise _fail(path, "expected a nonempty list of classes")
    classes = []
    for n, cls in enumerate(obj):
        cpath = f"{path}[{n}]"
        if not isinstance(cls, dict):
            raise _fail(cpath, "expected an object")
        lam = _positive(_require(cls, "arrival_rate", cpath), f"{cpath}.arrival_rate")
        service = parse_service(_require(cls, "service", cpath), f"{cpath}.service")
        classes.append(ClassSpec(lam, service))
    return SystemSpec(tuple(classes))


def parse_sim_config(obj, path: str = "sim") -> SimConfig:
    if not isinstance(obj, dict):
        raise _fail(path, "expected an object")
    seed = _require(obj, "seed", path)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise _fail(f"{path}.seed", f"expected an integer, got {seed!r}")
    kwargs = {}
    for key in ("replications", "completions_per_replication",
                "warmup_completions", "queue_cap"):
        if key in obj:
            value = obj[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise _fail(f"{path}.{key}", f"expected an integer, got {value!r}")
            kwargs[key] = value
    if "confidence_level" in obj:
        kwargs["confidence_level"] = _number(
            obj["confidence_level"], f"{path}.confidence_level")
    unknown = set(obj) - {"seed", "replications", "completions_per_replication",
                          "warmup_completions", "confidence_level", "queue_cap"}
    if unknown:
        raise _fail(path, f"unknown fields {sorted(unknown)}")
    return SimConfig(seed=seed, **kwargs)


def parse_disciplines(obj, path: str = "disciplines") -> tuple[Discipline, ...]:
    if not isinstance(obj, list) or not obj:
        raise _fail(path, "expected a nonempty list of discipline names")
    out = []
    for n, name in enumerate(obj):
        try:
            d = Discipline(name)
        except ValueError:
            valid = ", ".join(d.value for d in Discipline)
            raise _fail(f"{path}[{n}]", f"unknown discipline {name!r}; one of: {valid}")
        if d in out:
            raise _fail(f"{path}[{n}]", f"duplicate discipline {name!r}")
        out.append(d)
    return tuple(out)


@dataclasses.dataclass(frozen=True)
class SweepPlan:
    parameter: str
    class_index: int
    field: str
    grid: tuple[float, ...]


def parse_sweep(obj, spec: SystemSpec, path: str = "sweep") -> SweepPlan:
    if not isinstance(obj, dict):
        raise _fail(path, "expected an object")
    parameter = _require(obj, "parameter", path)
    if not isinstance(parameter, str):
        raise _fail(f"{path}.parameter", "expected a string path")
    m = _SWEEP_PATH.match(parameter)
    if m is None:
        raise _fail(
            f"{path}.parameter",
            f"cannot resolve {parameter!r}; expected classes[i].arrival_rate "
            "or classes[i].service.<rate|value|lower|upper|shape>",
        )
    index = int(m.group(1))
    if index >= spec.k:
        raise _fail(f"{path}.parameter", f"class index {index} out of range for k={spec.k}")
    field = m.group(2)
    if field.startswith("service."):
        attr = field.split(".", 1)[1]
        service = spec.service(index + 1)
        if not any(f.name == attr for f in dataclasses.fields(service)):
            raise _fail(
                f"{path}.parameter",
                f"service of class {index + 1} ({type(service).__name__}) has no "
                f"scalar field {attr!r}",
            )
    grid_obj = _require(obj, "grid", path)
    if not isinstance(grid_obj, list) or not grid_obj:
        raise _fail(f"{path}.grid", "expected a nonempty list")
    grid = tuple(_positive(v, f"{path}.grid[{n}]") for n, v in enumerate(grid_obj))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise _fail(f"{path}.grid", "grid values must be strictly increasing")
    unknown = set(obj) - {"parameter", "grid"}
    if unknown:
        raise _fail(path, f"unknown fields {sorted(unknown)}")
    return SweepPlan(parameter=parameter, class_index=index, field=field, grid=grid)


def apply_sweep_value(spec: SystemSpec, plan: SweepPlan, value: float) -> SystemSpec:
    cls = spec.classes[plan.class_index]
    if plan.field == "arrival_rate":
        cls = dataclasses.replace(cls, arrival_rate=value)
    else:
        attr = plan.field.split(".", 1)[1]
        cls = dataclasses.replace(cls, service=dataclasses.replace(
            cls.service, **{attr: value}))
    classes = list(spec.classes)
    classes[plan.class_index] = cls
    return SystemSpec(tuple(classes))


@dataclasses.dataclass(frozen=True)
class Experiment:
    spec: SystemSpec
    disciplines: tuple[Discipline, ...]
    sweep: SweepPlan | None
    sim: SimConfig | None
    output: str | None


def load_experiment(path: str, verb: str) -> Experiment:
    try:
        with open(path, encoding="utf-8") as handle:
            obj = json.load(handle)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError("config root must be a JSON object")
    known = {"classes", "disciplines", "mode", "sweep", "sim", "output", "version"}
    unknown = set(obj) - known
    if unknown:
        raise ValidationError(f"config: unknown fields {sorted(unknown)}")
    if obj.get("version", 1) != 1:
        raise ValidationError(f"config.version: unsupported version {obj['version']!r}")
    mode = obj.get("mode")
    if mode is not None and mode != verb:
        raise ValidationError(
            f"config.mode is {mode!r} but the command is {verb!r}; "
            "drop the field or run the matching command"
        )
    spec = parse_system(_require(obj, "classes", "config"))
    if verb == "advise":
        disciplines: tuple[Discipline, ...] = (Discipline.FCFS_INFINITE,)
        if "disciplines" in obj:
            disciplines = parse_disciplines(obj["disciplines"])
            if disciplines != (Discipline.FCFS_INFINITE,):
                raise ValidationError(
                    "config.disciplines: advise applies to fcfs_infinite only"
                )
    else:
        disciplines = parse_disciplines(_require(obj, "disciplines", "config"))
    sweep = parse_sweep(obj["sweep"], spec) if "sweep" in obj else None
    sim = parse_sim_config(obj["sim"]) if "sim" in obj else None
    if verb in ("simulate", "compare") and sim is None:
        raise ValidationError(f"config.sim: required for the {verb} command")
    output = obj.get("output")
    if output is not None and not isinstance(output, str):
        raise ValidationError("config.output: expected a string path")
    return Experiment(spec=spec, disciplines=disciplines, sweep=sweep,
                      sim=sim, output=output)


def _exact_components(spec: SystemSpec, d: Discipline) -> tuple[PAoIComponents, ...]:
    if d is Discipline.BUFFER1_REPLACE:
        if not spec.all_exponential():
            raise UnsupportedModelError(
                "exact analysis of the one-slot-buffer system needs exponential "
                "service everywhere; use the bounds or simulate command"
            )
        return tuple(paoi_exact(spec, i) for i in range(1, spec.k + 1))
    if d is Discipline.FCFS_INFINITE:
        return fcfs_paoi(spec)
    raise UnsupportedModelError(
        "no exact analysis for lcfs_infinite; use the bounds or simulate command"
    )


def _bound_components(spec: SystemSpec, d: Discipline) -> tuple[PAoIComponents, ...]:
    if d is Discipline.BUFFER1_REPLACE:
        try:
            _common_service(spec)
        except UnsupportedModelError:
            if not spec.all_exponential():
                raise UnsupportedModelError(
                    "one-slot-buffer bounds need either one service law shared "
                    "by all classes or exponential service everywhere; use the "
                    "simulate command"
                ) from None
            pi = stationary(build_rate_matrix(spec))
            profile = RejectionProfile(tuple(
                buffer_full_prob(spec, pi, i) for i in range(1, spec.k + 1)))
        else:
            profile = rejection_probs(spec)
        return paoi_upper_bound(spec, profile)
    if d is Discipline.LCFS_INFINITE:
        return lcfs_paoi_upper_bound(spec)
    raise UnsupportedModelError(
        "fcfs_infinite has an exact analysis, no bound; use the exact command"
    )


def _format(value) -> str:
    if value is None:
        return ""
    return f"{value:.12g}"


def _component_row(base: dict, i: int, method: str,
                   comps: PAoIComponents) -> dict:
    row = dict(base)
    row.update({
        "class": i,
        "method": method,
        "paoi": comps.total,
        "ci_halfwidth": None,
        "E_P": comps.service,
        "E_W": comps.buffer_busy,
        "E_I": comps.interarrival,
        "E_G": comps.gap,
    })
    return row


def build_rows(verb: str, exp: Experiment) -> list[dict]:
    points: list[tuple[float | None, SystemSpec]]
    if exp.sweep is None:
        points = [(None, exp.spec)]
    else:
        points = [(v, apply_sweep_value(exp.spec, exp.sweep, v)) for v in exp.sweep.grid]
    rows = []
    for value, spec in points:
        base = {
            "sweep_param": exp.sweep.parameter if exp.sweep else "",
            "sweep_value": value,
        }
        for d in exp.disciplines:
            dbase = dict(base, discipline=d.value)
            analytic: list[tuple[str, tuple[PAoIComponents, ...]]] = []
            if verb == "exact":
                analytic.append(("exact", _exact_components(spec, d)))
            elif verb == "bounds":
                analytic.append(("bound", _bound_components(spec, d)))
            elif verb == "compare":
                # emit every analytic method the model admits next to
                # the simulation, so one CSV carries the whole overlay
                for method, compute in (("exact", _exact_components),
                                        ("bound", _bound_components)):
                    try:
                        analytic.append((method, compute(spec, d)))
                    except UnsupportedModelError:
                        pass
                if not analytic:
                    raise UnsupportedModelError(
                        f"no analytic method applies to {d.value} with these "
                        "service laws; use the simulate command"
                    )
            for method, comps in analytic:
                for i in range(1, spec.k + 1):
                    rows.append(_component_row(dbase, i, method, comps[i - 1]))
            if verb in ("simulate", "compare"):
                est = estimate_from_run(run_simulation(spec, d, exp.sim))
                bound = next((comps for m, comps in analytic if m == "bound"), None)
                for i in range(1, spec.k + 1):
                    e = est.per_class[i - 1]
                    row = dict(dbase)
                    row.update({
                        "class": i,
                        "method": "sim",
                        "paoi": e.paoi_mean,
                        "ci_halfwidth": e.ci_halfwidth,
                        "E_P": None, "E_W": None, "E_I": None, "E_G": None,
                    })
                    if verb == "compare" and bound is not None:
                        row["bound_minus_sim"] = bound[i - 1].total - e.paoi_mean
                    rows.append(row)
    return rows


def write_csv(rows: list[dict], columns: list[str], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                row.get("sweep_param", ""),
                _format(row.get("sweep_value")),
                row.get("discipline", ""),
                row.get("class", ""),
                row.get("method", ""),
                _format(row.get("paoi")),
                _format(row.get("ci_halfwidth")),
                _format(row.get("E_P")),
                _format(row.get("E_W")),
                _format(row.get("E_I")),
                _format(row.get("E_G")),
            ] + ([_format(row.get("bound_minus_sim"))] if "bound_minus_sim" in columns else []))


def _advise(exp: Experiment, out_path: str) -> None:
    spec = exp.spec
    given = fcfs_average_paoi(spec)
    order = optimal_priority_order(spec)
    recommended = fcfs_average_for_order(spec, order)
    payload = {
        "recommended_order": list(order),
        "given_average": given,
        "recommended_average": recommended,
    }
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
    print(f"recommended priority order: {list(order)}")
    print(f"average peak age: given order {given:.6g}, recommended {recommended:.6g}")
    print(f"wrote {out_path}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="paoi",
        description="Peak age of information for multi-class priority queues.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in [
        ("exact", "exact per-class peak age (chain or FCFS formula)"),
        ("bounds", "analytic upper bounds (one-slot buffer or LCFS)"),
        ("simulate", "discrete-event simulation estimates"),
        ("compare", "analytic values next to simulation estimates"),
        ("advise", "recommend an FCFS priority order"),
    ]:
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output path (CSV, or JSON for advise)")
    args = parser.parse_args(argv)
    try:
        exp = load_experiment(args.config, args.verb)
        out_path = args.out or exp.output
        if out_path is None:
            raise ValidationError(
                "no output path: pass --out or set \"output\" in the config"
            )
        if args.verb == "advise":
            _advise(exp, out_path)
            return 0
        rows = build_rows(args.verb, exp)
        columns = list(CSV_COLUMNS)
        if args.verb == "compare":
            columns.append("bound_minus_sim")
        write_csv(rows, columns, out_path)
        npoints = len(exp.sweep.grid) if exp.sweep else 1
        sweep_note = f" sweep={exp.sweep.parameter} x{npoints}" if exp.sweep else ""
        names = ",".join(d.value for d in exp.disciplines)
        print(f"{args.verb}: k={exp.spec.k} disciplines={names}{sweep_note}")
        print(f"wrote {len(rows)} rows to {out_path}")
        return 0
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except UnsupportedModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
