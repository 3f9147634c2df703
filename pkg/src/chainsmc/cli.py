"""Command-line front end.

Subcommands: simulate | estimate | test | sweep | check-data.  Experiments
are described by a JSON config file plus flag overrides; all results go to
stdout as JSON or CSV, diagnostics to stderr.  Exit codes: 0 ok, 2 config
error, 3 dataset error, 4 runtime/simulation error, 5 property parse error,
6 undecided hypothesis test, 7 unreliable data.

Config schema (all fields optional unless noted):

    {
      "model": {"name": "dns" | "mempool" | "consensus",   (required)
                 "params": { ... per-model parameters ... }},
      "property": "F[0,1000](spoofed.amount > 0)",
      "delta": 0.1, "alpha": 0.1, "seed": 42, "horizon": 1000.0,
      "datasets": [{"role": "mining_time", "path": "mining.csv",
                    "unit": "seconds"}],
      "sweep": {"parameter": "t_prime" | "time_bound_x",
                 "segments": [[from, to, step], ...]},
      "allow_unreliable": false,
      "parallel": false
    }
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from .attacks import (
    AttackModelBundle,
    DnsMitigation,
    DnsParams,
    DoubleSpendParams,
    build_consensus_model,
    build_dns_model,
    build_mempool_model,
)
from .errors import (
    BadIntervalError,
    BadParameterError,
    ChainSmcError,
    DatasetError,
    EmptySupportError,
    FormulaSyntaxError,
    ModelValidationError,
    UnknownVariableError,
)
from .kernel import simulate, write_trace_csv
from .monitor import parse_formula
from .smc import EstimationRequest, HypothesisRequest, Decision, estimate, hypothesis_test
from .stochastics import (
    Dataset,
    Empirical,
    ReliabilityPolicy,
    UNITS,
    load_dataset,
    rng_stream,
    validate_dataset,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_RUNTIME = 4
EXIT_PROPERTY = 5
EXIT_UNDECIDED = 6
EXIT_UNRELIABLE = 7

_MODEL_NAMES = ("dns", "mempool", "consensus")
_DATASET_ROLES = ("mining_time", "propagation_delay")


class ConfigError(ChainSmcError):
    """The experiment description itself is unusable."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class DatasetRef:
    role: str
    path: str
    unit: str = "seconds"


@dataclass
class SweepSpec:
    parameter: str  # "time_bound_x" | "t_prime"
    segments: list  # of (start, stop, step)


@dataclass
class ExperimentConfig:
    model_name: str
    model_params: dict = field(default_factory=dict)
    property_text: str | None = None
    delta: float = 0.1
    alpha: float = 0.1
    seed: int = 0
    horizon: float | None = None
    datasets: list = field(default_factory=list)
    sweep: SweepSpec | None = None
    allow_unreliable: bool = False
    parallel: bool = False


_TOP_KEYS = {"model", "property", "delta", "alpha", "seed", "horizon",
             "datasets", "sweep", "allow_unreliable", "parallel"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    model = raw.get("model")
    if not isinstance(model, dict) or "name" not in model:
        raise ConfigError('config needs "model": {"name": ...}')
    bad = set(model) - {"name", "params"}
    if bad:
        raise ConfigError(f"unknown model keys: {sorted(bad)}")
    name = model["name"]
    if name not in _MODEL_NAMES:
        raise ConfigError(f"unknown model {name!r}; expected one of {_MODEL_NAMES}")
    params = model.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError('"model.params" must be an object')

    datasets = []
    for entry in raw.get("datasets", []):
        if not isinstance(entry, dict) or "role" not in entry or "path" not in entry:
            raise ConfigError('each dataset needs "role" and "path"')
        role = entry["role"]
        if role not in _DATASET_ROLES:
            raise ConfigError(f"unknown dataset role {role!r}")
        unit = entry.get("unit", "seconds")
        if unit not in UNITS:
            raise ConfigError(f"unknown dataset unit {unit!r}")
        datasets.append(DatasetRef(role=role, path=entry["path"], unit=unit))

    sweep = None
    if "sweep" in raw and raw["sweep"] is not None:
        sw = raw["sweep"]
        if not isinstance(sw, dict) or "parameter" not in sw:
            raise ConfigError('"sweep" needs "parameter" and "segments"')
        if sw["parameter"] not in ("time_bound_x", "t_prime"):
            raise ConfigError(f"unknown sweep parameter {sw['parameter']!r}")
        segments = sw.get("segments", [])
        sweep = SweepSpec(parameter=sw["parameter"],
                          segments=[tuple(s) for s in segments])

    try:
        return ExperimentConfig(
            model_name=name,
            model_params=dict(params),
            property_text=raw.get("property"),
            delta=float(raw.get("delta", 0.1)),
            alpha=float(raw.get("alpha", 0.1)),
            seed=int(raw.get("seed", 0)),
            horizon=None if raw.get("horizon") is None else float(raw["horizon"]),
            datasets=datasets,
            sweep=sweep,
            allow_unreliable=bool(raw.get("allow_unreliable", False)),
            parallel=bool(raw.get("parallel", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# Model instantiation
# ---------------------------------------------------------------------------

def _load_role_dataset(config: ExperimentConfig, role: str) -> Dataset:
    ref = next((d for d in config.datasets if d.role == role), None)
    if ref is None:
        raise DatasetError(
            f"model {config.model_name!r} needs a dataset with role {role!r}")
    try:
        dataset = load_dataset(ref.path, unit=ref.unit)
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {ref.path}: {exc}") from None
    if not config.allow_unreliable:
        report = validate_dataset(dataset)
        if not report.reliable:
            raise DatasetError(
                f"dataset {ref.path} is not reliable: {'; '.join(report.messages)}")
    return dataset


def _dns_params(params: dict) -> DnsParams:
    params = dict(params)
    mitigation = params.pop("mitigation", None)
    try:
        if mitigation is not None:
            mitigation = DnsMitigation(**mitigation)
        return DnsParams(**params, mitigation=mitigation)
    except TypeError as exc:
        raise ConfigError(f"bad dns parameters: {exc}") from None


def _double_spend_params(params: dict, overrides: dict | None = None) -> DoubleSpendParams:
    merged = dict(params)
    if overrides:
        merged.update(overrides)
    if "t_prime" not in merged:
        raise ConfigError('model params need "t_prime"')
    try:
        return DoubleSpendParams(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad double-spend parameters: {exc}") from None


def instantiate_bundle(config: ExperimentConfig,
                       param_override: dict | None = None) -> AttackModelBundle:
    """Build the configured model; ``param_override`` replaces single fields
    (used by sweeps)."""
    name = config.model_name
    if name == "dns":
        params = dict(config.model_params)
        if param_override:
            params.update(param_override)
        return build_dns_model(_dns_params(params))
    if name == "mempool":
        dataset = _load_role_dataset(config, "mining_time")
        return build_mempool_model(
            _double_spend_params(config.model_params, param_override),
            Empirical(dataset))
    if name == "consensus":
        dataset = _load_role_dataset(config, "propagation_delay")
        return build_consensus_model(
            _double_spend_params(config.model_params, param_override),
            Empirical(dataset))
    raise ConfigError(f"unknown model {name!r}")


def _resolve_property(config: ExperimentConfig, bundle: AttackModelBundle):
    if config.property_text is not None:
        return parse_formula(config.property_text)
    return bundle.default_property


def _resolve_horizon(config: ExperimentConfig, bundle: AttackModelBundle) -> float:
    return bundle.default_horizon if config.horizon is None else config.horizon


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _emit_json(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def cmd_simulate(config: ExperimentConfig, trace_out_path: str) -> int:
    bundle = instantiate_bundle(config)
    horizon = _resolve_horizon(config, bundle)
    trace = simulate(bundle.model, horizon, rng_stream(config.seed, 0))
    write_trace_csv(trace, trace_out_path)
    last = trace.points[-1]
    _emit_json({"time": last.time, "values": last.values,
                "points": len(trace.points), "trace": trace_out_path})
    return EXIT_OK


def cmd_estimate(config: ExperimentConfig) -> int:
    bundle = instantiate_bundle(config)
    formula = _resolve_property(config, bundle)
    request = EstimationRequest(
        model=bundle.model, formula=formula,
        delta=config.delta, alpha=config.alpha,
        master_seed=config.seed,
        horizon=_resolve_horizon(config, bundle),
    )
    result = estimate(request, parallel=config.parallel)
    _emit_json(result.to_json_dict())
    return EXIT_OK


def cmd_test(config: ExperimentConfig, theta: float, epsilon: float = 0.01,
             beta: float | None = None) -> int:
    bundle = instantiate_bundle(config)
    formula = _resolve_property(config, bundle)
    request = HypothesisRequest(
        model=bundle.model, formula=formula,
        theta=theta, alpha=config.alpha, master_seed=config.seed,
        horizon=_resolve_horizon(config, bundle),
        beta=beta, epsilon=epsilon,
    )
    result = hypothesis_test(request)
    _emit_json(result.to_json_dict())
    return EXIT_OK if result.decision is not Decision.UNDECIDED else EXIT_UNDECIDED


def sweep_points(spec: SweepSpec) -> list:
    """The ordered lattice: segment [start, stop, step] contributes
    start, start+step, ..., stop; a point shared by adjacent segments is
    counted once."""
    if not spec.segments:
        raise ConfigError("sweep needs at least one segment")
    points: list[float] = []
    prev_stop = None
    for seg in spec.segments:
        if len(seg) != 3:
            raise ConfigError(f"segment {seg!r} must be [from, to, step]")
        start, stop, step = (float(x) for x in seg)
        if step <= 0 or start > stop:
            raise ConfigError(f"bad segment [{start}, {stop}, {step}]")
        if prev_stop is not None and start < prev_stop - 1e-9:
            raise ConfigError("sweep segments overlap or are out of order")
        count = int((stop - start) / step + 1e-9)
        for k in range(count + 1):
            value = start + k * step
            if points and abs(value - points[-1]) < 1e-9:
                continue
            points.append(value)
        prev_stop = stop
    return points


def run_sweep(config: ExperimentConfig):
    """Estimate at every sweep point; returns (points, results) with one
    EstimationResult per point, in order."""
    if config.sweep is None:
        raise ConfigError("config has no sweep block")
    parameter = config.sweep.parameter
    if parameter == "time_bound_x" and config.model_name != "dns":
        raise ConfigError("time_bound_x sweeps apply to the dns model")
    if parameter == "t_prime" and config.model_name == "dns":
        raise ConfigError("t_prime sweeps apply to the double-spend models")
    points = sweep_points(config.sweep)
    results = []
    for index, value in enumerate(points):
        if parameter == "time_bound_x":
            bundle = instantiate_bundle(config, {"request_window": value})
            formula = bundle.default_property  # bound must track the point
            horizon = value
        else:
            bundle = instantiate_bundle(config, {"t_prime": value})
            formula = _resolve_property(config, bundle)
            horizon = _resolve_horizon(config, bundle)
        request = EstimationRequest(
            model=bundle.model, formula=formula,
            delta=config.delta, alpha=config.alpha,
            master_seed=config.seed ^ index,
            horizon=horizon,
        )
        results.append(estimate(request, parallel=config.parallel))
    return points, results


def _format_param(value: float) -> str:
    return format(value, "g")


def cmd_sweep(config: ExperimentConfig, out_path: str | None = None) -> int:
    points, results = run_sweep(config)
    lines = ["param,p_hat,n_traces,successes"]
    for value, res in zip(points, results):
        lines.append(f"{_format_param(value)},{res.p_hat!r},{res.n_traces},{res.successes}")
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)
        print(f"wrote {len(points)} sweep rows to {out_path}", file=sys.stderr)
    return EXIT_OK


def cmd_check_data(path: str, unit: str = "seconds",
                   max_gap_days: float = 7.0, min_rows: int = 100) -> int:
    try:
        dataset = load_dataset(path, unit=unit, tolerant=True)
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from None
    policy = ReliabilityPolicy(max_gap_seconds=max_gap_days * 86400.0,
                               min_rows=min_rows)
    report = validate_dataset(dataset, policy)
    _emit_json({
        "reliable": report.reliable,
        "row_count": report.row_count,
        "null_count": report.null_count,
        "max_gap_seconds": report.max_gap_seconds,
        "first_timestamp": report.first_timestamp,
        "last_timestamp": report.last_timestamp,
        "messages": list(report.messages),
    })
    return EXIT_OK if report.reliable else EXIT_UNRELIABLE


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainsmc",
        description="Statistical model checking of blockchain attack models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--model", choices=_MODEL_NAMES)
        p.add_argument("--property", dest="property_text")
        p.add_argument("--delta", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--horizon", type=float)
        p.add_argument("--data", action="append", default=[],
                       metavar="ROLE=PATH", help="attach a dataset to a role")
        p.add_argument("--unit", default=None, choices=sorted(UNITS),
                       help="unit for --data files (default seconds)")
        p.add_argument("--allow-unreliable", action="store_true", default=None)
        p.add_argument("--parallel", action="store_true", default=None)

    p = sub.add_parser("simulate", help="run one trace and dump it as CSV")
    common(p)
    p.add_argument("--out", default="trace.csv", help="trace CSV path")

    p = sub.add_parser("estimate", help="estimate the property probability")
    common(p)

    p = sub.add_parser("test", help="sequential test against a threshold")
    common(p)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=None)

    p = sub.add_parser("sweep", help="estimate across a parameter sweep")
    common(p)
    p.add_argument("--out", default=None, help="sweep CSV path (default stdout)")

    p = sub.add_parser("check-data", help="validate a dataset file")
    p.add_argument("path")
    p.add_argument("--unit", default="seconds", choices=sorted(UNITS))
    p.add_argument("--max-gap-days", type=float, default=7.0)
    p.add_argument("--min-rows", type=int, default=100)

    return parser


def _effective_config(args) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
    elif args.model is not None:
        config = ExperimentConfig(model_name=args.model)
    else:
        raise ConfigError("need --config or --model")
    if args.model is not None:
        config.model_name = args.model
    if args.property_text is not None:
        config.property_text = args.property_text
    if args.delta is not None:
        config.delta = args.delta
    if args.alpha is not None:
        config.alpha = args.alpha
    if args.seed is not None:
        config.seed = args.seed
    if args.horizon is not None:
        config.horizon = args.horizon
    if args.allow_unreliable is not None:
        config.allow_unreliable = args.allow_unreliable
    if args.parallel is not None:
        config.parallel = args.parallel
    for item in args.data:
        role, sep, path = item.partition("=")
        if not sep or not path:
            raise ConfigError(f"--data expects ROLE=PATH, got {item!r}")
        if role not in _DATASET_ROLES:
            raise ConfigError(f"unknown dataset role {role!r}")
        unit = args.unit if args.unit is not None else "seconds"
        config.datasets = [d for d in config.datasets if d.role != role]
        config.datasets.append(DatasetRef(role=role, path=path, unit=unit))
    return config


def _dispatch(args) -> int:
    if args.command == "check-data":
        return cmd_check_data(args.path, unit=args.unit,
                              max_gap_days=args.max_gap_days,
                              min_rows=args.min_rows)
    config = _effective_config(args)
    if args.command == "simulate":
        return cmd_simulate(config, args.out)
    if args.command == "estimate":
        return cmd_estimate(config)
    if args.command == "test":
        return cmd_test(config, theta=args.theta, epsilon=args.epsilon,
                        beta=args.beta)
    if args.command == "sweep":
        return cmd_sweep(config, out_path=args.out)
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (FormulaSyntaxError, BadIntervalError, UnknownVariableError) as exc:
        print(f"property error: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (DatasetError, EmptySupportError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except (ConfigError, ModelValidationError, BadParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChainSmcError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
