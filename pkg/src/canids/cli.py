"""Command line front end.

Subcommands: synth, decode, graph, features, train, detect, eval, bench.
Exit codes: 0 success, 1 usage error (bad flags or out-of-range settings),
2 data error (missing or malformed inputs).

Numeric settings may come from a plain ``key=value`` config file passed
with ``--config``; explicit flags override file values.  There is no
environment-variable configuration, so a command line plus its files
fully determines the run.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

from .detect_eval import (
    DetectionReport,
    detect,
    log_to_windows,
    metrics,
    report_csv,
    report_table,
    run_bench,
    split_windows,
)
from .errors import CanidsError, EvalError
from .features import FeatureConfig, FeatureTable, make_feature_table
from .frame_codec import decode_stream
from .gnn.batching import chunk_batches
from .gnn.checkpoint import load_checkpoint, save_checkpoint
from .gnn.models import MODEL_KINDS, Hyperparams
from .gnn.train import train as train_model
from .graph_stream import dump_windows
from .log_io import read_log, write_log
from .traffic_synth import SCENARIO_GRID, build_scenario, load_scenario_config, scenario_spec

PREDICTIONS_CSV_HEADER = "window,can_id_hex,label"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); route to our code 1
        raise UsageError(message)


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _resolve(args: argparse.Namespace, name: str, default, cast):
    """Flag value if given, else config file value, else default."""
    given = getattr(args, name, None)
    if given is not None:
        return given
    config = getattr(args, "_config_values", {})
    if name in config:
        try:
            return cast(config[name])
        except ValueError as exc:
            raise UsageError(f"config value {name}={config[name]!r}: {exc}") from exc
    return default


def _feature_config(args) -> FeatureConfig:
    config = FeatureConfig(
        window_size=_resolve(args, "window_size", 100, int),
        lookback=_resolve(args, "lookback", 150, int),
        damping=_resolve(args, "damping", 0.85, float),
        tol=_resolve(args, "tol", 1e-9, float),
        max_iter=_resolve(args, "max_iter", 200, int),
    )
    try:
        config.validate()
    except CanidsError as exc:
        raise UsageError(str(exc)) from exc
    return config


def _hyperparams(args) -> Hyperparams:
    hyper = Hyperparams(
        hidden_dim=_resolve(args, "hidden_dim", 16, int),
        layers=_resolve(args, "layers", 2, int),
        heads=_resolve(args, "heads", 1, int),
        learning_rate=_resolve(args, "lr", 1e-2, float),
        epochs=_resolve(args, "epochs", 300, int),
    )
    try:
        hyper.validate()
    except CanidsError as exc:
        raise UsageError(str(exc)) from exc
    return hyper


def _parse_scenarios(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            try:
                out.extend(range(int(lo), int(hi) + 1))
            except ValueError as exc:
                raise UsageError(f"bad scenario range {part!r}") from exc
        else:
            try:
                out.append(int(part))
            except ValueError as exc:
                raise UsageError(f"bad scenario {part!r}") from exc
    for s in out:
        if s not in SCENARIO_GRID:
            raise UsageError(f"scenario {s} outside 1..10")
    return out


def _parse_models(text: str) -> list[str]:
    aliases = {"gcn": "gcnn", "graphsage": "sage"}
    models = []
    for name in text.split(","):
        name = aliases.get(name.strip().lower(), name.strip().lower())
        if name not in MODEL_KINDS:
            raise UsageError(f"unknown model {name!r}; choose from {', '.join(MODEL_KINDS)}")
        models.append(name)
    return models


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


# -- subcommand bodies ------------------------------------------------------


def _cmd_synth(args) -> int:
    seed = _resolve(args, "seed", 0, int)
    horizon = _resolve(args, "horizon", 30.0, float)
    if horizon <= 0:
        raise UsageError(f"horizon must be positive, got {horizon}")
    if args.scenario_config:
        spec = load_scenario_config(args.scenario_config)
    else:
        if args.scenario is None:
            raise UsageError("either --scenario or --scenario-config is required")
        if args.scenario not in SCENARIO_GRID:
            raise UsageError(f"scenario {args.scenario} outside 1..10")
        spec = scenario_spec(args.scenario, seed=seed, horizon=horizon)
    log = build_scenario(spec)
    write_log(log, args.out)
    print(f"wrote {len(log.frames)} frames to {args.out}")
    return 0


def _cmd_decode(args) -> int:
    log = read_log(args.log)
    out = _open_out(args.out)
    try:
        out.write(
            "label,timestamp,interface,can_id_hex,priority,message_type_id,"
            "service_flag,source_node_id,transfer_id,start,end,toggle,"
            "app_payload_hex,warnings\n"
        )
        for msg in decode_stream(log.frames):
            f, u, t = msg.frame, msg.uavcan_id, msg.tail
            out.write(
                f"{f.label},{f.timestamp:.6f},{f.interface},{f.can_id:X},"
                f"{u.priority},{u.message_type_id},{int(u.service_flag)},"
                f"{u.source_node_id},{t.transfer_id},{int(t.start_of_transfer)},"
                f"{int(t.end_of_transfer)},{int(t.toggle)},"
                f"{msg.app_payload.hex().upper()},{';'.join(msg.warnings)}\n"
            )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_graph(args) -> int:
    config = _feature_config(args)
    log = read_log(args.log)
    windows = log_to_windows(log, config)
    out = _open_out(args.out)
    try:
        dump_windows(windows, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_features(args) -> int:
    config = _feature_config(args)
    log = read_log(args.log)
    windows = log_to_windows(log, config)
    table = make_feature_table(
        windows,
        d=config.damping,
        tol=config.tol,
        max_iter=config.max_iter,
        lookback=config.lookback,
    )
    out = _open_out(args.out)
    try:
        table.write_csv(out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_train(args) -> int:
    config = _feature_config(args)
    hyper = _hyperparams(args)
    seed = _resolve(args, "seed", 0, int)
    split = _resolve(args, "split", 0.7, float)
    if not 0 < split <= 1:
        raise UsageError(f"split must be in (0, 1], got {split}")
    models = _parse_models(args.model)
    if len(models) != 1:
        raise UsageError("train takes exactly one --model")
    log = read_log(args.log)
    windows = log_to_windows(log, config)
    table = make_feature_table(
        windows, d=config.damping, tol=config.tol,
        max_iter=config.max_iter, lookback=config.lookback,
    )
    if split < 1:
        train_windows, _ = split_windows(windows, split)
    else:
        train_windows = windows
    if not train_windows:
        raise EvalError("no training windows (log too short for the split)")
    batches = chunk_batches(train_windows, table)
    split_desc = f"first {len(train_windows)} of {len(windows)} windows"
    report = train_model(models[0], batches, hyper, seed=seed, split=split_desc)
    save_checkpoint(report.params, config, args.out)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch,loss\n")
            for epoch, loss in enumerate(report.losses):
                fh.write(f"{epoch},{loss:.9g}\n")
    final = f"{report.losses[-1]:.6f}" if report.losses else "n/a"
    print(f"trained {models[0]} on {split_desc}; final loss {final}; saved {args.out}")
    return 0


def _cmd_detect(args) -> int:
    params, config = load_checkpoint(args.checkpoint)
    log = read_log(args.log)
    windows = log_to_windows(log, config)
    table = make_feature_table(
        windows, d=config.damping, tol=config.tol,
        max_iter=config.max_iter, lookback=config.lookback,
    )
    batches = chunk_batches(windows, table) if windows else []
    predictions = detect(params, batches)
    out = _open_out(args.out)
    try:
        out.write(PREDICTIONS_CSV_HEADER + "\n")
        for window, can_id in sorted(predictions):
            out.write(f"{window},{can_id:X},{predictions[(window, can_id)]}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _read_labels_csv(path: str) -> dict[tuple[int, int], int]:
    """Accept a predictions csv or a feature table csv; both carry labels."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line]
    if not lines:
        raise EvalError(f"{path}: empty label file")
    header = lines[0]
    if header == PREDICTIONS_CSV_HEADER:
        label_col, expected = 2, 3
    elif header == "window,can_id_hex,pagerank,density,label":
        label_col, expected = 4, 5
    else:
        raise EvalError(f"{path}: unrecognized header {header!r}")
    out: dict[tuple[int, int], int] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != expected:
            raise EvalError(f"{path}:{line_no}: bad column count")
        try:
            out[(int(parts[0]), int(parts[1], 16))] = int(parts[label_col])
        except ValueError as exc:
            raise EvalError(f"{path}:{line_no}: {exc}") from exc
    return out


def _cmd_eval(args) -> int:
    predictions = _read_labels_csv(args.pred)
    truth = _read_labels_csv(args.truth)
    report = metrics(predictions, truth, scenario=args.scenario, model=args.model)
    csv_text = report_csv([report])
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    print(report_table([report]), end="")
    return 0


def _cmd_bench(args) -> int:
    seed = _resolve(args, "seed", 0, int)
    scenarios = _parse_scenarios(args.scenarios)
    models = _parse_models(args.models)
    config = _feature_config(args)
    hyper = _hyperparams(args)
    reports = run_bench(scenarios, models, seed, config, hyper)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report_csv(reports), encoding="utf-8")
    (out_dir / "report.txt").write_text(report_table(reports), encoding="utf-8")
    print(report_table(reports), end="")
    print(f"wrote {out_dir / 'report.csv'}")
    return 0


# -- argument wiring ---------------------------------------------------------


def _add_feature_flags(p: _Parser) -> None:
    p.add_argument("--window-size", type=int, dest="window_size")
    p.add_argument("--lookback", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")


def _add_hyper_flags(p: _Parser) -> None:
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="canids", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled scenario log")
    p.add_argument("--scenario", type=int)
    p.add_argument("--scenario-config", dest="scenario_config")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode", help="dump decoded message fields")
    p.add_argument("--log", required=True)
    p.add_argument("--out", default="-")

    p = sub.add_parser("graph", help="dump window graphs")
    p.add_argument("--log", required=True)
    p.add_argument("--out", default="-")
    _add_feature_flags(p)

    p = sub.add_parser("features", help="compute the per-node feature table")
    p.add_argument("--log", required=True)
    p.add_argument("--out", default="-")
    _add_feature_flags(p)

    p = sub.add_parser("train", help="train one model on a log")
    p.add_argument("--log", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--seed", type=int)
    p.add_argument("--split", type=float)
    _add_feature_flags(p)
    _add_hyper_flags(p)

    p = sub.add_parser("detect", help="label a log with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", default="-")

    p = sub.add_parser("eval", help="score predictions against truth labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--scenario", default="-")
    p.add_argument("--model", default="-")
    p.add_argument("--out")

    p = sub.add_parser("bench", help="full scenario sweep with training")
    p.add_argument("--scenarios", default="1-10")
    p.add_argument("--models", default=",".join(MODEL_KINDS))
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_feature_flags(p)
    _add_hyper_flags(p)

    for sp in sub.choices.values():
        sp.add_argument("--config", dest="config_file")
    return parser


_COMMANDS = {
    "synth": _cmd_synth,
    "decode": _cmd_decode,
    "graph": _cmd_graph,
    "features": _cmd_features,
    "train": _cmd_train,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args._config_values = (
            _read_config_file(args.config_file) if getattr(args, "config_file", None) else {}
        )
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"data error: missing file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (CanidsError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
