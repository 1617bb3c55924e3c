"""Inference, confusion metrics and per-scenario report tables.

Metrics treat the attack class (1) as positive.  Precision, recall and F1
are computed per class and macro-averaged with equal class weight; an
undefined per-class ratio (0/0) counts as 0 before averaging, which is
what produces the characteristic 0.5 macro precision on attack-free
spans.  Prediction ties break to benign.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import EvalError
from .features import FeatureConfig, make_feature_table
from .frame_codec import decode_stream
from .gnn.batching import GraphBatch, chunk_batches
from .gnn.models import Hyperparams, ModelParams, forward
from .gnn.train import train
from .graph_stream import WindowGraph, build_windows, samples_from_messages
from .log_io import CanLog
from .traffic_synth import SCENARIO_GRID, build_scenario, scenario_spec

REPORT_CSV_HEADER = "scenario,model,accuracy,precision,recall,f1,tp,fp,tn,fn"
DEFAULT_SPLIT_FRACTION = 0.7
DEFAULT_CHUNK_WINDOWS = 32

Key = tuple[int, int]  # (window stream index, can id)


def detect(params: ModelParams, batches: list[GraphBatch]) -> dict[Key, int]:
    """Argmax class per (window, node); a tie counts as benign."""
    predictions: dict[Key, int] = {}
    for batch in batches:
        scores = forward(params, batch).data
        labels = (scores[:, 1] > scores[:, 0]).astype(int)
        for key, label in zip(batch.keys(), labels):
            predictions[key] = int(label)
    return predictions


@dataclass(frozen=True, slots=True)
class DetectionReport:
    scenario: str
    model: str
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    @property
    def evaluated(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def attack_f1(self) -> float:
        precision = _ratio(self.tp, self.tp + self.fp)
        recall = _ratio(self.tp, self.tp + self.fn)
        return _f1(precision, recall)

    def csv_row(self) -> str:
        return (
            f"{self.scenario},{self.model},{self.accuracy:.3f},{self.macro_precision:.3f},"
            f"{self.macro_recall:.3f},{self.macro_f1:.3f},{self.tp},{self.fp},{self.tn},{self.fn}"
        )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _f1(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def metrics(
    predictions: dict[Key, int],
    truth: dict[Key, int],
    scenario: str = "-",
    model: str = "-",
) -> DetectionReport:
    """Confusion counts and macro-averaged metrics over aligned keys."""
    if not predictions or not truth:
        raise EvalError("cannot score an empty prediction or truth set")
    for key in sorted(truth):
        if key not in predictions:
            raise EvalError(f"prediction missing for key (window {key[0]}, id {key[1]:X})")
    for key in sorted(predictions):
        if key not in truth:
            raise EvalError(f"truth missing for key (window {key[0]}, id {key[1]:X})")

    tp = fp = tn = fn = 0
    for key, t in truth.items():
        p = predictions[key]
        if t == 1:
            tp, fn = (tp + 1, fn) if p == 1 else (tp, fn + 1)
        else:
            tn, fp = (tn + 1, fp) if p == 0 else (tn, fp + 1)

    total = tp + fp + tn + fn
    per_class = []
    for cls in (0, 1):
        correct = tn if cls == 0 else tp
        predicted = (tn + fn) if cls == 0 else (tp + fp)
        actual = (tn + fp) if cls == 0 else (tp + fn)
        precision = _ratio(correct, predicted)
        recall = _ratio(correct, actual)
        per_class.append((precision, recall, _f1(precision, recall)))
    return DetectionReport(
        scenario=scenario,
        model=model,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / total,
        macro_precision=(per_class[0][0] + per_class[1][0]) / 2,
        macro_recall=(per_class[0][1] + per_class[1][1]) / 2,
        macro_f1=(per_class[0][2] + per_class[1][2]) / 2,
    )


def report_csv(reports: list[DetectionReport]) -> str:
    lines = [REPORT_CSV_HEADER]
    lines.extend(r.csv_row() for r in reports)
    return "\n".join(lines) + "\n"


def report_table(reports: list[DetectionReport]) -> str:
    """Aligned plain-text table, scenario-major in input order."""
    headers = ("scenario", "model", "accuracy", "precision", "recall", "f1", "evaluated")
    rows = [
        (
            r.scenario,
            r.model,
            f"{r.accuracy:.3f}",
            f"{r.macro_precision:.3f}",
            f"{r.macro_recall:.3f}",
            f"{r.macro_f1:.3f}",
            str(r.evaluated),
        )
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    out = io.StringIO()
    out.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
    for row in rows:
        out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
    return out.getvalue()


# -- scenario pipeline ----------------------------------------------------


def log_to_windows(log: CanLog, config: FeatureConfig) -> list[WindowGraph]:
    samples = samples_from_messages(decode_stream(log.frames))
    return list(build_windows(samples, window_size=config.window_size))


def split_windows(
    windows: list[WindowGraph], fraction: float = DEFAULT_SPLIT_FRACTION
) -> tuple[list[WindowGraph], list[WindowGraph]]:
    """Chronological split: first `fraction` of windows train, rest test."""
    if not 0 < fraction < 1:
        raise EvalError(f"split fraction must be in (0, 1), got {fraction}")
    cut = int(len(windows) * fraction)
    return windows[:cut], windows[cut:]


def _model_seed(seed: int, scenario: int, model: str) -> int:
    index = ("gcnn", "gat", "sage", "transformer").index(model)
    return int(np.random.SeedSequence([seed, scenario, index]).generate_state(1)[0])


@dataclass(slots=True)
class ScenarioRun:
    """Everything bench produced for one scenario."""

    scenario: int
    log: CanLog
    reports: list[DetectionReport]


def run_scenario(
    scenario: int,
    models: list[str],
    seed: int,
    config: FeatureConfig | None = None,
    hyper: Hyperparams | None = None,
    split_fraction: float = DEFAULT_SPLIT_FRACTION,
) -> ScenarioRun:
    """Synthesize one scenario, train each model on the first part of the
    window stream and score it on the rest."""
    config = config or FeatureConfig()
    hyper = hyper or Hyperparams()
    config.validate()
    log = build_scenario(scenario_spec(scenario, seed=seed))
    windows = log_to_windows(log, config)
    table = make_feature_table(
        windows,
        d=config.damping,
        tol=config.tol,
        max_iter=config.max_iter,
        lookback=config.lookback,
    )
    train_windows, test_windows = split_windows(windows, split_fraction)
    if not train_windows or not test_windows:
        raise EvalError(f"scenario {scenario}: too few windows to split")
    train_batches = chunk_batches(train_windows, table, DEFAULT_CHUNK_WINDOWS)
    test_batches = chunk_batches(test_windows, table, DEFAULT_CHUNK_WINDOWS)
    truth = {
        (w.index, v): w.node_labels[v] for w in test_windows for v in w.sorted_nodes()
    }
    split_desc = (
        f"windows 0..{train_windows[-1].index} train, "
        f"{test_windows[0].index}..{test_windows[-1].index} test"
    )
    reports = []
    for model in models:
        report = train(
            model,
            train_batches,
            hyper,
            seed=_model_seed(seed, scenario, model),
            split=split_desc,
        )
        predictions = detect(report.params, test_batches)
        reports.append(
            metrics(predictions, truth, scenario=f"scenario-{scenario}", model=model)
        )
    return ScenarioRun(scenario=scenario, log=log, reports=reports)


def run_bench(
    scenarios: list[int],
    models: list[str],
    seed: int,
    config: FeatureConfig | None = None,
    hyper: Hyperparams | None = None,
) -> list[DetectionReport]:
    """The full grid sweep: scenario-major rows, models in given order."""
    for s in scenarios:
        if s not in SCENARIO_GRID:
            raise EvalError(f"unknown scenario {s}")
    reports: list[DetectionReport] = []
    for scenario in scenarios:
        reports.extend(run_scenario(scenario, models, seed, config, hyper).reports)
    return reports
