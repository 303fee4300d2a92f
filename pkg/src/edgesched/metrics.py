"""Deadline accounting, sweeps and the CSV outputs."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import ConfigError

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("policy", "axis", "value", "met_count", "loss_count", "mean_latency_ms")
TASK_HEADER = (
    "policy", "axis", "value", "task_id", "arrival_ms", "completion_ms",
    "executed_on", "latency_ms", "met_deadline", "lost",
)
SWEEP_AXES = ("deadline_ms", "cpu_load")


@dataclass(frozen=True)
class TaskRecord:
    task_id: int
    arrival_ms: float
    deadline_ms: float
    completion_ms: float | None = None  # None when lost
    executed_on: str | None = None

    @property
    def lost(self) -> bool:
        return self.completion_ms is None

    @property
    def latency_ms(self) -> float | None:
        return None if self.completion_ms is None else self.completion_ms - self.arrival_ms

    @property
    def met_deadline(self) -> bool:
        return self.latency_ms is not None and self.latency_ms <= self.deadline_ms


@dataclass
class ExperimentResult:
    records: list[TaskRecord]
    met_count: int
    loss_count: int
    missed_count: int
    per_device: dict[str, int]
    mean_latency_ms: float | None
    config: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    trace: list[str] | None = None

    @property
    def image_count(self) -> int:
        return len(self.records)

    def offload_fraction(self, device_id: str) -> float:
        return self.per_device.get(device_id, 0) / max(1, self.image_count)


def summarize(records: Iterable[TaskRecord], *, lost_as_missed: bool = True, config: dict | None = None) -> ExperimentResult:
    """Aggregate per-task records, ordered by task id.

    ``lost_as_missed=False`` leaves lost tasks out of ``missed_count``; they
    never count as met either way.
    """
    records = sorted(records, key=lambda r: r.task_id)
    met = sum(1 for r in records if r.met_deadline)
    lost = sum(1 for r in records if r.lost)
    missed = len(records) - met - (0 if lost_as_missed else lost)
    latencies = [r.latency_ms for r in records if r.latency_ms is not None]
    per_device = Counter(r.executed_on for r in records if r.executed_on is not None)
    return ExperimentResult(
        records=records,
        met_count=met,
        loss_count=lost,
        missed_count=missed,
        per_device=dict(sorted(per_device.items())),
        mean_latency_ms=sum(latencies) / len(latencies) if latencies else None,
        config=dict(config or {}),
    )


def with_deadline(records: Sequence[TaskRecord], deadline_ms: float) -> list[TaskRecord]:
    return [replace(r, deadline_ms=deadline_ms) for r in records]


@dataclass
class SweepPoint:
    label: str
    axis: str
    value: float
    result: ExperimentResult


@dataclass
class SweepTable:
    points: list[SweepPoint]
    partial: bool = False
    error: str | None = None

    def met_counts(self, label: str) -> list[int]:
        return [p.result.met_count for p in self.points if p.label == label]

    def lookup(self, label: str, value) -> ExperimentResult:
        for p in self.points:
            if p.label == label and p.value == value:
                return p.result
        raise KeyError((label, value))


def sweep(base, axis: str, values: Sequence, variants) -> SweepTable:
    """One simulation per (variant, value), variants outermost.

    ``base`` is an :class:`~edgesched.experiment.ExperimentConfig`;
    ``variants`` are :class:`~edgesched.workload.Variant` curves. A failing
    run stops the sweep; the points gathered so far come back flagged
    ``partial``.
    """
    from .experiment import run_experiment

    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    table = SweepTable([])
    for variant in variants:
        for value in values:
            try:
                config = base.for_variant(variant).with_axis(axis, value)
                result = run_experiment(config)
            except Exception as exc:  # noqa: BLE001 - reported on the table
                logger.error("sweep aborted at %s %s=%s: %s", variant.label, axis, value, exc)
                table.partial, table.error = True, f"{variant.label} {axis}={value}: {exc}"
                return table
            table.points.append(SweepPoint(variant.label, axis, value, result))
    return table


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.3f}".rstrip("0").rstrip(".") if value != int(value) else str(int(value))
    return str(value)


def summary_csv(table: SweepTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for p in table.points:
        r = p.result
        writer.writerow([p.label, p.axis, _fmt(p.value), r.met_count, r.loss_count, _fmt(r.mean_latency_ms)])
    return buf.getvalue()


def tasks_csv(table: SweepTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TASK_HEADER)
    for p in table.points:
        for rec in p.result.records:
            writer.writerow([
                p.label, p.axis, _fmt(p.value), rec.task_id, _fmt(rec.arrival_ms), _fmt(rec.completion_ms),
                rec.executed_on or "", _fmt(rec.latency_ms), _fmt(rec.met_deadline), _fmt(rec.lost),
            ])
    return buf.getvalue()


def gnuplot_columns(table: SweepTable) -> str:
    """Wide whitespace-separated table: sweep value, then met_count per curve."""
    labels = list(dict.fromkeys(p.label for p in table.points))
    values = list(dict.fromkeys(p.value for p in table.points))
    lines = ["# " + " ".join([table.points[0].axis if table.points else "value", *labels])]
    for value in values:
        row = [_fmt(value)]
        for label in labels:
            try:
                row.append(str(table.lookup(label, value).met_count))
            except KeyError:
                row.append("?")
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"
