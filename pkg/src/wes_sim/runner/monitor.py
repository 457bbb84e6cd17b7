"""Append-only recorder of log records and metric series."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from ..log import LogRecord, dumps


class NonMonotoneTick(ValueError):
    pass


@dataclass
class Monitor:
    metrics: tuple[str, ...] = ()
    log: list[LogRecord] = field(default_factory=list)
    series: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    totals: dict[str, float] = field(default_factory=dict)
    actions: int = 0

    def __post_init__(self) -> None:
        for m in self.metrics:
            self.series.setdefault(m, [])
            self.totals.setdefault(m, 0.0)

    def append(self, record: LogRecord) -> None:
        if self.log and record.vtime < self.log[-1].vtime:
            raise NonMonotoneTick(f"record at tick {record.vtime} after tick {self.log[-1].vtime}")
        self.log.append(record)
        if record.is_action:
            self.actions += 1

    def total(self, metric: str) -> float:
        return self.totals.get(metric, 0.0)


def record_metric(monitor: Monitor, metric: str, tick: int, value: float) -> None:
    series = monitor.series.setdefault(metric, [])
    if series and tick < series[-1][0]:
        raise NonMonotoneTick(f"{metric}: tick {tick} precedes {series[-1][0]}")
    series.append((tick, value))
    monitor.totals[metric] = monitor.totals.get(metric, 0.0) + value


def log_jsonl(monitor: Monitor) -> str:
    return dumps(monitor.log)


def metrics_csv(series: dict[str, list[tuple[int, float]]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["metric", "tick", "value"])
    for metric in sorted(series):
        for tick, value in series[metric]:
            writer.writerow([metric, tick, repr(float(value))])
    return out.getvalue()
