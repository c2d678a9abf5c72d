"""Result serialization: per-activation CSV rows and a JSON document.

Both writers are deterministic: fixed column order, times printed with
six decimal places, JSON keys sorted. Running the same scenario with
the same seed twice produces byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

from .network import DeadlineOutcome
from .orchestration import ActivationRecord, collect_results

__all__ = ["ResultsDocument", "has_missed_deadline", "render_csv", "render_json"]

CSV_COLUMNS = (
    "activation_id",
    "release_s",
    "finish_s",
    "makespan_s",
    "deadline_outcome",
    "placement_config",
    "virt_config",
    "payload_bytes",
    "seed",
)


@dataclass
class ResultsDocument:
    """A finished run: its metadata and the per-activation records."""

    metadata: dict
    records: Sequence[ActivationRecord]

    def summary(self) -> dict:
        return collect_results(self.records)


def _time(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def render_csv(doc: ResultsDocument) -> str:
    """One row per activation, in activation order."""
    meta = doc.metadata
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in doc.records:
        writer.writerow([
            record.activation_id,
            _time(record.release_s),
            _time(record.finish_s),
            _time(record.makespan_s),
            record.outcome.value,
            meta.get("placement_config", ""),
            meta.get("virt_config", ""),
            meta.get("payload_bytes", ""),
            meta.get("seed", ""),
        ])
    return buffer.getvalue()


def _rounded(value):
    return None if value is None else round(value, 6)


def render_json(doc: ResultsDocument) -> str:
    """The whole run as one JSON document: metadata, records, summary."""
    records = [
        {
            "activation_id": record.activation_id,
            "release_s": _rounded(record.release_s),
            "finish_s": _rounded(record.finish_s),
            "makespan_s": _rounded(record.makespan_s),
            "deadline_outcome": record.outcome.value,
        }
        for record in doc.records
    ]
    summary = doc.summary()
    if "ecdf" in summary:
        summary["ecdf"] = [[_rounded(m), _rounded(p)] for m, p in summary["ecdf"]]
    for key in ("min_makespan_s", "median_makespan_s", "max_makespan_s"):
        if key in summary:
            summary[key] = _rounded(summary[key])
    document = {
        "metadata": doc.metadata,
        "records": records,
        "summary": summary,
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def has_missed_deadline(doc: ResultsDocument) -> bool:
    return any(record.outcome is DeadlineOutcome.MISSED for record in doc.records)
