"""Evaluation report records, JSON persistence and Table-3 style merging."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable


@dataclass
class EvalReport:
    task: str
    operator: str
    embedding: str = ""
    accuracy: float | None = None
    coverage: float = 1.0
    per_category: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"coverage {self.coverage} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        keys = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in keys})

    def save(self, directory: str | Path, overwrite: bool = False) -> Path:
        path = Path(directory) / report_filename(self.task, self.embedding, self.operator)
        if path.exists() and not overwrite:
            raise FileExistsError(f"report already exists: {path}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def report_filename(task: str, embedding: str, operator: str) -> str:
    return f"{task}_{embedding}_{operator}.json"


def load_report(path: str | Path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def file_digest(paths: Iterable[str | Path]) -> str:
    h = hashlib.sha256()
    for p in sorted(str(p) for p in paths):
        p = Path(p)
        files = sorted(f for f in p.rglob("*") if f.is_file()) if p.is_dir() else [p]
        for f in files:
            h.update(f.name.encode())
            h.update(f.read_bytes())
    return h.hexdigest()


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


# metric column(s) per task in the merged table
TABLE_COLUMNS = {
    "eval-kbc": ("mean_rank", "hits_at_10"),
}


class ReportMismatch(ValueError):
    pass


def _cells(report: EvalReport) -> dict[str, float | None]:
    cols = TABLE_COLUMNS.get(report.task)
    if cols is None:
        acc = report.accuracy
        return {report.task: None if acc is None else round(100.0 * acc, 2)}
    return {f"{report.task}:{c}": report.metrics.get(c) for c in cols}


def merge_reports(reports: list[EvalReport]) -> tuple[list[str], list[list]]:
    """Rows embedding x operator, one column per task metric.

    Refuses reports of the same task computed on different dataset files.
    """
    dataset_hash: dict[str, str] = {}
    for r in reports:
        h = r.meta.get("dataset_hash")
        if h is None:
            continue
        seen = dataset_hash.setdefault(r.task, h)
        if seen != h:
            raise ReportMismatch(f"reports for task {r.task} use different datasets")
    columns: list[str] = []
    rows: dict[tuple[str, str], dict] = {}
    for r in reports:
        cells = _cells(r)
        for c in cells:
            if c not in columns:
                columns.append(c)
        rows.setdefault((r.embedding, r.operator), {}).update(cells)
    header = ["embedding", "operator"] + columns
    body = [[emb, op] + [vals.get(c) for c in columns] for (emb, op), vals in rows.items()]
    return header, body


def write_table(header, body, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in body:
            w.writerow(["" if v is None else v for v in row])
