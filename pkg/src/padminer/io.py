"""Dataset ingestion: single-series CSV, NAB, SMD and entity directories."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Literal

import numpy as np

from .series import EPOCH, Entity, TimeSeries, fill_missing

log = logging.getLogger(__name__)

Format = Literal["csv", "nab", "smd"]


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class Dataset:
    entities: list[Entity]
    labels: dict[str, np.ndarray] = field(default_factory=dict)

    def entity(self, entity_id: str) -> Entity:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(f"no entity {entity_id!r}")


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    try:
        return EPOCH + timedelta(seconds=float(text))
    except ValueError:
        pass
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    return ts if ts.tzinfo else ts.replace(tzinfo=timezone.utc)


def _read_timestamp_csv(path: Path) -> tuple[list[datetime], list[float]]:
    times, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected 'timestamp,value'")
            try:
                times.append(parse_timestamp(row[0]))
                values.append(float(row[1]) if row[1].strip() else float("nan"))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if len(values) < 2:
        raise DataError(f"{path}: fewer than two rows")
    return times, values


def _regular_grid(times: list[datetime], values: list[float], path) -> tuple[datetime, timedelta, np.ndarray]:
    secs = np.array([(t - times[0]).total_seconds() for t in times])
    steps = np.diff(secs)
    if (steps <= 0).any():
        raise DataError(f"{path}: timestamps are not strictly increasing")
    step = float(np.median(steps))
    idx = secs / step
    if not np.allclose(idx, np.round(idx), atol=1e-6):
        raise DataError(f"{path}: samples do not lie on a regular grid")
    idx = np.round(idx).astype(int)
    out = np.full(idx[-1] + 1, np.nan)
    out[idx] = values
    return times[0], timedelta(seconds=step), out


def read_series_csv(path, series_id: str | None = None, entity_id: str = "", sensor_type: str = "") -> tuple[TimeSeries, list[datetime]]:
    path = Path(path)
    times, values = _read_timestamp_csv(path)
    start, step, grid = _regular_grid(times, values, path)
    try:
        grid = fill_missing(grid)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    sid = series_id or path.stem
    ts = TimeSeries(sid, grid, entity_id or sid, sensor_type or path.stem, start, step)
    return ts, ts.timestamps()


def read_matrix(path, entity_id: str | None = None, sample_interval: timedelta = timedelta(minutes=1)) -> Entity:
    """One row per timestamp, one comma-separated column per sensor; optional header."""
    path = Path(path)
    rows, header = [], None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append([float(x) if x.strip() else float("nan") for x in row])
            except ValueError:
                if lineno == 1 and header is None:
                    header = [h.strip() for h in row]
                    continue
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if len(rows[-1]) != len(rows[0]):
                raise DataError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise DataError(f"{path}: empty file")
    arr = np.array(rows)
    eid = entity_id or path.stem
    names = header or [f"s{i}" for i in range(arr.shape[1])]
    sensors = []
    for c, name in enumerate(names):
        try:
            col = fill_missing(arr[:, c])
        except ValueError as exc:
            raise DataError(f"{path}: column {name}: {exc}") from None
        sensors.append(TimeSeries(f"{eid}/{name}", col, eid, name, EPOCH, sample_interval))
    return Entity(eid, tuple(sensors))


def read_point_labels(path) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(int(float(line.split(",")[-1])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: label must be 0 or 1") from None
    return np.array(vals, dtype=np.int8)


def nab_windows(labels_path, data_path) -> list[tuple[datetime, datetime]]:
    """Anomaly windows for one file from a NAB label JSON.

    Accepts NAB's ``{"group/file.csv": [[start, end], ...]}`` layout or a bare list.
    """
    with open(labels_path) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        name = Path(data_path).name
        matches = [v for k, v in doc.items() if Path(k).name == name]
        if not matches:
            raise DataError(f"{labels_path}: no label entry for {name}")
        doc = matches[0]
    return [(parse_timestamp(a), parse_timestamp(b)) for a, b in doc]


def labels_from_windows(timestamps: list[datetime], windows) -> np.ndarray:
    t = np.array([ts.timestamp() for ts in timestamps])
    out = np.zeros(t.size, dtype=np.int8)
    for a, b in windows:
        out[(t >= a.timestamp()) & (t <= b.timestamp())] = 1
    return out


def _find_nab_labels(path: Path) -> Path | None:
    for cand in (
        path.with_suffix(".labels.json"),
        path.parent / "combined_windows.json",
        path.parent.parent / "labels" / "combined_windows.json",
        path.parent.parent.parent / "labels" / "combined_windows.json",
    ):
        if cand.exists():
            return cand
    return None


def _find_smd_labels(path: Path) -> Path | None:
    for cand in (path.parent.parent / "test_label" / path.name, path.with_suffix(".labels.txt")):
        if cand.exists():
            return cand
    return None


def ingest(path, format: Format = "csv", labels=None, sample_interval: timedelta = timedelta(minutes=1)) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file or directory")
    if format == "nab":
        ts, stamps = read_series_csv(path)
        ds = Dataset([Entity(ts.entity_id, (ts,))])
        lab_path = Path(labels) if labels else _find_nab_labels(path)
        if lab_path is not None:
            ds.labels[ts.entity_id] = labels_from_windows(stamps, nab_windows(lab_path, path))
        return ds
    if format == "smd":
        files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
        ds = Dataset([])
        for f in files:
            ent = read_matrix(f, sample_interval=sample_interval)
            ds.entities.append(ent)
            lab = Path(labels) if labels and not path.is_dir() else _find_smd_labels(f)
            if lab is not None:
                ds.labels[ent.id] = read_point_labels(lab)
        if not ds.entities:
            raise DataError(f"{path}: no SMD files found")
        return ds
    if format == "csv":
        if path.is_file():
            ts, _ = read_series_csv(path)
            return Dataset([Entity(ts.entity_id, (ts,))])
        ds = Dataset([])
        for sub in sorted(p for p in path.iterdir() if p.is_dir()):
            sensors = []
            for f in sorted(sub.glob("*.csv")):
                ts, _ = read_series_csv(f, series_id=f"{sub.name}/{f.stem}", entity_id=sub.name, sensor_type=f.stem)
                sensors.append(ts)
            if sensors:
                ds.entities.append(Entity(sub.name, tuple(sensors)))
        for f in sorted(path.glob("*.csv")):
            ds.entities.append(read_matrix(f, sample_interval=sample_interval))
        if not ds.entities:
            raise DataError(f"{path}: no series found")
        return ds
    raise ValueError(f"unknown format {format!r}")
