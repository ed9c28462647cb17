"""
Deterministic file output: CSV tables, JSON sidecars and SVG figures.

Floats are written with nine significant digits. JSON is written with
sorted keys, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "format_value", "write_csv", "read_csv", "write_json", "content_hash", "map_rows",
    "write_map", "write_overlay", "heatmap_svg", "lines_svg", "MAP_COLUMNS",
    "OVERLAY_COLUMNS",
]

MAP_COLUMNS = ("control", "probe_GHz", "re_t", "im_t", "abs_t_dB")
OVERLAY_COLUMNS = ("control", "line_freq_GHz", "weight")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == 0:
            return "0"  # avoid "-0"
        return f"{v:.9g}"
    return str(v)


def _csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise DomainError(f"row has {len(row)} fields, expected {len(columns)}")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def content_hash(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return "sha256:" + hashlib.sha256(data).hexdigest()


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence],
              metadata: dict | None = None) -> Path:
    """Write a CSV table and, when ``metadata`` is given, a ``.json`` sidecar
    holding it together with the table's content hash."""
    path = Path(path)
    text = _csv_text(columns, rows)
    path.write_text(text)
    if metadata is not None:
        sidecar = dict(metadata)
        sidecar.update(file=path.name, columns=list(columns), content_hash=content_hash(text))
        write_json(path.with_suffix(".json"), sidecar)
    return path


def read_csv(path, required: Sequence[str]) -> dict[str, np.ndarray]:
    """Read numeric columns by name.

    Raises
    ------
    DomainError
        With the offending row and column for missing columns or
        non-numeric cells.
    """
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DomainError(f"{path.name}: missing column(s) {', '.join(missing)}; "
                              f"found {', '.join(header) or 'no header'}")
        data = {c: [] for c in required}
        for lineno, row in enumerate(reader, start=2):
            for c in required:
                cell = row.get(c)
                try:
                    data[c].append(float(cell))
                except (TypeError, ValueError):
                    raise DomainError(f"{path.name}: row {lineno}, column {c!r}: "
                                      f"cannot parse {cell!r} as a number") from None
    return {c: np.array(v, dtype=float) for c, v in data.items()}


def map_rows(tmap):
    """Long-format rows ``(control, probe, re, im, dB)`` of a TransmissionMap."""
    db = 20.0 * np.log10(np.maximum(np.abs(tmap.values), 1e-15))
    for i, c in enumerate(tmap.control_axis):
        for j, f in enumerate(tmap.probe_axis):
            t = tmap.values[i, j]
            yield (c, f, t.real, t.imag, db[i, j])


def write_map(path, tmap, config: dict, extra: dict | None = None) -> Path:
    """CSV of a TransmissionMap plus a JSON sidecar with the config echo.

    The in-memory timestamp is deliberately left out so reruns are
    byte-identical.
    """
    meta = {
        "config": config,
        "control_name": tmap.control_name,
        "grid": [int(tmap.control_axis.size), int(tmap.probe_axis.size)],
        "failed_points": int(np.sum(tmap.failed)),
        "messages": list(tmap.messages),
        "model": tmap.metadata,
    }
    meta.update(extra or {})
    return write_csv(path, MAP_COLUMNS, map_rows(tmap), meta)


def write_overlay(path, overlay, config: dict | None = None) -> Path:
    return write_csv(path, OVERLAY_COLUMNS, overlay,
                     None if config is None else {"config": config})


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "bandgap-qed"
    matplotlib.rcParams["svg.fonttype"] = "none"
    return plt


def heatmap_svg(path, x, y, z, xlabel: str, ylabel: str, zlabel: str,
                overlay: Sequence[tuple[float, float]] = ()) -> Path:
    """Static heatmap with ``z[i, j]`` at ``(x[i], y[j])`` and optional points."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(np.asarray(x), np.asarray(y), np.asarray(z).T, shading="nearest",
                         cmap="viridis", rasterized=False)
    fig.colorbar(mesh, ax=ax, label=zlabel)
    if len(overlay):
        ox, oy = np.asarray(overlay, dtype=float).T
        ax.plot(ox, oy, ",", color="white")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def lines_svg(path, traces: Sequence[tuple[np.ndarray, np.ndarray, str]], xlabel: str,
              ylabel: str) -> Path:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    for x, y, label in traces:
        ax.plot(x, y, label=label, lw=1)
    if any(label for _, _, label in traces):
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)
