"""CSV/JSON emission and run manifests.

Every CSV (UTF-8, LF, one header row, floats with 17 significant digits) is
written together with a JSON mirror ``<name>.json`` holding the same values.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from chiraloc import __version__


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in value]
    if hasattr(value, "value") and not callable(value.value):  # enums
        return value.value
    return value


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class ArtifactWriter:
    """Writes data files into ``out_dir`` and remembers them for the manifest."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.figures: list[Path] = []

    def table(self, name: str, columns, rows) -> Path:
        columns = list(columns)
        rows = [list(r) for r in rows]
        path = self.out_dir / f"{name}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        self.files.append(path)
        self.json(name, {"columns": columns, "rows": rows}, indent=None)
        return path

    def json(self, name: str, payload, indent: int | None = 1) -> Path:
        path = self.out_dir / f"{name}.json"
        text = json.dumps(_json_value(payload), indent=indent, sort_keys=True, allow_nan=False)
        path.write_text(text + "\n", encoding="utf-8")
        self.files.append(path)
        return path

    def figure(self, fig, name: str) -> Path:
        path = self.out_dir / f"{name}.png"
        fig.savefig(path, dpi=150, metadata={"Software": None})
        self.figures.append(path)
        return path

    def digests(self) -> dict[str, str]:
        return {p.name: sha256_file(p) for p in self.files}


def write_manifest(writer: ArtifactWriter, command: str, config: dict, started: datetime,
                   name: str) -> Path:
    manifest = {
        "command": command,
        "config_snapshot": config,
        "base_seed": config.get("seed"),
        "tool_version": __version__,
        "timestamps": {
            "started": started.isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
        },
        "output_paths": [p.name for p in writer.files],
        "figures": [p.name for p in writer.figures],
        "digests": writer.digests(),
    }
    path = writer.out_dir / f"{name}.json"
    path.write_text(json.dumps(_json_value(manifest), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def heatmap_rows(times, populations):
    """Rows of gamma*t followed by P_1..P_N."""
    return ([t, *row] for t, row in zip(times, populations))


def heatmap_columns(n_sites: int) -> list[str]:
    return ["gamma_t"] + [f"P_{n}" for n in range(1, n_sites + 1)]
