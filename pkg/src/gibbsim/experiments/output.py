"""CSV and JSON emission with byte-stable formatting.

Floats are written with repr (shortest round-trip), rows in sample order,
UTF-8, comma separators, and bare \\n line endings, so identical
(config, seed, build) triples produce identical bytes.
"""

from __future__ import annotations

import json
import os

from .runners import ExperimentResult


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(row[c]) for c in columns) + "\n")


def write_json(path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_results(result: ExperimentResult, out_dir) -> dict:
    """Write samples.csv and summary.json under out_dir; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{result.kind}_samples.csv")
    json_path = os.path.join(out_dir, f"{result.kind}_summary.json")
    try:
        write_csv(csv_path, result.columns, result.rows)
        write_json(json_path, {"kind": result.kind, "count": len(result.rows), **result.summary})
    except OSError as exc:
        raise OSError(f"cannot write results under {out_dir}: {exc}") from exc
    return {"csv": csv_path, "summary": json_path}


def read_csv_rows(path) -> list[dict]:
    """Read back an emitted CSV with floats parsed (exact round-trip)."""
    import csv as _csv

    with open(path, encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                try:
                    row[key] = int(val)
                except ValueError:
                    try:
                        row[key] = float(val)
                    except ValueError:
                        row[key] = val
            rows.append(row)
    return rows
