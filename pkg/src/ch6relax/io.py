"""Output files: manifest, trajectory / monitor / error CSVs, JSON summaries
and single-field snapshots.

Floats are written with ``%.17g`` so that reruns are byte-comparable and
values round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from ch6relax import __version__

MANIFEST = "manifest.json"
ERRORS = "errors.csv"
RATEFIT = "ratefit.json"
MONITORS = "monitors.csv"
STABILITY = "stability.json"
ERROR_COLUMNS = ("tau", "c0_vstar", "l2_w", "l2_wstar_mu", "l2_h_w")


class MissingOutputError(FileNotFoundError):
    """A results directory lacks a file or holds a corrupt one."""


def fmt(x) -> str:
    return "%.17g" % x


def coefficient_labels(modes):
    if len(modes) == 1:
        return [f"c{k}" for k in range(modes[0])]
    return [f"c{i}_{j}" for i in range(modes[0]) for j in range(modes[1])]


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out_dir, config, command, files, extra=None):
    payload = {
        "artifact": "ch6relax",
        "version": __version__,
        "command": command,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "files": sorted(files),
    }
    if extra:
        payload.update(extra)
    write_json(Path(out_dir) / MANIFEST, payload)


def read_manifest(out_dir):
    path = Path(out_dir) / MANIFEST
    if not path.is_file():
        raise MissingOutputError(f"missing manifest: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MissingOutputError(f"corrupt manifest {path}: {exc}") from None


def write_trajectory(path, times, stack):
    """One row per sample: ``t`` then the flattened coefficients."""
    stack = np.asarray(stack)
    labels = coefficient_labels(stack.shape[1:])
    rows = ([t] + list(c.ravel()) for t, c in zip(times, stack))
    write_rows(path, ["t"] + labels, rows)


def read_trajectory(path, modes):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:].reshape((-1,) + tuple(modes))


def write_monitors(path, times, monitors: dict):
    keys = list(monitors)
    rows = ([t] + [monitors[k][i] for k in keys] for i, t in enumerate(times))
    write_rows(path, ["t"] + keys, rows)


def write_errors(path, reports):
    rows = ([getattr(r, c) for c in ERROR_COLUMNS] for r in reports)
    write_rows(path, ERROR_COLUMNS, rows)


def read_csv_table(path):
    """``{column: float array}`` from a CSV written by this module."""
    path = Path(path)
    if not path.is_file():
        raise MissingOutputError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MissingOutputError(f"corrupt file (empty): {path}")
    header, body = rows[0], rows[1:]
    try:
        cols = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    except ValueError as exc:
        raise MissingOutputError(f"corrupt file {path}: {exc}") from None
    return {name: cols[:, i] for i, name in enumerate(header)}


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise MissingOutputError(f"missing file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MissingOutputError(f"corrupt file {path}: {exc}") from None


def write_snapshot(path, domain, coeffs, t):
    """Single field: a ``#``-prefixed JSON header line, then coefficient rows."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    header = {"lengths": list(domain.lengths), "modes": list(domain.modes),
              "grid": list(domain.grid), "t": float(t)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for row in coeffs:
            writer.writerow([fmt(v) for v in row])


def read_snapshot(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise MissingOutputError(f"snapshot {path} lacks its JSON header")
        header = json.loads(first[2:])
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, values.reshape(header["modes"])


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
