"""Flat-text file formats.

Expression matrix: tab-separated, first row ``<id header> gene... label``,
then one row per sample. Network: one whitespace-separated gene pair per
line; blank lines and ``#`` comments are ignored. Config: ``key=value`` lines.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

from .core import ExpressionDataset, GeneNetwork, ValidationError, canonical_labels

FLOAT_FORMAT = "%.9g"


class ParseError(ValidationError):
    pass


def load_expression(path) -> ExpressionDataset:
    path = Path(path)
    with path.open() as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    rows = [(i + 1, ln.split("\t")) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise ParseError(f"{path}: empty file")
    _, header = rows[0]
    if len(header) < 2 or header[-1].strip().lower() != "label":
        raise ParseError(f"{path}: no label column (last header field must be 'label')")
    genes = [h.strip() for h in header[1:-1]]
    width = len(header)
    samples, values, labels = [], [], []
    for lineno, fields in rows[1:]:
        if len(fields) != width:
            raise ParseError(f"{path}:{lineno}: ragged row ({len(fields)} fields, expected {width})")
        samples.append(fields[0].strip())
        try:
            values.append([float(v) for v in fields[1:-1]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: unparsable value ({exc})") from None
        labels.append(fields[-1].strip())
    if len(set(samples)) != len(samples):
        raise ParseError(f"{path}: duplicate sample id")
    if len(set(genes)) != len(genes):
        raise ParseError(f"{path}: duplicate gene id")
    return ExpressionDataset(samples, genes, values, canonical_labels(labels))


def _fmt(x: float) -> str:
    return FLOAT_FORMAT % x


def save_expression(dataset: ExpressionDataset, path, id_header: str = "sample") -> None:
    out = ["\t".join([id_header, *dataset.gene_ids, "label"])]
    for sid, row, lab in zip(dataset.sample_ids, dataset.values, dataset.labels):
        out.append("\t".join([sid, *map(_fmt, row), str(int(lab))]))
    _write_text(path, "\n".join(out) + "\n")


def load_network(path) -> GeneNetwork:
    path = Path(path)
    edges = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: bad line, expected two gene ids")
            if parts[0] == parts[1]:
                raise ParseError(f"{path}:{lineno}: self-loop on {parts[0]!r}")
            edges.append((parts[0], parts[1]))
    return GeneNetwork(edges)


def save_network(network: GeneNetwork, path) -> None:
    _write_text(path, "".join(f"{a}\t{b}\n" for a, b in network.sorted_edges()))


def load_config(path) -> dict[str, str]:
    """Read flat ``key=value`` lines; keys are normalized to snake_case."""
    path = Path(path)
    out = {}
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in text.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _write_text(path, text: str) -> None:
    # write-then-rename so a failed run never leaves a truncated file behind
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(obj: Any, path) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> Any:
    with Path(path).open() as fh:
        return json.load(fh)


def write_curve(rows, path, header=("size", "value")) -> None:
    lines = ["\t".join(header)]
    for size, value in rows:
        lines.append(f"{size}\t{'NA' if value is None else _fmt(value)}")
    _write_text(path, "\n".join(lines) + "\n")
