"""CSV tables with a versioned format line and round-trip float formatting."""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1


@dataclass
class Table:
    kind: str  # e.g. "coeff" -> "#format=flatgauge.coeff/1"
    header: tuple
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError(f"{self.kind}: row has {len(row)} fields, header has {len(self.header)}")
        self.rows.append(row)


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(table):
    buf = io.StringIO()
    buf.write(f"#format=flatgauge.{table.kind}/{FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_tables(out_dir, tables):
    """Render everything first, then write; a failure while rendering leaves no files behind."""
    texts = {name: render(t) for name, t in tables.items()}
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(texts):
        path = os.path.join(out_dir, f"{name}.csv")
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(texts[name])
        os.replace(tmp, path)
        paths.append(path)
    return paths


def read_table(path):
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("#format=flatgauge."):
            raise ValueError(f"{path}: missing format line")
        rows = list(csv.reader(fh))
    kind = first.split(".", 1)[1].split("/")[0]
    return Table(kind, tuple(rows[0]), rows[1:])
