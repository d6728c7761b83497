"""Feature table: rows = projects, columns = tagged named features.

Columns carry a variable-set tag (baseline, visual_count, text, image_detail)
plus a finer report category; the five nested variable sets fall out of tag
filtering alone.  Missing values are NaN in memory and "" on disk; the sidecar
JSON manifest records the tag/category of every column.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import ProjectRecord, derive_outcome

OUTCOME_COLUMN = "log_dollars"

VARIABLE_SETS = {
    1: ("baseline",),
    2: ("baseline", "text"),
    3: ("baseline", "visual_count"),
    4: ("baseline", "image_detail"),
    5: ("baseline", "text", "visual_count", "image_detail"),
}

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class FeatureBlock:
    """One extracted block keyed by record id; `tag` is the variable-set tag."""

    tag: str
    rows: dict[str, dict[str, float]]
    categories: dict[str, str] = field(default_factory=dict)

    def column_names(self) -> list[str]:
        cols = set()
        for row in self.rows.values():
            cols.update(row)
        return sorted(cols)


@dataclass
class FeatureTable:
    ids: list[str]
    columns: list[str]
    values: np.ndarray  # (n, p) float64; NaN = missing
    outcome: np.ndarray  # (n,)
    tags: dict[str, str]
    categories: dict[str, str]

    def __post_init__(self):
        n, p = self.values.shape
        if len(self.ids) != n or len(self.outcome) != n or len(self.columns) != p:
            raise ValueError("inconsistent table dimensions")
        if set(self.tags) != set(self.columns):
            raise ValueError("tags must cover exactly the feature columns")
        if np.isnan(self.outcome).any():
            raise ValueError("outcome must never be missing")

    def column_index(self, name: str) -> int:
        return self.columns.index(name)

    def select_set(self, set_id: int) -> "FeatureTable":
        """Project onto the columns of one nested variable set (1-5)."""
        if set_id not in VARIABLE_SETS:
            raise ValueError(f"variable set must be 1..5, got {set_id}")
        wanted = VARIABLE_SETS[set_id]
        keep = [i for i, c in enumerate(self.columns) if self.tags[c] in wanted]
        cols = [self.columns[i] for i in keep]
        return FeatureTable(
            ids=list(self.ids),
            columns=cols,
            values=self.values[:, keep].copy(),
            outcome=self.outcome.copy(),
            tags={c: self.tags[c] for c in cols},
            categories={c: self.categories.get(c, self.tags[c]) for c in cols},
        )

    def select_rows(self, indices) -> "FeatureTable":
        idx = np.asarray(indices)
        return FeatureTable(
            ids=[self.ids[i] for i in idx],
            columns=list(self.columns),
            values=self.values[idx].copy(),
            outcome=self.outcome[idx].copy(),
            tags=dict(self.tags),
            categories=dict(self.categories),
        )

    def drop_columns(self, names) -> "FeatureTable":
        drop = set(names)
        keep = [i for i, c in enumerate(self.columns) if c not in drop]
        cols = [self.columns[i] for i in keep]
        return FeatureTable(
            ids=list(self.ids),
            columns=cols,
            values=self.values[:, keep].copy(),
            outcome=self.outcome.copy(),
            tags={c: self.tags[c] for c in cols},
            categories={c: self.categories.get(c, self.tags[c]) for c in cols},
        )


def assemble(records: list[ProjectRecord], blocks: list[FeatureBlock]) -> FeatureTable:
    """Join blocks by record id into one tagged table.

    Ids missing from a block get NaN in that block's columns; duplicate record
    ids are a hard error, as are column name collisions across blocks.
    """
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate record ids: {', '.join(dupes)}")

    columns: list[str] = []
    tags: dict[str, str] = {}
    categories: dict[str, str] = {}
    for block in blocks:
        for col in block.column_names():
            if col in tags:
                raise ValueError(f"column name collision: {col}")
            if col == OUTCOME_COLUMN:
                raise ValueError(f"column {col} collides with the outcome")
            columns.append(col)
            tags[col] = block.tag
            categories[col] = block.categories.get(col, block.tag)

    values = np.full((len(records), len(columns)), np.nan)
    col_pos = {c: i for i, c in enumerate(columns)}
    row_pos = {rid: i for i, rid in enumerate(ids)}
    for block in blocks:
        for rid, row in block.rows.items():
            ri = row_pos.get(rid)
            if ri is None:
                continue
            for col, val in row.items():
                if val is None:
                    continue
                values[ri, col_pos[col]] = float(val)

    outcome = np.array([derive_outcome(r) for r in records])
    return FeatureTable(
        ids=ids, columns=columns, values=values, outcome=outcome,
        tags=tags, categories=categories,
    )


def impute_missing(table: FeatureTable, k: int = 5) -> FeatureTable:
    """K-nearest-neighbor imputation.

    Distance is Euclidean over standardized, mutually observed columns;
    each missing cell becomes the mean of its k nearest donors (rows observed
    in that column).  Observed cells are never touched.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    values = table.values.copy()
    n, p = values.shape
    observed = ~np.isnan(values)
    for j, col in enumerate(table.columns):
        if not observed[:, j].any():
            raise ValueError(f"column entirely missing: {col}")
    if not np.isnan(values).any():
        return table

    mu = np.nanmean(table.values, axis=0)
    sd = np.nanstd(table.values, axis=0)
    sd[sd == 0] = 1.0
    z = (table.values - mu) / sd

    for i in range(n):
        missing_cols = np.nonzero(~observed[i])[0]
        if len(missing_cols) == 0:
            continue
        for j in missing_cols:
            donors = np.nonzero(observed[:, j])[0]
            donors = donors[donors != i]
            if len(donors) == 0:
                raise ValueError(f"no donors for column {table.columns[j]}")
            mutual = observed[i] & observed[donors]  # (n_donors, p)
            diff = z[donors] - z[i]
            diff[~mutual] = 0.0
            dist = np.sqrt(np.nansum(diff**2, axis=1))
            dist[~mutual.any(axis=1)] = np.inf
            order = np.argsort(dist, kind="stable")
            nearest = donors[order[: min(k, len(donors))]]
            values[i, j] = table.values[nearest, j].mean()
    return FeatureTable(
        ids=list(table.ids), columns=list(table.columns), values=values,
        outcome=table.outcome.copy(), tags=dict(table.tags),
        categories=dict(table.categories),
    )


def split(table: FeatureTable, train_fraction: float = 0.8, seed: int = 0):
    """Uniform random partition, deterministic for a given seed."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(table.ids)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.floor(train_fraction * n)
    return table.select_rows(perm[:n_train]), table.select_rows(perm[n_train:])


def _format_value(v: float) -> str:
    if np.isnan(v):
        return ""
    return repr(float(v))


def write_table(table: FeatureTable, csv_path, manifest_path) -> None:
    """Persist as CSV plus a sidecar JSON manifest of column tags."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *table.columns, OUTCOME_COLUMN])
        for i, rid in enumerate(table.ids):
            row = [rid]
            row.extend(_format_value(v) for v in table.values[i])
            row.append(repr(float(table.outcome[i])))
            writer.writerow(row)
    manifest = {
        "format_version": MANIFEST_VERSION,
        "missing_token": "",
        "outcome": OUTCOME_COLUMN,
        "columns": {
            c: {"tag": table.tags[c], "category": table.categories.get(c, table.tags[c])}
            for c in table.columns
        },
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_table(csv_path, manifest_path) -> FeatureTable:
    manifest = json.loads(open(manifest_path, encoding="utf-8").read())
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.get('format_version')}")
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "id" or header[-1] != OUTCOME_COLUMN:
            raise ValueError("malformed feature CSV header")
        columns = header[1:-1]
        ids, rows, outcome = [], [], []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) if v != "" else np.nan for v in rec[1:-1]])
            outcome.append(float(rec[-1]))
    tags = {c: manifest["columns"][c]["tag"] for c in columns}
    categories = {c: manifest["columns"][c]["category"] for c in columns}
    return FeatureTable(
        ids=ids,
        columns=columns,
        values=np.array(rows).reshape(len(ids), len(columns)),
        outcome=np.array(outcome),
        tags=tags,
        categories=categories,
    )
