"""Synthetic benchmark generators, CSV ingestion and result serialization.

The generators are parametric reconstructions of the classic 2-D clustering
benchmarks (same point and cluster counts, similar geometry). They do not
reproduce the published coordinates; every generated dataset is tagged with
``provenance="reconstruction"``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError, ParameterError

# name -> (points, clusters)
SYNTHETIC_SHAPES = {
    "twomoons": (200, 2),
    "smile": (266, 3),
    "threecircles": (299, 3),
    "jain": (373, 2),
    "fourlines": (512, 4),
    "unbalance": (6500, 8),
}
METRIC_KEYS = ("fmi", "ari", "nmi", "acc", "num_clusters", "sweeps_run")


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray | None
    name: str
    provenance: str = "file"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (self.features.shape[0],):
                raise DataError(f"{self.labels.size} labels for {self.features.shape[0]} points")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]


def _arc(rng, n, center, radius, start, stop, noise):
    t = rng.uniform(start, stop, n)
    pts = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
    return pts + rng.normal(scale=noise, size=pts.shape)


def _twomoons(rng):
    upper = _arc(rng, 100, (0.0, 0.0), 1.0, 0.1 * np.pi, 0.9 * np.pi, 0.04)
    lower = _arc(rng, 100, (1.0, 0.2), 1.0, 1.1 * np.pi, 1.9 * np.pi, 0.04)
    return [upper, lower]


def _smile(rng):
    left_eye = rng.normal((-0.6, 0.6), 0.08, size=(80, 2))
    right_eye = rng.normal((0.6, 0.6), 0.08, size=(80, 2))
    mouth = _arc(rng, 106, (0.0, 0.3), 1.0, 1.25 * np.pi, 1.75 * np.pi, 0.03)
    return [left_eye, right_eye, mouth]


def _threecircles(rng):
    return [_arc(rng, k, (0.0, 0.0), r, 0.0, 2 * np.pi, 0.04)
            for k, r in ((50, 1.0), (100, 2.0), (149, 3.0))]


def _jain(rng):
    # dense lower crescent, sparse upper crescent
    lower = _arc(rng, 276, (0.0, 0.0), 1.0, 1.05 * np.pi, 1.95 * np.pi, 0.05)
    upper = _arc(rng, 97, (1.0, -0.35), 1.0, 0.05 * np.pi, 0.95 * np.pi, 0.07)
    return [lower, upper]


def _fourlines(rng):
    # four segments in an X; density thins out linearly-ish away from the middle
    groups = []
    for size, angle in zip((160, 140, 112, 100), (0.25, 0.75, 1.25, 1.75)):
        t = 1.5 + 3.0 * rng.uniform(0, 1, size) ** 1.5
        direction = np.array([np.cos(angle * np.pi), np.sin(angle * np.pi)])
        groups.append(t[:, None] * direction + rng.normal(scale=0.03, size=(size, 2)))
    return groups


def _unbalance(rng):
    dense = [(0.0, 0.0), (4.0, 0.5), (1.5, 4.0)]
    sparse = [(10.0, 0.0), (13.0, 2.0), (10.5, 5.0), (13.5, 7.0), (8.0, 8.5)]
    groups = [rng.normal(c, 0.45, size=(2000, 2)) for c in dense]
    groups += [rng.normal(c, 0.35, size=(100, 2)) for c in sparse]
    return groups


_GENERATORS = {
    "twomoons": _twomoons,
    "smile": _smile,
    "threecircles": _threecircles,
    "jain": _jain,
    "fourlines": _fourlines,
    "unbalance": _unbalance,
}


def generate_synthetic(kind: str, seed: int = 0) -> LabeledDataset:
    """Generate a reconstruction of a named 2-D benchmark.

    >>> ds = generate_synthetic("twomoons", seed=0)
    >>> ds.n, ds.m, len(set(ds.labels))
    (200, 2, 2)
    """
    if kind not in _GENERATORS:
        raise ParameterError(f"unknown synthetic dataset {kind!r}; choose from {sorted(_GENERATORS)}")
    rng = np.random.default_rng(seed)
    groups = _GENERATORS[kind](rng)
    features = np.vstack(groups)
    labels = np.concatenate([np.full(len(g), k) for k, g in enumerate(groups)])
    n, k = SYNTHETIC_SHAPES[kind]
    assert features.shape == (n, 2) and labels.max() + 1 == k
    return LabeledDataset(features, labels, kind, provenance="reconstruction")


def canonical_synthetic(kind: str, seed: int, directory) -> LabeledDataset:
    """Return the cached CSV copy of a generated dataset, writing it on first use.

    Later calls read the file back instead of regenerating, so results stay
    stable even if the generator code changes.
    """
    path = Path(directory) / f"{kind}-seed{seed}.csv"
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        save_dataset(generate_synthetic(kind, seed), path)
    ds = load_csv(path, has_header=True, label_column="label", name=kind)
    ds.provenance = "reconstruction"
    return ds


def _fmt(x) -> str:
    return format(float(x), ".17g")


def save_dataset(dataset: LabeledDataset, path) -> Path:
    """Write features (and a trailing ``label`` column, if any) as CSV with a header."""
    path = Path(path)
    header = [f"x{j}" for j in range(dataset.m)]
    if dataset.labels is not None:
        header.append("label")
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, row in enumerate(dataset.features):
                cells = [_fmt(v) for v in row]
                if dataset.labels is not None:
                    cells.append(str(dataset.labels[i]))
                w.writerow(cells)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _resolve_label_column(label_column, header, width):
    if label_column is None:
        return None
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None or label_column not in header:
            raise DataError(f"label column {label_column!r} not found in header")
        return header.index(label_column)
    idx = int(label_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise DataError(f"label column index {label_column} out of range for {width} columns")
    return idx


def load_csv(path, has_header: bool = False, label_column=None, name=None) -> LabeledDataset:
    """Read a comma-separated numeric table.

    Parameters
    ----------
    path : path-like
    has_header : bool
        Whether the first row holds column names.
    label_column : str or int, optional
        Column name, or zero-based (negative allowed) index, of the labels.
        Labels may be any strings; they are mapped to integers in order of
        first appearance unless they are all integers.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        rows = [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1)
                if row and any(cell.strip() for cell in row)]
    header = None
    if has_header and rows:
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    label_idx = _resolve_label_column(label_column, header, width)
    features, raw_labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise DataError(f"{path}, line {lineno}: expected {width} fields, found {len(row)}")
        values = []
        for j, cell in enumerate(row):
            if j == label_idx:
                raw_labels.append(cell.strip())
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise DataError(f"{path}, line {lineno}, column {j}: non-numeric value {cell.strip()!r}") from None
        features.append(values)
    labels = None
    if label_idx is not None:
        try:
            labels = np.array([int(v) for v in raw_labels])
        except ValueError:
            codes = {}
            labels = np.array([codes.setdefault(v, len(codes)) for v in raw_labels])
    features = np.array(features, dtype=float)
    if features.ndim != 2 or features.shape[1] == 0:
        raise DataError(f"{path}: no feature columns")
    if not np.all(np.isfinite(features)):
        r, c = np.argwhere(~np.isfinite(features))[0]
        raise DataError(f"{path}, line {rows[r][0]}: non-finite value in feature column {c}")
    return LabeledDataset(features, labels, name or path.stem)


def save_result(result, profile, metrics: dict, path, params: dict | None = None, seed=None):
    """Write ``labels.csv`` and ``metrics.json`` into the directory ``path``.

    ``labels.csv`` has columns ``index,label,is_core,rho,delta``. The JSON
    document holds the entries of ``metrics`` (a subset of ``fmi, ari, nmi,
    acc, num_clusters, sweeps_run``) plus ``params`` and ``seed``.
    ``result`` only needs ``final_labels`` (and optionally ``is_core``);
    ``profile`` may be ``None``.
    """
    out = Path(path)
    unknown = set(metrics) - set(METRIC_KEYS)
    if unknown:
        raise ParameterError(f"undocumented metric keys {sorted(unknown)}")
    labels = np.asarray(result.final_labels)
    n = labels.size
    is_core = getattr(result, "is_core", None)
    rho = profile.rho if profile is not None else np.full(n, np.nan)
    delta = profile.delta if profile is not None else np.full(n, np.nan)
    doc = {k: metrics[k] for k in METRIC_KEYS if k in metrics}
    doc["params"] = params or {}
    doc["seed"] = seed
    try:
        out.mkdir(parents=True, exist_ok=True)
        with (out / "labels.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "label", "is_core", "rho", "delta"])
            for i in range(n):
                core = "" if is_core is None else int(bool(is_core[i]))
                w.writerow([i, int(labels[i]), core, _fmt(rho[i]), _fmt(delta[i])])
        with (out / "metrics.json").open("w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise DataError(f"cannot write results to {out}: {exc.strerror or exc}") from exc
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_result(path):
    """Inverse of :func:`save_result`: returns ``(labels_table, metrics)``.

    ``labels_table`` is a dict of arrays keyed by the CSV columns.
    """
    out = Path(path)
    try:
        with (out / "labels.csv").open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read results from {out}: {exc.strerror or exc}") from exc
    table = {
        "index": np.array([int(r["index"]) for r in rows], dtype=np.int64),
        "label": np.array([int(r["label"]) for r in rows], dtype=np.int64),
        "is_core": np.array([r["is_core"] == "1" for r in rows]),
        "rho": np.array([float(r["rho"]) for r in rows]),
        "delta": np.array([float(r["delta"]) for r in rows]),
    }
    return table, metrics
