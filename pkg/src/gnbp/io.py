"""Datasets, configuration files, trace persistence, summaries and figure tables."""
from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .dist import ModelParams, Parameterization, tnb_log_pmf
from .gibbs import ChainConfig, Trace, TraceRecord, Variant
from .process import cluster_number_pmf, solve_prob
from .special import build_stirling

__all__ = [
    "Dataset",
    "DatasetError",
    "FIGURE_KINDS",
    "Summary",
    "export_figure_data",
    "figure_table",
    "galaxy_path",
    "load_config",
    "load_dataset",
    "load_galaxy",
    "read_trace",
    "summarize",
    "write_table",
    "write_trace",
]

TRACE_FORMAT = "gnbp-trace/1"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    name: str = ""
    units: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise DatasetError("a dataset needs at least one point of dimension >= 1")
        if not np.all(np.isfinite(pts)):
            raise DatasetError("dataset entries must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _parse_row(row: list[str]) -> list[float] | None:
    try:
        return [float(v) for v in row]
    except ValueError:
        return None


def load_dataset(path, name: str | None = None, units: str = "") -> Dataset:
    """Read a CSV with one observation per row and one column per dimension.

    Blank lines and ``#`` comments are skipped; a non-numeric first row is
    taken as a header.
    """
    path = Path(path)
    rows: list[list[float]] = []
    header_seen = False
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            cells = [c.strip() for c in next(csv.reader([text]))]
            values = _parse_row(cells)
            if values is None:
                if rows or header_seen:
                    raise DatasetError(f"{path}: line {lineno}: non-numeric row {text!r}")
                header_seen = True
                continue
            if not all(math.isfinite(v) for v in values):
                raise DatasetError(f"{path}: line {lineno}: non-finite value in {text!r}")
            if rows and len(values) != len(rows[0]):
                raise DatasetError(
                    f"{path}: line {lineno}: expected {len(rows[0])} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: no observations")
    return Dataset(np.array(rows), name=name if name is not None else path.stem, units=units)


def galaxy_path() -> Path:
    """Path of the bundled galaxy velocity file (units of 1000 km/s)."""
    return Path(str(resources.files("gnbp").joinpath("data/galaxy.csv")))


def load_galaxy() -> Dataset:
    return load_dataset(galaxy_path(), name="galaxy", units="1000 km/s")


# ------------------------------------------------------------------ config

_BOOL_KEYS = {"learn_mass", "learn_hypers", "learn_discount", "learn_prob", "record_assignments"}
_INT_KEYS = {"iterations", "burn_in", "seed", "grid_points", "subsample_j"}
_FLOAT_KEYS = {"mass", "phi", "phi0", "discount", "prob"}


def load_config(path) -> ChainConfig:
    """Read a flat ``key = value`` file into a :class:`ChainConfig`.

    ``discount`` and ``prob`` accept a number or ``learn``; ``mu0`` is a
    comma-separated vector. Unknown keys are rejected.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    text = Path(path).read_text()
    parser.read_string("[chain]\n" + text)
    known = {f.name for f in fields(ChainConfig)}
    kwargs: dict[str, Any] = {}
    section = parser["chain"]
    for key, raw in section.items():
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        value = raw.strip()
        if key in ("discount", "prob") and value.lower() == "learn":
            kwargs["learn_" + key] = True
            continue
        if key in _BOOL_KEYS:
            kwargs[key] = section.getboolean(key)
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
            if key == "discount":
                kwargs.setdefault("learn_discount", False)
            if key == "prob":
                kwargs.setdefault("learn_prob", False)
        elif key == "mu0":
            kwargs[key] = [float(v) for v in value.split(",")]
        else:
            kwargs[key] = value
    return ChainConfig(**kwargs)


# --------------------------------------------------------------- summaries


@dataclass
class Summary:
    """Label-invariant posterior summaries averaged over trace records.

    ``mean_cluster_size`` is the mean over records of ``m / l``.
    """

    m: int
    records: int
    posterior_mean_l: float
    unit_size_ratio: float
    mean_cluster_size: float
    non_unit_clusters: float
    size_histogram: dict[int, float]
    l_histogram: dict[int, float]
    param_posteriors: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    posterior_mean_a: float = float("nan")
    posterior_mean_p: float = float("nan")
    posterior_mean_mass: float = float("nan")
    l_sub_histogram: dict[int, float] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _histogram(values: np.ndarray, bins: int = 50) -> dict[str, list[float]]:
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": edges.tolist(), "probability": (counts / counts.sum()).tolist()}


def _frequencies(values: Iterable[int]) -> dict[int, float]:
    arr = np.asarray(list(values), dtype=np.int64)
    uniq, cnt = np.unique(arr, return_counts=True)
    total = cnt.sum()
    return {int(u): float(c / total) for u, c in zip(uniq, cnt)}


def summarize(trace: Trace | Sequence[TraceRecord], m: int | None = None) -> Summary:
    records = trace.records if isinstance(trace, Trace) else list(trace)
    if not records:
        raise ValueError("cannot summarize an empty trace")
    ls = np.array([r.l for r in records], dtype=float)
    units = np.array([r.unit_count for r in records], dtype=float)
    ms = np.array([sum(r.sizes) for r in records], dtype=float)
    if m is None:
        m = int(ms[0])
    pooled = [n for r in records for n in r.sizes]
    a = np.array([r.a for r in records])
    p = np.array([r.p for r in records])
    mass = np.array([r.mass for r in records])
    l_sub = [r.l_sub for r in records if r.l_sub is not None]
    return Summary(
        m=m,
        records=len(records),
        posterior_mean_l=float(ls.mean()),
        unit_size_ratio=float(np.mean(units / ls)),
        mean_cluster_size=float(np.mean(ms / ls)),
        non_unit_clusters=float(np.mean(ls - units)),
        size_histogram=_frequencies(pooled),
        l_histogram=_frequencies(int(v) for v in ls),
        param_posteriors={"a": _histogram(a), "p": _histogram(p), "mass": _histogram(mass)},
        posterior_mean_a=float(a.mean()),
        posterior_mean_p=float(p.mean()),
        posterior_mean_mass=float(mass.mean()),
        l_sub_histogram=_frequencies(l_sub) if l_sub else None,
    )


# ------------------------------------------------------------------ traces

_RECORD_FIELDS = [f.name for f in fields(TraceRecord)]
_INT_FIELDS = {"iteration", "l", "unit_count", "l_sub"}
_FLOAT_FIELDS = {"mass", "a", "p", "phi", "phi0", "log_ecpf"}


def _preamble(trace: Trace) -> dict:
    return {"format": TRACE_FORMAT, "m": trace.m, "variant": trace.variant.value,
            "config": trace.config}


def _trace_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("csv", "jsonl"):
        raise ValueError("trace format must be 'csv' or 'jsonl'")
    return fmt


def write_trace(trace: Trace, path, fmt: str | None = None) -> Path:
    """Write a trace as JSON lines or CSV; the first line holds seed and config."""
    path = Path(path)
    fmt = _trace_format(path, fmt)
    with path.open("w", newline="") as fh:
        if fmt == "jsonl":
            fh.write(json.dumps({"preamble": _preamble(trace)}) + "\n")
            for r in trace.records:
                fh.write(json.dumps(asdict(r)) + "\n")
        else:
            fh.write("# " + json.dumps(_preamble(trace)) + "\n")
            writer = csv.writer(fh)
            writer.writerow(_RECORD_FIELDS)
            for r in trace.records:
                row = []
                for name in _RECORD_FIELDS:
                    v = getattr(r, name)
                    if v is None:
                        row.append("")
                    elif isinstance(v, list):
                        row.append(json.dumps(v))
                    else:
                        row.append(repr(v))
                writer.writerow(row)
    return path


def _cell(name: str, text: str):
    if text == "":
        return None
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    return json.loads(text)


def _trace_from(preamble: dict, records: list[TraceRecord]) -> Trace:
    if preamble.get("format") != TRACE_FORMAT:
        raise ValueError("missing or unknown trace preamble")
    return Trace(m=preamble["m"], variant=Variant(preamble["variant"]),
                 config=preamble["config"], records=records)


def read_trace(path, fmt: str | None = None) -> Trace:
    path = Path(path)
    fmt = _trace_format(path, fmt)
    with path.open(newline="") as fh:
        first = fh.readline()
        if fmt == "jsonl":
            preamble = json.loads(first).get("preamble", {})
            records = [TraceRecord(**json.loads(line)) for line in fh if line.strip()]
        else:
            if not first.startswith("# "):
                raise ValueError("missing trace preamble")
            preamble = json.loads(first[2:])
            reader = csv.reader(fh)
            header = next(reader)
            records = [TraceRecord(**{k: _cell(k, v) for k, v in zip(header, row)}) for row in reader]
    return _trace_from(preamble, records)


# ---------------------------------------------------------- figure exports

FIGURE_KINDS = ("fig2", "fig3", "fig4", "fig5", "fig6")
FIG2_DISCOUNTS = (-4.0, -1.0, 0.0, 0.5, 0.9)
FIG3_DISCOUNTS = (-4.0, -2.0, 0.0, 0.25, 0.5)
_VARIANTS = ((Variant.GNBP, Parameterization.ORIGINAL), (Variant.REPARAM, Parameterization.REPARAMETERIZED))


def _col(variant: Variant, a: float) -> str:
    return f"{variant.value}_a={a:g}"


def _fig2(m: int = 100, mass: float = 1.0, expected_m: float | None = None,
          discounts: Sequence[float] = FIG2_DISCOUNTS):
    expected_m = float(m if expected_m is None else expected_m)
    header = ["l"] + [_col(v, a) for v, _ in _VARIANTS for a in discounts]
    meta = {}
    columns = []
    for v, par in _VARIANTS:
        for a in discounts:
            p = solve_prob(expected_m, mass, a, par)
            params = ModelParams(mass, a, p, par)
            columns.append(cluster_number_pmf(m, params, build_stirling(m, a)))
            meta[_col(v, a)] = {"mass": mass, "a": a, "p": p}
    rows = [[l] + [float(c[l]) for c in columns] for l in range(1, m + 1)]
    return header, rows, meta


def _fig3(expected_m: float = 100.0, mass: float = 1.0, n_max: int = 100,
          discounts: Sequence[float] = FIG3_DISCOUNTS):
    header = ["n"] + [_col(v, a) for v, _ in _VARIANTS for a in discounts]
    sizes = np.arange(1, n_max + 1)
    meta = {}
    columns = []
    for v, par in _VARIANTS:
        for a in discounts:
            p = solve_prob(expected_m, mass, a, par)
            columns.append(np.exp(tnb_log_pmf(sizes, a, p)))
            meta[_col(v, a)] = {"mass": mass, "a": a, "p": p}
    rows = [[int(n)] + [float(c[i]) for c in columns] for i, n in enumerate(sizes)]
    return header, rows, meta


def _fig4(data):
    header = ["variant", "a", "m", "j", "l_sub", "probability"]
    rows = []
    for item in data or []:
        freq = _frequencies(item["l_sub"])
        for value, prob in freq.items():
            rows.append([Variant(item["variant"]).value, item["a"], item["m"], item.get("j", 20),
                         value, prob])
    return header, rows, {}


_FIG5_STATS = ("posterior_mean_l", "unit_size_ratio", "mean_cluster_size", "non_unit_clusters")


def _fig5(data):
    header = ["variant", "a", "learned", *_FIG5_STATS, "posterior_mean_a"]
    rows = []
    for item in data or []:
        s: Summary = item["summary"]
        rows.append([Variant(item["variant"]).value, item["a"], bool(item.get("learned", False)),
                     *[getattr(s, k) for k in _FIG5_STATS], s.posterior_mean_a])
    return header, rows, {}


def _fig6(data):
    header = ["variant", "a", "statistic", "x", "value"]
    rows = []
    for item in data or []:
        v, a = Variant(item["variant"]).value, item["a"]
        s: Summary = item["summary"]
        for key, hist in (("cluster_size", s.size_histogram), ("n_clusters", s.l_histogram)):
            for x, prob in sorted(hist.items()):
                rows.append([v, a, key, x, prob])
        if "non_unit" in item:
            for x, prob in sorted(_frequencies(item["non_unit"]).items()):
                rows.append([v, a, "non_unit_clusters", x, prob])
        if "grid" in item:
            for x, dens in zip(item["grid"], item["density"]):
                rows.append([v, a, "predictive_density", float(x), float(dens)])
    return header, rows, {}


def figure_table(kind: str, data=None, **options):
    """Build ``(header, rows, meta)`` for a figure kind.

    fig2 and fig3 are analytic (prior cluster-number and cluster-size PMFs);
    fig4 to fig6 tabulate chain output passed in ``data``.
    """
    if kind == "fig2":
        return _fig2(**options)
    if kind == "fig3":
        return _fig3(**options)
    builders = {"fig4": _fig4, "fig5": _fig5, "fig6": _fig6}
    if kind not in builders:
        raise ValueError(f"unknown figure kind {kind!r}; choose from {', '.join(FIGURE_KINDS)}")
    return builders[kind](data)


def write_table(header: Sequence[str], rows: Sequence[Sequence], path, fmt: str = "csv",
                meta: dict | None = None) -> Path:
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    elif fmt == "json":
        payload = {"columns": list(header), "rows": [list(r) for r in rows]}
        if meta:
            payload["parameters"] = meta
        path.write_text(json.dumps(payload, indent=1))
    else:
        raise ValueError("format must be 'csv' or 'json'")
    if meta and fmt == "csv":
        path.with_name(path.name + ".params.json").write_text(json.dumps(meta, indent=1))
    return path


def export_figure_data(kind: str, path, data=None, fmt: str = "csv", **options) -> Path:
    """Write the table behind a figure; empty ``data`` yields a header-only file."""
    header, rows, meta = figure_table(kind, data, **options)
    return write_table(header, rows, path, fmt, meta)
