"""Result tables, CSV round-tripping and SVG plots.

CSV layout: ``#``-prefixed metadata lines (``# key = value``), then the
resolved configuration echoed as ``#> `` lines (INI text that
:func:`config_from_csv` re-parses), then a header row and the data rows.
Floats are written with ``repr`` so parsing returns them bit-exactly.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_ini, to_ini

CONFIG_PREFIX = "#> "


class TableError(ValueError):
    """Malformed result table."""


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    data: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)
    config: RunConfig | None = None

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.metadata = {str(k): repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                         for k, v in self.metadata.items()}
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))
        if len(set(self.columns)) != len(self.columns):
            raise TableError("duplicate column names")
        if "t" in self.columns and len(self.data) > 1 and np.any(np.diff(self["t"]) <= 0):
            raise TableError("t must be strictly increasing")

    def __len__(self):
        return len(self.data)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def equals(self, other: "ResultTable") -> bool:
        """Bit-exact equality of columns, data (NaN-aware) and metadata."""
        return (self.columns == other.columns and self.metadata == other.metadata
                and self.data.shape == other.data.shape
                and np.array_equal(self.data.view(np.int64), other.data.view(np.int64)))


def _cell(v: float) -> str:
    return repr(float(v))


def to_csv_text(table: ResultTable) -> str:
    if len(table) == 0:
        raise TableError("refusing to write an empty table")
    buf = io.StringIO()
    for key, value in table.metadata.items():
        if "\n" in str(value) or "=" in key:
            raise TableError(f"metadata entry {key!r} is not a single line")
        buf.write(f"# {key} = {value}\n")
    if table.config is not None:
        for line in to_ini(table.config).splitlines():
            buf.write(CONFIG_PREFIX + line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    writer.writerows([_cell(v) for v in row] for row in table.data)
    return buf.getvalue()


def from_csv_text(text: str) -> ResultTable:
    meta, cfg_lines, body = {}, [], []
    for line in text.splitlines():
        if line.startswith(CONFIG_PREFIX):
            cfg_lines.append(line[len(CONFIG_PREFIX):])
        elif line.startswith("#"):
            key, sep, value = line[1:].partition(" = ")
            if not sep:
                raise TableError(f"malformed metadata line {line!r}")
            meta[key.strip()] = value
        elif line.strip():
            body.append(line)
    if not body:
        raise TableError("no header row")
    rows = list(csv.reader(body))
    columns, records = rows[0], rows[1:]
    if any(len(r) != len(columns) for r in records):
        raise TableError("ragged rows")
    data = np.array([[float(v) for v in r] for r in records], dtype=float).reshape(-1, len(columns))
    config = parse_ini("\n".join(cfg_lines)) if cfg_lines else None
    return ResultTable(tuple(columns), data, meta, config)


def read_csv(path) -> ResultTable:
    return from_csv_text(Path(path).read_text())


def config_from_csv(path) -> RunConfig:
    """Configuration echoed in the header of a CSV written by this package."""
    cfg = read_csv(path).config
    if cfg is None:
        raise TableError(f"{path} carries no configuration echo")
    return cfg


def output_stem(table: ResultTable) -> str:
    cfg = table.config
    if cfg is None:
        return table.metadata.get("experiment", "result")
    s = cfg.spec
    return f"{cfg.experiment}_{cfg.model.kind}_h{s.hbar:g}_r{s.r1:+g}_{s.r2:+g}_seed{cfg.ensemble.seed}"


def emit_outputs(table: ResultTable, out_dir, formats=("csv", "svg"), stem: str | None = None) -> list[Path]:
    """Write the table as CSV and/or SVG into ``out_dir``; returns the paths."""
    formats = tuple(formats)
    unknown = set(formats) - {"csv", "svg"}
    if unknown:
        raise ValueError(f"unknown output format(s): {', '.join(sorted(unknown))}")
    if len(table) == 0:
        raise TableError("refusing to write an empty table")
    text = to_csv_text(table)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    stem = stem or output_stem(table)
    paths = []
    if "csv" in formats:
        path = out / f"{stem}.csv"
        path.write_text(text)
        paths.append(path)
    if "svg" in formats:
        path = out / f"{stem}.svg"
        plot_table(table, path)
        paths.append(path)
    return paths


# --- plotting ---------------------------------------------------------------

#: per experiment: (list of column groups per panel, y scale, x scale)
PLOT_LAYOUT = {
    "structure-compare": ([("chi2c", "chi2q")], "log", "linear"),
    "break-analysis": ([("chi2c_sq_minus_chi2q_sq", "f")], "symlog", "linear"),
    "moments": ([("qvar1_c", "qvar1_q"), ("qvar2_c", "qvar2_q"),
                 ("pvar1_c", "pvar1_q"), ("pvar2_c", "pvar2_q")], "linear", "linear"),
    "initial-slope": ([("chi2c", "chi2q")], "linear", "linear"),
    "integrable-contrast": ([("chi2c_integrable", "chi2c_chaotic")], "log", "log"),
}


def plot_table(table: ResultTable, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    experiment = table.config.experiment if table.config else table.metadata.get("experiment")
    panels, yscale, xscale = PLOT_LAYOUT.get(
        experiment, ([tuple(c for c in table.columns if c != "t")], "linear", "linear"))
    t = table["t"]
    fig, axes = plt.subplots(len(panels), 1, figsize=(6, 2.2 + 2.0 * len(panels)), squeeze=False)
    for ax, group in zip(axes[:, 0], panels):
        for style, name in zip(("--", "-", ":", "-."), group):
            y = table[name]
            keep = t > 0 if xscale == "log" else np.ones_like(t, bool)
            ax.plot(t[keep], y[keep], style, label=name)
        ax.set_yscale(yscale)
        ax.set_xscale(xscale)
        ax.set_xlabel("t")
        ax.legend(frameon=False)
    if table.config is not None:
        s = table.config.spec
        fig.suptitle(f"{experiment}: hbar={s.hbar:g}, r=({s.r1:g}, {s.r2:g})")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
