"""CSV ingestion and report serialization for the command-line tool."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .config import AnalysisConfig, ConfigError

log = logging.getLogger("miscorr")


@dataclass
class Dataset:
    """Bound data blocks for one analysis, intercepts already appended."""

    n: int
    n_dropped: int
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    blocks: dict[str, np.ndarray] = field(default_factory=dict)


def _bound_columns(config: AnalysisConfig) -> list[str]:
    cols: list[str] = []
    for role in ("ystar", "ystar1", "ystar2", "mstar", "outcome"):
        val = getattr(config, role)
        if val is not None:
            cols.append(val)
    for role in ("x", "z", "z1", "z2", "c"):
        cols.extend(getattr(config, role))
    seen = set()
    ordered = []
    for c in cols:
        if c not in seen:
            seen.add(c)
            ordered.append(c)
    return ordered


def load_dataset(path: str, config: AnalysisConfig) -> Dataset:
    """Read a CSV, bind configured columns, drop NA rows, build designs.

    Rows with missing values in any bound column are dropped and the
    count is logged.  Intercept columns are appended to every design
    block.
    """
    try:
        # exact float round trips keep rerun-on-own-output paths bitwise
        # stable (e.g. reusing written estimates)
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as err:
        raise ConfigError(f"data file not found: {path}") from err
    except (pd.errors.ParserError, pd.errors.EmptyDataError, OSError) as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err

    bound = _bound_columns(config)
    missing = [c for c in bound if c not in frame.columns]
    if missing:
        raise ConfigError(f"columns not found in {path}: {missing}")

    numeric = {}
    for col in bound:
        parsed = pd.to_numeric(frame[col], errors="coerce")
        # entries that fail numeric parsing are an input error, while
        # genuinely missing cells fall under NA-row dropping below
        bad = parsed.isna() & frame[col].notna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ConfigError(
                f"unparseable value {frame[col].iloc[row]!r} in column "
                f"{col!r}, data row {row + 1}")
        numeric[col] = parsed

    table = pd.DataFrame(numeric)
    keep = table.notna().all(axis=1)
    n_dropped = int((~keep).sum())
    if n_dropped:
        log.info("dropped %d rows with missing values in bound columns",
                 n_dropped)
    table = table.loc[keep].reset_index(drop=True)
    if table.empty:
        raise ConfigError("no rows remain after dropping missing values")

    n = table.shape[0]
    columns = {c: table[c].to_numpy(dtype=float) for c in table.columns}
    blocks = {}
    for role in ("x", "z", "z1", "z2"):
        names = getattr(config, role)
        cols = [columns[c] for c in names]
        blocks[role.upper()] = np.column_stack([np.ones(n)] + cols)
    if config.c:
        blocks["C"] = np.column_stack([columns[c] for c in config.c])
    else:
        blocks["C"] = None
    return Dataset(n=n, n_dropped=n_dropped, columns=columns, blocks=blocks)


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()    # fall through to the non-finite check
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_estimates_csv(path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, lineterminator="\n")


def write_report_json(path, payload: dict) -> None:
    """Serialize the run report with stable key order and no timestamps."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True,
                  allow_nan=False)
        fh.write("\n")
