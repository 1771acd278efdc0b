"""CSV ingestion, result documents, and the positivity diagnostic.

Result documents are a JSON metadata file (version, seed, the full effective
configuration, and pointers to payloads) plus one CSV per payload table.
Floats are serialized with 17 significant digits so emit -> ingest round
trips are bit exact; files are written atomically (temp file + rename). The
embedded timestamp is null unless explicitly requested, so re-running a
command with the same configuration and seed reproduces every output file
byte for byte.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .data import Dataset, NuisanceValues
from .exceptions import ConfigError, DataError

logger = logging.getLogger("inceff")

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class ColumnRoles:
    """Which CSV columns play which role."""

    outcome: str
    treatment: str
    covariates: tuple[str, ...]
    condition_on: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.covariates:
            raise ConfigError("at least one covariate column is required")
        named = [self.outcome, self.treatment, *self.covariates]
        if len(set(named)) != len(named):
            raise ConfigError(
                "outcome, treatment, and covariate columns must be distinct"
            )
        unknown = set(self.condition_on) - set(self.covariates)
        if unknown:
            raise ConfigError(
                f"condition-on columns {sorted(unknown)} are not covariates"
            )

    @property
    def effective_condition_on(self) -> tuple[str, ...]:
        return self.condition_on or self.covariates


def ingest_csv(path, roles: ColumnRoles) -> Dataset:
    """Load a typed dataset; rejects missing-value rows with a count report."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such data file: {path}")
    # round_trip parsing keeps emit -> ingest bit exact for 17-digit floats
    frame = pd.read_csv(path, float_precision="round_trip")
    if frame.shape[0] == 0:
        raise DataError("no data rows")
    used = [roles.outcome, roles.treatment, *roles.covariates]
    missing_cols = [c for c in used if c not in frame.columns]
    if missing_cols:
        raise DataError(f"missing columns: {missing_cols}")
    frame = frame[used]
    na_mask = frame.isna().any(axis=1)
    if na_mask.any():
        logger.warning(
            "rejected %d of %d rows with missing values in used columns",
            int(na_mask.sum()),
            len(frame),
        )
        frame = frame[~na_mask]
    if frame.shape[0] == 0:
        raise DataError("no data rows (all rows had missing values)")

    treatment = frame[roles.treatment]
    bad = ~treatment.isin([0, 1, 0.0, 1.0])
    if bad.any():
        rows = frame.index[bad][:5].tolist()
        values = sorted(set(treatment[bad].astype(str)))
        raise DataError(
            f"treatment column {roles.treatment!r} must be 0/1; "
            f"found {values} at rows {rows}"
        )
    try:
        x = frame[list(roles.covariates)].astype(np.float64).to_numpy()
        y = frame[roles.outcome].astype(np.float64).to_numpy()
    except (TypeError, ValueError) as exc:
        raise DataError(f"non-numeric value in covariates/outcome: {exc}") from exc
    return Dataset(
        x=x,
        a=treatment.astype(np.int64).to_numpy(),
        y=y,
        columns=tuple(roles.covariates),
    )


@dataclass
class ResultDocument:
    """One command's outputs: metadata plus named payload tables."""

    command: str
    config: dict
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    stamp: bool = False

    def metadata(self, outputs: dict[str, str]) -> dict:
        created = (
            datetime.now(timezone.utc).isoformat(timespec="seconds")
            if self.stamp
            else None
        )
        return {
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "summary": self.summary,
            "outputs": outputs,
            "created": created,
        }


def _atomic_write(path: Path, payload: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_document(document: ResultDocument, out_dir) -> Path:
    """Write the JSON document and its CSV payloads into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for name, table in document.tables.items():
        csv_path = out_dir / f"{name}.csv"
        payload = table.to_csv(index=False, float_format=FLOAT_FORMAT)
        _atomic_write(csv_path, payload)
        outputs[name] = csv_path.name
    doc_path = out_dir / "document.json"
    _atomic_write(
        doc_path,
        json.dumps(document.metadata(outputs), indent=2, sort_keys=True) + "\n",
    )
    return doc_path


def diagnose_positivity(
    data: Dataset,
    nuisances: NuisanceValues,
    bins: int = 20,
    by: str | None = None,
) -> tuple[pd.DataFrame, dict]:
    """Histogram the estimated propensities, overall and by covariate quartile.

    Returns the binned counts (long format) and a summary flagging mass below
    0.05 or above 0.95, where estimates become unstable for contrast-style
    estimands (incremental effects remain usable there).
    """
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    if nuisances.n != data.n:
        raise DataError("nuisances and data must be row-aligned")
    edges = np.linspace(0.0, 1.0, bins + 1)

    def histogram(group: str, values: np.ndarray) -> list[dict]:
        counts, _ = np.histogram(values, bins=edges)
        return [
            {
                "group": group,
                "bin_lower": edges[i],
                "bin_upper": edges[i + 1],
                "count": int(counts[i]),
            }
            for i in range(bins)
        ]

    records = histogram("all", nuisances.pi)
    if by is not None:
        values = data.column_values(by)
        quartiles = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
        for q in range(4):
            lo, hi = quartiles[q], quartiles[q + 1]
            mask = (values >= lo) & (values <= hi if q == 3 else values < hi)
            if mask.any():
                records.extend(
                    histogram(f"{by} in [{lo:.4g}, {hi:.4g}]", nuisances.pi[mask])
                )
    share_low = float(np.mean(nuisances.pi < 0.05))
    share_high = float(np.mean(nuisances.pi > 0.95))
    summary = {
        "share_below_0.05": share_low,
        "share_above_0.95": share_high,
        "flagged": bool(share_low > 0 or share_high > 0),
    }
    return pd.DataFrame.from_records(records), summary
