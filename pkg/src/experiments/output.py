"""CSV result files with a JSON mirror."""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import pandas as pd

from src.utils.helpers import round_sig, setup_logger

logger = setup_logger(__name__)

RESULT_COLUMNS = [
    "scenario_id",
    "alpha",
    "beta",
    "eta",
    "gamma",
    "eps1",
    "eps2",
    "r1",
    "r2",
    "rbar_policy",
    "metric",
    "value",
    "ci_low",
    "ci_high",
    "status",
]

VALIDATION_COLUMNS = [
    "scenario_id",
    "metric",
    "analytic",
    "empirical",
    "stderr",
    "ci_low",
    "ci_high",
    "z_score",
    "status",
]

FLOAT_FORMAT = "%.10g"


def to_frame(records: Iterable[Dict], columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    return pd.DataFrame.from_records(list(records), columns=list(columns) if columns else None)


def write_frame(df: pd.DataFrame, out_dir: str, stem: str, json_mirror: bool = True) -> List[Path]:
    """Write ``<stem>.csv`` (and ``<stem>.json``) with 10 significant digits."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    df.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    written = [csv_path]
    if json_mirror:
        mirror = df.copy()
        for column in mirror.select_dtypes(include="floating").columns:
            mirror[column] = mirror[column].astype(object).map(round_sig)
        json_path = directory / f"{stem}.json"
        mirror.to_json(json_path, orient="records", indent=2, double_precision=15)
        written.append(json_path)
    for path in written:
        logger.info(f"wrote {path} ({len(df)} rows)")
    return written


def write_results(records: Iterable[Dict], out_dir: str, stem: str) -> List[Path]:
    return write_frame(to_frame(records, RESULT_COLUMNS), out_dir, stem)


def write_validation_report(rows: Iterable[Dict], out_dir: str) -> List[Path]:
    return write_frame(to_frame(rows, VALIDATION_COLUMNS), out_dir, "validation_report")
