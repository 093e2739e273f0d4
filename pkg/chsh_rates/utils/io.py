import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from pydantic import BaseModel

from chsh_rates.curve_builder import export_curve, import_curve
from chsh_rates.exceptions import ConfigError, CurveError
from chsh_rates.log_config import get_logger
from chsh_rates.models import CurveFormat
from chsh_rates.schemas import EatResult, RateCurve, TrialRow

logger = get_logger("io")

RATE_COLUMNS = ["n", "omega", "gamma_or_zeta", "alpha", "t", "hmin", "input", "net"]
TRIAL_COLUMNS = ["trial", "aborted", "score_hat"]


def curve_format(path: Path) -> CurveFormat:
    suffix = Path(path).suffix.lower().lstrip(".")
    try:
        return CurveFormat(suffix)
    except ValueError:
        raise CurveError(f"unknown curve file type {path!s}; expected .csv or .json")


def save_curve(curve: RateCurve, path: Path) -> Path:
    path = Path(path)
    path.write_bytes(export_curve(curve, curve_format(path)))
    logger.info(f"Wrote {curve.kind.value} curve for {curve.quantity.value} to {path}")
    return path


def load_curve(path: Path) -> RateCurve:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CurveError(f"cannot read curve file {path}: {e}") from e
    return import_curve(data, curve_format(path))


def read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Unreadable config {path}: {e}")
        raise ConfigError(f"cannot read JSON config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def write_json(path: Path, payload) -> Path:
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    Path(path).write_text(text + "\n", encoding="utf-8")
    return Path(path)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return Path(path)


def rate_rows(results: Iterable[EatResult]) -> list[list]:
    rows = []
    for r in results:
        spec = r.protocol
        free = spec.gamma if spec.gamma is not None else spec.zeta_a
        rows.append(
            [
                spec.n,
                format(spec.omega_exp, ".17g"),
                "" if free is None else format(free, ".17g"),
                format(r.alpha, ".17g"),
                format(r.t, ".17g"),
                format(r.hmin_bound, ".17g"),
                format(r.input_bits, ".17g"),
                format(r.net_expansion, ".17g"),
            ]
        )
    return rows


def trial_rows(rows: Iterable[TrialRow]) -> list[list]:
    return [[row.trial, int(row.aborted), "" if row.score_hat is None else format(row.score_hat, ".17g")] for row in rows]
