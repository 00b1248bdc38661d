"""Deterministic writers for reports, tables and field snapshots"""

import csv
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from app.core.exceptions import ConfigurationError
from app.models.fields import LatticeForm, ValueKind
from app.models.lattice import Domain
from app.services.algebra import multi_indices

SNAPSHOT_FORMAT = 1

PathLike = Union[str, Path]


def sanitize(value: Any) -> Any:
    """
    Converts a report into plain JSON data

    Args:
        value: Pydantic model, numpy array or scalar, or nested containers of them

    Returns:
        The same data with NaN and infinities spelled as strings
    """
    if isinstance(value, BaseModel):
        return sanitize(value.model_dump(mode="python"))
    if isinstance(value, dict):
        return {str(key): sanitize(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(item) for item in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, np.generic):
        return sanitize(value.item())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
    return value


def dumps(value: Any) -> str:
    return json.dumps(sanitize(value), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: PathLike, value: Any, stamp: Optional[Dict[str, Any]] = None) -> Path:
    """Writes a report, merging the run stamp (config hash, seed) into the top level"""
    data = sanitize(value)
    if stamp:
        data = {**(data if isinstance(data, dict) else {"report": data}), **stamp}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def _cell(value: Any) -> str:
    value = sanitize(value)
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return str(value)


def write_csv(
    path: PathLike,
    rows: Iterable[Union[dict, BaseModel]],
    columns: Optional[Sequence[str]] = None,
    sort_keys: Optional[Sequence[str]] = None,
    stamp: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Writes a table with '\\n' line endings and repr floats

    Args:
        path: Output file
        rows: Dicts or models, one per row
        columns: Column order (defaults to the keys of the first row)
        sort_keys: Columns to sort the rows on before writing
        stamp: Constant columns appended to every row

    Returns:
        Path: The written file
    """
    records: List[dict] = [row.model_dump() if isinstance(row, BaseModel) else dict(row) for row in rows]
    if stamp:
        records = [{**record, **stamp} for record in records]
    if sort_keys:
        records.sort(key=lambda record: tuple(record[key] for key in sort_keys))
    if columns is None:
        columns = list(records[0]) if records else []
    elif stamp:
        columns = list(columns) + [key for key in stamp if key not in columns]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(columns)
        for record in records:
            writer.writerow([_cell(record.get(column)) for column in columns])
    return path


def snapshot_header(form: LatticeForm) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "domain": form.domain.descriptor(),
        "h": form.domain.h,
        "degree": form.degree,
        "kind": form.kind.value,
        "rank": int(round(math.sqrt(form.values.shape[-1] + 1))) if form.kind == ValueKind.LIE else None,
        "components": [list(index) for index in multi_indices(form.degree)],
    }


def save_snapshot(path: PathLike, form: LatticeForm) -> Path:
    """Stores a lattice form as .npz with a JSON header and little-endian float64 values"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(snapshot_header(form), sort_keys=True)
    with path.open("wb") as handle:
        np.savez(handle, header=np.array(header), values=np.ascontiguousarray(form.values, dtype="<f8"))
    return path


def load_snapshot(path: PathLike) -> LatticeForm:
    """
    Reads a snapshot written by save_snapshot

    Raises:
        ConfigurationError: If the header is missing, of another format, or disagrees with the values
    """
    with np.load(Path(path), allow_pickle=False) as archive:
        if "header" not in archive or "values" not in archive:
            raise ConfigurationError(f"{path} is not a field snapshot")
        header = json.loads(str(archive["header"]))
        values = np.array(archive["values"], dtype=float)

    if header.get("format") != SNAPSHOT_FORMAT:
        raise ConfigurationError(f"unsupported snapshot format {header.get('format')!r}")
    domain = Domain.model_validate(header["domain"])
    kind = ValueKind(header["kind"])
    if header["components"] != [list(index) for index in multi_indices(header["degree"])]:
        raise ConfigurationError("snapshot component ordering does not match this build")
    expected = (len(header["components"]),) + domain.shape
    if kind == ValueKind.LIE:
        expected += (header["rank"] ** 2 - 1,)
    if values.shape != expected:
        raise ConfigurationError(f"snapshot values have shape {values.shape}, header implies {expected}")
    return LatticeForm(degree=header["degree"], values=values, kind=kind, domain=domain)
