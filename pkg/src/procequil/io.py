"""Reading and writing operators, process tensors and result tables.

Operators travel as CSV: a ``# dims=2,3`` comment line followed by ``d``
rows of ``2d`` numbers, the real and imaginary parts of each entry
interleaved. Result tables start with a ``# schema_version=1`` comment and
then a header row.
"""

from __future__ import annotations

import io
import logging
import re
from pathlib import Path
from typing import Iterable, List, Sequence, TextIO, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .errors import DimensionMismatch, InputFormatError
from .sim.process import ProcessTensor
from .sim.qmath import Operator
from .sim.types import BOUND_CSV_COLUMNS, SWEEP_CSV_COLUMNS, BoundReport, PlotSeries, SweepResult

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# schema_version={SCHEMA_VERSION}\n"

PathLike = Union[str, Path]
_HEADER = re.compile(r"(\w+)=(\S+)")


def _read_header(path: PathLike) -> dict[str, str]:
    """key=value pairs from the leading comment lines."""
    meta: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            meta.update(_HEADER.findall(line))
    return meta


def _read_numbers(path: PathLike) -> np.ndarray:
    try:
        frame = pd.read_csv(path, comment="#", header=None, dtype=float)
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputFormatError(f"{path}: {exc}") from exc
    values = frame.to_numpy()
    if values.ndim != 2 or values.shape[1] % 2 or not np.isfinite(values).all():
        raise InputFormatError(f"{path}: expected an even number of finite columns")
    return values[:, 0::2] + 1j * values[:, 1::2]


def _parse_ints(text: str, path: PathLike, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise InputFormatError(f"{path}: bad {key} header {text!r}") from exc


def read_operator_csv(path: PathLike) -> Operator:
    meta = _read_header(path)
    data = _read_numbers(path)
    if data.shape[0] != data.shape[1]:
        raise InputFormatError(f"{path}: operator of shape {data.shape} is not square")
    dims = _parse_ints(meta["dims"], path, "dims") if "dims" in meta else (data.shape[0],)
    if int(np.prod(dims)) != data.shape[0]:
        raise DimensionMismatch(f"{path}: dims {dims} do not multiply to {data.shape[0]}")
    return Operator(data, dims)


def _interleave(a: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[0], 2 * a.shape[1]))
    out[:, 0::2] = a.real
    out[:, 1::2] = a.imag
    return out


def _write_matrix(fh: TextIO, a: np.ndarray) -> None:
    pd.DataFrame(_interleave(a)).to_csv(fh, header=False, index=False, float_format="%.17g")


def write_operator_csv(path: PathLike, op: Operator) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# dims={','.join(str(d) for d in op.dims)}\n")
        _write_matrix(fh, op.data)


def dump_tensor(path: PathLike, tensor: ProcessTensor) -> None:
    """Write a process tensor with its step count and normalization in the header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SCHEMA_LINE)
        fh.write(f"# steps={tensor.steps} d_S={tensor.d_S} normalization={float(tensor.normalization)!r}\n")
        _write_matrix(fh, tensor.choi.data)
    logger.info("wrote %d-step process tensor to %s", tensor.steps, path)


def load_tensor(path: PathLike) -> ProcessTensor:
    meta = _read_header(path)
    try:
        steps, d_S = int(meta["steps"]), int(meta["d_S"])
        normalization = float(meta.get("normalization", 1.0))
    except (KeyError, ValueError) as exc:
        raise InputFormatError(f"{path}: missing or bad tensor header ({exc})") from exc
    data = _read_numbers(path)
    size = d_S ** (2 * steps)
    if data.shape != (size, size):
        raise DimensionMismatch(f"{path}: expected a {size}x{size} tensor, found {data.shape}")
    return ProcessTensor(Operator(data, (d_S,) * (2 * steps)), steps, d_S, normalization)


def _emit(frame: pd.DataFrame, dest: Union[PathLike, TextIO]) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(SCHEMA_LINE)
            frame.to_csv(fh, index=False)
    else:
        dest.write(SCHEMA_LINE)
        frame.to_csv(dest, index=False)


def reports_frame(reports: Iterable[BoundReport]) -> pd.DataFrame:
    return pd.DataFrame([r.csv_row() for r in reports], columns=BOUND_CSV_COLUMNS)


def write_reports_csv(dest: Union[PathLike, TextIO], reports: Sequence[BoundReport]) -> None:
    _emit(reports_frame(reports), dest)


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    rows = [r.model_dump(mode="json") for r in result.rows]
    return pd.DataFrame(rows, columns=SWEEP_CSV_COLUMNS)


def write_sweep_csv(dest: Union[PathLike, TextIO], result: SweepResult) -> None:
    _emit(sweep_frame(result), dest)


class PlotFile(BaseModel):
    schema_version: int = SCHEMA_VERSION
    series: List[PlotSeries]


def write_plot_json(path: PathLike, series: Sequence[PlotSeries]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PlotFile(series=list(series)).model_dump_json(indent=2))


def to_csv_text(frame: pd.DataFrame) -> str:
    buf = io.StringIO()
    _emit(frame, buf)
    return buf.getvalue()
