import csv
import os
from collections import Counter
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional, TextIO

from app.server.handler.exceptions import InvalidInputError, StoreWriteError
from app.server.logger.custom_logger import logger
from app.server.models.campaign import BaselineSpec
from app.server.models.generic import MaybeValue
from app.server.models.record import EvaluationRecord, TracePoint
from app.server.models.space import Configuration, ParameterSpace
from app.server.services import space as space_service
from app.server.static import constants, localization
from app.server.static.enums import Direction, EvalStatus

_PERCENT = Decimal('0.01')


def format_seconds(value: float) -> str:
    return f'{value:.3f}'


def record_row(record: EvaluationRecord, names: list[str], reproducible: bool = False) -> dict[str, str]:
    row = {name: space_service.format_value(record.config.values[name]) for name in names}
    row.update(
        objective=repr(float(record.objective)),
        status=record.status.value,
        elapsed_sec=format_seconds(0.0 if reproducible else record.elapsed),
        worker_id=str(record.worker_id),
        eval_id=str(record.eval_id),
        started_at=format_seconds(0.0 if reproducible else record.started_at),
        finished_at=format_seconds(0.0 if reproducible else record.finished_at),
    )
    return row


class ResultsStore:
    """
    Append-only `results.csv`: one header row, then one flushed row per finished evaluation.

    Opening an existing file with the same header resumes it; eval ids continue after the last row.
    Single writer only.
    """

    def __init__(self, path: Path, space: ParameterSpace, reproducible_timestamps: bool = False) -> None:
        self.path = Path(path)
        self.space = space
        self.reproducible_timestamps = reproducible_timestamps
        self.fieldnames = [*space.names, *constants.RECORD_COLUMNS]
        self.last_eval_id = -1
        self._file: Optional[TextIO] = None
        self._writer: Optional[csv.DictWriter] = None

    @property
    def next_eval_id(self) -> int:
        return self.last_eval_id + 1

    def open(self) -> 'ResultsStore':
        resume = self.path.exists() and self.path.stat().st_size > 0
        if resume:
            existing = read_records(self.path, self.space)
            if existing:
                self.last_eval_id = existing[-1].eval_id
            logger.info(f'resuming {self.path} after eval_id {self.last_eval_id}')
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, 'a', newline='', encoding='utf-8')
            self._writer = csv.DictWriter(self._file, fieldnames=self.fieldnames)
            if not resume:
                self._writer.writeheader()
                self._sync()
        except OSError as error:
            raise StoreWriteError(f'{localization.EXCEPTION_STORE_WRITE}: {error}') from error
        return self

    def append_record(self, record: EvaluationRecord) -> None:
        """
        Writes one row and forces it to disk before returning.

        Raises:
            ValueError: If eval ids would not be strictly increasing.
            StoreWriteError: If the row cannot be written.
        """
        if self._writer is None:
            self.open()
        if record.eval_id <= self.last_eval_id:
            raise ValueError(f'eval_id {record.eval_id} does not follow {self.last_eval_id}')
        try:
            self._writer.writerow(record_row(record, self.space.names, self.reproducible_timestamps))
            self._sync()
        except OSError as error:
            logger.exception(f'{localization.EXCEPTION_STORE_WRITE}: {self.path}')
            raise StoreWriteError(f'{localization.EXCEPTION_STORE_WRITE}: {error}') from error
        self.last_eval_id = record.eval_id

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
            self._writer = None

    def _sync(self) -> None:
        self._file.flush()
        os.fsync(self._file.fileno())

    def __enter__(self) -> 'ResultsStore':
        return self.open()

    def __exit__(self, *_exc) -> None:
        self.close()


def read_records(path: Path, space: Optional[ParameterSpace] = None) -> list[EvaluationRecord]:
    """
    Reads `results.csv` back into records.

    With a space, parameter values are parsed to their native types and the header must match the
    space; without one they stay text (`nan` still reads as Inactive).

    Raises:
        InvalidInputError: If the file is missing, its header is wrong or a row is malformed.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f'{localization.EXCEPTION_FILE_NOT_FOUND}: {path}')
    with open(path, newline='', encoding='utf-8') as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        names = result_parameter_names(header)
        if names is None or (space is not None and names != space.names):
            raise InvalidInputError(f'{localization.EXCEPTION_RESULTS_HEADER}: {path}')
        records = []
        for line_number, row in enumerate(reader, start=2):
            try:
                records.append(_record_from_row(row, names, space))
            except (ValueError, TypeError, KeyError) as error:
                raise InvalidInputError(f'{path}:{line_number}: malformed row ({error})') from error
    return records


def result_parameter_names(header: list[str]) -> Optional[list[str]]:
    """Parameter columns of a results header, or None when the fixed columns are missing"""
    tail = len(constants.RECORD_COLUMNS)
    if len(header) < tail or tuple(header[-tail:]) != constants.RECORD_COLUMNS:
        return None
    return list(header[:-tail])


def _record_from_row(row: dict[str, str], names: list[str], space: Optional[ParameterSpace]) -> EvaluationRecord:
    if space is not None:
        config = space_service.configuration_from_text(space, row)
    else:
        values: dict[str, MaybeValue] = {name: None if row[name] == constants.INACTIVE_LITERAL else row[name] for name in names}
        config = Configuration(values=values)
    return EvaluationRecord(
        eval_id=int(row['eval_id']),
        worker_id=int(row['worker_id']),
        config=config,
        objective=float(row['objective']),
        status=EvalStatus(row['status']),
        elapsed=float(row['elapsed_sec']),
        started_at=float(row['started_at']),
        finished_at=float(row['finished_at']),
    )


def improvement_percent(baseline: BaselineSpec, best: float) -> float:
    """
    Relative gain of `best` over the baseline in percent, rounded half-up to 2 decimals.

    Maximize: 100 * (best - baseline) / baseline; minimize: 100 * (baseline - best) / baseline.

    Raises:
        ValueError: On a zero baseline, or a non-positive one for maximize metrics.
    """
    if baseline.objective == 0:
        raise ValueError('baseline objective must not be zero')
    if baseline.direction == Direction.MAXIMIZE and baseline.objective < 0:
        raise ValueError('baseline objective must be positive for maximize metrics')
    base, value = Decimal(repr(float(baseline.objective))), Decimal(repr(float(best)))
    gain = value - base if baseline.direction == Direction.MAXIMIZE else base - value
    return float((100 * gain / base).quantize(_PERCENT, rounding=ROUND_HALF_UP))


def best_record(records: list[EvaluationRecord], direction: Direction) -> Optional[EvaluationRecord]:
    """Best ok record; the earliest one wins ties"""
    ok_records = [record for record in records if record.status == EvalStatus.OK]
    if not ok_records:
        return None
    pick = max if direction == Direction.MAXIMIZE else min
    return pick(ok_records, key=lambda record: record.objective)


def status_counts(records: list[EvaluationRecord]) -> dict[str, int]:
    counts = Counter(record.status.value for record in records)
    return {status.value: counts.get(status.value, 0) for status in EvalStatus}


def export_trace(records: list[EvaluationRecord], baseline: Optional[BaselineSpec] = None) -> list[TracePoint]:
    """Records as (t_sec, objective, status) in finish order, plus a trailing baseline row when one is given"""
    ordered = sorted(records, key=lambda record: (record.finished_at, record.eval_id))
    series = [TracePoint(t_sec=record.finished_at, objective=record.objective, status=record.status.value) for record in ordered]
    if baseline is not None and series:
        series.append(TracePoint(t_sec=0.0, objective=baseline.objective, status=constants.BASELINE_TRACE_STATUS))
    return series


def incumbent_series(trace: list[TracePoint], direction: Direction) -> list[TracePoint]:
    """Running best over ok points, in the trace's order; never worsens"""
    series: list[TracePoint] = []
    best: Optional[float] = None
    for point in trace:
        if point.status != EvalStatus.OK.value:
            continue
        if best is None or (point.objective > best if direction == Direction.MAXIMIZE else point.objective < best):
            best = point.objective
        series.append(TracePoint(t_sec=point.t_sec, objective=best, status=point.status))
    return series


def write_trace(path: Path, series: list[TracePoint]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(constants.TRACE_COLUMNS)
            for point in series:
                writer.writerow((format_seconds(point.t_sec), repr(float(point.objective)), point.status))
    except OSError as error:
        raise StoreWriteError(f'{localization.EXCEPTION_STORE_WRITE}: {error}') from error


def read_trace(path: Path) -> list[TracePoint]:
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f'{localization.EXCEPTION_FILE_NOT_FOUND}: {path}')
    with open(path, newline='', encoding='utf-8') as handle:
        return [TracePoint(t_sec=float(row['t_sec']), objective=float(row['objective']), status=row['status']) for row in csv.DictReader(handle)]
