from __future__ import annotations

import csv
import io
import logging
import re
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import BinaryIO, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from stgraphrl.domain.models import CheckinRecord

logger = logging.getLogger(__name__)

BIN_MINUTES = 30
_EPOCH_PATTERN = re.compile(r"[+-]?\d+")
_FOURSQUARE_TIME_FORMAT = "%a %b %d %H:%M:%S %z %Y"


class CheckinParseError(ValueError):
    def __init__(self, message: str, *, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class FormatConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    delimiter: str = Field(default=",", min_length=1, max_length=1)
    user_column: str = "user_id"
    timestamp_column: str = "timestamp"
    latitude_column: str = "latitude"
    longitude_column: str = "longitude"
    venue_column: str | None = "venue_id"
    category_column: str | None = "category"
    timestamp_kind: Literal["auto", "iso", "epoch", "foursquare"] = "auto"
    # Minutes east of UTC, per row; overrides the offset carried by the timestamp.
    utc_offset_column: str | None = None
    # Applied to epoch seconds and to ISO timestamps without an offset.
    default_utc_offset_minutes: int = Field(default=0, ge=-14 * 60, le=14 * 60)
    # Column names for files without a header line.
    header: tuple[str, ...] | None = None
    strict: bool = False

    @model_validator(mode="after")
    def _validate_header(self) -> FormatConfig:
        if self.header is not None:
            missing = [name for name in self.required_columns if name not in self.header]
            if missing:
                raise ValueError(f"fixed header lacks required columns: {', '.join(missing)}")
        return self

    @property
    def required_columns(self) -> tuple[str, ...]:
        return (
            self.user_column,
            self.timestamp_column,
            self.latitude_column,
            self.longitude_column,
        )

    @classmethod
    def foursquare(cls, *, strict: bool = False) -> FormatConfig:
        """The public tab-separated, headerless Foursquare NYC/TKY check-in dump."""
        return cls(
            delimiter="\t",
            venue_column="venue_id",
            category_column="category",
            timestamp_kind="foursquare",
            utc_offset_column="timezone_offset",
            header=(
                "user_id",
                "venue_id",
                "venue_category_id",
                "category",
                "latitude",
                "longitude",
                "timezone_offset",
                "timestamp",
            ),
            strict=strict,
        )


@dataclass(frozen=True, slots=True)
class InvalidLine:
    line_number: int
    reason: str


@dataclass(frozen=True, slots=True)
class ParseResult:
    records: tuple[CheckinRecord, ...]
    invalid_lines: tuple[InvalidLine, ...]

    @property
    def total_lines(self) -> int:
        return len(self.records) + len(self.invalid_lines)


def parse_checkins(stream: BinaryIO, format_config: FormatConfig | None = None) -> ParseResult:
    config = format_config if format_config is not None else FormatConfig()
    text = io.TextIOWrapper(stream, encoding="utf-8", newline="")
    reader = csv.reader(text, delimiter=config.delimiter)

    header = config.header
    if header is None:
        first = next(reader, None)
        if first is None:
            raise CheckinParseError("input is empty; a header line is required", line_number=1)
        header = tuple(column.strip() for column in first)
        missing = [name for name in config.required_columns if name not in header]
        if missing:
            raise CheckinParseError(
                f"missing required column: {', '.join(missing)}",
                line_number=reader.line_num,
            )

    records: list[CheckinRecord] = []
    invalid: list[InvalidLine] = []
    for row in reader:
        if not row or all(not value.strip() for value in row):
            continue
        line_number = reader.line_num
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, found {len(row)}")
            records.append(_to_record(dict(zip(header, row, strict=True)), config))
        except (ValidationError, ValueError, OverflowError) as error:
            reason = _short_reason(error)
            if config.strict:
                raise CheckinParseError(reason, line_number=line_number) from error
            logger.debug("Skipping invalid check-in", extra={"line": line_number, "reason": reason})
            invalid.append(InvalidLine(line_number=line_number, reason=reason))

    logger.info(
        "Parsed check-ins",
        extra={"records": len(records), "invalid_lines": len(invalid)},
    )
    return ParseResult(records=tuple(records), invalid_lines=tuple(invalid))


def _to_record(row: Mapping[str, str], config: FormatConfig) -> CheckinRecord:
    return CheckinRecord(
        user_id=row[config.user_column],
        timestamp=_parse_timestamp(row, config),
        latitude=float(row[config.latitude_column]),
        longitude=float(row[config.longitude_column]),
        venue_id=row.get(config.venue_column) if config.venue_column else None,
        raw_category=row.get(config.category_column) if config.category_column else None,
    )


def _parse_timestamp(row: Mapping[str, str], config: FormatConfig) -> datetime:
    raw = row[config.timestamp_column].strip()
    default_zone = timezone(timedelta(minutes=config.default_utc_offset_minutes))
    kind = config.timestamp_kind
    if kind == "auto":
        kind = "epoch" if _EPOCH_PATTERN.fullmatch(raw) else "iso"

    if kind == "epoch":
        timestamp = datetime.fromtimestamp(int(raw), tz=default_zone)
    elif kind == "foursquare":
        timestamp = datetime.strptime(raw, _FOURSQUARE_TIME_FORMAT)
    else:
        timestamp = datetime.fromisoformat(raw)
        if timestamp.tzinfo is None or timestamp.utcoffset() is None:
            timestamp = timestamp.replace(tzinfo=default_zone)

    if config.utc_offset_column is not None:
        offset = int(row[config.utc_offset_column])
        timestamp = timestamp.astimezone(timezone(timedelta(minutes=offset)))
    return timestamp


def _short_reason(error: Exception) -> str:
    if isinstance(error, ValidationError):
        first = error.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        return f"{location}: {first['msg']}"
    return str(error)


def assign_location_key(record: CheckinRecord) -> str:
    if record.venue_id:
        return "_".join(record.venue_id.split())
    # Round to ~11 m; adding 0.0 folds "-0.0000" into "0.0000".
    latitude = round(record.latitude, 4) + 0.0
    longitude = round(record.longitude, 4) + 0.0
    return f"{latitude:.4f}:{longitude:.4f}"


def time_bin(timestamp: datetime) -> int:
    """Half-hour slot of the local civil day, 0..47."""
    return (timestamp.hour * 60 + timestamp.minute) // BIN_MINUTES


def iter_user_records(records: tuple[CheckinRecord, ...]) -> Iterator[tuple[str, list[CheckinRecord]]]:
    """Group records by user in ascending user-id order, keeping input order inside a user."""
    grouped: dict[str, list[CheckinRecord]] = {}
    for record in records:
        grouped.setdefault(record.user_id, []).append(record)
    for user_id in sorted(grouped):
        yield user_id, grouped[user_id]
