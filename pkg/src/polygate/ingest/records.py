"""Line-list CSV parsing.

Each dataset family has a schema profile (bundled JSON) that maps record
fields to candidate CSV headers, and free-text outcomes are normalized to a
status through a bundled, user-extensible TSV table. Every data row ends up
either as a :class:`CaseRecord` or as a :class:`Rejection`.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

MAX_AGE = 130.0


class Sex(str, enum.Enum):
    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


class Status(str, enum.Enum):
    ACTIVE = "active"
    RECOVERED = "recovered"
    DEAD = "dead"


@dataclass(frozen=True)
class CaseRecord:
    id: str
    date_confirmed: dt.date
    status: Status
    country: str = ""
    age: Optional[float] = None
    sex: Sex = Sex.UNKNOWN
    province: Optional[str] = None
    linked_id: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.age is not None and not 0 <= self.age <= MAX_AGE:
            raise ValueError(f"age {self.age} outside [0, {MAX_AGE:g}]")
        object.__setattr__(self, "status", Status(self.status))
        object.__setattr__(self, "sex", Sex(self.sex))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "age": self.age,
            "sex": self.sex.value,
            "country": self.country,
            "province": self.province,
            "date_confirmed": self.date_confirmed.isoformat(),
            "status": self.status.value,
            "linked_id": self.linked_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseRecord":
        return cls(
            id=d["id"],
            age=d.get("age"),
            sex=d.get("sex") or Sex.UNKNOWN,
            country=d.get("country") or "",
            province=d.get("province"),
            date_confirmed=dt.date.fromisoformat(d["date_confirmed"]),
            status=d["status"],
            linked_id=d.get("linked_id"),
        )


def record_size(rec: CaseRecord) -> int:
    """Bytes a record occupies once serialized (compact JSON)."""
    return len(json.dumps(rec.to_dict(), separators=(",", ":")).encode())


@dataclass(frozen=True)
class Rejection:
    row: int  # 1-based data row number, header excluded
    reason: str
    detail: str = ""


@dataclass
class ParseResult:
    records: list[CaseRecord] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)

    @property
    def row_count(self) -> int:
        return len(self.records) + len(self.rejections)


class IngestError(Exception):
    pass


@dataclass(frozen=True)
class SchemaProfile:
    name: str
    columns: dict[str, tuple[str, ...]]
    mandatory: tuple[str, ...]
    date_formats: tuple[str, ...]

    @classmethod
    def from_json(cls, name: str, doc: dict) -> "SchemaProfile":
        return cls(
            name,
            {k: tuple(v) for k, v in doc["columns"].items()},
            tuple(doc.get("mandatory", ("id", "date_confirmed", "status"))),
            tuple(doc.get("date_formats", ("%Y-%m-%d",))),
        )


def available_profiles() -> list[str]:
    base = resources.files("polygate") / "data" / "profiles"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def load_profile(name_or_path: str | Path) -> SchemaProfile:
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return SchemaProfile.from_json(path.stem, json.loads(path.read_text("utf-8")))
    ref = resources.files("polygate") / "data" / "profiles" / f"{name_or_path}.json"
    if not ref.is_file():
        raise IngestError(
            f"unknown schema profile {str(name_or_path)!r}; bundled: {', '.join(available_profiles())}"
        )
    return SchemaProfile.from_json(str(name_or_path), json.loads(ref.read_text("utf-8")))


def load_outcome_table(path: str | Path | None = None) -> dict[str, Status]:
    if path is None:
        text = (resources.files("polygate") / "data" / "outcomes.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    table = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        outcome, status = line.rsplit("\t", 1)
        table[outcome.strip().lower()] = Status(status.strip())
    return table


_RANGE_RE = re.compile(r"^(\d+(?:\.\d+)?)\s*-\s*(\d+(?:\.\d+)?)$")
_OPEN_RE = re.compile(r"^(\d+(?:\.\d+)?)\s*[-+]$")


def parse_age(text: str) -> Optional[float]:
    """Age in years; ``"40-49"`` maps to its midpoint, ``"80+"`` to 80.

    Raises ValueError for text that is not an age.
    """
    text = text.strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        pass
    m = _RANGE_RE.match(text)
    if m:
        lo, hi = float(m.group(1)), float(m.group(2))
        if lo > hi:
            raise ValueError(f"inverted age range {text!r}")
        return (lo + hi) / 2
    m = _OPEN_RE.match(text)
    if m:
        return float(m.group(1))
    raise ValueError(f"unparseable age {text!r}")


def parse_sex(text: str) -> Sex:
    t = text.strip().lower()
    if t in ("male", "m"):
        return Sex.MALE
    if t in ("female", "f"):
        return Sex.FEMALE
    return Sex.UNKNOWN


def parse_date(text: str, formats) -> dt.date:
    text = text.strip()
    # ranges such as "25.02.2020 - 26.02.2020" keep their first date
    first = re.split(r"\s+-\s+", text, maxsplit=1)[0]
    for fmt in formats:
        try:
            return dt.datetime.strptime(first, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {text!r}")


def parse_line_list(
    path: str | Path,
    schema_profile: str | SchemaProfile = "generic",
    outcomes: dict[str, Status] | None = None,
) -> ParseResult:
    profile = schema_profile if isinstance(schema_profile, SchemaProfile) else load_profile(schema_profile)
    outcomes = load_outcome_table() if outcomes is None else outcomes
    try:
        fh = open(path, newline="", encoding="utf-8-sig", errors="replace")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from None
    with fh:
        return _parse_rows(csv.reader(fh), profile, outcomes)


def _parse_rows(reader, profile: SchemaProfile, outcomes: dict[str, Status]) -> ParseResult:
    result = ParseResult()
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("file is empty; a header row is required") from None
    header = [h.strip() for h in header]
    where: dict[str, int] = {}
    for fld, candidates in profile.columns.items():
        for cand in candidates:
            if cand in header:
                where[fld] = header.index(cand)
                break
    missing = [f for f in profile.mandatory if f not in where]
    if missing:
        raise IngestError(
            f"header lacks mandatory column(s) for {', '.join(missing)} (profile {profile.name})"
        )

    seen: set[str] = set()
    rownum = 0
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            rownum += 1
            result.rejections.append(Rejection(rownum, "malformed-csv", str(exc)))
            continue
        rownum += 1
        if not any(cell.strip() for cell in row):
            result.rejections.append(Rejection(rownum, "blank-row"))
            continue
        if len(row) != len(header):
            result.rejections.append(
                Rejection(rownum, "field-count", f"{len(row)} fields, header has {len(header)}")
            )
            continue
        outcome = _cell_to_record(row, where, profile, outcomes, seen)
        if isinstance(outcome, CaseRecord):
            seen.add(outcome.id)
            result.records.append(outcome)
        else:
            reason, detail = outcome
            result.rejections.append(Rejection(rownum, reason, detail))
    return result


def _cell_to_record(row, where, profile, outcomes, seen):
    def cell(name: str) -> str:
        idx = where.get(name)
        return "" if idx is None else row[idx].strip()

    rid = cell("id")
    if not rid:
        return "missing-id", ""
    if rid in seen:
        return "duplicate-id", rid
    try:
        age = parse_age(cell("age"))
    except ValueError as exc:
        return "age-unparseable", str(exc)
    if age is not None and not 0 <= age <= MAX_AGE:
        return "age-out-of-range", cell("age")
    raw_date = cell("date_confirmed")
    if not raw_date:
        return "missing-date", ""
    try:
        date = parse_date(raw_date, profile.date_formats)
    except ValueError as exc:
        return "date-unparseable", str(exc)
    outcome_text = cell("status").lower()
    if not outcome_text:
        status = Status.ACTIVE
    elif outcome_text in outcomes:
        status = outcomes[outcome_text]
    else:
        return "unknown-outcome", cell("status")
    return CaseRecord(
        id=rid,
        age=age,
        sex=parse_sex(cell("sex")),
        country=cell("country"),
        province=cell("province") or None,
        date_confirmed=date,
        status=status,
        linked_id=cell("linked_id") or None,
    )
