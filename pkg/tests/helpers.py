"""Fixture builders shared by several test modules."""

from __future__ import annotations

import csv
import random
from pathlib import Path

HEADER = ["id", "age", "sex", "country", "province", "date_confirmed", "outcome", "linked_id"]

VALID_OUTCOMES = {"died": "dead", "Discharged": "recovered", "stable": "active", "": "active"}

CORRUPTIONS = [
    "missing-id",
    "duplicate-id",
    "age-unparseable",
    "age-out-of-range",
    "missing-date",
    "date-unparseable",
    "unknown-outcome",
    "field-count",
    "blank-row",
    "malformed-csv",
]


def write_line_list(path: Path, n_rows: int, corrupt_fraction: float, seed: int = 0):
    """Write a line list mixing valid rows with every corruption kind.

    Returns ``(rows written, expected valid records, expected reason counts)``.
    """
    rng = random.Random(seed)
    valid_ids: list[str] = []
    reasons: dict[str, int] = {}
    rows = []
    for i in range(n_rows):
        outcome = rng.choice(list(VALID_OUTCOMES))
        row = [
            f"r{i}",
            rng.choice([str(rng.randint(0, 100)), "40-49", "80+", ""]),
            rng.choice(["male", "female", "F", ""]),
            "Egypt",
            rng.choice(["Giza", ""]),
            rng.choice(["2020-03-01", "05.03.2020", "07/03/2020", "01.02.2020 - 03.02.2020"]),
            outcome,
            "",
        ]
        kind = rng.choice(CORRUPTIONS) if rng.random() < corrupt_fraction else None
        if kind == "duplicate-id" and not valid_ids:
            kind = None
        if kind == "missing-id":
            row[0] = ""
        elif kind == "duplicate-id":
            row[0] = rng.choice(valid_ids)
        elif kind == "age-unparseable":
            row[1] = "old"
        elif kind == "age-out-of-range":
            row[1] = rng.choice(["-5", "131", "400"])
        elif kind == "missing-date":
            row[5] = ""
        elif kind == "date-unparseable":
            row[5] = rng.choice(["2020-13-45", "yesterday"])
        elif kind == "unknown-outcome":
            row[6] = "abducted by aliens"
        elif kind == "field-count":
            row = row[: rng.randint(1, 6)] if rng.random() < 0.5 else row + ["extra"]
        elif kind == "blank-row":
            row = [""] * len(HEADER)
        elif kind == "malformed-csv":
            row[3] = "x" * 140_000  # beyond the csv module's field limit
        if kind is None:
            valid_ids.append(row[0])
        else:
            reasons[kind] = reasons.get(kind, 0) + 1
        rows.append(row)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)
    return n_rows, len(valid_ids), reasons
