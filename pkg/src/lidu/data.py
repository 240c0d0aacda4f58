"""Interaction-log ingestion, filtering, k-core pruning, and leave-one-out
splitting."""

from __future__ import annotations

import csv
import warnings
from collections import Counter
from dataclasses import dataclass

from .core import DataFormatError, DatasetSplit, Interaction, ValidationError


@dataclass(frozen=True)
class RawLogSpec:
    """Where the log lives and how its columns map onto interactions."""

    path: str
    user_col: str = "user"
    item_col: str = "item"
    time_col: str = "time"
    rating_col: str | None = None
    rating_threshold: float | None = None
    k_core: int = 0

    def __post_init__(self):
        if self.rating_threshold is not None and self.rating_col is None:
            raise ValidationError("a rating threshold requires a rating column")
        if self.k_core < 0:
            raise ValidationError("k_core must be >= 0")


def _parse_time(raw: str, line_no: int) -> int:
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        value = float(raw)
    except ValueError:
        raise DataFormatError(f"line {line_no}: unparseable timestamp {raw!r}") from None
    if not value.is_integer():
        raise DataFormatError(f"line {line_no}: timestamp {raw!r} is not an integer")
    return int(value)


def load_interactions(spec: RawLogSpec) -> list:
    """Parse a delimited log (comma or tab, header row) into interactions.

    User and item ids stay strings. Malformed rows raise with their line
    number rather than being silently dropped.
    """
    with open(spec.path, newline="", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise DataFormatError(f"{spec.path}: empty file, expected a header row")
        delimiter = "\t" if "\t" in header_line else ","
        header = next(csv.reader([header_line], delimiter=delimiter))
        col_idx = {}
        wanted = [spec.user_col, spec.item_col, spec.time_col]
        if spec.rating_col is not None:
            wanted.append(spec.rating_col)
        for col in wanted:
            if col not in header:
                raise DataFormatError(f"{spec.path}: missing column {col!r} in header")
            col_idx[col] = header.index(col)
        out = []
        reader = csv.reader(fh, delimiter=delimiter)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) <= max(col_idx.values()):
                raise DataFormatError(f"line {line_no}: expected {len(header)} fields, got {len(row)}")
            rating = None
            if spec.rating_col is not None:
                raw = row[col_idx[spec.rating_col]]
                try:
                    rating = float(raw)
                except ValueError:
                    raise DataFormatError(f"line {line_no}: unparseable rating {raw!r}") from None
            out.append(
                Interaction(
                    user_id=row[col_idx[spec.user_col]],
                    item_id=row[col_idx[spec.item_col]],
                    timestamp=_parse_time(row[col_idx[spec.time_col]], line_no),
                    rating=rating,
                )
            )
    return out


def filter_ratings(data, threshold: float) -> list:
    """Keep interactions whose rating is >= threshold."""
    out = []
    for it in data:
        if it.rating is None:
            raise ValidationError(
                f"interaction ({it.user_id!r}, {it.item_id!r}) has no rating to filter on"
            )
        if it.rating >= threshold:
            out.append(it)
    return out


def k_core(data, k: int) -> list:
    """Iteratively drop users and items with fewer than k interactions until
    a fixed point; the result is the unique maximal k-core."""
    if k < 0:
        raise ValidationError("k must be >= 0")
    current = list(data)
    if k == 0:
        return current
    while True:
        user_deg = Counter(it.user_id for it in current)
        item_deg = Counter(it.item_id for it in current)
        kept = [it for it in current if user_deg[it.user_id] >= k and item_deg[it.item_id] >= k]
        if len(kept) == len(current):
            return kept
        current = kept


def leave_one_out(data) -> DatasetSplit:
    """Per user (chronological order, file order on timestamp ties): last
    interaction to test, second last to validation, the rest to train.
    Users with fewer than 3 interactions are dropped with a count warning.
    """
    by_user: dict = {}
    for idx, it in enumerate(data):
        by_user.setdefault(it.user_id, []).append((it.timestamp, idx, it))
    train, valid, test = [], [], []
    dropped = 0
    for user, entries in by_user.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        if len(entries) < 3:
            dropped += 1
            continue
        train.extend(e[2] for e in entries[:-2])
        valid.append(entries[-2][2])
        test.append(entries[-1][2])
    if dropped:
        warnings.warn(f"dropped {dropped} user(s) with fewer than 3 interactions")
    return DatasetSplit(train=train, valid=valid, test=test)


def activeness_groups(split: DatasetSplit, threshold: int = 5):
    """Split users into (active, inactive) by training interaction count;
    inactive means strictly fewer than ``threshold``."""
    counts = Counter(it.user_id for it in split.train)
    users = set(counts)
    for part in (split.valid, split.test):
        users.update(it.user_id for it in part)
    active, inactive = [], []
    for user in sorted(users, key=str):
        (active if counts.get(user, 0) >= threshold else inactive).append(user)
    return active, inactive


SPLIT_TAGS = ("train", "valid", "test")


def write_split(split: DatasetSplit, path) -> None:
    """Canonical split file: user, item, time, split tag; one row per
    interaction so runs can be reproduced without re-ingesting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "time", "split"])
        for tag in SPLIT_TAGS:
            for it in getattr(split, tag):
                writer.writerow([it.user_id, it.item_id, it.timestamp, tag])


def read_split(path) -> DatasetSplit:
    parts = {tag: [] for tag in SPLIT_TAGS}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for line_no, row in enumerate(reader, start=2):
            tag = row.get("split")
            if tag not in parts:
                raise DataFormatError(f"line {line_no}: unknown split tag {tag!r}")
            parts[tag].append(
                Interaction(row["user"], row["item"], _parse_time(row["time"], line_no))
            )
    return DatasetSplit(**parts)
