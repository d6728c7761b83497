"""Project record ingestion and per-record derived variables.

Records arrive as CSV or JSONL from pre-scraped listings (USD-converted
amounts).  Invalid rows are never dropped silently: they land in a rejects
report with a reason.  Baseline variables follow the six-characteristic
design: staff pick, country (frequency-pooled one-hot), launch day of year,
launch year, funding duration in days, and log funding goal.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

REQUIRED_COLUMNS = (
    "id",
    "goal_usd",
    "pledged_usd",
    "staff_pick",
    "country",
    "launched_at",
    "deadline",
    "blurb",
    "full_text",
)

OPTIONAL_COLUMNS = (
    "description_html",
    "image_url",
    "n_images",
    "n_videos",
    "n_backers",
)

# hosts whose embedded players count as videos in description HTML
VIDEO_EMBED_HOSTS = (
    "youtube.com",
    "youtu.be",
    "vimeo.com",
    "player.vimeo.com",
    "wistia.com",
    "fast.wistia.net",
    "dailymotion.com",
)

COUNTRY_POOL_MIN_FRACTION = 0.01
POOLED_COUNTRY = "other"


@dataclass(frozen=True)
class ProjectRecord:
    id: str
    goal_usd: float
    pledged_usd: float
    staff_pick: bool
    country: str
    launched_at: datetime
    deadline: datetime
    blurb: str
    full_text: str
    description_html: str | None = None
    image_url: str | None = None
    n_images: int | None = None
    n_videos: int | None = None
    n_backers: int | None = None  # ingested but excluded from every variable set
    text_passthrough: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RejectEntry:
    row: int  # 1-based data row number
    reason: str


@dataclass(frozen=True)
class IngestResult:
    records: list[ProjectRecord]
    rejects: list[RejectEntry]


@dataclass(frozen=True)
class BaselineFeatures:
    staff_pick: int
    country: str  # group label after frequency pooling
    day_of_year: int
    year: int
    duration_days: int
    log_goal: float


def _parse_timestamp(value: str) -> datetime:
    v = value.strip()
    if v.endswith("Z"):
        v = v[:-1] + "+00:00"
    dt = datetime.fromisoformat(v)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in ("true", "1", "yes", "t"):
        return True
    if s in ("false", "0", "no", "f", ""):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _build_record(row: dict, row_no: int) -> ProjectRecord:
    goal = float(row["goal_usd"])
    if goal <= 0:
        raise ValueError("nonpositive goal")
    pledged = float(row["pledged_usd"])
    if pledged < 0:
        raise ValueError("negative pledged amount")
    launched = _parse_timestamp(str(row["launched_at"]))
    deadline = _parse_timestamp(str(row["deadline"]))
    if deadline <= launched:
        raise ValueError("nonpositive duration")

    def opt_int(name):
        v = row.get(name)
        if v is None or v == "":
            return None
        n = int(float(v))
        if n < 0:
            raise ValueError(f"negative {name}")
        return n

    passthrough = {
        k: float(v)
        for k, v in row.items()
        if k.startswith("liwc_") and v not in (None, "")
    }
    return ProjectRecord(
        id=str(row["id"]),
        goal_usd=goal,
        pledged_usd=pledged,
        staff_pick=_parse_bool(row["staff_pick"]),
        country=str(row["country"]).strip().upper(),
        launched_at=launched,
        deadline=deadline,
        blurb=str(row.get("blurb") or ""),
        full_text=str(row.get("full_text") or ""),
        description_html=row.get("description_html") or None,
        image_url=row.get("image_url") or None,
        n_images=opt_int("n_images"),
        n_videos=opt_int("n_videos"),
        n_backers=opt_int("n_backers"),
        text_passthrough=passthrough,
    )


def ingest(path, format: str) -> IngestResult:
    """Load and validate records; row-level violations become reject entries."""
    if format == "csv":
        rows = _read_csv(path)
    elif format == "jsonl":
        rows = _read_jsonl(path)
    else:
        raise ValueError(f"unknown format {format!r} (expected 'csv' or 'jsonl')")
    records, rejects = [], []
    for row_no, row in enumerate(rows, start=1):
        try:
            records.append(_build_record(row, row_no))
        except (ValueError, KeyError, TypeError) as exc:
            rejects.append(RejectEntry(row=row_no, reason=str(exc)))
    return IngestResult(records=records, rejects=rejects)


def _read_csv(path) -> Iterable[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"missing required columns: {', '.join(missing)}")
        return list(reader)


def _read_jsonl(path) -> Iterable[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if rows:
        missing = [c for c in REQUIRED_COLUMNS if c not in rows[0]]
        if missing:
            raise ValueError(f"missing required columns: {', '.join(missing)}")
    return rows


_COMMENT_RE = re.compile(r"<!--.*?-->", re.DOTALL)
_IMG_RE = re.compile(r"<img\b", re.IGNORECASE)
_VIDEO_RE = re.compile(r"<video\b", re.IGNORECASE)
_EMBED_RE = re.compile(
    r"<(?:iframe|embed)\b[^>]*\bsrc\s*=\s*[\"']([^\"']+)[\"']", re.IGNORECASE
)


def count_visuals(record: ProjectRecord) -> tuple[int | None, int | None]:
    """(n_images, n_videos): explicit counts pass through, otherwise counted
    from description HTML; (None, None) when neither source exists."""
    if record.n_images is not None and record.n_videos is not None:
        return record.n_images, record.n_videos
    if record.description_html is None:
        return record.n_images, record.n_videos
    html = _COMMENT_RE.sub("", record.description_html)
    n_images = len(_IMG_RE.findall(html))
    n_videos = len(_VIDEO_RE.findall(html))
    for src in _EMBED_RE.findall(html):
        host = re.sub(r"^[a-z]+://", "", src.lower()).split("/")[0]
        host = host.split(":")[0]
        if any(host == h or host.endswith("." + h) for h in VIDEO_EMBED_HOSTS):
            n_videos += 1
    if record.n_images is not None:
        return record.n_images, n_videos
    if record.n_videos is not None:
        return n_images, record.n_videos
    return n_images, n_videos


def derive_outcome(record: ProjectRecord) -> float:
    """ln(pledged + 1): failed projects can raise exactly zero dollars."""
    return math.log(record.pledged_usd + 1.0)


def country_groups(records: list[ProjectRecord],
                   min_fraction: float = COUNTRY_POOL_MIN_FRACTION) -> list[str]:
    """Country codes with at least `min_fraction` frequency; the rest pool
    into 'other'. Sorted for deterministic column order."""
    if not records:
        return []
    counts: dict[str, int] = {}
    for r in records:
        counts[r.country] = counts.get(r.country, 0) + 1
    cutoff = min_fraction * len(records)
    return sorted(c for c, n in counts.items() if n >= cutoff)


def derive_baseline(record: ProjectRecord,
                    frequent_countries: list[str] | None = None) -> BaselineFeatures:
    """Six baseline characteristics; country pooled to 'other' when below the
    frequency cutoff (pass frequent_countries from country_groups)."""
    if frequent_countries is None:
        group = record.country
    else:
        group = record.country if record.country in frequent_countries else POOLED_COUNTRY
    seconds = (record.deadline - record.launched_at).total_seconds()
    return BaselineFeatures(
        staff_pick=int(record.staff_pick),
        country=group,
        day_of_year=record.launched_at.timetuple().tm_yday,
        year=record.launched_at.year,
        duration_days=math.ceil(seconds / 86400.0),
        log_goal=math.log(record.goal_usd),
    )
