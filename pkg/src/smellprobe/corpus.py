"""Corpus loading: URL targets with app metadata, deduplicated and validated.

Accepted inputs are CSV with a ``url,app_id,source_model,declared_format``
header or JSONL with the same keys.  Rows that fail validation are kept in
a rejects list, never dropped silently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from urllib.parse import urlsplit, urlunsplit


class SourceModel(str, Enum):
    OPEN_SOURCE = "open_source"
    CLOSED_SOURCE = "closed_source"


class DeclaredFormat(str, Enum):
    JSON = "json"
    NON_JSON = "non_json"


@dataclass(frozen=True)
class ProbeTarget:
    """A URL under test plus its corpus metadata."""

    url: str
    app_id: str
    source_model: SourceModel
    declared_format: DeclaredFormat | None = None

    def __post_init__(self) -> None:
        scheme = urlsplit(self.url).scheme.lower()
        if scheme not in ("http", "https"):
            raise ValueError(f"unsupported scheme: {self.url!r}")


@dataclass(frozen=True)
class RejectedRow:
    """A row that failed validation, with the reason it was refused."""

    row: str
    reason: str


@dataclass(frozen=True)
class LoadResult:
    targets: tuple[ProbeTarget, ...]
    rejects: tuple[RejectedRow, ...]
    duplicates_collapsed: int


def normalize_url(url: str) -> str:
    """Lowercase scheme and host; path, query, and fragment stay verbatim."""
    parts = urlsplit(url)
    netloc = parts.netloc
    if "@" in netloc:
        creds, _, hostport = netloc.rpartition("@")
        netloc = creds + "@" + hostport.lower()
    else:
        netloc = netloc.lower()
    return urlunsplit((parts.scheme.lower(), netloc, parts.path, parts.query, parts.fragment))


def _validate_row(raw: str, fields: dict) -> ProbeTarget:
    url = (fields.get("url") or "").strip()
    if not url:
        raise ValueError("missing url")
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise ValueError(f"unparseable url: {exc}") from exc
    if not parts.scheme or not parts.netloc:
        raise ValueError("url not absolute")
    if parts.scheme.lower() not in ("http", "https"):
        raise ValueError("unsupported scheme")

    app_id = (fields.get("app_id") or "").strip()
    if not app_id:
        raise ValueError("missing app_id")

    model_text = (fields.get("source_model") or "").strip()
    try:
        model = SourceModel(model_text)
    except ValueError:
        raise ValueError(f"bad source_model: {model_text!r}") from None

    declared: DeclaredFormat | None = None
    declared_text = (fields.get("declared_format") or "").strip()
    if declared_text:
        try:
            declared = DeclaredFormat(declared_text)
        except ValueError:
            raise ValueError(f"bad declared_format: {declared_text!r}") from None

    return ProbeTarget(
        url=normalize_url(url),
        app_id=app_id,
        source_model=model,
        declared_format=declared,
    )


def _iter_csv(path: Path):
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        for record in reader:
            raw = ",".join((record.get(k) or "") for k in ("url", "app_id", "source_model", "declared_format"))
            yield raw, {k: record.get(k) for k in ("url", "app_id", "source_model", "declared_format")}


def _iter_jsonl(path: Path):
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            yield line, line


def load_targets(path: str | Path, format: str = "csv") -> LoadResult:
    """Load and deduplicate a corpus file.

    Duplicate URLs (scheme and host compared case-insensitively) collapse
    onto the first occurrence.  Returns targets, rejects, and the number
    of collapsed duplicates; the three always sum to the input row count.
    """
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown corpus format: {format!r}")
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")

    targets: list[ProbeTarget] = []
    rejects: list[RejectedRow] = []
    seen: set[str] = set()
    collapsed = 0

    if format == "csv":
        rows = _iter_csv(path)
    else:
        rows = _iter_jsonl(path)

    for raw, payload in rows:
        if isinstance(payload, str):
            try:
                fields = json.loads(payload)
            except json.JSONDecodeError as exc:
                rejects.append(RejectedRow(row=raw, reason=f"invalid json: {exc.msg}"))
                continue
            if not isinstance(fields, dict):
                rejects.append(RejectedRow(row=raw, reason="row is not an object"))
                continue
        else:
            fields = payload
        try:
            target = _validate_row(raw, fields)
        except ValueError as exc:
            rejects.append(RejectedRow(row=raw, reason=str(exc)))
            continue
        if target.url in seen:
            collapsed += 1
            continue
        seen.add(target.url)
        targets.append(target)

    return LoadResult(
        targets=tuple(targets),
        rejects=tuple(rejects),
        duplicates_collapsed=collapsed,
    )


def write_rejects(rejects, path: str | Path) -> None:
    """Emit rejects as JSONL records of ``{row, reason}``."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for reject in rejects:
            fh.write(json.dumps({"row": reject.row, "reason": reject.reason}, sort_keys=True))
            fh.write("\n")
