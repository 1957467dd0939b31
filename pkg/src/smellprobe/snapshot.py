"""Snapshot persistence: one scan run serialized as canonical JSONL.

Line 1 is a header record ``{entries, id, taken_at, tool_version}``; each
following line holds one URL's probe result, redirect chain, and smell
report.  Entries are sorted by URL and every object is dumped with sorted
keys, so equal snapshots serialize to byte-identical files.  Loading is a
pure file parse; it never touches the network.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .corpus import DeclaredFormat, ProbeTarget, SourceModel
from .probe import TOOL_VERSION, BodyFormat, ProbeResult, RedirectChain, Scheme
from .smells import LeakCategory, LeakRecord, Locus, SmellFinding, SmellKind, SmellReport


class SnapshotIntegrityError(Exception):
    """Raised when a snapshot file is corrupt; names the first bad record."""


@dataclass(frozen=True)
class SnapshotEntry:
    result: ProbeResult
    chain: RedirectChain
    report: SmellReport


@dataclass(frozen=True)
class Snapshot:
    id: str
    taken_at: datetime
    entries: dict[str, SnapshotEntry]

    def __post_init__(self) -> None:
        if self.taken_at.tzinfo is None:
            raise ValueError("taken_at must be timezone-aware")
        for url, entry in self.entries.items():
            if entry.result.target.url != url:
                raise ValueError(f"entry key {url!r} does not match its target url")


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _parse_ts(text: str) -> datetime:
    return datetime.fromisoformat(text)


def _target_to_dict(target: ProbeTarget) -> dict:
    return {
        "app_id": target.app_id,
        "declared_format": target.declared_format.value if target.declared_format else None,
        "source_model": target.source_model.value,
        "url": target.url,
    }


def _target_from_dict(data: dict) -> ProbeTarget:
    declared = data.get("declared_format")
    return ProbeTarget(
        url=data["url"],
        app_id=data["app_id"],
        source_model=SourceModel(data["source_model"]),
        declared_format=DeclaredFormat(declared) if declared else None,
    )


def _result_to_dict(result: ProbeResult) -> dict:
    return {
        "body_b64": base64.b64encode(result.body_sample).decode("ascii"),
        "body_format": result.body_format.value,
        "headers": [[n, v] for n, v in result.headers],
        "scheme_used": result.scheme_used.value,
        "status": result.status,
        "target": _target_to_dict(result.target),
        "timestamp": _iso(result.timestamp),
        "transport_error": result.transport_error,
        "url": result.url,
    }


def _result_from_dict(data: dict) -> ProbeResult:
    return ProbeResult(
        target=_target_from_dict(data["target"]),
        url=data["url"],
        timestamp=_parse_ts(data["timestamp"]),
        scheme_used=Scheme(data["scheme_used"]),
        status=data["status"],
        headers=tuple((n, v) for n, v in data["headers"]),
        body_sample=base64.b64decode(data["body_b64"]),
        body_format=BodyFormat(data["body_format"]),
        transport_error=data["transport_error"],
    )


def _chain_to_dict(chain: RedirectChain) -> dict:
    return {
        "chain_length": chain.chain_length,
        "downgrade_hops": chain.downgrade_hops,
        "hops": [[url, status, location] for url, status, location in chain.hops],
        "loop_detected": chain.loop_detected,
        "terminal": _result_to_dict(chain.terminal),
    }


def _chain_from_dict(data: dict) -> RedirectChain:
    return RedirectChain(
        hops=tuple((url, status, location) for url, status, location in data["hops"]),
        terminal=_result_from_dict(data["terminal"]),
        loop_detected=data["loop_detected"],
        downgrade_hops=data["downgrade_hops"],
        chain_length=data["chain_length"],
    )


def _report_to_dict(report: SmellReport) -> dict:
    return {
        "findings": [
            {
                "evidence": [[locus.value, excerpt] for locus, excerpt in f.evidence],
                "kind": f.kind.value,
                "subflags": sorted(f.subflags),
                "url": f.url,
            }
            for f in report.findings
        ],
        "leaks": [
            {
                "category": leak.category.value,
                "locus": leak.locus,
                "software": leak.software,
                "version": leak.version,
            }
            for leak in report.leaks
        ],
        "url": report.url,
    }


def _report_from_dict(data: dict) -> SmellReport:
    findings = tuple(
        SmellFinding(
            kind=SmellKind(f["kind"]),
            url=f["url"],
            evidence=tuple((Locus(locus), excerpt) for locus, excerpt in f["evidence"]),
            subflags=frozenset(f["subflags"]),
        )
        for f in data["findings"]
    )
    leaks = tuple(
        LeakRecord(
            category=LeakCategory(leak["category"]),
            software=leak["software"],
            version=leak["version"],
            locus=leak["locus"],
        )
        for leak in data["leaks"]
    )
    return SmellReport(url=data["url"], findings=findings, leaks=leaks)


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def serialize(snapshot: Snapshot) -> str:
    """Canonical text form of a snapshot (what save() writes)."""
    lines = [
        _dump(
            {
                "entries": len(snapshot.entries),
                "id": snapshot.id,
                "taken_at": _iso(snapshot.taken_at),
                "tool_version": TOOL_VERSION,
            }
        )
    ]
    for url in sorted(snapshot.entries):
        entry = snapshot.entries[url]
        lines.append(
            _dump(
                {
                    "chain": _chain_to_dict(entry.chain),
                    "report": _report_to_dict(entry.report),
                    "result": _result_to_dict(entry.result),
                    "url": url,
                }
            )
        )
    return "\n".join(lines) + "\n"


def save(snapshot: Snapshot, path: str | Path) -> None:
    Path(path).write_text(serialize(snapshot), encoding="utf-8")


def load(path: str | Path) -> Snapshot:
    """Reload a snapshot, verifying record structure and the entry count."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise SnapshotIntegrityError("record 0: empty snapshot file")
    try:
        header = json.loads(lines[0])
        snapshot_id = header["id"]
        taken_at = _parse_ts(header["taken_at"])
        declared = int(header["entries"])
    except (ValueError, KeyError, TypeError) as exc:
        raise SnapshotIntegrityError(f"record 0: bad header ({exc})") from exc

    entries: dict[str, SnapshotEntry] = {}
    for number, line in enumerate(lines[1:], start=1):
        try:
            data = json.loads(line)
            url = data["url"]
            entry = SnapshotEntry(
                result=_result_from_dict(data["result"]),
                chain=_chain_from_dict(data["chain"]),
                report=_report_from_dict(data["report"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise SnapshotIntegrityError(f"record {number}: {exc}") from exc
        if entry.result.target.url != url:
            raise SnapshotIntegrityError(f"record {number}: key does not match target url")
        if url in entries:
            raise SnapshotIntegrityError(f"record {number}: duplicate url {url!r}")
        entries[url] = entry

    if len(entries) != declared:
        raise SnapshotIntegrityError(
            f"record {len(entries) + 1}: expected {declared} entries, found {len(entries)}"
        )
    return Snapshot(id=snapshot_id, taken_at=taken_at, entries=entries)
