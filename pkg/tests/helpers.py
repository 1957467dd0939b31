"""Shared builders and independent oracles used across the test suite."""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

from smellprobe.corpus import DeclaredFormat, ProbeTarget, SourceModel
from smellprobe.probe import BodyFormat, ProbeConfig, ProbeResult, RedirectChain, Scheme
from smellprobe.smells import (
    LeakCategory,
    LeakRecord,
    Locus,
    SmellFinding,
    SmellKind,
    SmellReport,
)
from smellprobe.snapshot import Snapshot, SnapshotEntry

EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def fast_cfg(**overrides) -> ProbeConfig:
    defaults = dict(
        connect_timeout=3.0,
        read_timeout=3.0,
        retries=0,
        retry_backoff=0.05,
        max_redirects=10,
        body_sample_limit=256 * 1024,
        parallelism=8,
    )
    defaults.update(overrides)
    return ProbeConfig(**defaults)


def make_target(
    url: str,
    app_id: str = "app-1",
    model: SourceModel = SourceModel.OPEN_SOURCE,
    declared: DeclaredFormat | None = None,
) -> ProbeTarget:
    return ProbeTarget(url=url, app_id=app_id, source_model=model, declared_format=declared)


def make_result(
    target: ProbeTarget,
    *,
    status: int | None = 200,
    headers: tuple[tuple[str, str], ...] = (),
    body: bytes = b"",
    body_format: BodyFormat | None = None,
    error: str | None = None,
    url: str | None = None,
    timestamp: datetime | None = None,
) -> ProbeResult:
    url = url or target.url
    scheme = Scheme.HTTPS if url.lower().startswith("https") else Scheme.HTTP
    if body_format is None:
        content_type = next((v for n, v in headers if n == "content-type"), None)
        from smellprobe.probe import classify_body

        body_format = classify_body(body, content_type)
    return ProbeResult(
        target=target,
        url=url,
        timestamp=timestamp or EPOCH,
        scheme_used=scheme,
        status=None if error else status,
        headers=tuple((n.lower(), v) for n, v in headers),
        body_sample=body,
        body_format=body_format if not error else BodyFormat.EMPTY,
        transport_error=error,
    )


def direct_chain(result: ProbeResult) -> RedirectChain:
    """Chain for a target that answered without redirecting."""
    return RedirectChain(
        hops=(),
        terminal=result,
        loop_detected=False,
        downgrade_hops=0,
        chain_length=0,
    )


def make_finding(kind: SmellKind, url: str, subflags: frozenset[str] = frozenset()) -> SmellFinding:
    return SmellFinding(
        kind=kind,
        url=url,
        evidence=((Locus.URL, url),),
        subflags=subflags,
    )


def build_entry(
    url: str,
    *,
    app_id: str = "app-1",
    model: SourceModel = SourceModel.OPEN_SOURCE,
    declared: DeclaredFormat | None = None,
    server: str | None = None,
    status: int | None = 200,
    error: str | None = None,
    kinds: tuple[SmellKind, ...] = (),
    findings: tuple[SmellFinding, ...] | None = None,
    leaks: tuple[LeakRecord, ...] = (),
    headers: tuple[tuple[str, str], ...] = (),
    body: bytes = b"",
) -> SnapshotEntry:
    target = make_target(url, app_id=app_id, model=model, declared=declared)
    all_headers = tuple(headers)
    if server is not None:
        all_headers = (("server", server),) + all_headers
    result = make_result(target, status=status, headers=all_headers, body=body, error=error)
    if findings is None:
        findings = tuple(make_finding(kind, url) for kind in kinds)
    report = SmellReport(url=url, findings=findings, leaks=leaks)
    return SnapshotEntry(result=result, chain=direct_chain(result), report=report)


def build_snapshot(
    entries: dict[str, SnapshotEntry],
    snapshot_id: str = "snap",
    taken_at: datetime | None = None,
) -> Snapshot:
    return Snapshot(id=snapshot_id, taken_at=taken_at or EPOCH, entries=entries)


def snapshot_pair(first: dict[str, SnapshotEntry], second: dict[str, SnapshotEntry]):
    return (
        build_snapshot(first, "s1", EPOCH),
        build_snapshot(second, "s2", EPOCH + timedelta(days=425)),
    )


# --- independent oracles ----------------------------------------------------


def oracle_compare_versions(a: tuple[int, ...], b: tuple[int, ...], bound: int = 100) -> int:
    """Positional base-`bound` encoding; valid while every segment < bound."""
    width = max(len(a), len(b))
    value_a = sum(seg * bound ** (width - i - 1) for i, seg in enumerate(a + (0,) * (width - len(a))))
    value_b = sum(seg * bound ** (width - i - 1) for i, seg in enumerate(b + (0,) * (width - len(b))))
    return (value_a > value_b) - (value_a < value_b)


def recount_prevalence(snapshot: Snapshot, corpus) -> dict:
    """Naive per-cell recount over raw findings."""
    from smellprobe.reports import GroupKey, group_key

    cells = {}
    for group in GroupKey:
        for kind in SmellKind:
            urls_total = 0
            urls_affected = 0
            apps: set[str] = set()
            flagged_apps: set[str] = set()
            for target in corpus:
                entry = snapshot.entries[target.url]
                if group_key(target, entry.result) is not group:
                    continue
                urls_total += 1
                apps.add(target.app_id)
                if any(f.kind is kind for f in entry.report.findings):
                    urls_affected += 1
                    flagged_apps.add(target.app_id)
            cells[(group, kind)] = (urls_affected, urls_total, len(flagged_apps), len(apps))
    return cells


def recount_leaks(snapshot: Snapshot) -> dict:
    counts: dict = {}
    for entry in snapshot.entries.values():
        for leak in entry.report.leaks:
            key = (leak.category, leak.software.lower(), leak.locus)
            counts[key] = counts.get(key, 0) + 1
    return counts


def recount_correlation(smell_counts: dict[str, int], records) -> dict:
    cells: dict = {}
    for record in records:
        if record.scenario is None:
            continue
        key = (record.scenario, smell_counts[record.url])
        cells[key] = cells.get(key, 0) + 1
    return cells


_SOFTWARE_POOL = [
    ("nginx", "nginx/1.14.1"),
    ("apache", "Apache/2.4.41"),
    ("microsoft-iis", "Microsoft-IIS/10.0"),
    ("cloudflare", "cloudflare"),
    (None, None),
]


def random_snapshot(rng: random.Random, n_urls: int = 30) -> tuple[Snapshot, tuple[ProbeTarget, ...]]:
    """A synthetic snapshot with randomized groups, findings, and leaks."""
    entries: dict[str, SnapshotEntry] = {}
    corpus: list[ProbeTarget] = []
    for index in range(n_urls):
        scheme = rng.choice(["http", "https"])
        url = f"{scheme}://host{index}.example/api"
        app_id = f"app-{rng.randrange(max(2, n_urls // 3))}"
        model = rng.choice(list(SourceModel))
        declared = rng.choice([None, DeclaredFormat.JSON, DeclaredFormat.NON_JSON])
        kinds = tuple(kind for kind in SmellKind if rng.random() < 0.4)
        leaks = []
        if rng.random() < 0.5:
            name, banner = rng.choice(_SOFTWARE_POOL)
            if name is not None:
                leaks.append(LeakRecord(LeakCategory.SERVICE, name, None, "server"))
                if "/" in banner:
                    version = banner.split("/", 1)[1]
                    leaks.append(LeakRecord(LeakCategory.VERSION, name, version, "server"))
        if rng.random() < 0.2:
            leaks.append(LeakRecord(LeakCategory.OS, "Ubuntu", None, rng.choice(["server", "body"])))
        entry = build_entry(
            url,
            app_id=app_id,
            model=model,
            declared=declared,
            kinds=kinds,
            leaks=tuple(leaks),
            body=b'{"a":1}' if rng.random() < 0.5 else b"<html></html>",
        )
        entries[url] = entry
        corpus.append(entry.result.target)
    return build_snapshot(entries), tuple(corpus)
