"""Detectors for the six server-side security smells.

Every detector is a pure function of probe evidence: same input, same
finding.  Pattern tables live in the packaged data files so they can be
versioned independently of the code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from urllib.parse import urljoin, urlsplit

from .corpus import ProbeTarget
from .probe import BodyFormat, ProbeResult, RedirectChain, Scheme
from .versions import BannerParse, parse_banner, parse_product_token

HSTS_MIN_MAX_AGE = 31_536_000  # one year, the recommended floor
REDIRECT_CHAIN_THRESHOLD = 5  # more redirects than this is flagged as excessive

VERSION_HEADER_KEYS = ("engine", "server", "x-aspnet-version", "x-powered-by")

_EXCERPT_LIMIT = 200


class SmellKind(str, Enum):
    INSECURE_TRANSPORT = "insecure_transport"
    SOURCE_CODE_DISCLOSURE = "source_code_disclosure"
    VERSION_DISCLOSURE = "version_disclosure"
    LACK_OF_ACCESS_CONTROL = "lack_of_access_control"
    MISSING_HTTPS_REDIRECT = "missing_https_redirect"
    MISSING_HSTS = "missing_hsts"


class Locus(str, Enum):
    URL = "url"
    HEADER = "header"
    BODY = "body"
    CHAIN = "chain"


class LeakCategory(str, Enum):
    OS = "os"
    SERVICE = "service"
    VERSION = "version"


FRAMEWORK_SUBFLAGS = frozenset({"asp", "cherrypy", "java", "nodejs", "php", "unknown_framework"})

SUBFLAG_VOCABULARY: dict[SmellKind, frozenset[str]] = {
    SmellKind.INSECURE_TRANSPORT: frozenset(),
    SmellKind.SOURCE_CODE_DISCLOSURE: FRAMEWORK_SUBFLAGS,
    SmellKind.VERSION_DISCLOSURE: frozenset({*VERSION_HEADER_KEYS, "body_banner"}),
    SmellKind.LACK_OF_ACCESS_CONTROL: frozenset({"json_auth_error_heuristic"}),
    SmellKind.MISSING_HTTPS_REDIRECT: frozenset({"downgrade", "loop", "excessive_chain"}),
    SmellKind.MISSING_HSTS: frozenset(
        {"absent", "short_max_age", "missing_include_subdomains", "missing_preload"}
    ),
}


@dataclass(frozen=True)
class SmellFinding:
    kind: SmellKind
    url: str
    evidence: tuple[tuple[Locus, str], ...]
    subflags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.evidence:
            raise ValueError("finding needs at least one piece of evidence")
        allowed = SUBFLAG_VOCABULARY[self.kind]
        stray = self.subflags - allowed
        if stray:
            raise ValueError(f"subflags {sorted(stray)} not in {self.kind.value} vocabulary")


@dataclass(frozen=True)
class LeakRecord:
    category: LeakCategory
    software: str
    version: str | None
    locus: str  # header name, or "body"

    def __post_init__(self) -> None:
        if self.category is LeakCategory.VERSION and not self.version:
            raise ValueError("version leak records must carry a version")


@dataclass(frozen=True)
class SmellReport:
    """Per-URL detection outcome: the findings plus every extracted leak."""

    url: str
    findings: tuple[SmellFinding, ...]
    leaks: tuple[LeakRecord, ...]

    def kinds(self) -> frozenset[SmellKind]:
        return frozenset(f.kind for f in self.findings)


def _excerpt(text: str) -> str:
    return text if len(text) <= _EXCERPT_LIMIT else text[: _EXCERPT_LIMIT - 1] + "…"


def _evidence(locus: Locus, text: str) -> tuple[Locus, str]:
    return (locus, _excerpt(text))


# --- pattern tables -------------------------------------------------------


def _load_json(name: str) -> dict:
    with resources.files("smellprobe.data").joinpath(name).open("r", encoding="utf-8") as fh:
        return json.load(fh)


@dataclass(frozen=True)
class _FrameworkPattern:
    framework: str
    matcher: re.Pattern | None
    literal: str | None
    specificity: int
    order: int

    def search(self, text: str) -> str | None:
        if self.literal is not None:
            return self.literal if self.literal in text else None
        assert self.matcher is not None
        match = self.matcher.search(text)
        return match.group(0) if match else None


def _load_framework_patterns() -> tuple[_FrameworkPattern, ...]:
    table = _load_json("framework_patterns.json")
    patterns = []
    for order, entry in enumerate(table["patterns"]):
        if entry["kind"] == "literal":
            patterns.append(
                _FrameworkPattern(entry["framework"], None, entry["marker"], entry["specificity"], order)
            )
        else:
            patterns.append(
                _FrameworkPattern(
                    entry["framework"], re.compile(entry["marker"]), None, entry["specificity"], order
                )
            )
    return tuple(patterns)


@dataclass(frozen=True)
class _BodyBanner:
    label: str
    matcher: re.Pattern
    template: str
    literal: bool


def _load_body_banners() -> tuple[_BodyBanner, ...]:
    table = _load_json("body_banners.json")
    return tuple(
        _BodyBanner(e["label"], re.compile(e["pattern"]), e["template"], e["literal"])
        for e in table["banners"]
    )


FRAMEWORK_PATTERNS = _load_framework_patterns()
BODY_BANNERS = _load_body_banners()


def _decode_body(body: bytes) -> str:
    return body.decode("utf-8", errors="replace")


# --- detectors ------------------------------------------------------------


def detect_insecure_transport(target: ProbeTarget) -> SmellFinding | None:
    """Fires when the target URL uses plain http (scheme compared case-insensitively)."""
    if urlsplit(target.url).scheme.lower() != "http":
        return None
    return SmellFinding(
        kind=SmellKind.INSECURE_TRANSPORT,
        url=target.url,
        evidence=(_evidence(Locus.URL, target.url),),
    )


def detect_source_code_disclosure(result: ProbeResult) -> SmellFinding | None:
    """Fires when the body carries a stack trace or code snippet.

    Attribution picks the most specific matching pattern; ties break by
    table order, so framework markers beat generic crash vocabulary.
    """
    if not result.body_sample:
        return None
    text = _decode_body(result.body_sample)
    best: tuple[int, int, str, str] | None = None  # (-specificity, order, framework, excerpt)
    for pattern in FRAMEWORK_PATTERNS:
        matched = pattern.search(text)
        if matched is None:
            continue
        key = (-pattern.specificity, pattern.order)
        if best is None or key < best[:2]:
            best = (*key, pattern.framework, matched)
    if best is None:
        return None
    _, _, framework, matched = best
    return SmellFinding(
        kind=SmellKind.SOURCE_CODE_DISCLOSURE,
        url=result.target.url,
        evidence=(_evidence(Locus.BODY, matched),),
        subflags=frozenset({framework}),
    )


def _leaks_from_parse(parsed: BannerParse, locus: str) -> list[LeakRecord]:
    records: list[LeakRecord] = []
    for sid in parsed.software:
        records.append(
            LeakRecord(LeakCategory.SERVICE, sid.display_name, None, locus)
        )
        if sid.version is not None:
            records.append(
                LeakRecord(LeakCategory.VERSION, sid.display_name, sid.version_string, locus)
            )
    if parsed.os is not None:
        records.append(LeakRecord(LeakCategory.OS, parsed.os, None, locus))
    return records


def _body_banner_hits(text: str) -> list[tuple[str, BannerParse]]:
    hits: list[tuple[str, BannerParse]] = []
    for banner in BODY_BANNERS:
        match = banner.matcher.search(text)
        if match is None:
            continue
        token = match.expand(banner.template)
        if banner.literal:
            parsed = BannerParse(software=(parse_product_token(token, literal=True),))
        else:
            parsed = parse_banner(token)
        hits.append((match.group(0), parsed))
    return hits


def detect_version_disclosure(
    result: ProbeResult,
) -> tuple[SmellFinding | None, list[LeakRecord]]:
    """Fires on any disclosing header key or a known body banner.

    Returns the finding together with every leak record extracted from the
    matched banners; version records exist only when a finding exists.
    """
    evidence: list[tuple[Locus, str]] = []
    subflags: set[str] = set()
    leaks: list[LeakRecord] = []

    for name, value in result.headers:
        if name not in VERSION_HEADER_KEYS:
            continue
        subflags.add(name)
        evidence.append(_evidence(Locus.HEADER, f"{name}: {value}"))
        leaks.extend(_leaks_from_parse(parse_banner(value), name))

    if result.body_sample:
        text = _decode_body(result.body_sample)
        for matched, parsed in _body_banner_hits(text):
            subflags.add("body_banner")
            evidence.append(_evidence(Locus.BODY, matched))
            leaks.extend(_leaks_from_parse(parsed, "body"))

    if not evidence:
        return None, []
    finding = SmellFinding(
        kind=SmellKind.VERSION_DISCLOSURE,
        url=result.target.url,
        evidence=tuple(evidence),
        subflags=frozenset(subflags),
    )
    return finding, leaks


_JSON_AUTH_MARKERS = re.compile(
    r"(?i)(token|auth|credential|unauthorized|forbidden|denied|permission)"
)


def _looks_like_json_auth_error(result: ProbeResult) -> bool:
    if result.body_format is not BodyFormat.JSON or not result.body_sample:
        return False
    try:
        payload = json.loads(result.body_sample)
    except (ValueError, UnicodeDecodeError):
        return False
    if not isinstance(payload, dict):
        return False
    for key in ("error", "error_description", "errors"):
        value = payload.get(key)
        if isinstance(value, str) and _JSON_AUTH_MARKERS.search(value):
            return True
    return False


def detect_lack_of_access_control(
    result: ProbeResult, *, json_auth_heuristic: bool = False
) -> SmellFinding | None:
    """Fires when the server answers 2xx without demanding credentials.

    401/403 (and every non-2xx status) produce no finding.  The optional
    JSON heuristic marks 2xx responses whose body looks like an OAuth-style
    authorization error; it never suppresses the finding, only annotates it.
    """
    if result.status is None:
        return None
    if not (200 <= result.status < 300):
        return None
    if result.header_values("www-authenticate"):
        return None
    subflags: set[str] = set()
    if json_auth_heuristic and _looks_like_json_auth_error(result):
        subflags.add("json_auth_error_heuristic")
    return SmellFinding(
        kind=SmellKind.LACK_OF_ACCESS_CONTROL,
        url=result.target.url,
        evidence=(_evidence(Locus.HEADER, f"status {result.status} without credential challenge"),),
        subflags=frozenset(subflags),
    )


def _chain_urls(chain: RedirectChain) -> list[str]:
    """Every URL the chain touched: requests plus resolved Location targets."""
    urls = list(chain.requested_urls())
    for hop_url, _, location in chain.hops:
        try:
            urls.append(urljoin(hop_url, location))
        except ValueError:
            continue
    return urls


def detect_missing_https_redirect(chain: RedirectChain) -> SmellFinding | None:
    """Flags broken transport upgrades observed on the redirect chain.

    For an http target: fires when no URL on the chain reaches https on the
    same host (hostnames compared case-insensitively, ports ignored; the
    path may differ).  For an https target: fires on any https->http
    downgrade.  Loops and chains longer than the recommended limit are
    flagged on any target.  An unreachable target with no observed hops is
    not judged.
    """
    target = chain.terminal.target
    target_parts = urlsplit(target.url)
    target_scheme = target_parts.scheme.lower()
    target_host = (target_parts.hostname or "").lower()

    if not chain.hops and chain.terminal.transport_error is not None:
        # The server never answered; there is no redirect behavior to judge.
        return None

    subflags: set[str] = set()
    evidence: list[tuple[Locus, str]] = []

    if chain.loop_detected:
        subflags.add("loop")
        evidence.append(_evidence(Locus.CHAIN, f"redirect loop: {chain.hops[-1][0]} revisited"))
    if chain.chain_length > REDIRECT_CHAIN_THRESHOLD:
        subflags.add("excessive_chain")
        evidence.append(
            _evidence(
                Locus.CHAIN,
                f"{chain.chain_length} redirects exceed the recommended {REDIRECT_CHAIN_THRESHOLD}",
            )
        )
    if chain.downgrade_hops > 0:
        subflags.add("downgrade")
        evidence.append(
            _evidence(Locus.CHAIN, f"{chain.downgrade_hops} https->http downgrade hop(s)")
        )

    missing_upgrade = False
    if target_scheme == "http":
        upgraded = any(
            urlsplit(u).scheme.lower() == "https"
            and (urlsplit(u).hostname or "").lower() == target_host
            for u in _chain_urls(chain)
        )
        if not upgraded:
            missing_upgrade = True
            status = chain.terminal.status
            detail = f"status {status}" if status is not None else chain.terminal.transport_error
            evidence.append(
                _evidence(
                    Locus.CHAIN,
                    f"no redirect to https://{target_host} within {chain.chain_length} hop(s); terminal {detail}",
                )
            )

    if not missing_upgrade and not subflags:
        return None
    return SmellFinding(
        kind=SmellKind.MISSING_HTTPS_REDIRECT,
        url=target.url,
        evidence=tuple(evidence),
        subflags=frozenset(subflags),
    )


def _parse_hsts(value: str) -> tuple[int | None, bool, bool]:
    """(max_age, include_subdomains, preload); first max-age wins when repeated."""
    max_age: int | None = None
    include_subdomains = False
    preload = False
    for directive in value.split(";"):
        directive = directive.strip()
        if not directive:
            continue
        name, _, raw = directive.partition("=")
        name = name.strip().lower()
        raw = raw.strip().strip('"')
        if name == "max-age" and max_age is None:
            try:
                max_age = int(raw)
            except ValueError:
                max_age = None
        elif name == "includesubdomains":
            include_subdomains = True
        elif name == "preload":
            preload = True
    return max_age, include_subdomains, preload


def detect_missing_hsts(result: ProbeResult) -> SmellFinding | None:
    """Checks the strict-transport-security policy of an https response.

    Not applicable to http exchanges (the header only counts over https):
    those, and failed exchanges, return None.  A header with max-age of at
    least one year plus includeSubDomains plus preload is clean; anything
    weaker yields a finding with one subflag per missing property.
    """
    if result.scheme_used is not Scheme.HTTPS or result.status is None:
        return None
    header = result.first_header("strict-transport-security")
    if header is None:
        return SmellFinding(
            kind=SmellKind.MISSING_HSTS,
            url=result.target.url,
            evidence=(_evidence(Locus.HEADER, "strict-transport-security header absent"),),
            subflags=frozenset({"absent"}),
        )
    max_age, include_subdomains, preload = _parse_hsts(header)
    subflags: set[str] = set()
    if max_age is None or max_age < HSTS_MIN_MAX_AGE:
        subflags.add("short_max_age")
    if not include_subdomains:
        subflags.add("missing_include_subdomains")
    if not preload:
        subflags.add("missing_preload")
    if not subflags:
        return None
    return SmellFinding(
        kind=SmellKind.MISSING_HSTS,
        url=result.target.url,
        evidence=(_evidence(Locus.HEADER, f"strict-transport-security: {header}"),),
        subflags=frozenset(subflags),
    )


def detect_all(
    target: ProbeTarget,
    result: ProbeResult,
    chain: RedirectChain,
    *,
    json_auth_heuristic: bool = False,
) -> SmellReport:
    """Run all six detectors in their fixed order and collect the report."""
    findings: list[SmellFinding] = []

    finding = detect_insecure_transport(target)
    if finding:
        findings.append(finding)

    finding = detect_source_code_disclosure(result)
    if finding:
        findings.append(finding)

    finding, leaks = detect_version_disclosure(result)
    if finding:
        findings.append(finding)

    finding = detect_lack_of_access_control(result, json_auth_heuristic=json_auth_heuristic)
    if finding:
        findings.append(finding)

    finding = detect_missing_https_redirect(chain)
    if finding:
        findings.append(finding)

    finding = detect_missing_hsts(result)
    if finding:
        findings.append(finding)

    return SmellReport(url=target.url, findings=tuple(findings), leaks=tuple(leaks))
