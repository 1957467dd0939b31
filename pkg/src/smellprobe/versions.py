"""Banner parsing and dotted-numeric version ordering.

A banner is a product listing such as ``nginx/1.14.1 (Ubuntu)`` or
``Apache/2.4.41 (Ubuntu) OpenSSL/1.1.1``: whitespace-separated product
tokens of the form ``name[/version]``, optionally interleaved with
parenthesized annotations.  Annotations matching the OS dictionary are
classified as operating-system leaks; everything else is kept verbatim.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

# Leading dotted-numeric run of a version string; anything after the first
# character outside [0-9.] is kept only in `raw` and ignored for ordering.
_NUMERIC_PREFIX = re.compile(r"^([0-9]+(?:\.[0-9]+)*)")

_PAREN = re.compile(r"\(([^)]*)\)")


def _load_table(name: str) -> dict:
    with resources.files("smellprobe.data").joinpath(name).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def _os_dictionary() -> dict[str, str]:
    # lowercase key -> display name
    table = _load_table("os_dictionary.json")
    return {k.lower(): v for k, v in table["names"].items()}


def _service_dictionary() -> dict[str, str]:
    table = _load_table("service_names.json")
    return {k.lower(): v for k, v in table["names"].items()}


OS_DICTIONARY = _os_dictionary()
SERVICE_DICTIONARY = _service_dictionary()


@dataclass(frozen=True)
class SoftwareId:
    """One product token: normalized name, parsed version, original text."""

    name: str
    version: tuple[int, ...] | None
    raw: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("SoftwareId.name must be non-empty")
        if self.version is not None and any(s < 0 for s in self.version):
            raise ValueError("version segments must be non-negative")

    @property
    def display_name(self) -> str:
        """Name with the casing it appeared with on the wire."""
        return self.raw.split("/", 1)[0]

    @property
    def version_text(self) -> str | None:
        """Raw text after the name separator, None when the token had none."""
        if "/" not in self.raw:
            return None
        return self.raw.split("/", 1)[1]

    @property
    def version_string(self) -> str | None:
        """Dotted-numeric form of the parsed segments."""
        if self.version is None:
            return None
        return ".".join(str(s) for s in self.version)


@dataclass(frozen=True)
class BannerParse:
    """Everything extracted from one banner string."""

    software: tuple[SoftwareId, ...] = ()
    os: str | None = None
    annotations: tuple[str, ...] = ()


def parse_version(text: str) -> tuple[int, ...] | None:
    """Numeric segments of a version string, None if it has no numeric prefix."""
    match = _NUMERIC_PREFIX.match(text.strip())
    if not match:
        return None
    return tuple(int(part) for part in match.group(1).split("."))


def parse_product_token(token: str, *, literal: bool = False) -> SoftwareId:
    """Parse a single ``name[/version]`` token.

    With ``literal=True`` the whole token is taken as the name (used for
    multi-word markers that must not be split).
    """
    token = token.strip()
    if literal or "/" not in token:
        return SoftwareId(name=token.lower(), version=None, raw=token)
    name, version_text = token.split("/", 1)
    if not name:
        return SoftwareId(name=token.lower(), version=None, raw=token)
    return SoftwareId(name=name.lower(), version=parse_version(version_text), raw=token)


def parse_banner(value: str) -> BannerParse:
    """Split a banner into product tokens plus an OS classification.

    Parenthesized groups are pulled out first and checked against the OS
    dictionary; the first hit wins and the rest stay as annotations.
    """
    annotations: list[str] = []
    os_name: str | None = None

    def _stash(match: re.Match) -> str:
        annotations.append(match.group(1).strip())
        return " "

    remainder = _PAREN.sub(_stash, value)
    software = tuple(
        parse_product_token(tok) for tok in remainder.split() if tok.strip()
    )

    kept: list[str] = []
    for note in annotations:
        classified = classify_os(note)
        if classified is not None and os_name is None:
            os_name = classified
        else:
            kept.append(note)
    return BannerParse(software=software, os=os_name, annotations=tuple(kept))


def canonical_service_name(name: str) -> str:
    """Preferred display casing for a service, pass-through when unknown."""
    return SERVICE_DICTIONARY.get(name.lower(), name)


def classify_os(annotation: str) -> str | None:
    """Map an annotation onto the closed OS dictionary, None when unknown."""
    lowered = annotation.lower()
    if lowered in OS_DICTIONARY:
        return OS_DICTIONARY[lowered]
    for key, display in OS_DICTIONARY.items():
        if key in lowered:
            return display
    return None


def compare_versions(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    """Totally order two segment lists: -1, 0, or 1.

    Lexicographic over numeric segments; the shorter list is zero-padded,
    so (1, 0) equals (1, 0, 0).
    """
    if not a or not b:
        raise ValueError("version segments must be non-empty")
    width = max(len(a), len(b))
    pa = tuple(a) + (0,) * (width - len(a))
    pb = tuple(b) + (0,) * (width - len(b))
    if pa < pb:
        return -1
    if pa > pb:
        return 1
    return 0
