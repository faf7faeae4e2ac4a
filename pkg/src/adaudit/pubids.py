"""Publisher-specific identifier extraction, cleaning, and indexing.

Four Google-service account identifiers link websites to the entity that
collects their ad or analytics revenue: AdSense publisher ids (pub-...),
Universal Analytics tracking ids (UA-...), GA4 measurement ids (G-...), and
Tag Manager container ids (GTM-...).  Identifiers are pulled from page HTML,
network traffic (request URLs and text response bodies), and cookie values.
A match only counts when delimited: the characters immediately before and
after must not be alphanumerics or '-'.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .bundles import CaptureBundle

KIND_ADSENSE = "PublisherId_AdSense"
KIND_GA = "TrackingId_GA"
KIND_GA4 = "MeasurementId_GA4"
KIND_GTM = "ContainerId_GTM"

KINDS = (KIND_ADSENSE, KIND_GA, KIND_GA4, KIND_GTM)

KIND_DESCRIPTIONS = {
    KIND_ADSENSE: "Publisher IDs",
    KIND_GA: "Tracking IDs",
    KIND_GA4: "Measurement IDs",
    KIND_GTM: "Container IDs",
}

_BOUNDARY_L = r"(?<![A-Za-z0-9-])"
_BOUNDARY_R = r"(?![A-Za-z0-9-])"

# Default length bounds follow each service's public id format; override the
# patterns via compile_patterns() for sensitivity runs.
DEFAULT_FORMATS = {
    KIND_ADSENSE: r"(?:ca-)?pub-\d{10,16}",
    KIND_GA: r"UA-\d{4,10}-\d{1,4}",
    KIND_GA4: r"G-[A-Z0-9]{6,12}",
    KIND_GTM: r"GTM-[A-Z0-9]{4,8}",
}

CANONICAL_RES = {kind: re.compile(f"^{fmt.replace('(?:ca-)?', '')}$")
                 for kind, fmt in DEFAULT_FORMATS.items()}


def compile_patterns(formats: dict[str, str] | None = None) -> dict[str, re.Pattern]:
    formats = formats or DEFAULT_FORMATS
    return {kind: re.compile(_BOUNDARY_L + fmt + _BOUNDARY_R, re.IGNORECASE)
            for kind, fmt in formats.items()}


_DEFAULT_PATTERNS = compile_patterns()


@dataclass(frozen=True)
class PublisherId:
    kind: str
    value: str
    site: str
    sources: frozenset = frozenset()


def canonicalize(kind: str, raw: str) -> str:
    """Uppercase service prefixes; AdSense ids drop "ca-" and keep pub- form."""
    if kind == KIND_ADSENSE:
        value = raw.lower()
        return value[3:] if value.startswith("ca-") else value
    return raw.upper()


def _scan(text: str, patterns: dict[str, re.Pattern]) -> Iterable[tuple[str, str]]:
    for kind, pattern in patterns.items():
        for match in pattern.finditer(text):
            yield kind, canonicalize(kind, match.group(0))


def extract_ids(bundle: CaptureBundle,
                patterns: Optional[dict[str, re.Pattern]] = None) -> set[PublisherId]:
    """All delimited identifier hits in a bundle, with their source channels."""
    patterns = patterns or _DEFAULT_PATTERNS
    hits: dict[tuple[str, str], set[str]] = {}

    def record(text: str, source: str):
        for kind, value in _scan(text, patterns):
            hits.setdefault((kind, value), set()).add(source)

    record(bundle.html, "html")
    for t in bundle.transactions:
        record(t.request_url, "traffic")
        if t.response_body:
            record(t.response_body, "traffic")
    for cookie in bundle.cookies:
        record(cookie.value, "cookie")

    return {PublisherId(kind, value, bundle.site, frozenset(sources))
            for (kind, value), sources in hits.items()}


def _load_tokens(path: str | Path | None, default_resource: str) -> frozenset:
    if path is None:
        text = resources.files("adaudit.data").joinpath(default_resource).read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines()
                     if line.strip() and not line.startswith("#"))


def load_dictionary(path: str | Path | None = None) -> frozenset:
    return _load_tokens(path, "dictionary.txt")


def load_stoplist(path: str | Path | None = None) -> frozenset:
    return _load_tokens(path, "stoplist.txt")


def _suffix(value: str) -> str:
    return value.split("-", 1)[1] if "-" in value else value


def clean_ids(ids: set[PublisherId], dictionary: frozenset,
              stoplist: frozenset) -> set[PublisherId]:
    """Drop ids whose value or prefix-stripped suffix is a known word/token."""
    drop = dictionary | stoplist
    return {i for i in ids
            if i.value.lower() not in drop and _suffix(i.value).lower() not in drop}


@dataclass
class IdIndex:
    by_id: dict[str, set[str]] = field(default_factory=dict)     # value -> sites
    by_site: dict[str, set[str]] = field(default_factory=dict)   # site -> values
    kind_of: dict[str, str] = field(default_factory=dict)

    def add(self, kind: str, value: str, site: str) -> None:
        self.by_id.setdefault(value, set()).add(site)
        self.by_site.setdefault(site, set()).add(value)
        self.kind_of.setdefault(value, kind)

    def transpose_consistent(self) -> bool:
        forward = {(site, value) for value, sites in self.by_id.items() for site in sites}
        backward = {(site, value) for site, values in self.by_site.items() for value in values}
        return forward == backward


@dataclass(frozen=True)
class KindSummary:
    kind: str
    description: str
    unique_identifiers: int
    unique_domains: int
    pct_of_sites: float


def build_index(all_ids: Iterable[PublisherId],
                total_sites: Optional[int] = None) -> tuple[IdIndex, list[KindSummary]]:
    """Index cleaned ids and summarize per kind.

    total_sites is the successfully-crawled site count used as the percentage
    denominator; defaults to the number of distinct sites carrying any id.
    """
    index = IdIndex()
    for pid in all_ids:
        index.add(pid.kind, pid.value, pid.site)
    assert index.transpose_consistent()

    denominator = total_sites if total_sites else len(index.by_site)
    summary = []
    for kind in KINDS:
        values = [v for v, k in index.kind_of.items() if k == kind]
        domains = set().union(*(index.by_id[v] for v in values)) if values else set()
        summary.append(KindSummary(
            kind=kind,
            description=KIND_DESCRIPTIONS[kind],
            unique_identifiers=len(values),
            unique_domains=len(domains),
            pct_of_sites=100.0 * len(domains) / denominator if denominator else 0.0,
        ))
    return index, summary
