"""URL helpers shared by the filter engine and ad detection."""

from __future__ import annotations

import re
from urllib.parse import urljoin, urlsplit, urlunsplit

# Permissive extractor for URLs embedded in text bodies: a scheme followed by
# RFC-3986 host/path characters, terminated by a quote, whitespace, angle
# bracket or backslash.  Fragmented or string-concatenated URLs are a
# documented miss.
URL_IN_TEXT_RE = re.compile(r"https?://[A-Za-z0-9\-._~:/?#\[\]@!$&'()*+,;=%]+")

_TRAILING_JUNK = ".,;)'\"]}"


def extract_urls(text: str) -> list[str]:
    """All absolute http(s) URLs found in a text blob, in order, deduplicated."""
    seen: dict[str, None] = {}
    for match in URL_IN_TEXT_RE.finditer(text):
        url = match.group(0).rstrip(_TRAILING_JUNK)
        if url not in seen:
            seen[url] = None
    return list(seen)


def is_absolute_http(url: str) -> bool:
    parts = urlsplit(url)
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def canonical_url(url: str) -> str:
    """Lowercase scheme and host, strip the fragment, keep path/query case.

    Filter matching is host-case-insensitive but path-case-sensitive, so only
    the authority part is folded.
    """
    parts = urlsplit(url)
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), parts.path, parts.query, ""))


def url_host(url: str) -> str:
    return (urlsplit(url).hostname or "").lower()


def resolve(base: str, href: str) -> str:
    """Resolve href against base and strip any fragment."""
    return urljoin(base, href).split("#", 1)[0]
