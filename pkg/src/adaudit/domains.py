"""Registrable-domain (eTLD+1) extraction against a vendored Public Suffix List.

The PSL snapshot ships with the package and is loaded once; there is no
network lookup at parse time.  Matching follows the published algorithm:
exception rules beat wildcard/normal rules, the longest matching rule wins,
and a host with no matching rule falls under the implicit "*" rule (its last
label is the public suffix).
"""

from __future__ import annotations

import ipaddress
import re
from functools import lru_cache
from importlib import resources
from urllib.parse import urlsplit

from .errors import UnparsableHost

_LABEL_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")


class PublicSuffixList:
    """One parsed PSL snapshot; rules keyed by their dot-joined labels."""

    def __init__(self, rules_text: str):
        self.rules: set[str] = set()
        self.wildcards: set[str] = set()  # "ck" for a "*.ck" rule
        self.exceptions: set[str] = set()  # "www.ck" for a "!www.ck" rule
        for line in rules_text.splitlines():
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            if line.startswith("!"):
                self.exceptions.add(line[1:])
            elif line.startswith("*."):
                self.wildcards.add(line[2:])
            else:
                self.rules.add(line)

    def public_suffix(self, host: str) -> str:
        """Return the longest public suffix of an already-normalized host."""
        labels = host.split(".")
        # Exception rules win outright: the suffix is everything after the
        # first label of the exception.
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.exceptions:
                return ".".join(labels[i + 1:])
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.rules:
                return candidate
            # "*.ck" means any single label directly under "ck" is a suffix.
            if i + 1 < len(labels) and ".".join(labels[i + 1:]) in self.wildcards:
                return candidate
        # Implicit default rule "*": the bare TLD is a public suffix.
        return labels[-1]


@lru_cache(maxsize=1)
def default_psl() -> PublicSuffixList:
    data = resources.files("adaudit.data").joinpath("public_suffix_list.dat").read_text("utf-8")
    return PublicSuffixList(data)


def _normalize_host(value: str) -> str:
    """Lowercase, strip scheme/path/port, punycode-encode non-ASCII labels."""
    value = value.strip()
    if not value:
        raise UnparsableHost(value, "empty")
    if "//" in value or value.startswith(("http:", "https:")):
        host = urlsplit(value if "//" in value else "//" + value).hostname or ""
    else:
        # Bare host, possibly with a port or a stray path.
        host = value.split("/", 1)[0].rsplit("@", 1)[-1]
        if host.count(":") == 1:
            host = host.split(":", 1)[0]
    host = host.strip().rstrip(".").lower()
    if not host:
        raise UnparsableHost(value, "no hostname")
    try:
        ipaddress.ip_address(host.strip("[]"))
    except ValueError:
        pass
    else:
        raise UnparsableHost(value, "IP address")
    try:
        host = host.encode("idna").decode("ascii") if any(ord(c) > 127 for c in host) else host
    except UnicodeError:
        raise UnparsableHost(value, "bad IDNA label") from None
    for label in host.split("."):
        if not _LABEL_RE.match(label):
            raise UnparsableHost(value, f"bad label {label!r}")
    return host


def registrable_domain(url_or_host: str, psl: PublicSuffixList | None = None) -> str:
    """eTLD+1 of a URL or bare host under the vendored PSL snapshot.

    Raises UnparsableHost for hosts that are themselves public suffixes
    (single-label names such as "localhost" included) and for IP literals.
    """
    psl = psl or default_psl()
    host = _normalize_host(url_or_host)
    suffix = psl.public_suffix(host)
    if host == suffix:
        raise UnparsableHost(url_or_host, "host is a public suffix")
    keep = suffix.count(".") + 2
    return ".".join(host.split(".")[-keep:])


def same_site(a: str, b: str, psl: PublicSuffixList | None = None) -> bool:
    """Whether two URLs/hosts share a registrable domain; unparsable never matches."""
    try:
        return registrable_domain(a, psl) == registrable_domain(b, psl)
    except UnparsableHost:
        return False
