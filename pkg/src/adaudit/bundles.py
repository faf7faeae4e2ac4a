"""Capture bundle model and on-disk format.

One bundle is a single website's crawl artifacts, laid out as a directory
(or a .tar.gz of it) with bit-exact file names:

    manifest.json       site, fetched_at, status, reason?, screenshot?
    page.html           rendered document text
    links.txt           one absolute URL per line (page hyperlinks, frames included)
    transactions.jsonl  one HTTP transaction per line, request start order
    cookies.jsonl       first- and third-party cookies
    ads.txt             raw ads.txt text, when the site served one
    screenshot.png      opaque pass-through artifact

Bundles are immutable after load and safe to share across threads.
"""

from __future__ import annotations

import csv
import io
import json
import tarfile
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional

from .domains import registrable_domain
from .errors import (
    DuplicateConflict,
    MissingManifest,
    OversizeBody,
    SchemaViolation,
    UnknownLabel,
    UnparsableHost,
)
from .urltools import is_absolute_http

REDIRECT_CODES = frozenset({301, 302, 303, 307, 308})
BODY_CAP = 2 * 1024 * 1024  # per stored response body
TEXT_BODY_TYPES = ("text/", "application/json", "application/javascript",
                   "application/x-javascript", "application/xml")

MANIFEST_NAME = "manifest.json"
LABELS = ("fake", "real", "unlabeled")


@dataclass(frozen=True)
class HttpTransaction:
    request_url: str
    method: str = "GET"
    initiator: Optional[str] = None
    status_code: int = 200
    response_headers: dict[str, tuple[str, ...]] = field(default_factory=dict)
    response_body: Optional[str] = None
    redirect_location: Optional[str] = None
    started_at: Optional[str] = None

    def header(self, name: str) -> Optional[str]:
        values = self.response_headers.get(name.lower())
        return values[0] if values else None


@dataclass(frozen=True)
class Cookie:
    name: str
    value: str
    cookie_domain: str
    party: str  # "first" | "third"


@dataclass(frozen=True)
class CaptureBundle:
    site: str
    fetched_at: str
    html: str = ""
    page_links: tuple[str, ...] = ()
    transactions: tuple[HttpTransaction, ...] = ()
    cookies: tuple[Cookie, ...] = ()
    ads_txt: Optional[str] = None
    screenshot_path: Optional[str] = None
    status: str = "ok"  # "ok" | "errored"
    error_reason: Optional[str] = None
    screenshot_bytes: Optional[bytes] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class SiteLabel:
    site: str
    label: str  # "fake" | "real" | "unlabeled"
    sources: tuple[str, ...] = ()


def cookie_party(cookie_domain: str, site: str) -> str:
    """Party is fully determined by the cookie domain and the bundle site."""
    try:
        return "first" if registrable_domain(cookie_domain.lstrip(".")) == site else "third"
    except UnparsableHost:
        return "third"


def _parse_timestamp(value: str) -> datetime:
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


def _validate_site(site: str) -> None:
    if not isinstance(site, str) or not site:
        raise SchemaViolation("site", "missing or empty")
    try:
        if registrable_domain(site) != site:
            raise SchemaViolation("site", f"{site!r} is not a bare registrable domain")
    except UnparsableHost as exc:
        raise SchemaViolation("site", str(exc)) from None


def _load_transaction(row: dict, line_no: int) -> HttpTransaction:
    url = row.get("request_url")
    if not url or not is_absolute_http(url):
        raise SchemaViolation("request_url", f"transactions.jsonl line {line_no}")
    status = row.get("status_code")
    if not isinstance(status, int) or not 100 <= status <= 599:
        raise SchemaViolation("status_code", f"transactions.jsonl line {line_no}")
    location = row.get("redirect_location")
    if (location is not None) != (status in REDIRECT_CODES):
        raise SchemaViolation("redirect_location",
                              f"line {line_no}: present iff status in {sorted(REDIRECT_CODES)}")
    body = row.get("response_body")
    if body is not None and len(body.encode("utf-8")) > BODY_CAP:
        raise OversizeBody(url)
    headers = {str(k).lower(): tuple(v if isinstance(v, list) else [v])
               for k, v in (row.get("response_headers") or {}).items()}
    return HttpTransaction(
        request_url=url,
        method=row.get("method", "GET"),
        initiator=row.get("initiator"),
        status_code=status,
        response_headers=headers,
        response_body=body,
        redirect_location=location,
        started_at=row.get("started_at"),
    )


def _read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    if not path.exists():
        return
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                yield line_no, json.loads(line)


def load_bundle(path: str | Path) -> CaptureBundle:
    """Load and validate one capture bundle from a directory or .tar.gz."""
    path = Path(path)
    if path.is_file() and path.name.endswith((".tar.gz", ".tgz")):
        with tempfile.TemporaryDirectory() as tmp:
            with tarfile.open(path) as tar:
                tar.extractall(tmp, filter="data")
            candidates = [p.parent for p in Path(tmp).rglob(MANIFEST_NAME)]
            if not candidates:
                raise MissingManifest(str(path))
            return load_bundle(candidates[0])

    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingManifest(str(path))
    manifest = json.loads(manifest_path.read_text("utf-8"))

    site = manifest.get("site")
    if site is None:
        raise SchemaViolation("site", "missing from manifest")
    _validate_site(site)
    fetched_at = manifest.get("fetched_at")
    if not fetched_at:
        raise SchemaViolation("fetched_at", "missing from manifest")
    try:
        _parse_timestamp(fetched_at)
    except ValueError:
        raise SchemaViolation("fetched_at", f"{fetched_at!r} is not ISO-8601") from None
    status = manifest.get("status", "ok")
    if status not in ("ok", "errored"):
        raise SchemaViolation("status", repr(status))

    html_path = path / "page.html"
    html = html_path.read_text("utf-8", errors="replace") if html_path.exists() else ""

    links: list[str] = []
    links_path = path / "links.txt"
    if links_path.exists():
        for raw in links_path.read_text("utf-8").splitlines():
            url = raw.strip()
            if not url:
                continue
            if not is_absolute_http(url):
                raise SchemaViolation("page_links", f"not an absolute http(s) URL: {url!r}")
            links.append(url)

    transactions = [_load_transaction(row, n) for n, row in _read_jsonl(path / "transactions.jsonl")]
    starts = [_parse_timestamp(t.started_at) for t in transactions if t.started_at]
    if any(a > b for a, b in zip(starts, starts[1:])):
        raise SchemaViolation("transactions", "not ordered by request start time")

    cookies = []
    for n, row in _read_jsonl(path / "cookies.jsonl"):
        try:
            cookie = Cookie(row["name"], row.get("value", ""), row["cookie_domain"], row["party"])
        except KeyError as exc:
            raise SchemaViolation(str(exc), f"cookies.jsonl line {n}") from None
        expected = cookie_party(cookie.cookie_domain, site)
        if cookie.party != expected:
            raise SchemaViolation("party", f"cookie {cookie.name!r} stored as {cookie.party}, "
                                           f"recomputes to {expected}")
        cookies.append(cookie)

    ads_path = path / "ads.txt"
    ads_txt = ads_path.read_bytes().decode("utf-8", errors="replace") if ads_path.exists() else None
    shot_name = manifest.get("screenshot")
    shot_bytes = None
    if shot_name and (path / shot_name).exists():
        shot_bytes = (path / shot_name).read_bytes()

    return CaptureBundle(
        site=site,
        fetched_at=fetched_at,
        html=html,
        page_links=tuple(links),
        transactions=tuple(transactions),
        cookies=tuple(cookies),
        ads_txt=ads_txt,
        screenshot_path=shot_name,
        status=status,
        error_reason=manifest.get("reason"),
        screenshot_bytes=shot_bytes,
    )


def _transaction_row(t: HttpTransaction) -> dict:
    row: dict = {
        "request_url": t.request_url,
        "method": t.method,
        "status_code": t.status_code,
        "response_headers": {k: list(v) for k, v in sorted(t.response_headers.items())},
    }
    if t.initiator is not None:
        row["initiator"] = t.initiator
    if t.response_body is not None:
        row["response_body"] = t.response_body
    if t.redirect_location is not None:
        row["redirect_location"] = t.redirect_location
    if t.started_at is not None:
        row["started_at"] = t.started_at
    return row


def write_bundle(bundle: CaptureBundle, path: str | Path) -> Path:
    """Write a bundle in canonical form (sorted keys, LF, trailing newline).

    Writing the result of load_bundle twice yields byte-identical trees.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    manifest: dict = {"site": bundle.site, "fetched_at": bundle.fetched_at, "status": bundle.status}
    if bundle.error_reason is not None:
        manifest["reason"] = bundle.error_reason
    if bundle.screenshot_path is not None:
        manifest["screenshot"] = bundle.screenshot_path
    (path / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", "utf-8")

    (path / "page.html").write_text(bundle.html, "utf-8")
    (path / "links.txt").write_text("".join(u + "\n" for u in bundle.page_links), "utf-8")
    with (path / "transactions.jsonl").open("w", encoding="utf-8") as fh:
        for t in bundle.transactions:
            fh.write(json.dumps(_transaction_row(t), sort_keys=True, ensure_ascii=False) + "\n")
    with (path / "cookies.jsonl").open("w", encoding="utf-8") as fh:
        for c in bundle.cookies:
            row = {"name": c.name, "value": c.value, "cookie_domain": c.cookie_domain, "party": c.party}
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    if bundle.ads_txt is not None:
        (path / "ads.txt").write_text(bundle.ads_txt, "utf-8")
    if bundle.screenshot_path and bundle.screenshot_bytes is not None:
        (path / bundle.screenshot_path).write_bytes(bundle.screenshot_bytes)
    return path


def iter_bundle_paths(root: str | Path) -> Iterator[Path]:
    """Bundle directories and archives under root, sorted for determinism."""
    root = Path(root)
    for entry in sorted(root.iterdir()):
        if entry.is_dir() and (entry / MANIFEST_NAME).exists():
            yield entry
        elif entry.is_file() and entry.name.endswith((".tar.gz", ".tgz")):
            yield entry


def load_labels(path: str | Path) -> list[SiteLabel]:
    """Load the site,label,sources CSV; merge duplicates, reject conflicts."""
    text = Path(path).read_text("utf-8")
    reader = csv.DictReader(io.StringIO(text))
    merged: dict[str, tuple[str, list[str]]] = {}
    for row in reader:
        site = (row.get("site") or "").strip().lower()
        if not site:
            continue
        label = (row.get("label") or "").strip().lower()
        if label not in LABELS:
            raise UnknownLabel(label)
        sources = [s for s in (row.get("sources") or "").split("|") if s]
        if site in merged:
            prev_label, prev_sources = merged[site]
            if prev_label != label:
                raise DuplicateConflict(site)
            prev_sources.extend(s for s in sources if s not in prev_sources)
        else:
            merged[site] = (label, sources)
    return [SiteLabel(site, label, tuple(sources))
            for site, (label, sources) in merged.items()]


def label_map(labels: list[SiteLabel]) -> dict[str, str]:
    return {l.site: l.label for l in labels}


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
