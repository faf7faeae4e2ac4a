"""HTTP clients for ads.txt, sellers.json, and filter-list snapshots.

Single-visit posture: one request per target per run, no retries, per-host
rate limiting.  Redirects are followed manually (10 hops max) so every hop is
observable, and response bodies are size-capped.  The clock and sleep used by
the rate limiter are injectable so timing behavior is testable.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import requests

from .bundles import utc_now_iso
from .errors import ConnectionFailed, TooManyRedirects, Timeout
from .urltools import resolve, url_host

BODY_CAP = 5 * 1024 * 1024
MAX_REDIRECTS = 10
DEFAULT_USER_AGENT = ("adaudit/0.1 (+https://example.invalid/adaudit; "
                      "research crawler, single visit per target)")


@dataclass(frozen=True)
class FetchResult:
    url: str
    final_url: str
    status_code: int
    body: bytes
    content_type: str
    fetched_at: str
    redirect_hops: int
    truncated: bool = False

    def looks_like_html(self) -> bool:
        head = self.body[:512].lstrip().lower()
        return head.startswith(b"<!doctype") or head.startswith(b"<html") or b"<html" in head

    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")


@dataclass(frozen=True)
class BatchOutcome:
    target: str
    result: Optional[FetchResult]
    error: Optional[str] = None
    elapsed_ms: float = 0.0


class RateLimiter:
    """Per-host minimum spacing between requests (requests/second)."""

    def __init__(self, rate_per_host: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.interval = 1.0 / rate_per_host if rate_per_host > 0 else 0.0
        self.clock = clock
        self.sleep = sleep
        self._next_allowed: dict[str, float] = {}
        self._lock = threading.Lock()

    def acquire(self, host: str) -> None:
        if self.interval <= 0:
            return
        with self._lock:
            now = self.clock()
            ready = self._next_allowed.get(host, now)
            wait = max(0.0, ready - now)
            self._next_allowed[host] = max(ready, now) + self.interval
        if wait > 0:
            self.sleep(wait)


class Fetcher:
    def __init__(self, user_agent: str = DEFAULT_USER_AGENT, timeout: float = 30.0,
                 verify_tls: bool = True, rate_limiter: Optional[RateLimiter] = None,
                 allowed_hosts: Optional[set[str]] = None,
                 session: Optional[requests.Session] = None):
        self.user_agent = user_agent
        self.timeout = timeout
        self.verify_tls = verify_tls
        self.rate_limiter = rate_limiter
        self.allowed_hosts = allowed_hosts
        self.session = session or requests.Session()

    def fetch(self, url: str) -> FetchResult:
        """GET with manual redirect following; hop 11 raises TooManyRedirects."""
        current = url
        for hop in range(MAX_REDIRECTS + 1):
            response = self._request(current)
            if response.is_redirect or response.is_permanent_redirect:
                location = response.headers.get("location")
                response.close()
                if not location:
                    break
                current = resolve(current, location)
                continue
            body, truncated = self._read_capped(response)
            return FetchResult(
                url=url,
                final_url=current,
                status_code=response.status_code,
                body=body,
                content_type=response.headers.get("content-type", ""),
                fetched_at=utc_now_iso(),
                redirect_hops=hop,
                truncated=truncated,
            )
        raise TooManyRedirects(f"{url}: more than {MAX_REDIRECTS} redirects")

    def _request(self, url: str) -> requests.Response:
        host = url_host(url)
        if self.allowed_hosts is not None and host not in self.allowed_hosts:
            raise ConnectionFailed(f"host {host!r} outside the allowed target set")
        if self.rate_limiter is not None:
            self.rate_limiter.acquire(host)
        try:
            return self.session.get(
                url, stream=True, allow_redirects=False, timeout=self.timeout,
                verify=self.verify_tls, headers={"User-Agent": self.user_agent})
        except requests.Timeout as exc:
            raise Timeout(str(exc)) from None
        except requests.RequestException as exc:
            raise ConnectionFailed(str(exc)) from None

    @staticmethod
    def _read_capped(response: requests.Response) -> tuple[bytes, bool]:
        chunks, size = [], 0
        try:
            for chunk in response.iter_content(chunk_size=65536):
                chunks.append(chunk)
                size += len(chunk)
                if size > BODY_CAP:
                    return b"".join(chunks)[:BODY_CAP], True
        except requests.RequestException as exc:
            raise ConnectionFailed(str(exc)) from None
        finally:
            response.close()
        return b"".join(chunks), False

    def fetch_ads_txt(self, site: str) -> FetchResult:
        """https first, falling back to plain http on connection failure."""
        try:
            return self.fetch(f"https://{site}/ads.txt")
        except ConnectionFailed:
            return self.fetch(f"http://{site}/ads.txt")

    def fetch_sellers_json(self, ad_system_domain: str) -> FetchResult:
        return self.fetch(f"https://{ad_system_domain}/sellers.json")


@dataclass
class BatchRun:
    outcomes: list[BatchOutcome] = field(default_factory=list)

    def write_log(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for outcome in self.outcomes:
                row = {
                    "url": outcome.target,
                    "status": outcome.result.status_code if outcome.result else outcome.error,
                    "bytes": len(outcome.result.body) if outcome.result else 0,
                    "ms": round(outcome.elapsed_ms, 1),
                }
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def fetch_batch(targets: Iterable[str], fetcher: Fetcher, concurrency: int = 4,
                clock: Callable[[], float] = time.monotonic) -> BatchRun:
    """Fetch each distinct target exactly once; failures recorded, not retried."""
    ordered: list[str] = []
    seen = set()
    for target in targets:
        if target not in seen:
            seen.add(target)
            ordered.append(target)

    def one(target: str) -> BatchOutcome:
        start = clock()
        try:
            result = fetcher.fetch(target)
            return BatchOutcome(target, result, elapsed_ms=(clock() - start) * 1000)
        except Exception as exc:
            return BatchOutcome(target, None, error=type(exc).__name__,
                                elapsed_ms=(clock() - start) * 1000)

    if not ordered:
        return BatchRun()
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        outcomes = list(pool.map(one, ordered))
    outcomes.sort(key=lambda o: o.target)
    return BatchRun(outcomes=outcomes)
