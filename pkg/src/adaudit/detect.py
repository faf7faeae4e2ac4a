"""Ad detection and advertiser attribution over capture bundles.

Two complementary routes classify URLs as ads.  The block-list route takes
every cross-domain URL found on the page and keeps those a filter list
blocks.  The network route scans captured response bodies: when a blocked
(ad-serving) request delivered a body containing a URL that also appears on
the page, that URL was placed through an ad network and is an ad even though
the URL itself looks benign.  Every verdict is re-checkable from its recorded
evidence.  Attribution then resolves each ad URL through the captured
redirect chain to the advertiser's registrable domain.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Optional

from .bundles import CaptureBundle, REDIRECT_CODES, SiteLabel
from .categories import CategoryMap, UNCLASSIFIED
from .domains import registrable_domain
from .errors import MissingBundle, RedirectLoop, UnparsableHost
from .filters import FilterRuleSet, MatchContext, matches
from .urltools import extract_urls, is_absolute_http, resolve

ORIGIN_BLOCKLIST = "page_blocklist"
ORIGIN_NETWORK = "network_trace"

MAX_REDIRECT_HOPS = 10


@dataclass(frozen=True)
class AdUrl:
    url: str
    origin: str                      # page_blocklist | network_trace
    matched_rule: str
    placing_request_url: Optional[str] = None  # network_trace only, != url


@dataclass(frozen=True)
class AdvertiserAttribution:
    site: str
    ad_url: AdUrl
    redirect_chain: tuple[str, ...]
    advertiser_domain: str
    category: Optional[str] = None


@dataclass(frozen=True)
class DetectionAnnotation:
    site: str
    annotated_ad_urls: frozenset


class _LinkExtractor(HTMLParser):
    """Collects href values of hyperlinks and src values of any element."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.found: list[tuple[str, str]] = []  # (attribute, value)

    def handle_starttag(self, tag, attrs):
        for name, value in attrs:
            if value is None:
                continue
            if name == "href" and tag in ("a", "area"):
                self.found.append(("href", value))
            elif name == "src":
                self.found.append(("src", value))


def extract_candidate_urls(bundle: CaptureBundle) -> set[str]:
    """Cross-domain URLs present on the page: recorded links plus HTML refs.

    Errored bundles yield an empty set by contract.  Relative references are
    resolved against the page URL and same-site URLs are dropped.
    """
    if not bundle.ok:
        return set()
    base = f"https://{bundle.site}/"
    raw: list[str] = list(bundle.page_links)
    parser = _LinkExtractor()
    try:
        parser.feed(bundle.html)
        parser.close()
    except Exception:
        pass  # candidates from page_links still apply
    raw.extend(value for _, value in parser.found)

    candidates = set()
    for ref in raw:
        url = resolve(base, ref.strip())
        if not is_absolute_http(url):
            continue
        try:
            if registrable_domain(url) != bundle.site:
                candidates.add(url)
        except UnparsableHost:
            continue
    return candidates


def detect_ads_blocklist(candidates: set[str], ruleset: FilterRuleSet,
                         site: str) -> set[AdUrl]:
    """Candidates the filter lists block outright."""
    ads = set()
    for url in candidates:
        verdict = matches(ruleset, MatchContext(url, site, "other"))
        if verdict.blocked:
            ads.add(AdUrl(url=url, origin=ORIGIN_BLOCKLIST,
                          matched_rule=verdict.winning_rule.raw))
    return ads


def _redirect_map(bundle: CaptureBundle) -> dict[str, str]:
    redirect = {}
    for t in bundle.transactions:
        if t.status_code in REDIRECT_CODES and t.redirect_location:
            redirect.setdefault(t.request_url, resolve(t.request_url, t.redirect_location))
    return redirect


def _chain_through(url: str, redirect: dict[str, str]) -> list[str]:
    """The redirect chain containing url, walked back to its origin request."""
    sources: dict[str, str] = {}
    for src, dst in redirect.items():
        sources.setdefault(dst, src)
    chain = [url]
    seen = {url}
    while chain[0] in sources:
        prev = sources[chain[0]]
        if prev in seen:
            break
        chain.insert(0, prev)
        seen.add(prev)
    return chain


def detect_ads_network(bundle: CaptureBundle, candidates: set[str],
                       ruleset: FilterRuleSet) -> set[AdUrl]:
    """Candidates delivered to the page by a block-list-matched request.

    For each captured response body, URLs found inside it that also appear in
    the page candidates are ads when the request that carried them (or any
    hop of the redirect chain leading to it) matches the block lists.
    """
    if not bundle.ok:
        return set()
    redirect = _redirect_map(bundle)
    ads = set()
    for t in bundle.transactions:
        if not t.response_body:
            continue
        delivered = set(extract_urls(t.response_body)) & candidates
        if not delivered:
            continue
        placing = None
        for hop in _chain_through(t.request_url, redirect):
            verdict = matches(ruleset, MatchContext(hop, bundle.site, "other"))
            if verdict.blocked:
                placing = (hop, verdict.winning_rule.raw)
                break
        if placing is None:
            continue
        for url in delivered:
            if url != placing[0]:
                ads.add(AdUrl(url=url, origin=ORIGIN_NETWORK,
                              matched_rule=placing[1], placing_request_url=placing[0]))
    return ads


def detect_ads(bundle: CaptureBundle, ruleset: FilterRuleSet) -> set[AdUrl]:
    """Union of both routes; a URL caught by both keeps its block-list origin."""
    candidates = extract_candidate_urls(bundle)
    direct = detect_ads_blocklist(candidates, ruleset, bundle.site)
    placed = detect_ads_network(bundle, candidates, ruleset)
    direct_urls = {ad.url for ad in direct}
    return direct | {ad for ad in placed if ad.url not in direct_urls}


def attribute_advertiser(ad: AdUrl, bundle: CaptureBundle,
                         category_map: Optional[CategoryMap] = None) -> AdvertiserAttribution:
    """Resolve an ad URL through captured redirects to the landing domain.

    When the capture holds no redirect for the URL, the ad URL is already the
    landing page and attributes to its own registrable domain.
    """
    redirect = _redirect_map(bundle)
    chain = [ad.url]
    seen = {ad.url}
    while chain[-1] in redirect and len(chain) <= MAX_REDIRECT_HOPS:
        nxt = redirect[chain[-1]]
        if nxt in seen:
            raise RedirectLoop(nxt)
        chain.append(nxt)
        seen.add(nxt)
    advertiser = registrable_domain(chain[-1])
    category = category_map.category(advertiser) if category_map is not None else None
    return AdvertiserAttribution(
        site=bundle.site,
        ad_url=ad,
        redirect_chain=tuple(chain),
        advertiser_domain=advertiser,
        category=category,
    )


@dataclass(frozen=True)
class SiteEvaluation:
    site: str
    detected: int
    truth: int
    true_positives: int
    precision: float
    recall: float


@dataclass(frozen=True)
class DetectionReport:
    precision: float
    recall: float
    per_site: tuple[SiteEvaluation, ...]


def evaluate_detection(bundles: Iterable[CaptureBundle],
                       annotations: Iterable[DetectionAnnotation],
                       ruleset: FilterRuleSet) -> DetectionReport:
    """Micro-averaged precision/recall of detection against ground truth."""
    by_site = {b.site: b for b in bundles}
    rows = []
    total_tp = total_detected = total_truth = 0
    for annotation in sorted(annotations, key=lambda a: a.site):
        bundle = by_site.get(annotation.site)
        if bundle is None:
            raise MissingBundle(annotation.site)
        detected = {ad.url for ad in detect_ads(bundle, ruleset)}
        truth = set(annotation.annotated_ad_urls)
        tp = len(detected & truth)
        rows.append(SiteEvaluation(
            site=annotation.site,
            detected=len(detected),
            truth=len(truth),
            true_positives=tp,
            precision=tp / len(detected) if detected else 1.0,
            recall=tp / len(truth) if truth else 1.0,
        ))
        total_tp += tp
        total_detected += len(detected)
        total_truth += len(truth)
    return DetectionReport(
        precision=total_tp / total_detected if total_detected else 1.0,
        recall=total_tp / total_truth if total_truth else 1.0,
        per_site=tuple(rows),
    )


def render_precision_recall(report: DetectionReport) -> str:
    return (f"Precision: {report.precision * 100:.2f}%\n"
            f"Recall: {report.recall * 100:.2f}%")


def load_annotations(path: str | Path) -> list[DetectionAnnotation]:
    """Read the site,url ground-truth CSV into per-site annotation sets."""
    per_site: dict[str, set[str]] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            site = (row.get("site") or "").strip().lower()
            url = (row.get("url") or "").strip()
            if site and url:
                per_site.setdefault(site, set()).add(url)
    return [DetectionAnnotation(site, frozenset(urls))
            for site, urls in sorted(per_site.items())]


def advertiser_category_distribution(attributions: Iterable[AdvertiserAttribution],
                                     category_map: CategoryMap,
                                     labels: Iterable[SiteLabel]) -> dict:
    """Per label: % of attributed sites showing >= 1 advertiser per category."""
    label_of = {l.site: l.label for l in labels}
    sites_by_label: dict[str, set[str]] = {"fake": set(), "real": set()}
    category_sites: dict[str, dict[str, set[str]]] = {"fake": {}, "real": {}}
    for attribution in attributions:
        label = label_of.get(attribution.site)
        if label not in sites_by_label:
            continue
        sites_by_label[label].add(attribution.site)
        category = attribution.category or category_map.category(attribution.advertiser_domain)
        category = category or UNCLASSIFIED
        category_sites[label].setdefault(category, set()).add(attribution.site)

    result: dict[str, dict[str, float]] = {}
    for label, denominator_sites in sites_by_label.items():
        denominator = len(denominator_sites)
        result[label] = {
            category: 100.0 * len(sites) / denominator
            for category, sites in sorted(category_sites[label].items())
        } if denominator else {}
    return result
