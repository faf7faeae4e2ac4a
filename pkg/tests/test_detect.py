import pytest

from adaudit.bundles import CaptureBundle, HttpTransaction, SiteLabel
from adaudit.categories import build_category_map
from adaudit.detect import (
    AdUrl,
    AdvertiserAttribution,
    DetectionAnnotation,
    ORIGIN_BLOCKLIST,
    ORIGIN_NETWORK,
    advertiser_category_distribution,
    attribute_advertiser,
    detect_ads,
    detect_ads_blocklist,
    detect_ads_network,
    evaluate_detection,
    extract_candidate_urls,
    load_annotations,
    render_precision_recall,
)
from adaudit.errors import MissingBundle, RedirectLoop
from adaudit.filters import parse_filter_list

RULES = parse_filter_list(
    "||doubleclick.net^\n||adserver.example^\n@@||doubleclick.net/pixel^\n", "test-list")


def _bundle(site="news.org", html="", links=(), transactions=()):
    return CaptureBundle(site=site, fetched_at="2021-12-13T10:00:00Z", html=html,
                         page_links=tuple(links), transactions=tuple(transactions))


def _redirect(url, to):
    return HttpTransaction(url, status_code=302, redirect_location=to,
                           response_headers={"location": (to,)})


# --- candidate extraction ---

def test_same_site_links_filtered():
    bundle = _bundle(links=["https://news.org/a", "https://adnet.com/click?id=1"])
    assert extract_candidate_urls(bundle) == {"https://adnet.com/click?id=1"}


def test_relative_only_html_yields_nothing():
    bundle = _bundle(html='<a href="/local">x</a>')
    assert extract_candidate_urls(bundle) == set()


def test_links_file_beyond_html_included():
    bundle = _bundle(html="<p>no links here</p>",
                     links=["https://iframe-ad.example/click"])
    assert "https://iframe-ad.example/click" in extract_candidate_urls(bundle)


def test_html_href_and_src_collected():
    html = ('<a href="https://partner.example/offer">x</a>'
            '<script src="https://cdn.example/lib.js"></script>'
            '<img src="//imghost.example/1.png">')
    urls = extract_candidate_urls(_bundle(html=html))
    assert urls == {"https://partner.example/offer", "https://cdn.example/lib.js",
                    "https://imghost.example/1.png"}


def test_relative_resolved_against_site_then_dropped():
    html = '<a href="section/page.html">x</a><a href="https://other.example/x">y</a>'
    assert extract_candidate_urls(_bundle(html=html)) == {"https://other.example/x"}


def test_errored_bundle_yields_empty():
    bundle = CaptureBundle(site="news.org", fetched_at="2021-12-13T10:00:00Z",
                           status="errored", error_reason="timeout",
                           page_links=("https://adnet.com/x",))
    assert extract_candidate_urls(bundle) == set()
    assert detect_ads(bundle, RULES) == set()


# --- block-list route ---

def test_blocklist_detects_matching_candidate():
    ads = detect_ads_blocklist({"https://ad.doubleclick.net/adj/x"}, RULES, "news.org")
    (ad,) = ads
    assert ad.origin == ORIGIN_BLOCKLIST
    assert ad.matched_rule == "||doubleclick.net^"


def test_blocklist_empty_candidates():
    assert detect_ads_blocklist(set(), RULES, "news.org") == set()


def test_blocklist_exception_excludes():
    ads = detect_ads_blocklist({"https://doubleclick.net/pixel?x=1"}, RULES, "news.org")
    assert ads == set()


# --- network route ---

def test_network_route_detects_placed_url():
    landing = "https://shop.example.com/landing"
    bundle = _bundle(
        links=[landing],
        transactions=[HttpTransaction("https://adserver.example/bid",
                                      response_body=f'{{"ad": "{landing}"}}')],
    )
    candidates = extract_candidate_urls(bundle)
    (ad,) = detect_ads_network(bundle, candidates, RULES)
    assert ad.url == landing
    assert ad.origin == ORIGIN_NETWORK
    assert ad.placing_request_url == "https://adserver.example/bid"
    assert ad.placing_request_url != ad.url


def test_network_route_benign_request_ignored():
    landing = "https://shop.example.com/landing"
    bundle = _bundle(
        links=[landing],
        transactions=[HttpTransaction("https://benigncdn.com/content",
                                      response_body=landing)],
    )
    assert detect_ads_network(bundle, extract_candidate_urls(bundle), RULES) == set()


def test_network_route_requires_candidate_membership():
    bundle = _bundle(
        links=["https://unrelated.example/x"],
        transactions=[HttpTransaction("https://adserver.example/bid",
                                      response_body="https://shop.example.com/landing")],
    )
    assert detect_ads_network(bundle, extract_candidate_urls(bundle), RULES) == set()


def test_network_route_follows_redirect_chain_to_placing_request():
    landing = "https://shop.example.com/landing"
    bundle = _bundle(
        links=[landing],
        transactions=[
            _redirect("https://adserver.example/entry", "https://cdn.benign.example/final"),
            HttpTransaction("https://cdn.benign.example/final", response_body=landing),
        ],
    )
    (ad,) = detect_ads_network(bundle, extract_candidate_urls(bundle), RULES)
    assert ad.placing_request_url == "https://adserver.example/entry"


def test_detect_union_prefers_blocklist_origin():
    url = "https://ad.doubleclick.net/adj/x"
    bundle = _bundle(
        links=[url],
        transactions=[HttpTransaction("https://adserver.example/bid", response_body=url)],
    )
    (ad,) = detect_ads(bundle, RULES)
    assert ad.origin == ORIGIN_BLOCKLIST


def test_detection_subsets_of_candidates():
    bundle = _bundle(
        links=["https://ad.doubleclick.net/adj/1", "https://benign.example/x",
               "https://shop.example.com/landing"],
        transactions=[HttpTransaction("https://adserver.example/bid",
                                      response_body="https://shop.example.com/landing")],
    )
    candidates = extract_candidate_urls(bundle)
    assert {a.url for a in detect_ads_blocklist(candidates, RULES, bundle.site)} <= candidates
    assert {a.url for a in detect_ads_network(bundle, candidates, RULES)} <= candidates


def test_detection_deterministic():
    bundle = _bundle(links=["https://ad.doubleclick.net/adj/1"])
    assert detect_ads(bundle, RULES) == detect_ads(bundle, RULES)


def test_every_verdict_recheckable_from_evidence():
    from adaudit.filters import MatchContext, matches
    bundle = _bundle(
        links=["https://ad.doubleclick.net/adj/1", "https://shop.example.com/landing",
               "https://benign.example/x"],
        transactions=[HttpTransaction("https://adserver.example/bid",
                                      response_body="https://shop.example.com/landing")],
    )
    ads = detect_ads(bundle, RULES)
    assert ads
    for ad in ads:
        checked_url = ad.url if ad.origin == ORIGIN_BLOCKLIST else ad.placing_request_url
        verdict = matches(RULES, MatchContext(checked_url, bundle.site, "other"))
        assert verdict.blocked
        assert verdict.winning_rule.raw == ad.matched_rule
        if ad.origin == ORIGIN_NETWORK:
            assert ad.placing_request_url != ad.url


# --- attribution ---

def test_attribution_follows_chain():
    bundle = _bundle(transactions=[
        _redirect("https://adnet.com/click", "https://tracker.example/t"),
        _redirect("https://tracker.example/t", "https://brand.com/offer"),
        HttpTransaction("https://brand.com/offer"),
    ])
    ad = AdUrl("https://adnet.com/click", ORIGIN_BLOCKLIST, "||adnet.com^")
    attribution = attribute_advertiser(ad, bundle)
    assert attribution.redirect_chain == (
        "https://adnet.com/click", "https://tracker.example/t", "https://brand.com/offer")
    assert attribution.advertiser_domain == "brand.com"


def test_attribution_without_captured_redirects():
    ad = AdUrl("https://brand.com/page", ORIGIN_BLOCKLIST, "rule")
    attribution = attribute_advertiser(ad, _bundle())
    assert attribution.redirect_chain == ("https://brand.com/page",)
    assert attribution.advertiser_domain == "brand.com"


def test_attribution_redirect_loop():
    bundle = _bundle(transactions=[
        _redirect("https://a.example/1", "https://b.example/2"),
        _redirect("https://b.example/2", "https://a.example/1"),
    ])
    ad = AdUrl("https://a.example/1", ORIGIN_BLOCKLIST, "rule")
    with pytest.raises(RedirectLoop):
        attribute_advertiser(ad, bundle)


def test_attribution_category_from_map():
    cmap = build_category_map([("brand.com", "Business")])
    ad = AdUrl("https://brand.com/page", ORIGIN_BLOCKLIST, "rule")
    assert attribute_advertiser(ad, _bundle(), cmap).category == "Business"


def test_attribution_hop_cap():
    hops = [f"https://h{i}.example/x" for i in range(15)]
    bundle = _bundle(transactions=[_redirect(a, b) for a, b in zip(hops, hops[1:])])
    ad = AdUrl(hops[0], ORIGIN_BLOCKLIST, "rule")
    attribution = attribute_advertiser(ad, bundle)
    assert len(attribution.redirect_chain) == 11  # start + 10 hops


# --- evaluation ---

def _annotated_bundle(site, ad_urls, decoys=()):
    return _bundle(site=site, links=list(ad_urls) + list(decoys))


def test_evaluation_perfect():
    truth = {"https://ad.doubleclick.net/adj/1", "https://ad.doubleclick.net/adj/2"}
    bundle = _annotated_bundle("news.org", truth, decoys=["https://benign.example/x"])
    report = evaluate_detection([bundle], [DetectionAnnotation("news.org", frozenset(truth))],
                                RULES)
    assert report.precision == 1.0 and report.recall == 1.0


def test_evaluation_one_extra_detection():
    truth = {f"https://ad.doubleclick.net/adj/{i}" for i in range(9)}
    extra = "https://adserver.example/extra"
    bundle = _annotated_bundle("news.org", truth | {extra})
    report = evaluate_detection([bundle], [DetectionAnnotation("news.org", frozenset(truth))],
                                RULES)
    assert report.precision == pytest.approx(0.9)
    assert report.recall == 1.0


def test_evaluation_missing_bundle():
    with pytest.raises(MissingBundle):
        evaluate_detection([], [DetectionAnnotation("news.org", frozenset())], RULES)


def test_evaluation_empty_sets_score_one():
    bundle = _bundle(site="news.org")
    report = evaluate_detection([bundle], [DetectionAnnotation("news.org", frozenset())], RULES)
    assert report.precision == 1.0 and report.recall == 1.0


def test_render_precision_recall_format():
    bundle = _bundle(site="news.org")
    report = evaluate_detection([bundle], [DetectionAnnotation("news.org", frozenset())], RULES)
    text = render_precision_recall(report)
    assert text == "Precision: 100.00%\nRecall: 100.00%"


def test_load_annotations(tmp_path):
    path = tmp_path / "annotations.csv"
    path.write_text("site,url\nnews.org,https://a.example/1\nnews.org,https://a.example/2\n")
    (annotation,) = load_annotations(path)
    assert annotation.site == "news.org"
    assert len(annotation.annotated_ad_urls) == 2


# --- advertiser categories ---

LABELS = [SiteLabel("fake1.org", "fake"), SiteLabel("fake2.org", "fake"),
          SiteLabel("real1.org", "real")]


def _attr(site, advertiser, category):
    ad = AdUrl(f"https://{advertiser}/x", ORIGIN_BLOCKLIST, "rule")
    return AdvertiserAttribution(site=site, ad_url=ad, redirect_chain=(ad.url,),
                                 advertiser_domain=advertiser, category=category)


def test_category_distribution_single_site():
    cmap = build_category_map([])
    attributions = [_attr("fake1.org", "a.com", "Business"),
                    _attr("fake1.org", "b.com", "Business")]
    hist = advertiser_category_distribution(attributions, cmap, LABELS)
    assert hist["fake"] == {"Business": 100.0}


def test_category_distribution_share_of_sites():
    cmap = build_category_map([])
    attributions = [_attr("fake1.org", "a.com", "Entertainment"),
                    _attr("fake2.org", "b.com", "Business")]
    hist = advertiser_category_distribution(attributions, cmap, LABELS)
    assert hist["fake"]["Entertainment"] == 50.0
    assert hist["fake"]["Business"] == 50.0


def test_multi_category_resolves_to_global_majority():
    cmap = build_category_map([
        ("dual.com", "Business"), ("dual.com", "News"),
        ("x1.com", "Business"), ("x2.com", "Business"), ("x3.com", "News"),
    ])
    assert cmap.category("dual.com") == "Business"
    attributions = [_attr("fake1.org", "dual.com", None)]
    hist = advertiser_category_distribution(attributions, cmap, LABELS)
    assert hist["fake"] == {"Business": 100.0}


def test_unmapped_advertiser_counts_unclassified():
    cmap = build_category_map([])
    hist = advertiser_category_distribution([_attr("real1.org", "mystery.com", None)],
                                            cmap, LABELS)
    assert hist["real"] == {"unclassified": 100.0}
