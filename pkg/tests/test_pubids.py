from adaudit.bundles import CaptureBundle, Cookie, HttpTransaction
from adaudit.pubids import (
    KIND_ADSENSE,
    KIND_GA,
    KIND_GA4,
    KIND_GTM,
    PublisherId,
    build_index,
    canonicalize,
    clean_ids,
    extract_ids,
    load_dictionary,
    load_stoplist,
)


def _bundle(site="example.org", html="", transactions=(), cookies=()):
    return CaptureBundle(site=site, fetched_at="2021-12-13T10:00:00Z", html=html,
                         transactions=tuple(transactions), cookies=tuple(cookies))


def _values(ids, kind=None):
    return {i.value for i in ids if kind is None or i.kind == kind}


def test_tracking_id_from_html():
    ids = extract_ids(_bundle(html='ga("create", "UA-123456-7", "auto");'))
    assert _values(ids, KIND_GA) == {"UA-123456-7"}
    (pid,) = ids
    assert pid.sources == {"html"}


def test_empty_bundle():
    assert extract_ids(_bundle()) == set()


def test_gtm_id_from_cookie_value():
    cookie = Cookie("_gid", "GA1.2.GTM-AB12CD.17", "example.org", "first")
    ids = extract_ids(_bundle(cookies=[cookie]))
    assert _values(ids, KIND_GTM) == {"GTM-AB12CD"}
    (pid,) = ids
    assert pid.sources == {"cookie"}


def test_adsense_ca_prefix_stripped():
    ids = extract_ids(_bundle(html='data-ad-client="ca-pub-1234567890123456"'))
    assert _values(ids, KIND_ADSENSE) == {"pub-1234567890123456"}


def test_lowercase_input_canonicalized():
    ids = extract_ids(_bundle(html="gtag('config', 'g-abc123xy')"))
    assert _values(ids, KIND_GA4) == {"G-ABC123XY"}


def test_delimiter_rule_rejects_embedded():
    html = "xUA-123456-7 UA-123456-7-8 aaGTM-ABCD99zz GTM-ABCD99"
    ids = extract_ids(_bundle(html=html))
    assert _values(ids) == {"GTM-ABCD99"}


def test_traffic_sources_merged():
    t1 = HttpTransaction("https://www.googletagmanager.com/gtm.js?id=GTM-AB12CD")
    t2 = HttpTransaction("https://example.org/app.js",
                         response_body="var id='GTM-AB12CD'; ga('create','UA-55555-1')")
    ids = extract_ids(_bundle(html="<!-- GTM-AB12CD -->", transactions=[t1, t2]))
    by_value = {i.value: i for i in ids}
    assert by_value["GTM-AB12CD"].sources == {"html", "traffic"}
    assert by_value["UA-55555-1"].sources == {"traffic"}


def test_extraction_is_pure():
    bundle = _bundle(html="UA-123456-7 and G-ABC123 and pub-1234567890")
    assert extract_ids(bundle) == extract_ids(bundle)


def test_extracted_values_rematch_canonical_pattern():
    from adaudit.pubids import CANONICAL_RES
    html = "ca-pub-1234567890 g-abc123 gtm-zz99 UA-1234-1"
    for pid in extract_ids(_bundle(html=html)):
        assert CANONICAL_RES[pid.kind].match(pid.value), pid


def test_clean_removes_dictionary_word_suffix():
    ids = {PublisherId(KIND_GA4, "G-ABOUT1", "a.org"),  # suffix not a word
           PublisherId(KIND_GA4, "G-BANNER", "a.org")}
    cleaned = clean_ids(ids, dictionary=frozenset({"banner", "about"}), stoplist=frozenset())
    assert _values(cleaned) == {"G-ABOUT1"}


def test_clean_keeps_numeric_ids():
    ids = {PublisherId(KIND_GA, "UA-123456-7", "a.org")}
    assert clean_ids(ids, frozenset({"about"}), frozenset()) == ids


def test_clean_empty_lists_is_identity():
    ids = {PublisherId(KIND_GTM, "GTM-NEWS", "a.org")}
    assert clean_ids(ids, frozenset(), frozenset()) == ids


def test_clean_stoplist_full_value():
    ids = {PublisherId(KIND_GTM, "GTM-XXXX", "a.org"),
           PublisherId(KIND_GTM, "GTM-K3J9", "a.org")}
    cleaned = clean_ids(ids, frozenset(), load_stoplist())
    assert _values(cleaned) == {"GTM-K3J9"}


def test_default_wordlists_load():
    words = load_dictionary()
    assert "about" in words and len(words) > 300
    stop = load_stoplist()
    assert "gtm-xxxx" in stop


def test_build_index_reused_id():
    ids = [PublisherId(KIND_GA, "UA-1111-1", "a.org"),
           PublisherId(KIND_GA, "UA-1111-1", "b.org")]
    index, summary = build_index(ids, total_sites=4)
    assert index.by_id["UA-1111-1"] == {"a.org", "b.org"}
    row = {s.kind: s for s in summary}[KIND_GA]
    assert (row.unique_identifiers, row.unique_domains) == (1, 2)
    assert row.pct_of_sites == 50.0


def test_build_index_disjoint():
    ids = [PublisherId(KIND_GA4, f"G-SITE{i}XX", f"s{i}.org") for i in range(3)]
    index, _ = build_index(ids)
    assert len(index.by_id) == 3
    assert all(len(sites) == 1 for sites in index.by_id.values())


def test_transpose_invariant():
    ids = [PublisherId(KIND_GTM, "GTM-AAAA11", "a.org"),
           PublisherId(KIND_GTM, "GTM-BBBB22", "a.org"),
           PublisherId(KIND_ADSENSE, "pub-1234512345", "b.org")]
    index, _ = build_index(ids)
    assert index.transpose_consistent()
    # Break it on purpose and confirm the check notices.
    index.by_id["GTM-AAAA11"].add("c.org")
    assert not index.transpose_consistent()


def test_summary_covers_all_kinds():
    _, summary = build_index([], total_sites=10)
    assert [s.kind for s in summary] == [KIND_ADSENSE, KIND_GA, KIND_GA4, KIND_GTM]
    assert all(s.unique_identifiers == 0 for s in summary)


def test_canonicalize():
    assert canonicalize(KIND_ADSENSE, "CA-PUB-123") == "pub-123"
    assert canonicalize(KIND_GTM, "gtm-ab12") == "GTM-AB12"
