import csv
from pathlib import Path

from hypothesis import given, settings, strategies as st

import filter_oracle
from adaudit.filters import (
    FilterRuleSet,
    MatchContext,
    matches,
    parse_filter_list,
    write_diagnostics,
)

FIXTURES = Path(__file__).parent / "fixtures"


def _golden_rows():
    with (FIXTURES / "filter_golden.csv").open(encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _ctx(row):
    return MatchContext(request_url=row["url"], page_site=row["page_site"],
                        resource_type=row["resource_type"])


def test_golden_table_engine_and_oracle_agree():
    rows = _golden_rows()
    assert len(rows) >= 200
    for row in rows:
        expected = row["expected_hit"] == "1"
        oracle_hit = filter_oracle.rule_hits(
            row["rule"], row["url"], row["page_site"], row["resource_type"])
        assert oracle_hit == expected, f"oracle drift on {row}"
        ruleset = parse_filter_list(row["rule"] + "\n", "one")
        verdict = matches(ruleset, _ctx(row))
        if row["rule"].startswith("@@"):
            # A lone exception never blocks; its hit is checked via dominance below.
            assert verdict.blocked is False
        else:
            assert verdict.blocked == expected, f"engine drift on {row}"


def test_golden_table_combined_ruleset_matches_oracle():
    rows = _golden_rows()
    all_rules = sorted({row["rule"] for row in rows})
    ruleset = parse_filter_list("\n".join(all_rules) + "\n", "combined")
    contexts = {(row["url"], row["page_site"], row["resource_type"]) for row in rows}
    for url, page_site, resource_type in sorted(contexts):
        expected = filter_oracle.verdict(all_rules, url, page_site, resource_type)
        got = matches(ruleset, MatchContext(url, page_site, resource_type)).blocked
        assert got == expected, (url, page_site, resource_type)


def test_parse_block_rule():
    ruleset = parse_filter_list("||ads.example.com^\n", "t")
    (rule,) = ruleset.block_rules.all_rules()
    assert rule.kind == "block"
    assert rule.anchor_host
    (stats,) = ruleset.source_lists
    assert (stats.parsed_count, stats.skipped_count) == (1, 0)


def test_parse_exception_rule_with_type():
    ruleset = parse_filter_list("@@||goodcdn.com^$script\n", "t")
    (rule,) = ruleset.exception_rules.all_rules()
    assert rule.kind == "exception"
    assert rule.resource_types == {"script"}


def test_cosmetic_rules_skipped():
    text = "||ads.example.com^\nexample.com##.banner\n! a comment\n"
    ruleset = parse_filter_list(text, "t")
    (stats,) = ruleset.source_lists
    assert stats.line_count == 3
    assert stats.parsed_count == 1
    assert stats.skipped_count == 1
    assert ruleset.diagnostics[0]["reason"] == "cosmetic rule"


def test_regex_rules_skipped_not_guessed():
    ruleset = parse_filter_list("/banner[0-9]+/\n/banner/*\n", "t")
    (stats,) = ruleset.source_lists
    assert (stats.parsed_count, stats.skipped_count) == (1, 1)
    assert "regex" in ruleset.diagnostics[0]["reason"]


def test_unsupported_option_skipped_not_guessed():
    ruleset = parse_filter_list("||ads.example.com^$websocket\n", "t")
    assert len(ruleset) == 0
    assert "unsupported option" in ruleset.diagnostics[0]["reason"]
    verdict = matches(ruleset, MatchContext("https://ads.example.com/x", "news.site"))
    assert not verdict.blocked


def test_accounting_invariant_on_mixed_list():
    text = "\n".join([
        "! comment", "[Adblock Plus 2.0]", "", "||a.example^",
        "b.example##.ad", "@@||c.example^", "||d.example^$bogus-option",
    ]) + "\n"
    ruleset = parse_filter_list(text, "t")
    (stats,) = ruleset.source_lists
    comment_or_blank = 3
    assert stats.parsed_count + stats.skipped_count == stats.line_count - comment_or_blank


def test_exception_beats_block():
    text = "||doubleclick.net^\n@@||doubleclick.net/pixel^\n"
    ruleset = parse_filter_list(text, "t")
    hit = matches(ruleset, MatchContext("https://doubleclick.net/adj/x", "news.org"))
    assert hit.blocked and hit.winning_rule.kind == "block"
    spared = matches(ruleset, MatchContext("https://doubleclick.net/pixel?x=1", "news.org"))
    assert not spared.blocked and spared.winning_rule.kind == "exception"


def test_third_party_requires_cross_site():
    ruleset = parse_filter_list("/banner/*$third-party\n", "t")
    first = MatchContext("https://cdn.site.com/banner/1.png", "site.com")
    assert not matches(ruleset, first).blocked
    third = MatchContext("https://cdn.site.com/banner/1.png", "news.org")
    assert matches(ruleset, third).blocked


def test_domain_anchor_subdomain_boundary():
    ruleset = parse_filter_list("||doubleclick.net^\n", "t")
    assert matches(ruleset, MatchContext("https://ad.doubleclick.net/adj/x", "news.org")).blocked
    assert matches(ruleset, MatchContext("https://doubleclick.net/adj", "news.org")).blocked
    assert not matches(ruleset, MatchContext("https://notdoubleclick.net/adj", "news.org")).blocked


def test_path_case_sensitive_host_case_insensitive():
    ruleset = parse_filter_list("||ads.example.com/Banner^\n", "t")
    assert matches(ruleset, MatchContext("https://ADS.EXAMPLE.COM/Banner?x=1", "news.org")).blocked
    assert not matches(ruleset, MatchContext("https://ads.example.com/banner?x=1", "news.org")).blocked


def test_multiple_lists_accumulate():
    ruleset = parse_filter_list("||a.example^\n", "easylist")
    parse_filter_list("||b.example^\n@@||a.example/ok^\n", "ublock", into=ruleset)
    assert [s.name for s in ruleset.source_lists] == ["easylist", "ublock"]
    assert len(ruleset) == 3


def test_diagnostics_jsonl(tmp_path):
    ruleset = parse_filter_list("a.com##.x\n", "t")
    out = tmp_path / "diag.jsonl"
    write_diagnostics(ruleset, out)
    assert '"line_no": 1' in out.read_text()


@settings(max_examples=200)
@given(st.text())
def test_parser_total_on_any_text(text):
    ruleset = parse_filter_list(text, "fuzz")
    (stats,) = ruleset.source_lists
    assert stats.parsed_count + stats.skipped_count <= stats.line_count


_rules = st.sampled_from([
    "||ads.example.com^", "/banner/*", "||tracker.io^$third-party",
    "|https://ads.start.example", "-ad-300x250.", "||promo.example^$domain=news.site",
])
_urls = st.sampled_from([
    "https://ads.example.com/x", "https://cdn.site.com/banner/1.png",
    "https://tracker.io/t.gif", "https://ads.start.example/x",
    "https://z.example/img-ad-300x250.jpg", "https://promo.example/buy",
])


@settings(max_examples=150)
@given(rules=st.lists(_rules, min_size=1, max_size=4, unique=True),
       url=_urls, page=st.sampled_from(["news.site", "site.com", "tracker.io"]))
def test_exception_dominance_and_block_monotonicity(rules, url, page):
    ctx = MatchContext(url, page)
    base = parse_filter_list("\n".join(rules) + "\n", "base")
    before = matches(base, ctx).blocked

    with_exc = parse_filter_list("\n".join(rules) + "\n@@" + url + "\n", "exc")
    after_exc = matches(with_exc, ctx).blocked
    assert not after_exc or before  # adding an exception never turns blocking on
    assert after_exc is False  # this exception matches ctx outright

    with_block = parse_filter_list("\n".join(rules) + "\n||never-seen.example^\n", "blk")
    after_blk = matches(with_block, ctx).blocked
    assert after_blk or not before  # adding a block rule never turns blocking off
