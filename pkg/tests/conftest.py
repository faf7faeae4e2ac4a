import json
from pathlib import Path

import pytest


def write_raw_bundle(root: Path, site: str, *, html="", links=(), transactions=(),
                     cookies=(), ads_txt=None, status="ok", reason=None,
                     fetched_at="2021-12-13T10:00:00Z", manifest_extra=None,
                     omit_manifest_keys=()) -> Path:
    """Write bundle files by hand, independently of adaudit's writer."""
    path = root / site
    path.mkdir(parents=True, exist_ok=True)
    manifest = {"site": site, "fetched_at": fetched_at, "status": status}
    if reason is not None:
        manifest["reason"] = reason
    manifest.update(manifest_extra or {})
    for key in omit_manifest_keys:
        manifest.pop(key, None)
    (path / "manifest.json").write_text(json.dumps(manifest), "utf-8")
    (path / "page.html").write_text(html, "utf-8")
    (path / "links.txt").write_text("".join(u + "\n" for u in links), "utf-8")
    with (path / "transactions.jsonl").open("w", encoding="utf-8") as fh:
        for row in transactions:
            fh.write(json.dumps(row) + "\n")
    with (path / "cookies.jsonl").open("w", encoding="utf-8") as fh:
        for row in cookies:
            fh.write(json.dumps(row) + "\n")
    if ads_txt is not None:
        (path / "ads.txt").write_text(ads_txt, "utf-8")
    return path


def transaction_row(url, *, status_code=200, body=None, location=None,
                    headers=None, started_at=None, method="GET", initiator=None):
    row = {"request_url": url, "method": method, "status_code": status_code,
           "response_headers": headers or {"content-type": ["text/html"]}}
    if body is not None:
        row["response_body"] = body
    if location is not None:
        row["redirect_location"] = location
    if started_at is not None:
        row["started_at"] = started_at
    if initiator is not None:
        row["initiator"] = initiator
    return row


@pytest.fixture
def bundle_root(tmp_path):
    root = tmp_path / "bundles"
    root.mkdir()
    return root


def make_corpus(root: Path) -> dict:
    """A small end-to-end corpus: bundles, labels, filter list, categories, sellers."""
    bundles = root / "bundles"
    bundles.mkdir(parents=True, exist_ok=True)

    write_raw_bundle(
        bundles, "fake1.example",
        html=('<html><script>ga("create","UA-1111111-1")</script>'
              '<!-- ca-pub-1111111111 -->'
              '<a href="https://ad.dblclick.example/adj/1">ad</a>'
              '<a href="https://win.prizes.example/landing">offer</a></html>'),
        links=["https://ad.dblclick.example/adj/1", "https://win.prizes.example/landing"],
        transactions=[
            transaction_row("https://adserver.example/bid",
                            body='{"creative": "https://win.prizes.example/landing"}'),
            transaction_row("https://ad.dblclick.example/adj/1", status_code=302,
                            location="https://win.prizes.example/landing"),
            transaction_row("https://win.prizes.example/landing"),
        ],
        ads_txt=("google.com, pub-1101, DIRECT, f08c47fec0942fa0\n"
                 "appnexus.com, 1102, RESELLER\n"
                 "sovrn.com, 1103, DIRECT\n"),
    )
    write_raw_bundle(
        bundles, "fake2.example",
        html='<html>UA-1111111-1 ca-pub-1111111111 <a href="/local">x</a></html>',
        ads_txt="google.com, pub-2201, DIRECT\nappnexus.com, 2202, RESELLER\n",
    )
    write_raw_bundle(
        bundles, "real1.example",
        html=('<html>G-REAL11AA GTM-RR11'
              '<a href="https://ad.dblclick.example/adj/9">ad</a></html>'),
        links=["https://ad.dblclick.example/adj/9"],
        transactions=[
            transaction_row("https://ad.dblclick.example/adj/9", status_code=302,
                            location="https://brand.example/offer"),
            transaction_row("https://brand.example/offer"),
        ],
        ads_txt="google.com, pub-3301, DIRECT\nopenx.com, 3302, RESELLER\n",
    )
    write_raw_bundle(
        bundles, "real2.example",
        html="<html>G-REAL11AA says hi</html>",
        ads_txt="not a record at all\n",
    )
    write_raw_bundle(bundles, "broken.example", status="errored", reason="timeout")

    labels = root / "labels.csv"
    labels.write_text(
        "site,label,sources\n"
        "fake1.example,fake,mbfc\n"
        "fake2.example,fake,mbfc|cjr\n"
        "real1.example,real,mbfc\n"
        "real2.example,real,mbfc\n", "utf-8")

    filter_list = root / "easylist_subset.txt"
    filter_list.write_text(
        "! test filter list\n"
        "||dblclick.example^\n"
        "||adserver.example^\n"
        "@@||dblclick.example/allowed^\n", "utf-8")

    category_map = root / "categories.csv"
    category_map.write_text(
        "domain,category\n"
        "prizes.example,Entertainment\n"
        "brand.example,Business\n"
        "fake1.example,News\n"
        "fake2.example,Business\n"
        "real1.example,News\n"
        "real2.example,News\n", "utf-8")

    sellers = root / "sellers"
    sellers.mkdir(exist_ok=True)
    (sellers / "google.com.json").write_text(json.dumps({
        "version": "1.0",
        "sellers": [
            {"seller_id": "pub-1101", "seller_type": "PUBLISHER", "domain": "fake1.example"},
            {"seller_id": "pub-3301", "seller_type": "PUBLISHER", "domain": "real1.example"},
        ],
    }), "utf-8")

    return {"bundles": bundles, "labels": labels, "filter_list": filter_list,
            "category_map": category_map, "sellers": sellers}


@pytest.fixture
def corpus(tmp_path):
    return make_corpus(tmp_path)
