"""Command-line pipeline: ingest | detect | supply | ids | graph | cluster | analyze | report.

All outputs are plot-ready CSV/JSONL with stable ordering: identical inputs
and seed produce byte-identical files.  Exit codes: 0 success, 1 partial or
data failures, 2 usage/config errors.  Every flag can also come from a
key=value config file (--config) or from the environment with the ADAUDIT_
prefix (ADAUDIT_<COMMAND>_<PARAM>, e.g. ADAUDIT_INGEST_BUNDLES_DIR).
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import community, clusterstats, detect, metagraph, pubids, supplychain
from .bundles import CaptureBundle, iter_bundle_paths, load_bundle, load_labels
from .categories import CategoryMap, load_category_map
from .errors import AdAuditError
from .fetch import Fetcher, RateLimiter, fetch_batch
from .filters import load_filter_lists, write_diagnostics

PARTIAL_FAILURE = 1


def _read_config_file(path: str) -> dict:
    values: dict = {}
    for raw in Path(path).read_text("utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


@click.group(context_settings={"auto_envvar_prefix": "ADAUDIT"})
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="key=value file supplying defaults for any flag")
@click.pass_context
def main(ctx, config_path):
    """Audit news-site monetization from offline crawl captures."""
    if config_path:
        values = _read_config_file(config_path)
        ctx.default_map = {}
        for name, command in main.commands.items():
            defaults = {}
            for param in command.params:
                key = param.opts[0].lstrip("-").replace("-", "_")
                if key in values:
                    raw = values[key]
                    defaults[param.name] = tuple(raw.split(",")) if param.multiple else raw
            ctx.default_map[name] = defaults


def _load_corpus(bundles_dir: str) -> tuple[list[CaptureBundle], int]:
    """Load every bundle under the directory; returns (bundles, failures)."""
    paths = list(iter_bundle_paths(bundles_dir))
    if not paths:
        raise click.UsageError(f"no capture bundles under {bundles_dir!r}")
    bundles, failures = [], 0
    for path in paths:
        try:
            bundles.append(load_bundle(path))
        except AdAuditError as exc:
            failures += 1
            click.echo(f"skipping {path.name}: {exc}", err=True)
    bundles.sort(key=lambda b: b.site)
    return bundles, failures


def _load_categories(path: str | None) -> CategoryMap:
    return load_category_map(path) if path else CategoryMap()


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


bundles_option = click.option("--bundles", "bundles_dir", required=True,
                              type=click.Path(exists=True, file_okay=False),
                              help="directory of capture bundles")
labels_option = click.option("--labels", "labels_path", required=True,
                             type=click.Path(exists=True, dir_okay=False),
                             help="site,label,sources CSV")
out_option = click.option("--out", "out", required=True, help="output directory")


@main.command()
@bundles_option
@out_option
def ingest(bundles_dir, out):
    """Validate bundles and summarize the crawl."""
    out_path = _out_dir(out)
    bundles, failures = _load_corpus(bundles_dir)
    ok = sum(1 for b in bundles if b.ok)
    errored = len(bundles) - ok
    total = len(bundles) + failures
    rows = [
        ("websites in corpus", total, "100.00%"),
        ("websites successfully crawled", ok, f"{100.0 * ok / total:.2f}%"),
        ("websites that errored", errored, f"{100.0 * errored / total:.2f}%"),
        ("bundles failing validation", failures, f"{100.0 * failures / total:.2f}%"),
    ]
    _write_csv(out_path / "crawl_summary.csv", ["description", "volume", "percent"], rows)
    for description, volume, percent in rows:
        click.echo(f"{description}: {volume} ({percent})")
    sys.exit(PARTIAL_FAILURE if failures else 0)


@main.command("detect")
@bundles_option
@labels_option
@out_option
@click.option("--filter-list", "filter_lists", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="ABP-syntax filter list (repeatable)")
@click.option("--category-map", "category_map_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="domain,category CSV for advertiser categories")
@click.option("--annotations", "annotations_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="site,url ground truth; adds a precision/recall block")
def cmd_detect(bundles_dir, labels_path, out, filter_lists, category_map_path,
               annotations_path):
    """Detect ads, attribute advertisers, and histogram their categories."""
    out_path = _out_dir(out)
    bundles, failures = _load_corpus(bundles_dir)
    labels = load_labels(labels_path)
    ruleset = load_filter_lists(list(filter_lists))
    write_diagnostics(ruleset, out_path / "filter_diagnostics.jsonl")
    category_map = _load_categories(category_map_path)

    ad_rows, attribution_rows, attributions = [], [], []
    for bundle in bundles:
        ads = sorted(detect.detect_ads(bundle, ruleset), key=lambda a: a.url)
        for ad in ads:
            ad_rows.append({
                "site": bundle.site, "url": ad.url, "origin": ad.origin,
                "matched_rule": ad.matched_rule,
                "placing_request_url": ad.placing_request_url,
            })
            try:
                attribution = detect.attribute_advertiser(ad, bundle, category_map)
            except AdAuditError as exc:
                failures += 1
                click.echo(f"attribution failed for {ad.url}: {exc}", err=True)
                continue
            attributions.append(attribution)
            attribution_rows.append({
                "site": bundle.site, "ad_url": ad.url,
                "redirect_chain": list(attribution.redirect_chain),
                "advertiser_domain": attribution.advertiser_domain,
                "category": attribution.category,
            })
    _write_jsonl(out_path / "ad_urls.jsonl", ad_rows)
    _write_jsonl(out_path / "attributions.jsonl", attribution_rows)

    histogram = detect.advertiser_category_distribution(attributions, category_map, labels)
    _write_csv(out_path / "advertiser_histogram.csv", ["label", "category", "percent"],
               [(label, category, f"{pct:.2f}")
                for label in ("fake", "real")
                for category, pct in sorted(histogram[label].items())])

    label_of = {l.site: l.label for l in labels}
    for label in ("real", "fake"):
        advertisers = {a.advertiser_domain for a in attributions
                       if label_of.get(a.site) == label}
        click.echo(f"Distinct advertisers ({label}): ~{len(advertisers)}")

    if annotations_path:
        annotations = detect.load_annotations(annotations_path)
        report = detect.evaluate_detection(bundles, annotations, ruleset)
        click.echo(detect.render_precision_recall(report))

    sys.exit(PARTIAL_FAILURE if failures else 0)


def _popularity_csv(path: Path, tables: dict) -> None:
    """Two-sided table mirroring the reseller/direct report layout."""
    real, fake = tables.get("real", []), tables.get("fake", [])
    rows = []
    for i in range(max(len(real), len(fake))):
        r = real[i] if i < len(real) else ("", None)
        f = fake[i] if i < len(fake) else ("", None)
        rows.append((r[0], f"{r[1]:.2f}%" if r[1] is not None else "",
                     f[0], f"{f[1]:.2f}%" if f[1] is not None else ""))
    _write_csv(path, ["real_news_service", "real_news_portion",
                      "fake_news_service", "fake_news_portion"], rows)


@main.command("supply")
@bundles_option
@labels_option
@out_option
@click.option("--sellers-dir", "sellers_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="directory of <ad_system_domain>.json sellers files")
@click.option("--fetch-sellers", is_flag=True, default=False,
              help="fetch sellers.json live for every declared ad system")
@click.option("--rate-limit", default=1.0, show_default=True,
              help="requests/second per host for live fetching")
@click.option("--retries", default=0, show_default=True,
              help="extra attempts for seller endpoints only")
def cmd_supply(bundles_dir, labels_path, out, sellers_dir, fetch_sellers, rate_limit,
               retries):
    """Analyze ads.txt declarations and cross-verify against sellers.json."""
    out_path = _out_dir(out)
    bundles, failures = _load_corpus(bundles_dir)
    labels = load_labels(labels_path)

    files = [supplychain.parse_ads_txt(b.ads_txt, b.site)
             for b in bundles if b.ads_txt is not None]

    for relationship, name in (("DIRECT", "direct_popularity.csv"),
                               ("RESELLER", "reseller_popularity.csv")):
        tables = supplychain.relationship_popularity(files, labels, relationship)
        _popularity_csv(out_path / name, tables)

    means = supplychain.mean_direct_partners(files, labels)
    (out_path / "mean_partners.txt").write_text(
        f"fake: {means['fake']:.2f}\nreal: {means['real']:.2f}\n", "utf-8")

    sellers: dict[str, supplychain.SellersJsonFile] = {}
    if sellers_dir:
        for path in sorted(Path(sellers_dir).glob("*.json")):
            domain = path.name[:-len(".json")]
            try:
                sellers[domain] = supplychain.parse_sellers_json(
                    path.read_text("utf-8", errors="replace"), domain)
            except AdAuditError as exc:
                failures += 1
                click.echo(f"bad sellers file {path.name}: {exc}", err=True)
    elif fetch_sellers:
        systems = sorted({r.ad_system_domain for f in files for r in f.records
                          if r.relationship == "DIRECT"})
        fetcher = Fetcher(rate_limiter=RateLimiter(rate_limit))
        targets = [f"https://{domain}/sellers.json" for domain in systems]
        run = fetch_batch(targets, fetcher)
        for attempt in range(retries):
            missing = [o.target for o in run.outcomes if o.result is None]
            if not missing:
                break
            retry_run = fetch_batch(missing, fetcher)
            kept = {o.target: o for o in run.outcomes}
            kept.update({o.target: o for o in retry_run.outcomes})
            run.outcomes = sorted(kept.values(), key=lambda o: o.target)
        run.write_log(out_path / "fetch_log.jsonl")
        for outcome in run.outcomes:
            domain = outcome.target.removeprefix("https://").removesuffix("/sellers.json")
            if outcome.result is not None and outcome.result.status_code == 200:
                try:
                    sellers[domain] = supplychain.parse_sellers_json(
                        outcome.result.text(), domain)
                except AdAuditError:
                    pass  # unusable file: domain stays missing

    verification_rows = []
    for f in files:
        for result in supplychain.verify_direct_relationships(f, sellers):
            verification_rows.append({
                "site": f.site,
                "ad_system_domain": result.record.ad_system_domain,
                "publisher_account_id": result.record.publisher_account_id,
                "line_no": result.record.line_no,
                "verdict": result.verdict,
            })
    _write_jsonl(out_path / "verification.jsonl", verification_rows)

    valid = sum(1 for f in files if f.valid)
    click.echo(f"sites with ads.txt: {len(files)} (valid: {valid})")
    click.echo(f"mean DIRECT partners: fake {means['fake']:.2f} / real {means['real']:.2f}")
    sys.exit(PARTIAL_FAILURE if failures else 0)


def _extract_index(bundles, dictionary_path, stoplist_path, external_index_path):
    dictionary = pubids.load_dictionary(dictionary_path)
    stoplist = pubids.load_stoplist(stoplist_path)
    ids: set[pubids.PublisherId] = set()
    for bundle in bundles:
        ids |= pubids.clean_ids(pubids.extract_ids(bundle), dictionary, stoplist)
    total_ok = sum(1 for b in bundles if b.ok)
    index, summary = pubids.build_index(ids, total_sites=total_ok)
    if external_index_path:
        index = metagraph.merge_external_index(
            index, metagraph.load_external_index(external_index_path))
    return ids, index, summary


def _ids_csv(path: Path, ids) -> None:
    rows = sorted((i.site, i.kind, i.value, "|".join(sorted(i.sources))) for i in ids)
    _write_csv(path, ["site", "kind", "value", "sources"], rows)


def ids_options(fn):
    fn = click.option("--external-index", "external_index_path", default=None,
                      type=click.Path(exists=True, dir_okay=False),
                      help="id_kind,value,domain CSV merged into the id index")(fn)
    fn = click.option("--stoplist", "stoplist_path", default=None,
                      type=click.Path(exists=True, dir_okay=False),
                      help="override the bundled placeholder-token list")(fn)
    fn = click.option("--dictionary", "dictionary_path", default=None,
                      type=click.Path(exists=True, dir_okay=False),
                      help="override the bundled English word list")(fn)
    return fn


@main.command("ids")
@bundles_option
@out_option
@ids_options
def cmd_ids(bundles_dir, out, dictionary_path, stoplist_path, external_index_path):
    """Extract and clean publisher-specific identifiers."""
    out_path = _out_dir(out)
    bundles, failures = _load_corpus(bundles_dir)
    ids, _, summary = _extract_index(bundles, dictionary_path, stoplist_path,
                                     external_index_path)
    _ids_csv(out_path / "ids.csv", ids)
    _write_csv(out_path / "ids_summary.csv",
               ["description", "unique_identifiers", "unique_domains", "pct_of_sites"],
               [(s.description, s.unique_identifiers, s.unique_domains,
                 f"{s.pct_of_sites:.2f}") for s in summary])
    for s in summary:
        click.echo(f"{s.description}: {s.unique_identifiers} ids on {s.unique_domains} domains")
    sys.exit(PARTIAL_FAILURE if failures else 0)


def graph_options(fn):
    fn = click.option("--max-sites", default=metagraph.DEFAULT_MAX_SITES, show_default=True,
                      help="ignore ids on more sites (intermediary partners)")(fn)
    fn = click.option("--min-sites", default=metagraph.DEFAULT_MIN_SITES, show_default=True,
                      help="ignore ids on fewer sites")(fn)
    return fn


@main.command("graph")
@bundles_option
@out_option
@ids_options
@graph_options
def cmd_graph(bundles_dir, out, dictionary_path, stoplist_path, external_index_path,
              min_sites, max_sites):
    """Build and export the co-ownership metagraph."""
    out_path = _out_dir(out)
    bundles, failures = _load_corpus(bundles_dir)
    _, index, _ = _extract_index(bundles, dictionary_path, stoplist_path,
                                 external_index_path)
    graph = metagraph.build_metagraph(index, min_sites=min_sites, max_sites=max_sites)
    metagraph.write_edges_csv(graph, out_path / "metagraph_edges.csv")
    metagraph.write_provenance_jsonl(graph, out_path / "provenance.jsonl")
    click.echo(f"metagraph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    sys.exit(PARTIAL_FAILURE if failures else 0)


def cluster_options(fn):
    fn = click.option("--category-map", "category_map_path", default=None,
                      type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--resolution", default=1.0, show_default=True)(fn)
    fn = click.option("--seed", default=0, show_default=True,
                      help="seed for the community-detection node order")(fn)
    fn = click.option("--level", default=0, show_default=True,
                      help="dendrogram level used for cluster analytics")(fn)
    fn = graph_options(fn)
    fn = ids_options(fn)
    return fn


def _cluster_pipeline(bundles_dir, labels_path, out, dictionary_path, stoplist_path,
                      external_index_path, min_sites, max_sites, level, seed,
                      resolution, category_map_path, analytics_only=False):
    out_path = _out_dir(out)
    bundles, failures = _load_corpus(bundles_dir)
    labels = load_labels(labels_path)
    category_map = _load_categories(category_map_path)

    ids, index, summary = _extract_index(bundles, dictionary_path, stoplist_path,
                                         external_index_path)
    graph = metagraph.build_metagraph(index, min_sites=min_sites, max_sites=max_sites)
    if not graph.nodes:
        raise click.UsageError("metagraph is empty: no shared identifiers in range")
    dendrogram = community.louvain(graph, resolution=resolution, seed=seed)
    partition, level_summary = community.select_level(dendrogram, labels, level=level)
    clusters = community.label_clusters(partition, labels)

    if not analytics_only:
        _ids_csv(out_path / "ids.csv", ids)
        metagraph.write_edges_csv(graph, out_path / "metagraph_edges.csv")
        _write_csv(out_path / "partitions.csv", ["site", "community", "level"],
                   [(site, p.assignment[site], p.level)
                    for p in dendrogram.levels for site in sorted(p.assignment)])
        _write_jsonl(out_path / "clusters.jsonl", [{
            "cluster_id": c.id, "level": partition.level, "label": c.label,
            "fake_count": c.fake_count, "real_count": c.real_count,
            "size": c.size, "sites": sorted(c.sites),
        } for c in clusters])
        _write_csv(out_path / "appendixC_summary.csv",
                   ["level", "communities", "fake_news_clusters",
                    "websites_in_clusters", "average_cluster_size"],
                   [(s.level, s.communities, s.fake_news_clusters,
                     s.websites_in_clusters, f"{s.average_cluster_size:.2f}")
                    for s in (community.summarize_level(p, labels)
                              for p in dendrogram.levels)])
        stable = community.stable_clusters(dendrogram, labels)
        _write_jsonl(out_path / "stable_clusters.jsonl",
                     [{"sites": sorted(s)} for s in stable])

    labeled = [c for c in clusters if c.label != "unlabeled"]
    reports = {
        "fake": [clusterstats.diversity(c, category_map) for c in labeled if c.contains_fake],
        "real": [clusterstats.diversity(c, category_map) for c in labeled if c.contains_real],
    }
    cdf_rows = []
    for cluster_type in ("fake", "real"):
        if reports[cluster_type]:
            curves = clusterstats.diversity_cdf({cluster_type: reports[cluster_type]})
            cdf_rows.extend((cluster_type, f"{x:.6f}", f"{y:.6f}")
                            for x, y in curves[cluster_type])
    _write_csv(out_path / "diversity_cdf.csv",
               ["cluster_type", "h_norm", "cumulative_fraction"], cdf_rows)

    histogram = clusterstats.category_distribution(clusters, category_map)
    _write_csv(out_path / "categories_histogram.csv",
               ["cluster_type", "category", "percent"],
               [(t, category, f"{pct:.2f}")
                for t in ("fake", "real")
                for category, pct in sorted(histogram[t].items())])

    portions = clusterstats.size_vs_portion(clusters)
    _write_csv(out_path / "size_vs_portion.csv",
               ["cluster_id", "size", "labeled_portion", "cluster_type"],
               [(r.cluster_id, r.size, f"{r.labeled_portion:.4f}", r.cluster_type)
                for r in sorted(portions, key=lambda r: (r.cluster_type, r.cluster_id))])

    click.echo(f"level {level_summary.level}: {level_summary.communities} communities, "
               f"{level_summary.fake_news_clusters} fake news clusters, "
               f"{level_summary.websites_in_clusters} websites, "
               f"avg size {level_summary.average_cluster_size:.2f}")
    return failures


@main.command("cluster")
@bundles_option
@labels_option
@out_option
@cluster_options
def cmd_cluster(bundles_dir, labels_path, out, dictionary_path, stoplist_path,
                external_index_path, min_sites, max_sites, level, seed, resolution,
                category_map_path):
    """Run the full ids -> metagraph -> communities -> analytics pipeline."""
    try:
        failures = _cluster_pipeline(bundles_dir, labels_path, out, dictionary_path,
                                     stoplist_path, external_index_path, min_sites,
                                     max_sites, level, seed, resolution,
                                     category_map_path)
    except AdAuditError as exc:
        click.echo(str(exc), err=True)
        sys.exit(PARTIAL_FAILURE)
    sys.exit(PARTIAL_FAILURE if failures else 0)


@main.command("analyze")
@bundles_option
@labels_option
@out_option
@cluster_options
def cmd_analyze(bundles_dir, labels_path, out, dictionary_path, stoplist_path,
                external_index_path, min_sites, max_sites, level, seed, resolution,
                category_map_path):
    """Write only the cluster analytics (diversity, histograms, portions)."""
    try:
        failures = _cluster_pipeline(bundles_dir, labels_path, out, dictionary_path,
                                     stoplist_path, external_index_path, min_sites,
                                     max_sites, level, seed, resolution,
                                     category_map_path, analytics_only=True)
    except AdAuditError as exc:
        click.echo(str(exc), err=True)
        sys.exit(PARTIAL_FAILURE)
    sys.exit(PARTIAL_FAILURE if failures else 0)


@main.command("report")
@bundles_option
@labels_option
@out_option
@click.option("--filter-list", "filter_lists", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--category-map", "category_map_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--sellers-dir", "sellers_dir", default=None,
              type=click.Path(exists=True, file_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--level", default=0, show_default=True)
@click.pass_context
def cmd_report(ctx, bundles_dir, labels_path, out, filter_lists, category_map_path,
               sellers_dir, seed, level):
    """Run detect + supply + cluster and write a markdown summary."""
    out_path = _out_dir(out)
    worst = 0
    for cmd, kwargs in (
        (cmd_detect, dict(bundles_dir=bundles_dir, labels_path=labels_path, out=out,
                          filter_lists=filter_lists, category_map_path=category_map_path,
                          annotations_path=None)),
        (cmd_supply, dict(bundles_dir=bundles_dir, labels_path=labels_path, out=out,
                          sellers_dir=sellers_dir, fetch_sellers=False, rate_limit=1.0,
                          retries=0)),
        (cmd_cluster, dict(bundles_dir=bundles_dir, labels_path=labels_path, out=out,
                           dictionary_path=None, stoplist_path=None,
                           external_index_path=None,
                           min_sites=metagraph.DEFAULT_MIN_SITES,
                           max_sites=metagraph.DEFAULT_MAX_SITES, level=level,
                           seed=seed, resolution=1.0,
                           category_map_path=category_map_path)),
    ):
        try:
            ctx.invoke(cmd, **kwargs)
        except SystemExit as exc:
            if exc.code == 2:
                raise
            worst = max(worst, exc.code or 0)

    produced = sorted(p.name for p in out_path.iterdir() if p.suffix in (".csv", ".jsonl", ".txt"))
    lines = ["# adaudit report", "", "Generated output files:", ""]
    lines += [f"- `{name}`" for name in produced]
    (out_path / "summary.md").write_text("\n".join(lines) + "\n", "utf-8")
    click.echo(f"report written to {out_path / 'summary.md'}")
    sys.exit(worst)


if __name__ == "__main__":
    main()
