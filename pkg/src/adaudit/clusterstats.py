"""Per-cluster category analytics: Shannon diversity, histograms, portions.

The diversity score of a cluster is H = -sum(p_i * ln p_i) over the category
proportions of its member sites, normalized by ln(S) where S is the number of
distinct categories present (richness).  A single-category cluster scores 0;
equally common categories score 1.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .categories import CategoryMap
from .community import Cluster
from .errors import EmptyInput


@dataclass(frozen=True)
class DiversityReport:
    cluster_id: int
    richness: int                     # S: distinct categories present
    proportions: dict
    shannon_index: float              # H, in nats
    normalized: float                 # H / ln(S), defined as 0 when S == 1


def diversity(cluster: Cluster, category_map: CategoryMap) -> DiversityReport:
    counts = Counter(category_map.category(site) for site in cluster.sites)
    total = sum(counts.values())
    proportions = {category: n / total for category, n in sorted(counts.items())}
    h = -sum(p * math.log(p) for p in proportions.values() if p > 0.0)
    richness = len(counts)
    normalized = h / math.log(richness) if richness >= 2 else 0.0
    return DiversityReport(
        cluster_id=cluster.id,
        richness=richness,
        proportions=proportions,
        shannon_index=h,
        normalized=min(max(normalized, 0.0), 1.0),
    )


def category_distribution(clusters: list[Cluster], category_map: CategoryMap) -> dict:
    """% of websites per category across fake- and real-containing clusters.

    A cluster containing both label kinds contributes to both histograms.
    """
    histograms: dict[str, dict[str, float]] = {}
    for cluster_type, wanted in (("fake", lambda c: c.contains_fake),
                                 ("real", lambda c: c.contains_real)):
        counts: Counter = Counter()
        for cluster in clusters:
            if wanted(cluster):
                counts.update(category_map.category(site) for site in cluster.sites)
        total = sum(counts.values())
        histograms[cluster_type] = {
            category: 100.0 * n / total for category, n in sorted(counts.items())
        } if total else {}
    return histograms


def diversity_cdf(reports_by_type: dict[str, list[DiversityReport]]) -> dict:
    """Step CDF over normalized diversity per cluster type, plot-ready."""
    curves: dict[str, list[tuple[float, float]]] = {}
    for cluster_type, reports in reports_by_type.items():
        if not reports:
            raise EmptyInput(cluster_type)
        values = sorted(r.normalized for r in reports)
        n = len(values)
        points: list[tuple[float, float]] = []
        for i, value in enumerate(values, start=1):
            fraction = i / n
            if points and points[-1][0] == value:
                points[-1] = (value, fraction)  # collapse equal values into one step
            else:
                points.append((value, fraction))
        curves[cluster_type] = points
    return curves


@dataclass(frozen=True)
class PortionRow:
    cluster_id: int
    size: int
    labeled_portion: float
    cluster_type: str  # fake | real


def size_vs_portion(clusters: list[Cluster]) -> list[PortionRow]:
    """One row per labeled cluster and defining label: size vs labeled share."""
    rows = []
    for cluster in clusters:
        if cluster.contains_fake:
            rows.append(PortionRow(cluster.id, cluster.size,
                                   cluster.fake_count / cluster.size, "fake"))
        if cluster.contains_real:
            rows.append(PortionRow(cluster.id, cluster.size,
                                   cluster.real_count / cluster.size, "real"))
    return rows


def bucket_portions(rows: list[PortionRow], edges=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0)) -> dict:
    """Histogram of labeled portions into (lo, hi] buckets, per cluster type."""
    buckets: dict[str, dict[tuple[float, float], int]] = {}
    intervals = list(zip(edges, edges[1:]))
    for row in rows:
        per_type = buckets.setdefault(row.cluster_type, {i: 0 for i in intervals})
        for lo, hi in intervals:
            if lo < row.labeled_portion <= hi:
                per_type[(lo, hi)] += 1
                break
    return buckets
