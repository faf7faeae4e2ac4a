"""Louvain community detection over the co-ownership graph.

Standard two-phase scheme: repeated single-node moves that maximize the
modularity gain, then aggregation of communities into super-nodes whose
self-loops carry the intra-community weight.  Each outer iteration emits one
dendrogram level (level 0 holds the smallest communities).  Output is fully
deterministic for a given seed: node visitation order is a seeded shuffle and
equal-gain ties go to the lowest community id.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .bundles import SiteLabel
from .errors import EmptyGraph, LevelOutOfRange
from .metagraph import Metagraph

_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class Partition:
    level: int
    assignment: dict  # site -> dense community id (0..k-1)
    modularity: float

    def communities(self) -> dict[int, set[str]]:
        groups: dict[int, set[str]] = {}
        for site, community in self.assignment.items():
            groups.setdefault(community, set()).add(site)
        return groups


@dataclass(frozen=True)
class Dendrogram:
    levels: tuple[Partition, ...]

    def __len__(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class Cluster:
    id: int
    sites: frozenset
    label: str  # fake_news_cluster | real_news_cluster | both | unlabeled
    fake_count: int
    real_count: int

    @property
    def size(self) -> int:
        return len(self.sites)

    @property
    def contains_fake(self) -> bool:
        return self.fake_count >= 1

    @property
    def contains_real(self) -> bool:
        return self.real_count >= 1


def modularity(graph: Metagraph, assignment: dict, resolution: float = 1.0) -> float:
    """Q over the weighted adjacency; invariant under community relabeling."""
    adjacency = graph.neighbors()
    two_m = 2.0 * graph.total_weight
    if two_m == 0:
        raise EmptyGraph("graph has no edge weight")
    degree = {u: float(sum(nbrs.values())) for u, nbrs in adjacency.items()}
    internal: dict = {}
    total: dict = {}
    for u, nbrs in adjacency.items():
        c = assignment[u]
        total[c] = total.get(c, 0.0) + degree[u]
        for v, w in nbrs.items():
            if assignment[v] == c:
                internal[c] = internal.get(c, 0.0) + w  # ordered pairs: each edge twice
    return sum(internal.get(c, 0.0) / two_m - resolution * (total[c] / two_m) ** 2
               for c in total)


class _WorkGraph:
    """Aggregated graph state: adjacency between nodes plus self-loop weight."""

    def __init__(self, adjacency: dict[str, dict[str, float]] | dict):
        self.adj = {u: dict(nbrs) for u, nbrs in adjacency.items()}
        self.loops = {u: 0.0 for u in self.adj}

    @property
    def total_weight(self) -> float:
        return sum(w for nbrs in self.adj.values() for w in nbrs.values()) / 2.0 \
            + sum(self.loops.values())

    def degree(self, u) -> float:
        return sum(self.adj[u].values()) + 2.0 * self.loops[u]


def _one_level(work: _WorkGraph, order: list, resolution: float) -> tuple[dict, bool]:
    """Phase 1: greedy local moves. Returns (node -> community id, moved_any)."""
    nodes = list(work.adj)
    community = {u: i for i, u in enumerate(sorted(nodes))}
    degree = {u: work.degree(u) for u in nodes}
    sigma_tot = {community[u]: degree[u] for u in nodes}
    two_m = 2.0 * work.total_weight
    moved_any = False

    improved = True
    while improved:
        improved = False
        for u in order:
            current = community[u]
            k_u = degree[u]
            # Weight from u to each neighboring community.
            links: dict[int, float] = {}
            for v, w in work.adj[u].items():
                links[community[v]] = links.get(community[v], 0.0) + w
            sigma_tot[current] -= k_u

            def gain(c: int) -> float:
                return links.get(c, 0.0) - resolution * sigma_tot[c] * k_u / two_m

            best_comm, best_gain = current, gain(current)
            for c in sorted(links):
                g = gain(c)
                if g > best_gain + _MIN_GAIN or (g == best_gain and c < best_comm):
                    best_comm, best_gain = c, g
            sigma_tot[best_comm] += k_u
            if best_comm != current:
                community[u] = best_comm
                improved = moved_any = True
    return community, moved_any


def _aggregate(work: _WorkGraph, community: dict) -> tuple[_WorkGraph, dict]:
    """Phase 2: communities become super-nodes; intra weight becomes loops."""
    ids = sorted(set(community.values()))
    renumber = {c: i for i, c in enumerate(ids)}
    new = _WorkGraph({i: {} for i in range(len(ids))})
    for u, nbrs in work.adj.items():
        cu = renumber[community[u]]
        new.loops[cu] += work.loops[u]
        for v, w in nbrs.items():
            cv = renumber[community[v]]
            if cu == cv:
                new.loops[cu] += w / 2.0  # each intra edge visited from both ends
            else:
                new.adj[cu][cv] = new.adj[cu].get(cv, 0.0) + w
    return new, {u: renumber[c] for u, c in community.items()}


def _dense_assignment(assignment: dict) -> dict:
    """Renumber communities 0..k-1 ordered by their smallest member site."""
    groups: dict = {}
    for site, c in assignment.items():
        groups.setdefault(c, []).append(site)
    ordered = sorted(groups.values(), key=min)
    renumber = {}
    for i, members in enumerate(ordered):
        for site in members:
            renumber[site] = i
    return renumber


def louvain(graph: Metagraph, resolution: float = 1.0, seed: int = 0) -> Dendrogram:
    """Hierarchical Louvain; every outer iteration adds one dendrogram level."""
    if not graph.nodes:
        raise EmptyGraph("no nodes")
    if graph.total_weight <= 0:
        raise EmptyGraph("no positive edge weight")

    rng = random.Random(seed)
    work = _WorkGraph(graph.neighbors())
    site_to_node: dict[str, object] = {site: site for site in graph.nodes}

    levels: list[Partition] = []
    while True:
        order = sorted(work.adj)
        rng.shuffle(order)
        community, moved = _one_level(work, order, resolution)
        if levels and not moved:
            break
        assignment = _dense_assignment(
            {site: community[node] for site, node in site_to_node.items()})
        levels.append(Partition(
            level=len(levels),
            assignment=assignment,
            modularity=modularity(graph, assignment, resolution),
        ))
        if not moved:
            break
        work, mapping = _aggregate(work, community)
        site_to_node = {site: mapping[node] for site, node in site_to_node.items()}
        if len(work.adj) <= 1:
            break
    return Dendrogram(levels=tuple(levels))


def label_clusters(partition: Partition, labels: Iterable[SiteLabel]) -> list[Cluster]:
    """Characterize each community by the labeled sites it contains."""
    label_of = {l.site: l.label for l in labels}
    clusters = []
    for community_id, sites in sorted(partition.communities().items()):
        fake = sum(1 for s in sites if label_of.get(s) == "fake")
        real = sum(1 for s in sites if label_of.get(s) == "real")
        if fake and real:
            label = "both"
        elif fake:
            label = "fake_news_cluster"
        elif real:
            label = "real_news_cluster"
        else:
            label = "unlabeled"
        clusters.append(Cluster(id=community_id, sites=frozenset(sites),
                                label=label, fake_count=fake, real_count=real))
    return clusters


@dataclass(frozen=True)
class LevelSummary:
    level: int
    communities: int
    fake_news_clusters: int
    websites_in_clusters: int
    average_cluster_size: float


def summarize_level(partition: Partition, labels: Iterable[SiteLabel]) -> LevelSummary:
    """Counts over fake-news-containing clusters at one dendrogram level."""
    clusters = label_clusters(partition, labels)
    fake_clusters = [c for c in clusters if c.contains_fake]
    websites = sum(c.size for c in fake_clusters)
    return LevelSummary(
        level=partition.level,
        communities=len(clusters),
        fake_news_clusters=len(fake_clusters),
        websites_in_clusters=websites,
        average_cluster_size=websites / len(fake_clusters) if fake_clusters else 0.0,
    )


def select_level(dendrogram: Dendrogram, labels: Iterable[SiteLabel],
                 level: int = 0) -> tuple[Partition, LevelSummary]:
    if not 0 <= level < len(dendrogram.levels):
        raise LevelOutOfRange(level, len(dendrogram.levels))
    partition = dendrogram.levels[level]
    return partition, summarize_level(partition, labels)


def stable_clusters(dendrogram: Dendrogram,
                    labels: Optional[Iterable[SiteLabel]] = None) -> list[frozenset]:
    """Level-0 communities that survive unchanged at every higher level.

    With labels given, only fake-news-containing clusters are reported.
    """
    base = dendrogram.levels[0].communities()
    keep: list[frozenset] = []
    higher = [set(map(frozenset, p.communities().values())) for p in dendrogram.levels[1:]]
    label_of = {l.site: l.label for l in labels} if labels is not None else None
    for sites in base.values():
        frozen = frozenset(sites)
        if all(frozen in level for level in higher):
            if label_of is None or any(label_of.get(s) == "fake" for s in frozen):
                keep.append(frozen)
    return sorted(keep, key=min)
