"""Website co-ownership graph built from shared publisher identifiers.

Two sites are linked when they carry the same identifier; the edge weight is
the number of identifiers they share.  Identifiers present on more than
max_sites websites are treated as intermediary publishing partners (managed
hosting, site networks) and contribute no edges, as do identifiers seen on a
single site.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .pubids import IdIndex

DEFAULT_MIN_SITES = 2
DEFAULT_MAX_SITES = 50


@dataclass
class Metagraph:
    nodes: set[str] = field(default_factory=set)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    provenance: dict[tuple[str, str], set[str]] = field(default_factory=dict)

    def weight(self, a: str, b: str) -> int:
        return self.edges.get(_pair(a, b), 0)

    def neighbors(self) -> dict[str, dict[str, int]]:
        adjacency: dict[str, dict[str, int]] = {n: {} for n in self.nodes}
        for (a, b), w in self.edges.items():
            adjacency[a][b] = w
            adjacency[b][a] = w
        return adjacency

    @property
    def total_weight(self) -> int:
        return sum(self.edges.values())


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


def build_metagraph(index: IdIndex, min_sites: int = DEFAULT_MIN_SITES,
                    max_sites: int = DEFAULT_MAX_SITES) -> Metagraph:
    """Link every pair of sites sharing an id seen on min_sites..max_sites sites.

    Sites with no qualifying shared identifier are excluded entirely; isolated
    nodes carry no community information.
    """
    graph = Metagraph()
    for value in sorted(index.by_id):
        sites = index.by_id[value]
        if not min_sites <= len(sites) <= max_sites:
            continue
        for a, b in combinations(sorted(sites), 2):
            pair = _pair(a, b)
            graph.edges[pair] = graph.edges.get(pair, 0) + 1
            graph.provenance.setdefault(pair, set()).add(value)
            graph.nodes.update(pair)
    return graph


def merge_external_index(graph_index: IdIndex, external: IdIndex) -> IdIndex:
    """Union two id indexes by identifier value; transposes stay consistent."""
    merged = IdIndex()
    for source in (graph_index, external):
        for value, sites in source.by_id.items():
            for site in sites:
                merged.add(source.kind_of[value], value, site)
    assert merged.transpose_consistent()
    return merged


def load_external_index(path: str | Path) -> IdIndex:
    """Read an id_kind,value,domain CSV (for example a top-sites crawl export)."""
    index = IdIndex()
    with Path(path).open(encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            index.add(row["id_kind"], row["value"], row["domain"].strip().lower())
    return index


def write_edges_csv(graph: Metagraph, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["site_a", "site_b", "weight"])
        for (a, b) in sorted(graph.edges):
            writer.writerow([a, b, graph.edges[(a, b)]])


def write_provenance_jsonl(graph: Metagraph, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for (a, b) in sorted(graph.provenance):
            row = {"site_a": a, "site_b": b, "shared_ids": sorted(graph.provenance[(a, b)])}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
