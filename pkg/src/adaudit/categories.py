"""Pluggable domain -> category map (replaces a commercial classifier).

The map is a two-column CSV (domain,category).  A domain listed under several
categories resolves to whichever of its categories is most frequent across
the whole map, ties broken alphabetically, so that every domain gets exactly
one deterministic category.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .domains import registrable_domain
from .errors import UnparsableHost

UNCLASSIFIED = "unclassified"

CATEGORY_VOCABULARY = (
    "News", "Entertainment", "Business", "Politics", "Personal", "Education",
    "Health", "Leisure", "Travel", "Sports", "Technology", "Shopping", "Spam",
    UNCLASSIFIED,
)


@dataclass
class CategoryMap:
    assigned: dict[str, str] = field(default_factory=dict)
    candidates: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def category(self, domain: str) -> str:
        domain = domain.strip().lower()
        if domain in self.assigned:
            return self.assigned[domain]
        try:
            return self.assigned.get(registrable_domain(domain), UNCLASSIFIED)
        except UnparsableHost:
            return UNCLASSIFIED

    def __len__(self) -> int:
        return len(self.assigned)


def build_category_map(pairs: list[tuple[str, str]]) -> CategoryMap:
    """Resolve multi-category domains to their globally most frequent category."""
    per_domain: dict[str, list[str]] = {}
    for domain, category in pairs:
        domain = domain.strip().lower()
        category = category.strip()
        if domain and category and category not in per_domain.get(domain, []):
            per_domain.setdefault(domain, []).append(category)

    frequency = Counter(category for cats in per_domain.values() for category in cats)
    result = CategoryMap()
    for domain, cats in per_domain.items():
        best = min(cats, key=lambda c: (-frequency[c], c))
        result.assigned[domain] = best
        result.candidates[domain] = tuple(sorted(cats))
    return result


def load_category_map(path: str | Path) -> CategoryMap:
    import csv

    with Path(path).open(encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        pairs = [(row["domain"], row["category"]) for row in reader
                 if row.get("domain") and row.get("category")]
    return build_category_map(pairs)
