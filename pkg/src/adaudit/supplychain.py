"""ads.txt and sellers.json parsing, popularity tables, and cross-verification.

ads.txt lines declare which ad systems may sell a site's inventory; each ad
system's sellers.json declares the accounts it represents.  A publisher's
DIRECT declaration is verified when the ad system's sellers.json lists the
same account id.  Relationship-type mismatches are deliberately not judged;
only the existence of a business relationship is checked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .bundles import SiteLabel
from .errors import NotJson

RELATIONSHIPS = ("DIRECT", "RESELLER")
VARIABLE_KEYS = ("contact", "subdomain", "inventorypartnerdomain")
SELLER_TYPES = ("PUBLISHER", "INTERMEDIARY", "BOTH")


@dataclass(frozen=True)
class AdsTxtRecord:
    ad_system_domain: str
    publisher_account_id: str
    relationship: str  # DIRECT | RESELLER
    cert_authority_id: Optional[str] = None
    line_no: int = 0


@dataclass
class AdsTxtFile:
    site: str
    records: list[AdsTxtRecord] = field(default_factory=list)
    variables: dict[str, list[str]] = field(default_factory=dict)
    invalid_lines: list[tuple[int, str]] = field(default_factory=list)
    comment_or_blank: int = 0
    line_count: int = 0

    @property
    def valid(self) -> bool:
        """A file counts as valid when it yields at least one record."""
        return bool(self.records)

    @property
    def variable_line_count(self) -> int:
        return sum(len(values) for values in self.variables.values())

    @property
    def accounting_ok(self) -> bool:
        """Every input line lands in exactly one bucket."""
        return (len(self.records) + self.variable_line_count
                + len(self.invalid_lines) + self.comment_or_blank) == self.line_count


@dataclass(frozen=True)
class SellerEntry:
    seller_id: str
    seller_type: str  # PUBLISHER | INTERMEDIARY | BOTH
    name: Optional[str] = None
    domain: Optional[str] = None
    is_confidential: bool = False


@dataclass
class SellersJsonFile:
    ad_system_domain: str
    version: str = ""
    sellers: list[SellerEntry] = field(default_factory=list)
    seller_index: dict[str, SellerEntry] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def parse_ads_txt(text: str, site: str) -> AdsTxtFile:
    """Total parser: every input line lands in exactly one accounting bucket."""
    result = AdsTxtFile(site=site)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    result.line_count = len(lines)

    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            result.comment_or_blank += 1
            continue
        head = line.split(",", 1)[0]
        if "=" in head:
            key, _, value = line.partition("=")
            key = key.strip().lower()
            if key in VARIABLE_KEYS:
                result.variables.setdefault(key, []).append(value.strip())
            else:
                result.invalid_lines.append((line_no, f"unknown variable {key!r}"))
            continue
        fields = [f.strip() for f in line.split(",")]
        if not 3 <= len(fields) <= 4:
            result.invalid_lines.append((line_no, "field count"))
            continue
        domain, account_id, relationship = fields[0].lower(), fields[1], fields[2].upper()
        if relationship not in RELATIONSHIPS:
            result.invalid_lines.append((line_no, f"relationship {fields[2]!r}"))
            continue
        if not domain or " " in domain or "." not in domain:
            result.invalid_lines.append((line_no, f"ad system domain {fields[0]!r}"))
            continue
        if not account_id:
            result.invalid_lines.append((line_no, "empty account id"))
            continue
        result.records.append(AdsTxtRecord(
            ad_system_domain=domain,
            publisher_account_id=account_id,
            relationship=relationship,
            cert_authority_id=fields[3] if len(fields) == 4 else None,
            line_no=line_no,
        ))
    return result


def parse_sellers_json(text: str, ad_system_domain: str) -> SellersJsonFile:
    """Tolerant of unknown keys; entries without a seller_id are dropped."""
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise NotJson(f"{ad_system_domain}: {exc}") from None
    if not isinstance(data, dict):
        raise NotJson(f"{ad_system_domain}: top level is not an object")

    result = SellersJsonFile(ad_system_domain=ad_system_domain,
                             version=str(data.get("version", "")))
    for i, entry in enumerate(data.get("sellers", [])):
        if not isinstance(entry, dict):
            result.warnings.append(f"seller #{i}: not an object")
            continue
        seller_id = entry.get("seller_id")
        if seller_id is None or str(seller_id).strip() == "":
            result.warnings.append(f"seller #{i}: missing seller_id")
            continue
        seller_id = str(seller_id).strip()
        seller_type = str(entry.get("seller_type", "")).upper()
        if seller_type not in SELLER_TYPES:
            result.warnings.append(f"seller {seller_id!r}: unknown type {entry.get('seller_type')!r}")
            seller_type = "PUBLISHER"
        seller = SellerEntry(
            seller_id=seller_id,
            seller_type=seller_type,
            name=entry.get("name"),
            domain=str(entry["domain"]).lower() if entry.get("domain") else None,
            is_confidential=bool(entry.get("is_confidential", 0)),
        )
        result.sellers.append(seller)
        if seller_id in result.seller_index:
            result.warnings.append(f"duplicate seller_id {seller_id!r}; first entry wins")
        else:
            result.seller_index[seller_id] = seller
    return result


def _valid_sites_by_label(files: Iterable[AdsTxtFile],
                          labels: Iterable[SiteLabel]) -> dict[str, set[str]]:
    label_of = {l.site: l.label for l in labels}
    sites: dict[str, set[str]] = {"fake": set(), "real": set()}
    for f in files:
        if f.valid and label_of.get(f.site) in sites:
            sites[label_of[f.site]].add(f.site)
    return sites


def relationship_popularity(files: list[AdsTxtFile], labels: list[SiteLabel],
                            relationship: str) -> dict[str, list[tuple[str, float]]]:
    """Per label: (ad system, % of valid-ads.txt sites declaring it), sorted.

    A site contributes at most once per ad system no matter how many matching
    lines it declares; the denominator is the label's valid-ads.txt site count.
    """
    denominators = _valid_sites_by_label(files, labels)
    label_of = {l.site: l.label for l in labels}
    declaring: dict[str, dict[str, set[str]]] = {"fake": {}, "real": {}}
    for f in files:
        label = label_of.get(f.site)
        if not f.valid or label not in declaring:
            continue
        for record in f.records:
            if record.relationship == relationship:
                declaring[label].setdefault(record.ad_system_domain, set()).add(f.site)

    tables: dict[str, list[tuple[str, float]]] = {}
    for label, per_system in declaring.items():
        denominator = len(denominators[label])
        rows = [(system, 100.0 * len(sites) / denominator)
                for system, sites in per_system.items()] if denominator else []
        rows.sort(key=lambda r: (-r[1], r[0]))
        tables[label] = rows
    return tables


def mean_direct_partners(files: list[AdsTxtFile], labels: list[SiteLabel]) -> dict[str, float]:
    """Per label, mean count of distinct ad systems declared DIRECT."""
    label_of = {l.site: l.label for l in labels}
    counts: dict[str, list[int]] = {"fake": [], "real": []}
    for f in files:
        label = label_of.get(f.site)
        if not f.valid or label not in counts:
            continue
        systems = {r.ad_system_domain for r in f.records if r.relationship == "DIRECT"}
        counts[label].append(len(systems))
    return {label: (sum(values) / len(values) if values else 0.0)
            for label, values in counts.items()}


@dataclass(frozen=True)
class VerificationResult:
    record: AdsTxtRecord
    verdict: str  # verified | unverified | seller_file_missing


def verify_direct_relationships(ads_txt: AdsTxtFile,
                                sellers: dict[str, SellersJsonFile]) -> list[VerificationResult]:
    """Check each DIRECT declaration against the ad system's sellers.json."""
    results = []
    for record in ads_txt.records:
        if record.relationship != "DIRECT":
            continue
        sellers_file = sellers.get(record.ad_system_domain)
        if sellers_file is None:
            verdict = "seller_file_missing"
        elif record.publisher_account_id in sellers_file.seller_index:
            verdict = "verified"
        else:
            verdict = "unverified"
        results.append(VerificationResult(record=record, verdict=verdict))
    return results
