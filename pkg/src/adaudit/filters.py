"""ABP-syntax filter list parsing and URL matching.

Supports the subset of the EasyList / uBlock Origin rule language needed to
classify request URLs as advertising: blocking and "@@" exception rules, the
"||" domain anchor, "|" edge anchors, "^" separators, "*" wildcards, and the
options third-party, ~third-party, domain=, script, image, subdocument, xhr.
Cosmetic rules and rules with unsupported options are counted as skipped,
never silently mis-matched.  The parser is total: any UTF-8 input yields a
rule set plus per-line diagnostics.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .domains import registrable_domain
from .errors import UnparsableHost
from .urltools import canonical_url, url_host

# "^" matches any character that is not alphanumeric and not _-.%, or the end
# of the URL.
SEPARATOR_CLASS = r"(?:[^A-Za-z0-9_\-.%]|$)"
HOST_ANCHOR_PREFIX = r"^[a-z][a-z0-9+.\-]*://(?:[^/]*\.)?"

RESOURCE_TYPES = ("document", "subdocument", "script", "image", "xhr", "other")
_TYPE_OPTIONS = {"script": "script", "image": "image",
                 "subdocument": "subdocument", "xhr": "xhr",
                 "xmlhttprequest": "xhr"}

_MIN_TOKEN_LEN = 4
_URL_TOKEN_RE = re.compile(r"[a-z0-9]+")


class UnsupportedRule(Exception):
    pass


@dataclass
class FilterRule:
    raw: str
    kind: str                      # "block" | "exception"
    pattern: tuple[tuple, ...]     # ("lit", text) | ("wild",) | ("sep",)
    anchor_host: bool = False
    anchor_start: bool = False
    anchor_end: bool = False
    third_party: Optional[bool] = None
    domains_include: frozenset = frozenset()
    domains_exclude: frozenset = frozenset()
    resource_types: frozenset = frozenset()
    seq: int = 0
    _regex: Optional[re.Pattern] = field(default=None, repr=False, compare=False)

    def to_regex(self) -> re.Pattern:
        """Pattern tokens compiled to a regex over the canonical URL."""
        if self._regex is None:
            parts = []
            if self.anchor_host:
                parts.append(HOST_ANCHOR_PREFIX)
            elif self.anchor_start:
                parts.append("^")
            for token in self.pattern:
                if token[0] == "lit":
                    parts.append(re.escape(token[1]))
                elif token[0] == "wild":
                    parts.append(".*")
                else:
                    parts.append(SEPARATOR_CLASS)
            if self.anchor_end:
                parts.append("$")
            self._regex = re.compile("".join(parts))
        return self._regex

    def matches(self, url: str, ctx: "MatchContext") -> bool:
        """Whether this rule hits the already-canonicalized URL in context."""
        if self.resource_types and ctx.resource_type not in self.resource_types:
            return False
        if self.third_party is not None and _is_third_party(url, ctx.page_site) != self.third_party:
            return False
        if self.domains_include and not any(_domain_covers(d, ctx.page_site)
                                            for d in self.domains_include):
            return False
        if any(_domain_covers(d, ctx.page_site) for d in self.domains_exclude):
            return False
        return self.to_regex().search(url) is not None


@dataclass(frozen=True)
class MatchContext:
    request_url: str
    page_site: str                 # registrable domain of the page
    resource_type: str = "other"


@dataclass(frozen=True)
class MatchVerdict:
    blocked: bool
    winning_rule: Optional[FilterRule] = None


@dataclass(frozen=True)
class SourceListStats:
    name: str
    line_count: int
    parsed_count: int
    skipped_count: int


class _RuleIndex:
    """Rules bucketed by a bounded literal substring of length >= 4.

    A rule's index token is a maximal alphanumeric run inside a literal
    segment whose neighbours in the pattern are non-alphanumeric literals,
    separators, or anchors -- which guarantees the token appears as a complete
    alphanumeric run in any matching URL.  Rules without such a token land in
    a linear-scan fallback bucket.
    """

    def __init__(self):
        self.buckets: dict[str, list[FilterRule]] = {}
        self.fallback: list[FilterRule] = []

    def add(self, rule: FilterRule) -> None:
        token = _index_token(rule)
        if token is None:
            self.fallback.append(rule)
        else:
            self.buckets.setdefault(token, []).append(rule)

    def candidates(self, url: str) -> list[FilterRule]:
        found = list(self.fallback)
        seen_buckets = set()
        for token in _URL_TOKEN_RE.findall(url.lower()):
            if token in seen_buckets:
                continue
            seen_buckets.add(token)
            found.extend(self.buckets.get(token, ()))
        found.sort(key=lambda r: r.seq)
        return found

    def all_rules(self) -> list[FilterRule]:
        rules = list(self.fallback)
        for bucket in self.buckets.values():
            rules.extend(bucket)
        rules.sort(key=lambda r: r.seq)
        return rules

    def __len__(self) -> int:
        return len(self.fallback) + sum(len(b) for b in self.buckets.values())


@dataclass
class FilterRuleSet:
    block_rules: _RuleIndex = field(default_factory=_RuleIndex)
    exception_rules: _RuleIndex = field(default_factory=_RuleIndex)
    source_lists: list[SourceListStats] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    _next_seq: int = 0

    def __len__(self) -> int:
        return len(self.block_rules) + len(self.exception_rules)


def _is_third_party(url: str, page_site: str) -> bool:
    try:
        return registrable_domain(url_host(url)) != page_site
    except UnparsableHost:
        return True


def _domain_covers(entry: str, page_site: str) -> bool:
    return page_site == entry or page_site.endswith("." + entry)


def _parse_options(text: str) -> dict:
    """Parse a $-options list; raises UnsupportedRule outside the subset."""
    opts: dict = {"third_party": None, "include": set(), "exclude": set(), "types": set()}
    for token in text.split(","):
        token = token.strip()
        if token == "third-party":
            opts["third_party"] = True
        elif token == "~third-party":
            opts["third_party"] = False
        elif token.startswith("domain="):
            for entry in token[len("domain="):].split("|"):
                entry = entry.strip().lower()
                if not entry:
                    continue
                if entry.startswith("~"):
                    opts["exclude"].add(entry[1:])
                else:
                    opts["include"].add(entry)
            if not opts["include"] and not opts["exclude"]:
                raise UnsupportedRule(f"option {token!r}")
        elif token.lower() in _TYPE_OPTIONS:
            opts["types"].add(_TYPE_OPTIONS[token.lower()])
        else:
            raise UnsupportedRule(f"option {(token or '<empty>')!r}")
    return opts


def _tokenize_pattern(text: str) -> tuple[tuple, ...]:
    tokens: list[tuple] = []
    literal = []
    for ch in text:
        if ch in "*^":
            if literal:
                tokens.append(("lit", "".join(literal)))
                literal = []
            # Collapse adjacent wildcards; they are equivalent to one.
            if ch == "*":
                if not (tokens and tokens[-1] == ("wild",)):
                    tokens.append(("wild",))
            else:
                tokens.append(("sep",))
        else:
            literal.append(ch)
    if literal:
        tokens.append(("lit", "".join(literal)))
    return tuple(tokens)


def _index_token(rule: FilterRule) -> Optional[str]:
    best = None
    for pos, token in enumerate(rule.pattern):
        if token[0] != "lit":
            continue
        text = token[1]
        for match in re.finditer(r"[A-Za-z0-9]+", text):
            run = match.group(0)
            if len(run) < _MIN_TOKEN_LEN:
                continue
            if match.start() == 0:
                # Run begins the literal: bounded only via a separator token
                # or a position-pinning anchor before it.
                if pos > 0:
                    left_ok = rule.pattern[pos - 1][0] == "sep"
                else:
                    left_ok = rule.anchor_host or rule.anchor_start
            else:
                left_ok = True  # preceded by a non-alphanumeric literal char
            if match.end() == len(text):
                if pos + 1 < len(rule.pattern):
                    right_ok = rule.pattern[pos + 1][0] == "sep"
                else:
                    right_ok = rule.anchor_end
            else:
                right_ok = True
            if left_ok and right_ok and (best is None or len(run) > len(best)):
                best = run
    return best.lower() if best else None


def parse_filter_list(text: str, name: str, into: Optional[FilterRuleSet] = None) -> FilterRuleSet:
    """Parse one filter list; totals are tracked per source list."""
    ruleset = into if into is not None else FilterRuleSet()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    line_count = len(lines)
    parsed = skipped = comment_or_blank = 0

    def skip(line_no: int, reason: str):
        nonlocal skipped
        skipped += 1
        ruleset.diagnostics.append({"list": name, "line_no": line_no, "reason": reason})

    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith(("!", "[")):
            comment_or_blank += 1
            continue
        if "##" in line or "#@#" in line or "#?#" in line:
            skip(line_no, "cosmetic rule")
            continue
        try:
            rule = _parse_rule(line)
        except UnsupportedRule as exc:
            skip(line_no, f"unsupported {exc}")
            continue
        except Exception as exc:  # parser is total by contract
            skip(line_no, f"malformed: {exc}")
            continue
        if rule is None:
            skip(line_no, "empty pattern")
            continue
        rule.seq = ruleset._next_seq
        ruleset._next_seq += 1
        parsed += 1
        if rule.kind == "exception":
            ruleset.exception_rules.add(rule)
        else:
            ruleset.block_rules.add(rule)

    assert parsed + skipped == line_count - comment_or_blank
    ruleset.source_lists.append(SourceListStats(name, line_count, parsed, skipped))
    return ruleset


def _parse_rule(line: str) -> Optional[FilterRule]:
    raw = line
    kind = "block"
    if line.startswith("@@"):
        kind = "exception"
        line = line[2:]

    opts = {"third_party": None, "include": set(), "exclude": set(), "types": set()}
    if "$" in line:
        line, _, option_text = line.rpartition("$")
        opts = _parse_options(option_text)

    # Full-regex rules (/.../) are outside the supported pattern language;
    # treating them as literals would silently mis-match.
    if len(line) > 2 and line.startswith("/") and line.endswith("/"):
        raise UnsupportedRule("regex pattern")

    anchor_host = anchor_start = anchor_end = False
    if line.startswith("||"):
        anchor_host = True
        line = line[2:]
    elif line.startswith("|"):
        anchor_start = True
        line = line[1:]
    if line.endswith("|"):
        anchor_end = True
        line = line[:-1]

    pattern = _tokenize_pattern(line)
    if not pattern:
        return None
    return FilterRule(
        raw=raw,
        kind=kind,
        pattern=pattern,
        anchor_host=anchor_host,
        anchor_start=anchor_start,
        anchor_end=anchor_end,
        third_party=opts["third_party"],
        domains_include=frozenset(opts["include"]),
        domains_exclude=frozenset(opts["exclude"]),
        resource_types=frozenset(opts["types"]),
    )


def load_filter_lists(paths: list[str | Path]) -> FilterRuleSet:
    ruleset = FilterRuleSet()
    for path in paths:
        path = Path(path)
        parse_filter_list(path.read_text("utf-8", errors="replace"), path.name, into=ruleset)
    return ruleset


def matches(ruleset: FilterRuleSet, ctx: MatchContext) -> MatchVerdict:
    """Exception rules always win over block rules."""
    url = canonical_url(ctx.request_url)
    block_hit = None
    for rule in ruleset.block_rules.candidates(url):
        if rule.matches(url, ctx):
            block_hit = rule
            break
    if block_hit is None:
        return MatchVerdict(blocked=False)
    for rule in ruleset.exception_rules.candidates(url):
        if rule.matches(url, ctx):
            return MatchVerdict(blocked=False, winning_rule=rule)
    return MatchVerdict(blocked=True, winning_rule=block_hit)


def write_diagnostics(ruleset: FilterRuleSet, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for diag in ruleset.diagnostics:
            fh.write(json.dumps(diag, sort_keys=True) + "\n")
