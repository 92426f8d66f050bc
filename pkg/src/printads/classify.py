"""Keyword rules mapping segment text to advertisers and coverage topics.

Ads are tested against the government-ad list and the company lists.
Articles are tested against the corruption rule (a corruption keyword
*and* a government term) and the company lists. All matching is plain
substring matching on normalized text.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import yaml

from .errors import ConfigError
from .model import PageRecord, SegmentKind

log = logging.getLogger(__name__)

GOVERNMENT = "government"


def normalize(text: str) -> str:
    """Case-fold and collapse runs of whitespace to single spaces."""
    return " ".join(text.casefold().split())


def _keyword_list(name: str, raw: Iterable[str]) -> tuple[str, ...]:
    out: list[str] = []
    for kw in raw:
        if not isinstance(kw, str):
            raise ConfigError(f"{name}: keyword {kw!r} is not a string")
        norm = normalize(kw)
        if not norm:
            raise ConfigError(f"{name}: empty keyword")
        if norm in out:
            raise ConfigError(f"{name}: duplicate keyword {kw!r}")
        out.append(norm)
    if not out:
        raise ConfigError(f"{name}: keyword list is empty")
    return tuple(out)


@dataclass(frozen=True)
class EntityRuleSet:
    government_ad_keywords: tuple[str, ...]
    corruption_keywords: tuple[str, ...]
    government_terms: tuple[str, ...]
    company_rules: Mapping[str, tuple[str, ...]]
    sectors: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, raw: Mapping) -> "EntityRuleSet":
        try:
            companies = raw["companies"]
            rules = cls(
                government_ad_keywords=_keyword_list("government_ad_keywords", raw["government_ad_keywords"]),
                corruption_keywords=_keyword_list("corruption_keywords", raw["corruption_keywords"]),
                government_terms=_keyword_list("government_terms", raw["government_terms"]),
                company_rules={str(name): _keyword_list(f"companies.{name}", kws)
                               for name, kws in sorted(companies.items())},
                sectors=dict(raw.get("sectors") or {}),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed rule set: {exc!r}") from exc
        if GOVERNMENT in rules.company_rules:
            raise ConfigError(f"{GOVERNMENT!r} is reserved and cannot be a company name")
        return rules

    @classmethod
    def load(cls, path: str | Path | None = None) -> "EntityRuleSet":
        """Load a YAML rule file; ``None`` loads the shipped defaults."""
        if path is None:
            text = resources.files("printads").joinpath("data/rules.yaml").read_text(encoding="utf-8")
        else:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read rule file {path}: {exc}") from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"rule file is not valid YAML: {exc}") from exc
        if not isinstance(raw, Mapping):
            raise ConfigError("rule file must be a mapping")
        return cls.from_mapping(raw)

    @property
    def companies(self) -> list[str]:
        return sorted(self.company_rules)


def _hits(text: str, keywords: Iterable[str]) -> list[str]:
    return [kw for kw in keywords if kw in text]


def is_government_ad(text: str, rules: EntityRuleSet) -> bool:
    return any(kw in text for kw in rules.government_ad_keywords)


def is_corruption_article(text: str, rules: EntityRuleSet) -> bool:
    return (any(kw in text for kw in rules.corruption_keywords)
            and any(t in text for t in rules.government_terms))


def match_companies(text: str, rules: EntityRuleSet) -> set[str]:
    return {name for name, kws in rules.company_rules.items() if any(kw in text for kw in kws)}


@dataclass(frozen=True)
class MatchResult:
    segment_id: str
    kind: SegmentKind
    matched_entities: frozenset[str]
    matched_keywords: Mapping[str, tuple[str, ...]]

    def to_json(self) -> dict:
        return {"segment_id": self.segment_id,
                "kind": self.kind.value,
                "entities": sorted(self.matched_entities),
                "keywords": {k: list(v) for k, v in sorted(self.matched_keywords.items())}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "MatchResult":
        return cls(obj["segment_id"], SegmentKind(obj["kind"]), frozenset(obj["entities"]),
                   {k: tuple(v) for k, v in obj["keywords"].items()})


def match_segment(segment_id: str, kind: SegmentKind, text: str, rules: EntityRuleSet) -> MatchResult:
    text = normalize(text)
    keywords: dict[str, tuple[str, ...]] = {}
    if text:
        if kind is SegmentKind.AD:
            hit = _hits(text, rules.government_ad_keywords)
            if hit:
                keywords[GOVERNMENT] = tuple(sorted(hit))
        else:
            corrupt = _hits(text, rules.corruption_keywords)
            if corrupt:
                terms = _hits(text, rules.government_terms)
                if terms:
                    keywords[GOVERNMENT] = tuple(sorted(set(corrupt) | set(terms)))
        for name, kws in rules.company_rules.items():
            hit = _hits(text, kws)
            if hit:
                keywords[name] = tuple(sorted(hit))
    return MatchResult(segment_id, kind, frozenset(keywords), keywords)


def classify_pages(pages: Iterable[PageRecord], rules: EntityRuleSet) -> Iterator[MatchResult]:
    """Yield one MatchResult per segment, in store order."""
    for page in pages:
        for i, seg in enumerate(page.segments):
            yield match_segment(page.segment_id(i), seg.kind, seg.text, rules)


def classify_corpus(store, rules: EntityRuleSet) -> Iterator[MatchResult]:
    return classify_pages(store.pages(), rules)


def write_matches(results: Iterable[MatchResult], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in results:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def read_matches(path: str | Path) -> list[MatchResult]:
    with open(path, encoding="utf-8") as fh:
        return [MatchResult.from_json(json.loads(line)) for line in fh if line.strip()]


@dataclass(frozen=True)
class ValidationScores:
    accuracy: float
    precision: float
    recall: float
    f1: float
    n: int


def score_government_ads(labeled: Iterable[tuple[str, bool]], rules: EntityRuleSet) -> ValidationScores:
    """Compare the government-ad rule against hand labels."""
    tp = fp = fn = tn = 0
    for text, label in labeled:
        pred = is_government_ad(normalize(text), rules)
        if pred and label:
            tp += 1
        elif pred:
            fp += 1
        elif label:
            fn += 1
        else:
            tn += 1
    n = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ValidationScores((tp + tn) / n if n else 0.0, precision, recall, f1, n)
