"""Acc@k with the composite rule: a mention counts only if every component is right."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import ConceptId, MentionRecord
from .retrieval import SynonymIndex

ComponentRanking = tuple[frozenset[ConceptId], Sequence[ConceptId]]


def acc_at_k(rankings: Sequence[Sequence[ComponentRanking]], k: int) -> float:
    """Mean over mentions of AND over components of ``gold & top_k(cuis)``.

    Each mention is a list of ``(gold set, distinct CUIs in rank order)``
    pairs, one per component.
    """
    if not rankings:
        raise ValueError("no mentions to score")
    hits = sum(
        all(set(gold) & set(cuis[:k]) for gold, cuis in comps) for comps in rankings
    )
    return hits / len(rankings)


@dataclass
class EvalReport:
    acc_at: dict[int, float]
    mentions: list[dict] = field(repr=False)
    counts: dict[str, int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "acc_at": {str(k): v for k, v in self.acc_at.items()},
                "counts": self.counts,
                "mentions": self.mentions,
            },
            indent=1,
            sort_keys=True,
        )

    def write_failures(self, path, k: int = 1) -> None:
        """TSV of mentions wrong at ``k``, one row per component."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("mention\tcomponent\tgold\tpredicted\tsynonym\n")
            for m in self.mentions:
                if m["correct"][str(k)]:
                    continue
                for c in m["components"]:
                    fh.write(
                        f"{m['mention']}\t{c['text']}\t{'|'.join(c['gold'])}\t"
                        f"{c['cuis'][0]}\t{c['synonyms'][0]}\n"
                    )


def evaluate(
    index: SynonymIndex,
    records: Sequence[MentionRecord],
    encoder=None,
    lam: float = 1.0,
    ks: Sequence[int] = (1, 5),
    mode: str = "hybrid",
) -> EvalReport:
    """Run exact inference for every component and assemble the report.

    ``index`` must already hold dense vectors from ``encoder`` unless
    ``mode`` is ``"sparse"``.
    """
    if not records:
        raise ValueError("no mentions to evaluate")
    kmax = max(ks)
    texts = [t for r in records for t, _ in r.components]
    preds = iter(index.mips_infer(texts, encoder, lam, k=kmax, mode=mode))
    names = index.dictionary.names

    rankings, mentions = [], []
    for rec in records:
        comps, dumped = [], []
        for text, gold in rec.components:
            p = next(preds)
            comps.append((gold, p.cuis))
            dumped.append(
                {
                    "text": text,
                    "gold": sorted(gold),
                    "cuis": list(p.cuis),
                    "synonyms": [names[i] for i in p.cui_synonym_ids],
                    "scores": list(p.cui_scores),
                }
            )
        rankings.append(comps)
        mentions.append(
            {
                "mention": rec.raw,
                "split_fallback": rec.split_fallback,
                "components": dumped,
                "correct": {str(k): acc_at_k([comps], k) == 1.0 for k in ks},
            }
        )
    acc = {k: acc_at_k(rankings, k) for k in sorted(ks)}
    counts = {
        "total": len(records),
        "composite": sum(r.is_composite for r in records),
        "unsplit_fallback": sum(r.split_fallback for r in records),
    }
    return EvalReport(acc, mentions, counts)
