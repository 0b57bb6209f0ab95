"""Dictionaries, mention sets and string preprocessing.

File formats
------------
dictionary  ``CUI||name`` per line
queries     ``raw mention||CUI`` per line; several gold CUIs joined by ``|``
maps        two-column TSV ``short<TAB>long``
"""
from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

ConceptId = str
SubstitutionMap = Mapping[str, str]

_EMPTY_MAP: dict[str, str] = {}


class CorpusError(ValueError):
    """Malformed or unusable corpus input."""


class EmptyMentionError(ValueError):
    """A string normalized to nothing."""


def concept_id(raw: str) -> ConceptId:
    cui = raw.strip()
    if not cui:
        raise CorpusError("empty concept id")
    return cui


# --------------------------------------------------------------------------
# normalization
# --------------------------------------------------------------------------

def _strip_punct(text: str) -> str:
    return "".join(
        " " if unicodedata.category(ch).startswith("P") else ch for ch in text
    )


def _collapse(text: str) -> str:
    return " ".join(text.split())


_pattern_cache: dict[int, tuple[Mapping[str, str], re.Pattern | None]] = {}


def _word_pattern(mapping: SubstitutionMap) -> re.Pattern | None:
    cached = _pattern_cache.get(id(mapping))
    if cached is not None and cached[0] is mapping:
        return cached[1]
    if not mapping:
        pattern = None
    else:
        # longest keys first so multi-word keys win over their prefixes
        keys = sorted(mapping, key=lambda k: (-len(k), k))
        alternation = "|".join(re.escape(k) for k in keys)
        pattern = re.compile(rf"(?<!\S)(?:{alternation})(?!\S)")
    _pattern_cache[id(mapping)] = (mapping, pattern)
    return pattern


def _substitute(text: str, mapping: SubstitutionMap) -> str:
    pattern = _word_pattern(mapping)
    if pattern is None:
        return text
    # a single re.sub pass: replacements are never re-scanned
    return _collapse(pattern.sub(lambda m: mapping[m.group(0)], text))


def normalize_text(
    raw: str,
    abbrev: SubstitutionMap = _EMPTY_MAP,
    spelling: SubstitutionMap = _EMPTY_MAP,
) -> str:
    """Lowercase, turn punctuation into spaces, expand abbreviations, fix spelling.

    Raises EmptyMentionError if nothing is left.
    """
    text = _collapse(_strip_punct(raw.lower()))
    text = _substitute(text, abbrev)
    text = _substitute(text, spelling)
    if not text:
        raise EmptyMentionError(f"empty after normalization: {raw!r}")
    return text


# --------------------------------------------------------------------------
# composite mentions
# --------------------------------------------------------------------------

def split_composite(text: str, head_len: int = 1) -> list[str]:
    """Split conjunctive mentions sharing a trailing head.

    Handles ``A and B T``, ``A, B(,) and C T`` and ``A/B T``, where ``T`` is
    the last ``head_len`` words. A conjunct that already ends with ``T`` is
    kept as is. Anything else comes back unchanged as ``[text]``.

    >>> split_composite("breast and ovarian cancer")
    ['breast cancer', 'ovarian cancer']
    >>> split_composite("head/neck tumors")
    ['head tumors', 'neck tumors']
    """
    tokens = text.replace(",", " , ").split()
    if len(tokens) <= head_len:
        return [text]
    head, body = tokens[-head_len:], tokens[:-head_len]
    if any(t in ("and", ",") for t in head):
        return [text]

    if "and" in body:
        conjuncts: list[list[str]] = []
        cur: list[str] = []
        prev = None
        last_sep = None
        for tok in body:
            if tok in ("and", ","):
                if cur:
                    conjuncts.append(cur)
                    cur = []
                elif not (tok == "and" and prev == ","):
                    return [text]
                last_sep = tok
            else:
                cur.append(tok)
            prev = tok
        if not cur or last_sep != "and":
            return [text]
        conjuncts.append(cur)
    elif len(body) == 1 and "/" in body[0]:
        conjuncts = [[part] for part in body[0].split("/")]
        if any(not c[0] for c in conjuncts):
            return [text]
    else:
        return [text]

    return [
        " ".join(c if c[-head_len:] == head else c + head) for c in conjuncts
    ]


# --------------------------------------------------------------------------
# data model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Dictionary:
    """Ordered synonym universe. Synonym ids are list positions."""

    names: tuple[str, ...]
    cuis: tuple[ConceptId, ...]
    index: dict[str, list[int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.names) != len(self.cuis):
            raise CorpusError("names and cuis differ in length")
        index: dict[str, list[int]] = {}
        seen = set()
        for i, (name, cui) in enumerate(zip(self.names, self.cuis)):
            if not name:
                raise CorpusError(f"entry {i} has an empty name")
            if (name, cui) in seen:
                raise CorpusError(f"duplicate entry {name!r} / {cui}")
            seen.add((name, cui))
            index.setdefault(name, []).append(i)
        object.__setattr__(self, "index", index)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, ConceptId]]) -> "Dictionary":
        """Build from (name, cui) pairs, keeping the first of any duplicates."""
        names, cuis, seen = [], [], set()
        for name, cui in pairs:
            if (name, cui) in seen:
                continue
            seen.add((name, cui))
            names.append(name)
            cuis.append(cui)
        return cls(tuple(names), tuple(cuis))

    def __len__(self) -> int:
        return len(self.names)

    @property
    def entries(self) -> list[tuple[int, str, ConceptId]]:
        return [(i, n, c) for i, (n, c) in enumerate(zip(self.names, self.cuis))]

    def contains(self, name: str, cui: ConceptId) -> bool:
        return any(self.cuis[i] == cui for i in self.index.get(name, ()))


@dataclass(frozen=True)
class MentionRecord:
    raw: str
    components: tuple[tuple[str, frozenset[ConceptId]], ...]
    # composite surface form whose gold count did not match the split
    split_fallback: bool = False

    def __post_init__(self):
        if not self.components:
            raise CorpusError(f"mention {self.raw!r} has no components")

    @property
    def is_composite(self) -> bool:
        return len(self.components) > 1

    @property
    def gold(self) -> frozenset[ConceptId]:
        return frozenset().union(*(g for _, g in self.components))


def preprocess_mention(
    raw: str,
    gold: Sequence[ConceptId],
    abbrev: SubstitutionMap = _EMPTY_MAP,
    spelling: SubstitutionMap = _EMPTY_MAP,
    head_len: int = 1,
) -> MentionRecord:
    """Normalize a raw mention and split it into components.

    Splitting runs before punctuation removal so that commas and slashes are
    still visible. When the number of conjuncts differs from the number of
    gold ids the mention is kept whole with its full gold set.
    """
    gold = [concept_id(g) for g in gold]
    if not gold:
        raise CorpusError(f"mention {raw!r} has no gold concept")
    whole = normalize_text(raw, abbrev, spelling)
    parts = split_composite(_collapse(raw.lower()), head_len)
    if len(parts) > 1:
        try:
            parts = [normalize_text(p, abbrev, spelling) for p in parts]
        except EmptyMentionError:
            parts = [whole]
    if len(parts) == 1:
        return MentionRecord(raw, ((whole, frozenset(gold)),))
    if len(parts) == len(gold):
        return MentionRecord(
            raw, tuple((p, frozenset([g])) for p, g in zip(parts, gold))
        )
    return MentionRecord(raw, ((whole, frozenset(gold)),), split_fallback=True)


# --------------------------------------------------------------------------
# file io
# --------------------------------------------------------------------------

def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip():
                yield lineno, line


def load_dictionary(
    path,
    abbrev: SubstitutionMap = _EMPTY_MAP,
    spelling: SubstitutionMap = _EMPTY_MAP,
) -> Dictionary:
    pairs = []
    for lineno, line in _read_lines(path):
        if "||" not in line:
            raise CorpusError(f"{path}:{lineno}: expected 'CUI||name'")
        cui, name = line.split("||", 1)
        try:
            name = normalize_text(name, abbrev, spelling)
        except EmptyMentionError:
            logger.warning("%s:%d: empty name skipped", path, lineno)
            continue
        try:
            pairs.append((name, concept_id(cui)))
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
    if not pairs:
        raise CorpusError(f"{path}: empty dictionary")
    return Dictionary.from_pairs(pairs)


def write_dictionary(dictionary: Dictionary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, cui in zip(dictionary.names, dictionary.cuis):
            fh.write(f"{cui}||{name}\n")


def load_queries(
    path,
    abbrev: SubstitutionMap = _EMPTY_MAP,
    spelling: SubstitutionMap = _EMPTY_MAP,
    head_len: int = 1,
) -> list[MentionRecord]:
    records = []
    for lineno, line in _read_lines(path):
        if "||" not in line:
            raise CorpusError(f"{path}:{lineno}: expected 'mention||CUI'")
        raw, gold = line.rsplit("||", 1)
        golds = [g for g in gold.split("|") if g.strip()]
        if not golds:
            raise CorpusError(f"{path}:{lineno}: no gold concept")
        try:
            records.append(preprocess_mention(raw, golds, abbrev, spelling, head_len))
        except EmptyMentionError:
            logger.warning("%s:%d: empty mention skipped", path, lineno)
    return records


def load_substitution_map(path) -> dict[str, str]:
    """Read a ``short<TAB>long`` map. Both sides are normalized."""
    mapping: dict[str, str] = {}
    for lineno, line in _read_lines(path):
        cols = line.split("\t")
        if len(cols) != 2:
            raise CorpusError(f"{path}:{lineno}: expected two tab-separated columns")
        try:
            short, long = normalize_text(cols[0]), normalize_text(cols[1])
        except EmptyMentionError:
            raise CorpusError(f"{path}:{lineno}: empty column") from None
        if short == long:
            raise CorpusError(f"{path}:{lineno}: {short!r} maps to itself")
        mapping[short] = long
    _check_acyclic(mapping, path)
    return mapping


def _check_acyclic(mapping: Mapping[str, str], path) -> None:
    for start in mapping:
        seen = {start}
        cur = mapping[start]
        while cur in mapping:
            if cur in seen:
                raise CorpusError(f"{path}: substitution cycle through {start!r}")
            seen.add(cur)
            cur = mapping[cur]


def merge_train_to_dictionary(
    dictionary: Dictionary, train: Iterable[MentionRecord]
) -> Dictionary:
    """Append single-gold training components missing from the dictionary."""
    names, cuis = list(dictionary.names), list(dictionary.cuis)
    seen = set(zip(names, cuis))
    for record in train:
        for text, gold in record.components:
            if len(gold) != 1:
                continue
            (cui,) = gold
            if (text, cui) not in seen:
                seen.add((text, cui))
                names.append(text)
                cuis.append(cui)
    if len(names) == len(dictionary):
        return dictionary
    return Dictionary(tuple(names), tuple(cuis))
