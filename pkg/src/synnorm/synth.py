"""Seeded synthetic normalization benchmark.

A concept pairs a pseudo-word stem (think anatomical site) with a class of
interchangeable head words (think pathology), plus an optional modifier.
Each stem is shared by several concepts of different classes, so the head
word decides between siblings while head synonyms share few characters.
Surface forms come from these variation kinds:

``suffix``   noun/adjective stem endings (``kitra`` / ``kitral``) and the
             trailing head word inside its class (``tumor`` / ``neoplasm``)
``reorder``  ``head of X`` and ``X head modifier`` orderings
``typo``     one character edit inside the stem
``abbrev``   initials of the canonical name
``identity`` mentions are verbatim dictionary names
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

VARIATIONS = ("suffix", "reorder", "typo", "abbrev", "identity")

_CONSONANTS = "bcdfghklmnprstvz"
_VOWELS = "aeiou"

STEM_ENDINGS = [
    ("a", "al"),
    ("o", "ic"),
    ("um", "ar"),
    ("is", "ic"),
    ("on", "onic"),
    ("ea", "eal"),
    ("us", "ine"),
    ("ex", "ical"),
]

HEAD_GROUPS = [
    ("disease", "disorder", "syndrome", "illness"),
    ("tumor", "neoplasm", "cancer", "carcinoma"),
    ("deficiency", "insufficiency", "defect", "failure"),
    ("lesion", "injury", "damage", "trauma"),
    ("infection", "sepsis", "contagion", "infestation"),
    ("anomaly", "malformation", "abnormality", "dysplasia"),
    ("inflammation", "swelling", "irritation", "edema"),
    ("pain", "ache", "soreness", "tenderness"),
]

MODIFIERS = [
    "acute", "chronic", "familial", "hereditary", "congenital", "primary",
    "juvenile", "malignant", "benign", "recurrent", "idiopathic", "secondary",
]


@dataclass
class Concept:
    cui: str
    stem: str
    endings: tuple[str, str]  # noun, adjective
    heads: tuple[str, ...]
    modifier: str | None

    @property
    def noun(self) -> str:
        return self.stem + self.endings[0]

    @property
    def adj(self) -> str:
        return self.stem + self.endings[1]

    def canonical(self) -> str:
        return _join(self.modifier, self.adj, self.heads[0])

    def forms(self, variations) -> list[str]:
        """Every surface form the variation kinds allow; canonical first."""
        mod = self.modifier
        heads = self.heads if "suffix" in variations else self.heads[:1]
        out = [_join(mod, self.adj, h) for h in heads]
        if "suffix" in variations:
            out += [_join(mod, self.noun, h) for h in heads]
        if "reorder" in variations:
            out += [_join(h, "of", mod, self.noun) for h in heads]
            out += [_join(self.adj, h, mod) for h in heads]
        if "abbrev" in variations:
            out.append("".join(w[0] for w in self.canonical().split()))
        return list(dict.fromkeys(out))


@dataclass
class SynthData:
    dictionary: list[tuple[str, str]]  # (cui, name)
    train: list[tuple[str, str]]  # (mention, cui)
    test: list[tuple[str, str]]

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "dictionary": out / "dictionary.txt",
            "train": out / "train.txt",
            "test": out / "test.txt",
        }
        _write_pairs(paths["dictionary"], self.dictionary)
        _write_pairs(paths["train"], self.train)
        _write_pairs(paths["test"], self.test)
        return paths


def _write_pairs(path, pairs) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b in pairs:
            fh.write(f"{a}||{b}\n")


def _join(*words) -> str:
    return " ".join(w for w in words if w)


def parse_variations(value: str | tuple | list) -> tuple[str, ...]:
    kinds = tuple(s.strip() for s in value.split(",")) if isinstance(value, str) else tuple(value)
    if not kinds or any(k not in VARIATIONS for k in kinds):
        raise ValueError(f"variation kinds must come from {VARIATIONS}, got {value!r}")
    if "identity" in kinds and len(kinds) > 1:
        raise ValueError("'identity' cannot be combined with other variations")
    return kinds


def _root(rng: random.Random) -> str:
    n = rng.choice((2, 2, 3))
    return "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(n))


def _typo(word: str, rng: random.Random) -> str:
    if len(word) < 3:
        return word
    i = rng.randrange(1, len(word) - 1)
    op = rng.choice(("sub", "del", "ins", "swap"))
    letters = _CONSONANTS + _VOWELS
    if op == "sub":
        return word[:i] + rng.choice([c for c in letters if c != word[i]]) + word[i + 1 :]
    if op == "del":
        return word[:i] + word[i + 1 :]
    if op == "ins":
        return word[:i] + rng.choice(letters) + word[i:]
    if word[i] == word[i + 1]:
        return word[:i] + rng.choice([c for c in letters if c != word[i]]) + word[i + 1 :]
    return word[:i] + word[i + 1] + word[i] + word[i + 2 :]


def _surface(text: str, rng: random.Random) -> str:
    """Cosmetic casing/punctuation that normalization removes again."""
    r = rng.random()
    if r < 0.2:
        return text[:1].upper() + text[1:]
    if r < 0.3:
        return text + "."
    return text


def make_concepts(n_cuis: int, rng: random.Random, per_stem: int = 4) -> list[Concept]:
    """Concepts in sibling blocks of ``per_stem`` sharing one stem."""
    per_stem = max(1, min(per_stem, len(HEAD_GROUPS)))
    stems: set[str] = set()
    concepts: list[Concept] = []
    while len(concepts) < n_cuis:
        stem = _root(rng)
        while stem in stems:
            stem = _root(rng)
        stems.add(stem)
        endings = rng.choice(STEM_ENDINGS)
        for group in rng.sample(HEAD_GROUPS, per_stem):
            if len(concepts) == n_cuis:
                break
            heads = list(group)
            rng.shuffle(heads)
            concepts.append(
                Concept(
                    cui=f"SYN:{len(concepts):06d}",
                    stem=stem,
                    endings=endings,
                    heads=tuple(heads),
                    modifier=rng.choice(MODIFIERS) if rng.random() < 0.3 else None,
                )
            )
    return concepts


def generate(
    seed: int = 0,
    n_cuis: int = 200,
    syns_per_cui: int = 5,
    variations="suffix,reorder,typo",
    n_train: int = 500,
    n_test: int = 200,
    per_stem: int = 4,
) -> SynthData:
    if n_cuis < 2 or syns_per_cui < 1 or n_train < 0 or n_test < 0:
        raise ValueError("need n_cuis >= 2, syns_per_cui >= 1 and non-negative mention counts")
    kinds = parse_variations(variations)
    rng = random.Random(seed)
    concepts = make_concepts(n_cuis, rng, per_stem)

    dictionary: list[tuple[str, str]] = []
    taken: set[str] = set()
    dict_forms: dict[str, list[str]] = {}
    pools: dict[str, list[str]] = {}
    for c in concepts:
        forms = c.forms(kinds)
        chosen = [forms[0]] + rng.sample(forms[1:], min(syns_per_cui - 1, len(forms) - 1))
        chosen = [f for f in chosen if f not in taken]
        taken.update(chosen)
        dict_forms[c.cui] = chosen
        dictionary += [(c.cui, f) for f in chosen]
        pools[c.cui] = [f for f in forms if f not in chosen]

    used: set[str] = set(taken)

    def sample(n: int) -> list[tuple[str, str]]:
        out = []
        attempts = 0
        while len(out) < n:
            attempts += 1
            if attempts > 200 * (n + 1):
                raise ValueError("variation space too small for the requested mention count")
            c = rng.choice(concepts)
            if "identity" in kinds:
                out.append((_surface(rng.choice(dict_forms[c.cui]), rng), c.cui))
                continue
            pool = pools[c.cui] or dict_forms[c.cui]
            text = rng.choice(pool)
            if "typo" in kinds and (not pools[c.cui] or rng.random() < 0.5):
                text = text.replace(c.stem, _typo(c.stem, rng), 1)
            if text in used:
                continue
            used.add(text)
            out.append((_surface(text, rng), c.cui))
        return out

    train = sample(n_train)
    test = sample(n_test)
    return SynthData(dictionary, train, test)
