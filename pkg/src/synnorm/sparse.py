"""Character n-gram tf-idf vectors.

n-grams are taken over the normalized string as is (spaces count as
characters, no boundary padding). Feature indices follow lexicographic
n-gram order so a fitted model serializes deterministically.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse as sp

from .corpus import Dictionary

_FORMAT = "synnorm-tfidf 1"


@dataclass(frozen=True)
class TfIdfModel:
    vocab: dict[str, int]
    idf: np.ndarray
    orders: tuple[int, ...] = (1, 2)
    normalize: bool = True

    def __len__(self) -> int:
        return len(self.vocab)


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64, positive

    def __len__(self) -> int:
        return len(self.indices)

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.indices] = self.values
        return out


def char_ngrams(text: str, orders: Iterable[int] = (1, 2)) -> list[str]:
    return [text[i : i + n] for n in orders for i in range(len(text) - n + 1)]


def fit_tfidf(
    dictionary: Dictionary | Sequence[str],
    orders: tuple[int, ...] = (1, 2),
    normalize: bool = True,
) -> TfIdfModel:
    """Fit smooth idf, ``ln((1 + N) / (1 + df)) + 1``, over dictionary synonyms.

    ``df`` counts dictionary entries, so a name listed under two concepts
    counts twice.
    """
    names = dictionary.names if isinstance(dictionary, Dictionary) else list(dictionary)
    if not names:
        raise ValueError("cannot fit tf-idf on an empty dictionary")
    df: Counter[str] = Counter()
    for name in names:
        df.update(set(char_ngrams(name, orders)))
    grams = sorted(df)
    n = len(names)
    idf = np.array([math.log((1 + n) / (1 + df[g])) + 1.0 for g in grams])
    return TfIdfModel({g: j for j, g in enumerate(grams)}, idf, tuple(orders), normalize)


def encode_sparse(text: str, model: TfIdfModel) -> SparseVector:
    counts: Counter[int] = Counter()
    for g in char_ngrams(text, model.orders):
        j = model.vocab.get(g)
        if j is not None:
            counts[j] += 1
    if not counts:
        return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0))
    idx = np.array(sorted(counts), dtype=np.int64)
    vals = np.array([counts[j] for j in idx], dtype=np.float64) * model.idf[idx]
    if model.normalize:
        vals = vals / np.sqrt(np.dot(vals, vals))
    return SparseVector(idx, vals)


def sparse_score(a: SparseVector, b: SparseVector) -> float:
    """Inner product by merging the two sorted index lists."""
    ai, bi = a.indices, b.indices
    i = j = 0
    total = 0.0
    while i < len(ai) and j < len(bi):
        if ai[i] == bi[j]:
            total += float(a.values[i]) * float(b.values[j])
            i += 1
            j += 1
        elif ai[i] < bi[j]:
            i += 1
        else:
            j += 1
    return total


def encode_matrix(texts: Sequence[str], model: TfIdfModel) -> sp.csr_matrix:
    """Row-stack sparse vectors into a CSR matrix (rows keep sorted indices)."""
    vecs = [encode_sparse(t, model) for t in texts]
    indptr = np.zeros(len(vecs) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v) for v in vecs])
    if vecs:
        indices = np.concatenate([v.indices for v in vecs])
        data = np.concatenate([v.values for v in vecs])
    else:
        indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
    mat = sp.csr_matrix((data, indices, indptr), shape=(len(vecs), len(model)))
    mat.has_sorted_indices = True
    return mat


def save_tfidf(model: TfIdfModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{_FORMAT}\n")
        fh.write(f"orders\t{','.join(map(str, model.orders))}\n")
        fh.write(f"normalize\t{int(model.normalize)}\n")
        fh.write(f"size\t{len(model)}\n")
        fh.write("vocab\n")
        for gram, j in sorted(model.vocab.items(), key=lambda kv: kv[1]):
            fh.write(f"{gram}\t{j}\t{float(model.idf[j])!r}\n")


def load_tfidf(path) -> TfIdfModel:
    with open(path, encoding="utf-8", newline="\n") as fh:
        lines = fh.read().split("\n")
    if lines[0] != _FORMAT:
        raise ValueError(f"{path}: not a tf-idf model file")
    header = dict(line.split("\t", 1) for line in lines[1:4])
    if lines[4] != "vocab":
        raise ValueError(f"{path}: missing vocab section")
    size = int(header["size"])
    vocab: dict[str, int] = {}
    idf = np.empty(size)
    for line in lines[5 : 5 + size]:
        gram, j, w = line.rsplit("\t", 2)
        vocab[gram] = int(j)
        idf[int(j)] = float(w)
    if len(vocab) != size:
        raise ValueError(f"{path}: truncated vocab")
    orders = tuple(int(o) for o in header["orders"].split(","))
    return TfIdfModel(vocab, idf, orders, bool(int(header["normalize"])))
