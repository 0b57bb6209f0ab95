"""Exact top-k retrieval over dictionary synonyms.

Everything here is a blocked full scan; ties always go to the smaller
synonym id, so results are reproducible and comparable against a
sort-everything reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse as sp

from .corpus import ConceptId, Dictionary
from .sparse import SparseVector, TfIdfModel, encode_matrix, encode_sparse, fit_tfidf

_BLOCK_CELLS = 1 << 24  # score-matrix cells per block


@dataclass(frozen=True, slots=True)
class Candidate:
    synonym_id: int
    source: str  # "sparse" | "dense"
    sparse_score: float
    dense_score: float


@dataclass
class CandidateSet:
    key: str
    candidates: list[Candidate]
    k: int
    alpha: float

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def ids(self) -> np.ndarray:
        return np.array([c.synonym_id for c in self.candidates], dtype=np.int64)

    @property
    def sparse_scores(self) -> np.ndarray:
        return np.array([c.sparse_score for c in self.candidates])


@dataclass
class Prediction:
    cui: ConceptId
    synonym_ids: np.ndarray  # top-k synonyms by hybrid score
    scores: np.ndarray
    cuis: list[ConceptId]  # distinct concepts in rank order, up to k
    cui_synonym_ids: list[int] = field(default_factory=list)  # best synonym per concept
    cui_scores: list[float] = field(default_factory=list)


# --------------------------------------------------------------------------
# top-k primitives
# --------------------------------------------------------------------------

def topk_ids(scores: np.ndarray, j: int) -> np.ndarray:
    """Indices of the ``j`` largest scores, descending, ties by ascending index."""
    scores = np.asarray(scores)
    n = scores.shape[0]
    j = min(max(int(j), 0), n)
    if j == 0:
        return np.zeros(0, dtype=np.int64)
    neg = -scores
    if j < n:
        cutoff = np.partition(neg, j - 1)[j - 1]
        pool = np.flatnonzero(neg <= cutoff)
    else:
        pool = np.arange(n)
    order = np.lexsort((pool, neg[pool]))
    return pool[order[:j]].astype(np.int64)


def topk_sparse(mention_vec: SparseVector, dict_matrix: sp.csr_matrix, j: int) -> np.ndarray:
    q = mention_vec.to_dense(dict_matrix.shape[1])
    return topk_ids(dict_matrix @ q, j)


def topk_dense(mention_vec: np.ndarray, dict_matrix: np.ndarray, j: int) -> np.ndarray:
    return topk_ids(dict_matrix @ np.asarray(mention_vec), j)


def compose_from_scores(
    key: str,
    sparse_row: np.ndarray,
    dense_row: np.ndarray,
    k: int,
    alpha: float,
) -> CandidateSet:
    """Sparse block of ``k - floor(alpha k)`` then dense candidates up to ``k``.

    Dense candidates that duplicate a sparse one are skipped, which pulls in
    further dense candidates (refill). Should the dense ranking run dry the
    next sparse candidates are used.
    """
    if k < 1 or not 0.0 <= alpha <= 1.0:
        raise ValueError(f"need k >= 1 and 0 <= alpha <= 1, got k={k}, alpha={alpha}")
    n = len(sparse_row)
    target = min(k, n)
    n_dense = math.floor(alpha * k)
    n_sparse = min(k - n_dense, n)

    sparse_rank = topk_ids(sparse_row, n_sparse)
    chosen = [(int(i), "sparse") for i in sparse_rank]
    taken = set(int(i) for i in sparse_rank)
    if len(chosen) < target:
        for i in topk_ids(dense_row, target + n_sparse):
            if len(chosen) == target:
                break
            if int(i) not in taken:
                taken.add(int(i))
                chosen.append((int(i), "dense"))
    if len(chosen) < target:
        for i in topk_ids(sparse_row, n):
            if len(chosen) == target:
                break
            if int(i) not in taken:
                taken.add(int(i))
                chosen.append((int(i), "sparse"))
    cands = [
        Candidate(i, src, float(sparse_row[i]), float(dense_row[i])) for i, src in chosen
    ]
    return CandidateSet(key, cands, k, alpha)


def recall_at_k(
    candidates: Sequence[CandidateSet | Sequence[int]],
    gold: Sequence[Iterable[ConceptId]],
    dictionary: Dictionary,
) -> float:
    """Fraction of mentions with at least one candidate of a gold concept."""
    if len(candidates) != len(gold):
        raise ValueError("candidates and gold differ in length")
    if not candidates:
        return 0.0
    hits = 0
    for cands, g in zip(candidates, gold):
        ids = cands.ids if isinstance(cands, CandidateSet) else cands
        g = set(g)
        hits += any(dictionary.cuis[int(i)] in g for i in ids)
    return hits / len(candidates)


def distinct_cuis(ids: Iterable[int], dictionary: Dictionary, k: int) -> list[ConceptId]:
    return [c for c, _ in _first_per_cui(ids, dictionary, k)]


def _first_per_cui(ids, dictionary: Dictionary, k: int) -> list[tuple[ConceptId, int]]:
    out: dict[ConceptId, int] = {}
    for i in ids:
        c = dictionary.cuis[int(i)]
        if c not in out:
            out[c] = int(i)
            if len(out) == k:
                break
    return list(out.items())


# --------------------------------------------------------------------------
# the synonym index
# --------------------------------------------------------------------------

@dataclass
class SynonymIndex:
    """Precomputed sparse and dense representations of every synonym."""

    dictionary: Dictionary
    tfidf: TfIdfModel
    sparse: sp.csr_matrix = field(init=False, repr=False)
    dense: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.dictionary) == 0:
            raise ValueError("empty dictionary")
        self.sparse = encode_matrix(self.dictionary.names, self.tfidf)

    @classmethod
    def build(cls, dictionary: Dictionary, encoder=None) -> "SynonymIndex":
        index = cls(dictionary, fit_tfidf(dictionary))
        if encoder is not None:
            index.refresh_dense(encoder)
        return index

    def __len__(self) -> int:
        return len(self.dictionary)

    def refresh_dense(self, encoder) -> None:
        """Re-encode all synonyms with the encoder's current parameters."""
        names = self.dictionary.names
        step = max(1, _BLOCK_CELLS // max(encoder.dim, 1) // 8)
        parts = [encoder.encode(names[i : i + step])[0] for i in range(0, len(names), step)]
        self.dense = np.vstack(parts)

    def _blocks(self, n: int):
        step = max(1, min(512, _BLOCK_CELLS // len(self)))
        for lo in range(0, n, step):
            yield lo, min(n, lo + step)

    def sparse_scores(self, texts: Sequence[str]) -> np.ndarray:
        q = encode_matrix(texts, self.tfidf).toarray()
        return np.ascontiguousarray((self.sparse @ q.T).T)

    def dense_scores(self, vecs: np.ndarray) -> np.ndarray:
        if self.dense is None:
            raise RuntimeError("dense representations not computed; call refresh_dense")
        return vecs @ self.dense.T

    def score_block(self, texts, encoder, lam: float, mode: str = "hybrid"):
        """Hybrid, sparse-only or dense-only scores of ``texts`` against all synonyms."""
        if mode == "sparse":
            return self.sparse_scores(texts)
        dense = self.dense_scores(encoder.encode(texts)[0])
        if mode == "dense":
            return dense
        if mode != "hybrid":
            raise ValueError(f"unknown scoring mode {mode!r}")
        return dense + lam * self.sparse_scores(texts)

    def compose_candidates(
        self, texts: Sequence[str], encoder, k: int, alpha: float
    ) -> list[CandidateSet]:
        out: list[CandidateSet] = []
        for lo, hi in self._blocks(len(texts)):
            block = list(texts[lo:hi])
            s = self.sparse_scores(block)
            d = self.dense_scores(encoder.encode(block)[0])
            out.extend(
                compose_from_scores(t, s[r], d[r], k, alpha) for r, t in enumerate(block)
            )
        return out

    def mips_infer(
        self, texts: Sequence[str], encoder, lam: float, k: int = 1, mode: str = "hybrid"
    ) -> list[Prediction]:
        """Exact argmax of the similarity over every synonym, plus the top-k lists."""
        preds: list[Prediction] = []
        for lo, hi in self._blocks(len(texts)):
            scores = self.score_block(list(texts[lo:hi]), encoder, lam, mode)
            for row in scores:
                ids = topk_ids(row, k)
                ranked = self._ranked_cuis(row, k)
                preds.append(
                    Prediction(
                        self.dictionary.cuis[int(ids[0])],
                        ids,
                        row[ids],
                        [c for c, _ in ranked],
                        [i for _, i in ranked],
                        [float(row[i]) for _, i in ranked],
                    )
                )
        return preds

    def _ranked_cuis(self, row: np.ndarray, k: int) -> list[tuple[ConceptId, int]]:
        n = len(row)
        width = min(n, 4 * k)
        while True:
            ranked = _first_per_cui(topk_ids(row, width), self.dictionary, k)
            if len(ranked) == k or width == n:
                return ranked
            width = min(n, 2 * width)


def encode_mention_sparse(text: str, index: SynonymIndex) -> SparseVector:
    return encode_sparse(text, index.tfidf)
