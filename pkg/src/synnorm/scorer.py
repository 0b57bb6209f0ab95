"""Hybrid similarity: dense inner product plus a learned multiple of the sparse one."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import dense_score
from .sparse import SparseVector, sparse_score


@dataclass
class HybridWeight:
    lam: float = 1.0

    def __post_init__(self):
        self.lam = float(self.lam)
        if not np.isfinite(self.lam):
            raise ValueError("lambda must be finite")


def score(
    m_sparse: SparseVector,
    m_dense: np.ndarray,
    n_sparse: SparseVector,
    n_dense: np.ndarray,
    w: HybridWeight,
) -> float:
    return dense_score(m_dense, n_dense) + w.lam * sparse_score(m_sparse, n_sparse)


def combine(dense_scores, sparse_scores, lam: float):
    """Vectorized form of ``score`` over precomputed score arrays."""
    return dense_scores + lam * sparse_scores
