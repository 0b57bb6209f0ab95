"""Trainable dense string encoder.

The reference encoder is a hashed character-trigram embedding bag followed
by one affine layer and tanh::

    p = mean_g E[fnv1a(g) mod B]        (g over the string's trigrams)
    v = tanh(W p + b)

Strings shorter than three characters use row 0 of ``E``. Any object with the
same ``encode`` / ``backward`` / ``parameters`` / ``mark_updated`` surface can
stand in for it during training and retrieval.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import sparse as sp

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

CHECKPOINT_FORMAT = "synnorm-checkpoint 1"


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


class StaleStateError(RuntimeError):
    """Backward called with a forward state from older parameters."""


@dataclass(frozen=True)
class EncoderConfig:
    h: int = 64
    buckets: int = 65536
    ngram_order: int = 3
    seed: int = 0
    max_chars: int = 100
    # uniform init half-widths; small values leave tanh(W p) near its flat
    # zero point where dense scores barely move during training
    init_scale: float = 0.3
    w_init_scale: float = 0.75

    def __post_init__(self):
        if self.h < 1 or self.buckets < 1 or self.max_chars < 1 or self.ngram_order < 1 \
                or not self.init_scale >= 0 or not self.w_init_scale >= 0:
            raise ValueError(f"invalid encoder config: {self}")


@dataclass
class RowGrad:
    """Gradient of an embedding table restricted to the rows it touched."""

    rows: np.ndarray
    values: np.ndarray

    def to_dense(self, shape) -> np.ndarray:
        out = np.zeros(shape)
        out[self.rows] = self.values
        return out


@dataclass
class ForwardState:
    version: int
    pool: sp.csr_matrix  # (n, B) averaging weights
    pooled: np.ndarray  # (n, h)
    out: np.ndarray  # (n, h)


def init_params(cfg: EncoderConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    a, w = cfg.init_scale, cfg.w_init_scale
    return {
        "E": rng.uniform(-a, a, size=(cfg.buckets, cfg.h)),
        "W": rng.uniform(-w, w, size=(cfg.h, cfg.h)),
        "b": np.zeros(cfg.h),
    }


class ReferenceEncoder:
    def __init__(self, cfg: EncoderConfig | None = None, params=None):
        self.cfg = cfg or EncoderConfig()
        self.params = params if params is not None else init_params(self.cfg)
        if self.params["E"].shape != (self.cfg.buckets, self.cfg.h):
            raise ValueError("embedding table does not match config")
        self.version = 0
        self._bucket_cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.cfg.h

    def parameters(self) -> dict[str, np.ndarray]:
        return self.params

    def mark_updated(self) -> None:
        self.version += 1

    def buckets(self, text: str) -> np.ndarray:
        cached = self._bucket_cache.get(text)
        if cached is not None:
            return cached
        n = self.cfg.ngram_order
        t = text[: self.cfg.max_chars]
        ids = [
            fnv1a_64(t[i : i + n].encode("utf-8")) % self.cfg.buckets
            for i in range(len(t) - n + 1)
        ]
        arr = np.array(ids or [0], dtype=np.int64)
        self._bucket_cache[text] = arr
        return arr

    def _pool_matrix(self, texts: Sequence[str]) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, text in enumerate(texts):
            ids = self.buckets(text)
            rows.append(np.full(len(ids), i))
            cols.append(ids)
            vals.append(np.full(len(ids), 1.0 / len(ids)))
        if not texts:
            return sp.csr_matrix((0, self.cfg.buckets))
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(len(texts), self.cfg.buckets),
        )
        mat.sum_duplicates()
        return mat

    def encode(self, texts: Sequence[str]) -> tuple[np.ndarray, ForwardState]:
        pool = self._pool_matrix(texts)
        p = np.asarray(pool @ self.params["E"])
        out = np.tanh(p @ self.params["W"].T + self.params["b"])
        return out, ForwardState(self.version, pool, p, out)

    def backward(self, state: ForwardState, grad_out: np.ndarray) -> dict:
        """Parameter gradients given d(loss)/d(output) for each encoded row.

        Rows of the same string encoded twice (e.g. as mention and as
        synonym) contribute additively.
        """
        if state.version != self.version:
            raise StaleStateError(
                f"forward state v{state.version} but parameters are v{self.version}"
            )
        dz = grad_out * (1.0 - state.out**2)
        dW = dz.T @ state.pooled
        db = dz.sum(axis=0)
        dp = dz @ self.params["W"]
        pool_t = state.pool.T.tocsr()
        rows = np.unique(state.pool.indices)
        dE = np.asarray(pool_t[rows] @ dp)
        return {"E": RowGrad(rows, dE), "W": dW, "b": db}


def encode_dense(text: str, encoder: ReferenceEncoder) -> tuple[np.ndarray, ForwardState]:
    out, state = encoder.encode([text])
    return out[0], state


def dense_score(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def save_checkpoint(path, encoder: ReferenceEncoder, lam: float) -> None:
    """Text header, then E, W, b as little-endian float64."""
    header = [CHECKPOINT_FORMAT]
    header += [f"{k} = {v!r}" for k, v in asdict(encoder.cfg).items()]
    header += [f"lambda = {float(lam)!r}", "end", ""]
    with open(path, "wb") as fh:
        fh.write("\n".join(header).encode("utf-8"))
        for name in ("E", "W", "b"):
            fh.write(np.ascontiguousarray(encoder.params[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ReferenceEncoder, float]:
    with open(path, "rb") as fh:
        blob = fh.read()
    marker = b"\nend\n"
    cut = blob.find(marker)
    if not blob.startswith(CHECKPOINT_FORMAT.encode()) or cut < 0:
        raise ValueError(f"{path}: not a checkpoint file")
    lines = blob[:cut].decode("utf-8").split("\n")[1:]
    fields = dict(line.split(" = ", 1) for line in lines)
    lam = float(fields.pop("lambda"))
    scales = {k: float(fields.pop(k)) for k in ("init_scale", "w_init_scale") if k in fields}
    cfg = EncoderConfig(**{k: int(v) for k, v in fields.items()}, **scales)
    flat = np.frombuffer(blob[cut + len(marker) :], dtype="<f8")
    sizes = [cfg.buckets * cfg.h, cfg.h * cfg.h, cfg.h]
    if flat.size != sum(sizes):
        raise ValueError(f"{path}: expected {sum(sizes)} values, found {flat.size}")
    e, w, b = np.split(flat.astype(np.float64), np.cumsum(sizes)[:-1])
    params = {
        "E": e.reshape(cfg.buckets, cfg.h),
        "W": w.reshape(cfg.h, cfg.h),
        "b": b.copy(),
    }
    return ReferenceEncoder(cfg, params), lam
