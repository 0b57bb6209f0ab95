"""Synonym-marginalization training with per-epoch candidate refresh.

Per epoch: re-encode every synonym, compose top-k candidates for every
training component, then run shuffled minibatch AdamW. Candidate lists stay
fixed inside an epoch while their dense scores are recomputed at every step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import ConceptId, Dictionary, MentionRecord
from .dense import EncoderConfig, ReferenceEncoder, RowGrad
from .retrieval import CandidateSet, SynonymIndex, recall_at_k

logger = logging.getLogger(__name__)

LOSS_KINDS = ("mml", "hard_em", "pairwise")


@dataclass(frozen=True)
class TrainConfig:
    k: int = 20
    alpha: float = 0.5
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 1e-5
    lambda_learning_rate: float = 1e-2
    weight_decay: float = 1e-2
    loss_kind: str = "mml"
    seed: int = 0

    def validate(self) -> None:
        if self.k < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError(f"k, batch_size must be >= 1 and epochs >= 0: {self}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.learning_rate <= 0 or self.lambda_learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be positive, weight_decay non-negative")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")


# --------------------------------------------------------------------------
# probabilities and losses on score arrays
# --------------------------------------------------------------------------

def candidate_probabilities(scores: np.ndarray) -> np.ndarray:
    """Softmax over the last axis (the candidate set)."""
    scores = np.asarray(scores, dtype=np.float64)
    z = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def marginal_probability(probs: np.ndarray, positive: np.ndarray) -> np.ndarray:
    """Probability mass on candidates sharing the mention's concept."""
    # summation can overshoot 1 by an ulp
    return np.minimum(np.where(positive, probs, 0.0).sum(axis=-1), 1.0)


def _logsumexp(x: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    top = x.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return (np.log(np.exp(x - top).sum(axis=-1, keepdims=True)) + top)[..., 0]


def mml_from_scores(scores: np.ndarray, positive: np.ndarray):
    """Negative marginal log-likelihood and its gradient w.r.t. the scores.

    Rows without a positive candidate are skipped; the mean runs over the
    remaining rows. Returns ``(loss, dscores, n_used)``.
    """
    used = positive.any(axis=1)
    n_used = int(used.sum())
    grad = np.zeros_like(scores, dtype=np.float64)
    if n_used == 0:
        return 0.0, grad, 0
    s, pos = scores[used], positive[used]
    log_pm = _logsumexp(s, pos) - _logsumexp(s)
    probs = candidate_probabilities(s)
    # posterior restricted to positives
    post = np.exp(np.where(pos, s, -np.inf) - _logsumexp(s, pos)[:, None])
    grad[used] = (probs - post) / n_used
    return float(-log_pm.sum() / n_used), grad, n_used


def hard_em_from_scores(scores: np.ndarray, positive: np.ndarray):
    """Like ``mml_from_scores`` but only the most probable positive counts."""
    used = positive.any(axis=1)
    n_used = int(used.sum())
    grad = np.zeros_like(scores, dtype=np.float64)
    if n_used == 0:
        return 0.0, grad, 0
    s, pos = scores[used], positive[used]
    target = np.argmax(np.where(pos, s, -np.inf), axis=1)
    rows = np.arange(len(s))
    log_p = s[rows, target] - _logsumexp(s)
    g = candidate_probabilities(s)
    g[rows, target] -= 1.0
    grad[used] = g / n_used
    return float(-log_p.sum() / n_used), grad, n_used


def pairwise_from_scores(scores: np.ndarray, positive: np.ndarray):
    """Binary cross-entropy of sigmoid(score) against the positive label, per pair."""
    y = positive.astype(np.float64)
    n = scores.size
    if n == 0:
        return 0.0, np.zeros_like(scores, dtype=np.float64), 0
    # -log sigmoid(s) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s)
    losses = y * np.logaddexp(0.0, -scores) + (1.0 - y) * np.logaddexp(0.0, scores)
    p = 0.5 * (1.0 + np.tanh(0.5 * scores))
    return float(losses.sum() / n), (p - y) / n, scores.shape[0]


_SCORE_LOSSES = {
    "mml": mml_from_scores,
    "hard_em": hard_em_from_scores,
    "pairwise": pairwise_from_scores,
}


# --------------------------------------------------------------------------
# losses on a batch of mention components
# --------------------------------------------------------------------------

@dataclass
class LossResult:
    loss: float
    grads: dict  # "E" (RowGrad), "W", "b", "lam"
    n_used: int
    n_skipped: int
    scores: np.ndarray
    positive: np.ndarray


def positive_mask(
    csets: Sequence[CandidateSet], golds: Sequence[frozenset], dictionary: Dictionary
) -> np.ndarray:
    return np.array(
        [[dictionary.cuis[int(i)] in g for i in cs.ids] for cs, g in zip(csets, golds)],
        dtype=bool,
    )


def batch_loss(
    kind: str,
    texts: Sequence[str],
    golds: Sequence[frozenset[ConceptId]],
    csets: Sequence[CandidateSet],
    encoder,
    dictionary: Dictionary,
    lam: float,
) -> LossResult:
    """Loss and exact gradients for one batch, with live dense scores."""
    if not texts:
        raise ValueError("empty batch")
    b = len(texts)
    k = len(csets[0])
    if any(len(cs) != k for cs in csets):
        raise ValueError("candidate sets in a batch must have equal size")
    ids = np.stack([cs.ids for cs in csets])
    sparse = np.stack([cs.sparse_scores for cs in csets])
    positive = positive_mask(csets, golds, dictionary)

    names = [dictionary.names[int(i)] for i in ids.ravel()]
    vecs, state = encoder.encode(list(texts) + names)
    vm = vecs[:b]
    vn = vecs[b:].reshape(b, k, -1)
    scores = np.einsum("bh,bkh->bk", vm, vn) + lam * sparse

    loss, dscores, n_used = _SCORE_LOSSES[kind](scores, positive)
    n_skipped = b - n_used if kind != "pairwise" else 0
    d_vm = np.einsum("bk,bkh->bh", dscores, vn)
    d_vn = dscores[:, :, None] * vm[:, None, :]
    grads = encoder.backward(state, np.vstack([d_vm, d_vn.reshape(b * k, -1)]))
    grads["lam"] = float((dscores * sparse).sum())
    if kind != "pairwise" and n_used == 0:
        logger.warning("every component in the batch lacks a positive candidate")
    return LossResult(loss, grads, n_used, n_skipped, scores, positive)


def mml_loss(texts, golds, csets, encoder, dictionary, lam) -> LossResult:
    return batch_loss("mml", texts, golds, csets, encoder, dictionary, lam)


def hard_em_loss(texts, golds, csets, encoder, dictionary, lam) -> LossResult:
    return batch_loss("hard_em", texts, golds, csets, encoder, dictionary, lam)


def pairwise_loss(texts, golds, csets, encoder, dictionary, lam) -> LossResult:
    return batch_loss("pairwise", texts, golds, csets, encoder, dictionary, lam)


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------

class AdamW:
    """Adam with decoupled weight decay.

    ``decay`` names the decayed tensors; ``lr_overrides`` maps tensor names to
    their own step size.
    """

    def __init__(self, params: dict, lr: float, weight_decay: float,
                 betas=(0.9, 0.999), eps=1e-8, decay=("E", "W"), lr_overrides=None):
        self.params = params
        self.lr = lr
        self.lrs = {k: (lr_overrides or {}).get(k, lr) for k in params}
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.decay = set(decay)
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for name, p in self.params.items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            lr = self.lrs[name]
            if name in self.decay and self.weight_decay:
                p *= 1.0 - lr * self.weight_decay
            m *= self.b1
            v *= self.b2
            if isinstance(g, RowGrad):
                m[g.rows] += (1.0 - self.b1) * g.values
                v[g.rows] += (1.0 - self.b2) * g.values**2
            else:
                m += (1.0 - self.b1) * g
                v += (1.0 - self.b2) * np.square(g)
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------

@dataclass
class TrainState:
    encoder: ReferenceEncoder
    lam: np.ndarray  # shape (1,), updated in place
    optimizer: AdamW
    index: SynonymIndex
    epoch: int = 0
    history: list[dict] = field(default_factory=list)

    @property
    def lam_value(self) -> float:
        return float(self.lam[0])


def flatten_components(records: Sequence[MentionRecord]):
    texts, golds = [], []
    for rec in records:
        for text, gold in rec.components:
            texts.append(text)
            golds.append(gold)
    return texts, golds


def init_state(
    dictionary: Dictionary,
    config: TrainConfig,
    encoder_cfg: EncoderConfig | None = None,
    encoder=None,
    lam: float = 1.0,
) -> TrainState:
    encoder = encoder or ReferenceEncoder(encoder_cfg or EncoderConfig(seed=config.seed))
    lam_arr = np.array([float(lam)])
    params = dict(encoder.parameters())
    params["lam"] = lam_arr
    opt = AdamW(
        params,
        config.learning_rate,
        config.weight_decay,
        lr_overrides={"lam": config.lambda_learning_rate},
    )
    index = SynonymIndex.build(dictionary)
    return TrainState(encoder, lam_arr, opt, index)


def train(
    dictionary: Dictionary,
    train_records: Sequence[MentionRecord],
    config: TrainConfig,
    encoder_cfg: EncoderConfig | None = None,
    eval_records: Sequence[MentionRecord] | None = None,
    on_epoch: Callable[[TrainState, list[CandidateSet]], None] | None = None,
    state: TrainState | None = None,
) -> TrainState:
    """Train encoder parameters and lambda.

    ``history`` gets one entry per state: entry ``e`` holds the candidate
    recall after ``e`` epochs and the mean loss of epoch ``e`` (None for the
    initial state). ``on_epoch`` is called with every state and its fresh
    training candidates, before the epoch's updates.
    """
    config.validate()
    if not train_records:
        raise ValueError("no training mentions")
    state = state or init_state(dictionary, config, encoder_cfg)
    texts, golds = flatten_components(train_records)
    eval_texts, eval_golds = flatten_components(eval_records or [])
    rng = np.random.default_rng(config.seed)
    enc, index, dic = state.encoder, state.index, state.index.dictionary

    last_loss: float | None = None
    last_skipped: float | None = None
    for epoch in range(config.epochs + 1):
        index.refresh_dense(enc)
        csets = index.compose_candidates(texts, enc, config.k, config.alpha)
        record = {
            "epoch": epoch,
            "loss": last_loss,
            "skipped_fraction": last_skipped,
            "recall_at_k": recall_at_k(csets, golds, dic),
            "lambda": state.lam_value,
        }
        if eval_texts:
            ecs = index.compose_candidates(eval_texts, enc, config.k, config.alpha)
            record["eval_recall_at_k"] = recall_at_k(ecs, eval_golds, dic)
        state.epoch = epoch
        state.history.append(record)
        logger.info("epoch %d: %s", epoch, record)
        if on_epoch is not None:
            on_epoch(state, csets)
        if epoch == config.epochs:
            break

        order = rng.permutation(len(texts))
        total, used, skipped = 0.0, 0, 0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            res = batch_loss(
                config.loss_kind,
                [texts[i] for i in batch],
                [golds[i] for i in batch],
                [csets[i] for i in batch],
                enc,
                dic,
                state.lam_value,
            )
            total += res.loss * res.n_used
            used += res.n_used
            skipped += res.n_skipped
            res.grads["lam"] = np.array([res.grads["lam"]])
            state.optimizer.step(res.grads)
            enc.mark_updated()
        last_loss = total / used if used else None
        last_skipped = skipped / len(texts)
    return state
