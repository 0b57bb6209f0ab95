"""
The reference dense encoder and its gradients
=============================================

v = tanh(W p + b), where p averages hashed character-trigram embeddings.
The backward pass is written by hand; here it is checked against central
finite differences.
"""
import numpy as np

from synnorm import EncoderConfig, ReferenceEncoder

enc = ReferenceEncoder(EncoderConfig(h=8, buckets=211, seed=0))
texts = ["breast cancer", "mammary carcinoma", "ab"]
out, state = enc.encode(texts)
print(out.shape, "all in (-1, 1):", bool(np.all(np.abs(out) < 1)))
print("trigram buckets of 'breast cancer':", enc.buckets("breast cancer"))

# loss = sum(g * v) for a random upstream gradient g
rng = np.random.default_rng(0)
g = rng.normal(size=out.shape)
grads = enc.backward(state, g)
print("touched embedding rows:", len(grads["E"].rows), "of", enc.cfg.buckets)

eps = 1e-5
W = enc.params["W"]
fd = np.zeros_like(W)
for idx in np.ndindex(W.shape):
    old = W[idx]
    W[idx] = old + eps
    plus = (enc.encode(texts)[0] * g).sum()
    W[idx] = old - eps
    minus = (enc.encode(texts)[0] * g).sum()
    W[idx] = old
    fd[idx] = (plus - minus) / (2 * eps)
print("max |analytic - numeric| for W:", np.abs(fd - grads["W"]).max())

# parameters change -> old forward states are refused
enc.mark_updated()
try:
    enc.backward(state, g)
except RuntimeError as exc:
    print(type(exc).__name__, exc)
