"""
Character n-gram tf-idf retrieval
=================================

Synonyms are represented by tf-idf weights over character unigrams and
bigrams. Vectors are unit length, so an exact match always scores 1.
"""
import numpy as np

from synnorm import Dictionary, SynonymIndex, encode_sparse, fit_tfidf, sparse_score
from synnorm.retrieval import topk_sparse

d = Dictionary.from_pairs([
    ("ibuprofen", "MeSH:D007052"), ("motrin", "MeSH:D007052"),
    ("acetaminophen", "MeSH:D000082"), ("paracetamol", "MeSH:D000082"),
    ("aspirin", "MeSH:D001241"), ("acetylsalicylic acid", "MeSH:D001241"),
])
model = fit_tfidf(d)
print(f"{len(model)} n-gram features")

v = encode_sparse("ibuprofen", model)
print("indices", v.indices[:8], "norm", np.linalg.norm(v.values))
print("self score", sparse_score(v, v))
print("ibuprofen vs motrin", sparse_score(v, encode_sparse("motrin", model)))

# the same scores for a whole dictionary at once
index = SynonymIndex.build(d)
for mention in ["ibuprofin", "paracetamole", "acetylsalicylic"]:
    ids = topk_sparse(encode_sparse(mention, model), index.sparse, 3)
    print(f"{mention:16}", [(d.names[i], d.cuis[i]) for i in ids])

# morphology only: "motrin" is nowhere near "ibuprofen" in n-gram space,
# which is what the learned dense encoder is for
print(index.sparse_scores(["motrin"]).round(3))
