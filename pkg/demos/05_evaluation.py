"""
Acc@k and composite mentions
============================

Predictions are collapsed to distinct concepts in rank order. A composite
mention counts as correct only if every component is correct.
"""
from synnorm import Dictionary, SynonymIndex, acc_at_k, evaluate, preprocess_mention

rankings = [
    [({"C1"}, ["C1", "C3"]), ({"C2"}, ["C2", "C1"])],  # both components right
    [({"C1"}, ["C1", "C3"]), ({"C2"}, ["C4", "C2"])],  # second right only at k=2
    [({"C5"}, ["C3", "C4"])],  # wrong everywhere
]
for k in (1, 2):
    print(f"Acc@{k} = {acc_at_k(rankings, k):.3f}")

d = Dictionary.from_pairs([
    ("breast cancer", "C1"), ("mammary carcinoma", "C1"),
    ("ovarian cancer", "C2"), ("ovary carcinoma", "C2"),
    ("lung cancer", "C3"), ("pulmonary carcinoma", "C3"),
])
mentions = [
    preprocess_mention("Breast and ovarian cancer", ["C1", "C2"]),
    preprocess_mention("Breast and lung cancer", ["C1", "C2"]),
    preprocess_mention("pulmonary cancer", ["C3"]),
]
report = evaluate(SynonymIndex.build(d), mentions, None, mode="sparse", ks=(1, 2))
print(report.acc_at, report.counts)
for m in report.mentions:
    print(m["mention"], m["correct"], [c["cuis"] for c in m["components"]])
