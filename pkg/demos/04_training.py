"""
Training with synonym marginalization
=====================================

Each epoch re-encodes the dictionary, draws half of every mention's 20
candidates from the sparse ranking and half from the current dense ranking,
then maximizes the probability mass on candidates of the gold concept.
Runs in about 20 seconds on one core.
"""
from synnorm import Dictionary, TrainConfig, evaluate, merge_train_to_dictionary, normalize_text
from synnorm import preprocess_mention, synth, train
from synnorm.retrieval import SynonymIndex

data = synth.generate(seed=0)
dictionary = Dictionary.from_pairs((normalize_text(n), c) for c, n in data.dictionary)
train_set = [preprocess_mention(m, [c]) for m, c in data.train]
test_set = [preprocess_mention(m, [c]) for m, c in data.test]
print(len(dictionary), "synonyms,", len(train_set), "train,", len(test_set), "test mentions")
print("example mentions:", [m for m, _ in data.test[:4]])

watch = train_set[0].components[0][0]
tracked = []


def on_epoch(state, csets):
    # top candidates of one training mention, as they change over epochs
    texts = [cs.key for cs in csets]
    if watch in texts:
        cs = csets[texts.index(watch)]
        tracked.append([dictionary.names[c.synonym_id] for c in cs.candidates[10:14]])


config = TrainConfig(learning_rate=1e-3, epochs=10)
state = train(dictionary, train_set, config, eval_records=test_set, on_epoch=on_epoch)

print("\nepoch  loss    train recall@20  test recall@20  lambda")
for h in state.history:
    loss = "   -  " if h["loss"] is None else f"{h['loss']:.3f}"
    print(f"{h['epoch']:5d}  {loss}  {h['recall_at_k']:15.3f}  {h['eval_recall_at_k']:14.3f}"
          f"  {h['lambda']:.2f}")

if tracked:
    print(f"\nfirst dense candidates of {watch!r} at epoch 0 and 10:")
    print(" ", tracked[0])
    print(" ", tracked[-1])

# evaluation uses the dictionary extended by the training mentions
merged = merge_train_to_dictionary(dictionary, train_set)
index = SynonymIndex.build(merged, state.encoder)
for mode in ("sparse", "dense", "hybrid"):
    report = evaluate(index, test_set, state.encoder, state.lam_value, mode=mode)
    print(f"{mode:7} Acc@1 {report.acc_at[1]:.3f}  Acc@5 {report.acc_at[5]:.3f}")
