"""
Preprocessing mentions and dictionaries
=======================================

Every string is lowercased, punctuation becomes a space, and optional
abbreviation and spelling maps are applied once per whole word.
Conjunctive mentions are split into one component per concept.
"""
from synnorm import (
    Dictionary,
    merge_train_to_dictionary,
    normalize_text,
    preprocess_mention,
    split_composite,
)

print(normalize_text("Breast, and Ovarian Cancer."))
print(normalize_text("Type-II diabetes"))

# abbreviation maps expand whole words only
abbrev = {"sca1": "spinocerebellar ataxia 1"}
print(normalize_text("SCA1 patients", abbrev))

# composite mentions share a trailing head word
for text in ["breast and ovarian cancer", "head/neck tumors", "colon, rectal and anal cancer",
             "lung cancer"]:
    print(f"{text!r:35} -> {split_composite(text)}")

# a record keeps one (text, gold) pair per component; when the number of
# conjuncts and gold ids disagree the mention stays whole
rec = preprocess_mention("Breast and ovarian cancer", ["MeSH:D001943", "MeSH:D010051"])
print(rec.components)
print(preprocess_mention("breast and ovarian cancer", ["MeSH:D061325"]).split_fallback)

# training mentions can be merged into the dictionary as extra synonyms
d = Dictionary.from_pairs([("prostate cancer", "MeSH:D011471")])
merged = merge_train_to_dictionary(d, [preprocess_mention("Prostate carcinomas", ["MeSH:D011471"])])
print(merged.entries)
