import numpy as np
import pytest

from synnorm import synth
from synnorm.corpus import Dictionary, normalize_text, preprocess_mention
from synnorm.dense import EncoderConfig, ReferenceEncoder


def toy_dictionary() -> Dictionary:
    """Five concepts, two or three synonyms each."""
    pairs = [
        ("breast cancer", "C1"), ("mammary carcinoma", "C1"), ("breast neoplasm", "C1"),
        ("ovarian cancer", "C2"), ("ovary carcinoma", "C2"),
        ("lung cancer", "C3"), ("pulmonary neoplasm", "C3"),
        ("prostate cancer", "C4"), ("prostatic carcinoma", "C4"),
        ("colon cancer", "C5"), ("colorectal tumor", "C5"), ("bowel cancer", "C5"),
    ]
    return Dictionary.from_pairs(pairs)


def small_encoder(seed=0, h=6, buckets=97) -> ReferenceEncoder:
    return ReferenceEncoder(EncoderConfig(h=h, buckets=buckets, seed=seed))


@pytest.fixture
def toy_dict():
    return toy_dictionary()


@pytest.fixture(scope="session")
def bench():
    """The default seeded synthetic benchmark, preprocessed."""
    data = synth.generate(seed=0)
    dictionary = Dictionary.from_pairs((normalize_text(n), c) for c, n in data.dictionary)
    train = [preprocess_mention(m, [c]) for m, c in data.train]
    test = [preprocess_mention(m, [c]) for m, c in data.test]
    return dictionary, train, test


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def toy_batch(dictionary, encoder, k=5, alpha=0.4):
    """Mentions, gold sets and candidate sets on the toy dictionary."""
    from synnorm.retrieval import SynonymIndex

    texts = ["breast tumor", "ovarian carcinoma", "lung carcinoma", "prostate neoplasm",
             "colon carcinoma", "mammary cancer"]
    golds = [frozenset({c}) for c in ("C1", "C2", "C3", "C4", "C5", "C1")]
    index = SynonymIndex.build(dictionary, encoder)
    return texts, golds, index.compose_candidates(texts, encoder, k, alpha)


def fd_loss_gradients(kind, texts, golds, csets, encoder, dictionary, lam, eps=1e-5,
                      e_rows=None):
    """Central differences of the batch loss for every coordinate of W, b, lambda and
    the selected rows of E."""
    from synnorm.training import batch_loss

    def f(lam_value):
        return batch_loss(kind, texts, golds, csets, encoder, dictionary, lam_value).loss

    out = {}
    for name in ("W", "b", "E"):
        p = encoder.params[name]
        coords = (
            [(int(r), j) for r in e_rows for j in range(p.shape[1])]
            if name == "E" else list(np.ndindex(p.shape))
        )
        vals = []
        for c in coords:
            old = p[c]
            p[c] = old + eps
            plus = f(lam)
            p[c] = old - eps
            minus = f(lam)
            p[c] = old
            vals.append((plus - minus) / (2 * eps))
        out[name] = (coords, np.array(vals))
    out["lam"] = (f(lam + eps) - f(lam - eps)) / (2 * eps)
    return out


def max_rel_err(a, b, floor=1e-6):
    """max |a - b| / max(|a|, |b|, floor); the floor absorbs round-off near zero."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))))


# --------------------------------------------------------------------------
# acceptance reporting: one pass/fail line per criterion in the summary
# --------------------------------------------------------------------------

_acceptance: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
    _acceptance[number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, ok, detail = _acceptance[number]
        terminalreporter.write_line(
            f"criterion {number:2d}  {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        )
