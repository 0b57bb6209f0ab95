import numpy as np
import pytest

from synnorm.dense import (
    EncoderConfig,
    ReferenceEncoder,
    StaleStateError,
    dense_score,
    encode_dense,
    fnv1a_64,
    load_checkpoint,
    save_checkpoint,
)

from conftest import small_encoder

EPS = 1e-5


def fd_check(encoder, texts, upstream, name, coords):
    """Central differences of sum(upstream * encode(texts)) for selected coordinates."""
    p = encoder.params[name]
    out = []
    for c in coords:
        old = p[c]
        p[c] = old + EPS
        plus = (encoder.encode(texts)[0] * upstream).sum()
        p[c] = old - EPS
        minus = (encoder.encode(texts)[0] * upstream).sum()
        p[c] = old
        out.append((plus - minus) / (2 * EPS))
    return np.array(out)


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


class TestHash:
    def test_known_vectors(self):
        # published FNV-1a 64-bit test vectors
        assert fnv1a_64(b"") == 0xCBF29CE484222325
        assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a_64(b"foobar") == 0x85944171F73967E8


class TestEncode:
    def test_shape_and_range(self):
        enc = small_encoder()
        out, _ = enc.encode(["breast cancer", "ab", ""])
        assert out.shape == (3, enc.dim)
        assert np.all(np.abs(out) < 1)

    def test_short_string_uses_row_zero(self):
        enc = small_encoder()
        v, _ = encode_dense("ab", enc)
        p = enc.params
        np.testing.assert_array_equal(v, np.tanh(p["W"] @ p["E"][0] + p["b"]))

    def test_matches_explicit_formula(self):
        enc = small_encoder()
        text = "lung cancer"
        ids = [fnv1a_64(text[i:i + 3].encode()) % enc.cfg.buckets for i in range(len(text) - 2)]
        pooled = enc.params["E"][ids].mean(axis=0)
        ref = np.tanh(enc.params["W"] @ pooled + enc.params["b"])
        np.testing.assert_allclose(encode_dense(text, enc)[0], ref, atol=1e-14)

    def test_truncation(self):
        enc = ReferenceEncoder(EncoderConfig(h=4, buckets=31, max_chars=5))
        a, _ = enc.encode(["abcdefgh"])
        b, _ = enc.encode(["abcdexyz"])
        np.testing.assert_array_equal(a, b)

    def test_deterministic_and_seeded(self):
        a = small_encoder(seed=3).encode(["colon cancer"])[0]
        b = small_encoder(seed=3).encode(["colon cancer"])[0]
        c = small_encoder(seed=4).encode(["colon cancer"])[0]
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            EncoderConfig(h=0)


class TestDenseScore:
    def test_oracle(self, rng):
        a, b = rng.normal(size=8), rng.normal(size=8)
        assert dense_score(a, b) == pytest.approx(sum(x * y for x, y in zip(a, b)), abs=1e-12)
        assert dense_score(a, b) == dense_score(b, a)
        assert dense_score(a, np.zeros(8)) == 0.0

    def test_mismatch(self):
        with pytest.raises(ValueError):
            dense_score(np.zeros(3), np.zeros(4))


class TestBackward:
    TEXTS = ["breast cancer", "ovary carcinoma", "ab"]

    def test_finite_differences(self, rng):
        enc = small_encoder(seed=1)
        out, state = enc.encode(self.TEXTS)
        g = rng.normal(size=out.shape)
        grads = enc.backward(state, g)
        rows = grads["E"].rows
        dense_e = grads["E"].to_dense(enc.params["E"].shape)
        coords = [(int(r), j) for r in rows for j in range(enc.dim)]
        analytic = dense_e[tuple(np.array(coords).T)]
        assert rel_err(analytic, fd_check(enc, self.TEXTS, g, "E", coords)) < 1e-4
        coords = list(np.ndindex(enc.params["W"].shape))
        assert rel_err(grads["W"].ravel(), fd_check(enc, self.TEXTS, g, "W", coords)) < 1e-4
        coords = [(j,) for j in range(enc.dim)]
        assert rel_err(grads["b"], fd_check(enc, self.TEXTS, g, "b", coords)) < 1e-4

    def test_zero_upstream(self):
        enc = small_encoder()
        out, state = enc.encode(self.TEXTS)
        grads = enc.backward(state, np.zeros_like(out))
        assert not grads["E"].values.any() and not grads["W"].any() and not grads["b"].any()

    def test_shared_string_doubles(self, rng):
        enc = small_encoder()
        g = rng.normal(size=enc.dim)
        _, s1 = enc.encode(["lung cancer"])
        once = enc.backward(s1, g[None])
        _, s2 = enc.encode(["lung cancer", "lung cancer"])
        twice = enc.backward(s2, np.vstack([g, g]))
        np.testing.assert_allclose(twice["E"].values, 2 * once["E"].values, rtol=1e-12)
        np.testing.assert_allclose(twice["W"], 2 * once["W"], rtol=1e-12)

    def test_stale_state(self):
        enc = small_encoder()
        out, state = enc.encode(["x y z"])
        enc.mark_updated()
        with pytest.raises(StaleStateError):
            enc.backward(state, np.ones_like(out))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        enc = ReferenceEncoder(EncoderConfig(h=5, buckets=17, seed=9, init_scale=0.1))
        save_checkpoint(tmp_path / "a.ckpt", enc, 2.718281828459045)
        back, lam = load_checkpoint(tmp_path / "a.ckpt")
        assert lam == 2.718281828459045
        assert back.cfg == enc.cfg
        for name in ("E", "W", "b"):
            assert back.params[name].tobytes() == enc.params[name].tobytes()
        save_checkpoint(tmp_path / "b.ckpt", back, lam)
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_truncated(self, tmp_path):
        enc = small_encoder()
        save_checkpoint(tmp_path / "a.ckpt", enc, 1.0)
        blob = (tmp_path / "a.ckpt").read_bytes()
        (tmp_path / "a.ckpt").write_bytes(blob[:-8])
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "a.ckpt")

    def test_not_a_checkpoint(self, tmp_path):
        (tmp_path / "x").write_bytes(b"hello")
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "x")
