import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contextfed.embed import (
    EmbeddingStore,
    chunk_tokens,
    hash_embed,
    load_embeddings,
    pool_max,
    save_embeddings,
    tfidf_embed,
    tfidf_fit,
)
from contextfed.model import LinearModel, predict_logit


class TestHashEmbed:
    def test_empty_tokens_zero_vector(self):
        v = hash_embed([], 256, 7)
        assert v.shape == (256,) and not v.any()

    def test_deterministic(self):
        tokens = ["a", "b", "c", "b"]
        assert np.array_equal(hash_embed(tokens, 64, 7), hash_embed(tokens, 64, 7))

    def test_repetition_changes_nothing_after_normalization(self):
        assert np.array_equal(hash_embed(["a", "a"], 32, 5), hash_embed(["a"], 32, 5))

    def test_unit_norm_when_nonzero(self):
        v = hash_embed(["w1", "w2", "w3"], 128, 1)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_seed_changes_vector(self):
        assert not np.array_equal(hash_embed(["a"], 64, 1), hash_embed(["a"], 64, 2))

    def test_dim_must_be_positive(self):
        with pytest.raises(ValueError):
            hash_embed(["a"], 0, 1)

    @given(st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), max_size=20),
           st.randoms(use_true_random=False))
    @settings(max_examples=60, deadline=None)
    def test_order_insensitive(self, tokens, rnd):
        shuffled = list(tokens)
        rnd.shuffle(shuffled)
        assert np.array_equal(hash_embed(tokens, 32, 3), hash_embed(shuffled, 32, 3))


class TestTfidf:
    def test_document_frequencies(self):
        vocab = tfidf_fit([["a", "b"], ["a"]], vocab_size=10)
        assert set(vocab.index) == {"a", "b", "a b"}
        n_docs = 2
        assert vocab.idf[vocab.index["a"]] == pytest.approx(np.log(3 / 3) + 1)
        assert vocab.idf[vocab.index["b"]] == pytest.approx(np.log(3 / 2) + 1)

    def test_idf_term_in_all_docs_single_doc(self):
        vocab = tfidf_fit([["a"]], vocab_size=5)
        assert vocab.idf[vocab.index["a"]] == 1.0

    def test_top1_by_df(self):
        vocab = tfidf_fit([["a", "b"], ["a"]], vocab_size=1)
        assert set(vocab.index) == {"a"}

    def test_df_ties_break_lexicographically(self):
        vocab = tfidf_fit([["b", "a"]], ngram_range=(1, 1), vocab_size=1)
        assert set(vocab.index) == {"a"}

    def test_empty_corpus_raises(self):
        with pytest.raises(ValueError, match="empty corpus"):
            tfidf_fit([], vocab_size=10)

    def test_out_of_vocab_gives_zero_vector(self):
        vocab = tfidf_fit([["a", "b"]], vocab_size=10)
        assert not tfidf_embed(["zzz"], vocab).any()

    def test_single_in_vocab_unigram_is_one_hot(self):
        vocab = tfidf_fit([["a"], ["b"], ["b"]], ngram_range=(1, 1), vocab_size=10)
        v = tfidf_embed(["a"], vocab)
        assert v[vocab.index["a"]] == 1.0
        assert np.count_nonzero(v) == 1

    def test_normalized(self):
        vocab = tfidf_fit([["a", "b", "c"], ["a", "c"]], vocab_size=50)
        v = tfidf_embed(["a", "b", "a"], vocab)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_ngrams_up_to_three(self):
        vocab = tfidf_fit([["x", "y", "z"]], ngram_range=(1, 3), vocab_size=50)
        assert "x y z" in vocab.index and "y z" in vocab.index


class TestChunkTokens:
    def test_sizes(self):
        chunks = chunk_tokens(["t"] * 1100, 512)
        assert [len(c) for c in chunks] == [512, 512, 76]

    def test_exact_fit_single_chunk(self):
        assert len(chunk_tokens(["t"] * 512, 512)) == 1

    def test_empty(self):
        assert chunk_tokens([], 512) == []

    def test_concatenation_restores_input(self):
        tokens = [f"w{i}" for i in range(37)]
        chunks = chunk_tokens(tokens, 8)
        assert [t for c in chunks for t in c] == tokens


class TestPoolMax:
    def test_elementwise_max(self):
        out = pool_max([np.array([1.0, -2.0]), np.array([0.0, 5.0])])
        assert out.tolist() == [1.0, 5.0]

    def test_single_vector_identity(self):
        v = np.array([0.5, -0.5])
        assert np.array_equal(pool_max([v]), v)

    def test_zeros(self):
        assert pool_max([np.zeros(2), np.zeros(2)]).tolist() == [0.0, 0.0]

    def test_idempotent(self):
        v = np.array([3.0, -1.0, 2.0])
        assert np.array_equal(pool_max([v, v]), v)

    def test_empty_raises(self):
        with pytest.raises(ValueError, match="nothing to pool"):
            pool_max([])


class TestEmbeddingStore:
    def test_round_trip_bit_exact(self, tmp_path):
        store = EmbeddingStore()
        store.add("s1", np.array([0.5, -0.25]))
        store.add("s2", np.array([1 / 3, np.pi]))
        path = tmp_path / "emb.jsonl"
        save_embeddings(store, path)
        loaded = load_embeddings(path)
        assert loaded.dim == 2
        for sid in store.vectors:
            assert np.array_equal(loaded.vectors[sid], store.vectors[sid])

    def test_dimension_mismatch_names_sample(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        lines = [
            json.dumps({"format": "contextfed-embed", "version": 1, "dim": 4}),
            json.dumps({"sample_id": "ok", "vector": [0.0] * 4}),
            json.dumps({"sample_id": "bad", "vector": [0.0] * 8}),
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(ValueError, match="bad"):
            load_embeddings(path)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        header = json.dumps({"format": "contextfed-embed", "version": 1, "dim": 2})
        path.write_text(header + "\n{not json\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 2"):
            load_embeddings(path)

    def test_empty_file_empty_store(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text("", encoding="utf-8")
        store = load_embeddings(path)
        assert store.dim is None and len(store) == 0

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(json.dumps({"sample_id": "x", "vector": [1.0]}) + "\n",
                        encoding="utf-8")
        with pytest.raises(ValueError, match="header"):
            load_embeddings(path)


class TestChunkLogitLinearity:
    def test_mean_chunk_logit_equals_logit_of_mean_embedding(self):
        # "single" mode averages per-chunk logits; for a linear head that
        # must equal scoring the mean chunk embedding.
        rng = np.random.default_rng(11)
        model = LinearModel(rng.normal(size=16), 0.37, "regression")
        chunks = [rng.normal(size=16) for _ in range(5)]
        mean_of_logits = np.mean([predict_logit(model, c) for c in chunks])
        logit_of_mean = predict_logit(model, np.mean(chunks, axis=0))
        assert abs(mean_of_logits - logit_of_mean) < 1e-10
