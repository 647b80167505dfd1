"""Fixed (non-trained) text embeddings and long-input chunk handling.

Two self-contained embedders stand in for a frozen sentence encoder: a
signed feature hasher (the default for simulations) and a TF-IDF
bag-of-n-grams. Externally computed vectors enter through `EmbeddingStore`
JSONL files, so semantically meaningful encoders can be swapped in without
touching the training stack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .seeding import stable_hash64

EMBED_FORMAT = "contextfed-embed"
EMBED_VERSION = 1


@lru_cache(maxsize=1 << 20)
def _hash_slot(token: str, dim: int, seed: int) -> tuple[int, float]:
    """Bucket index and sign for one token under one (dim, seed) pair."""
    h = stable_hash64(token, seed=seed)
    sign_bit = stable_hash64(token, seed=seed ^ 0x5A5A5A5A) & 1
    return h % dim, 1.0 if sign_bit else -1.0


def hash_embed(tokens: list[str], dim: int, seed: int) -> np.ndarray:
    """Signed feature hashing of a token list into a dense unit vector.

    Each token is hashed (64-bit, seeded) to a bucket `h % dim`; a second
    hash bit supplies the sign. Counts accumulate, then the vector is
    L2-normalized unless it is all zeros. Order-insensitive by construction.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        index, sign = _hash_slot(token, dim, seed)
        vec[index] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def _ngrams(tokens: list[str], ngram_range: tuple[int, int]) -> list[str]:
    lo, hi = ngram_range
    grams: list[str] = []
    for n in range(lo, hi + 1):
        if n == 1:
            grams.extend(tokens)
        else:
            grams.extend(
                " ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
            )
    return grams


@dataclass(frozen=True)
class TfidfVocabulary:
    """Fitted vocabulary: term -> (column index, idf weight)."""

    ngram_range: tuple[int, int]
    index: dict[str, int]
    idf: np.ndarray

    @property
    def size(self) -> int:
        return len(self.index)


def tfidf_fit(
    corpus: list[list[str]],
    ngram_range: tuple[int, int] = (1, 3),
    vocab_size: int = 5000,
) -> TfidfVocabulary:
    """Fit a TF-IDF vocabulary of the top-`vocab_size` n-grams.

    Terms rank by document frequency, ties broken lexicographically.
    idf(t) = ln((1 + |D|) / (1 + df(t))) + 1.
    """
    if not corpus:
        raise ValueError("empty corpus")
    df: dict[str, int] = {}
    for doc in corpus:
        for gram in set(_ngrams(doc, ngram_range)):
            df[gram] = df.get(gram, 0) + 1
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:vocab_size]
    index = {term: i for i, (term, _) in enumerate(ranked)}
    n_docs = len(corpus)
    idf = np.array(
        [np.log((1.0 + n_docs) / (1.0 + count)) + 1.0 for _, count in ranked],
        dtype=np.float64,
    )
    return TfidfVocabulary(ngram_range=ngram_range, index=index, idf=idf)


def tfidf_embed(tokens: list[str], vocab: TfidfVocabulary) -> np.ndarray:
    """tf * idf vector over the fitted vocabulary, L2-normalized.

    Out-of-vocabulary n-grams are ignored; a document with no in-vocabulary
    n-grams embeds to the zero vector.
    """
    vec = np.zeros(vocab.size, dtype=np.float64)
    for gram in _ngrams(tokens, vocab.ngram_range):
        col = vocab.index.get(gram)
        if col is not None:
            vec[col] += 1.0
    vec *= vocab.idf
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def chunk_tokens(tokens: list[str], chunk_size: int = 512) -> list[list[str]]:
    """Consecutive non-overlapping chunks; the last one may be short."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    return [tokens[i : i + chunk_size] for i in range(0, len(tokens), chunk_size)]


def pool_max(vectors: list[np.ndarray]) -> np.ndarray:
    """Elementwise maximum over a nonempty list of equal-length vectors."""
    if not vectors:
        raise ValueError("nothing to pool")
    stacked = np.stack(vectors, axis=0)
    return stacked.max(axis=0)


@dataclass
class EmbeddingStore:
    """Read-only map from sample id to a fixed-dimension vector."""

    dim: int | None = None
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, sample_id: str, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if self.dim is None:
            self.dim = int(vector.shape[0])
        elif vector.shape[0] != self.dim:
            raise ValueError(
                f"dimension mismatch for sample_id {sample_id!r}: "
                f"got {vector.shape[0]}, store dim {self.dim}"
            )
        self.vectors[sample_id] = vector

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self.vectors


def save_embeddings(store: EmbeddingStore, path) -> None:
    """Write a store as JSONL: header line, then one record per vector.

    Floats serialize via `repr`, which round-trips IEEE doubles exactly.
    An empty store with no declared dim writes an empty file.
    """
    with open(path, "w", encoding="utf-8") as fh:
        if store.dim is None:
            return
        fh.write(json.dumps({"format": EMBED_FORMAT, "version": EMBED_VERSION,
                             "dim": store.dim}) + "\n")
        for sample_id in store.vectors:
            record = {"sample_id": sample_id,
                      "vector": [float(x) for x in store.vectors[sample_id]]}
            fh.write(json.dumps(record) + "\n")


def load_embeddings(path) -> EmbeddingStore:
    """Load a JSONL embedding file written by `save_embeddings` (or the
    exporter). Raises ValueError with the line number on malformed lines
    and names the offending sample_id on dimension mismatches."""
    store = EmbeddingStore()
    with open(path, encoding="utf-8") as fh:
        header = None
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            if header is None:
                if not isinstance(obj, dict) or obj.get("format") != EMBED_FORMAT:
                    raise ValueError(
                        f"{path}: line {lineno}: expected header object with "
                        f'format "{EMBED_FORMAT}"'
                    )
                if obj.get("version") != EMBED_VERSION:
                    raise ValueError(f"{path}: unsupported version {obj.get('version')}")
                header = obj
                store.dim = int(obj["dim"])
                continue
            if "sample_id" not in obj or "vector" not in obj:
                raise ValueError(f"{path}: line {lineno}: record needs sample_id and vector")
            sample_id = obj["sample_id"]
            vector = np.asarray(obj["vector"], dtype=np.float64)
            if vector.ndim != 1 or vector.shape[0] != store.dim:
                raise ValueError(
                    f"{path}: dimension mismatch for sample_id {sample_id!r} "
                    f"on line {lineno}: got {vector.shape[0] if vector.ndim == 1 else vector.shape}, "
                    f"header dim {store.dim}"
                )
            store.vectors[sample_id] = vector
    return store
