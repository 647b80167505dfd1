"""Convert a samples file into a contextfed embedding-store JSONL file.

Input: UTF-8 text, one `sample_id<TAB>text` per line (the format the
simulator's `embed --mode samples` subcommand emits). Output: the JSONL
embedding schema — a header object
`{"format": "contextfed-embed", "version": 1, "dim": N}` followed by one
`{"sample_id": ..., "vector": [...]}` record per input line.

Encoders:
  st:<model-name>   a sentence-transformers model run in eval mode; one
                    vector per sample, dim = the model's hidden size.
                    Token states pool to a sentence vector by mean pooling
                    (default) or the first-token state (--pooling cls).
  hash:<dim>[:<seed>]  a deterministic offline encoder: each token maps to
                    a seeded pseudo-random unit vector and the token states
                    pool the same way. No weights, no network; meant for
                    environments without model files and for tests.

A plain model name with no scheme is treated as `st:`.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass

import numpy as np

EMBED_FORMAT = "contextfed-embed"
EMBED_VERSION = 1

MEAN_POOLING = "mean"
CLS_POOLING = "cls"


class EncoderError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExportJob:
    input_path: str
    output_path: str
    encoder: str = "hash:256"
    batch_size: int = 32
    pooling: str = MEAN_POOLING


def read_samples(path) -> list[tuple[str, str]]:
    samples: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected sample_id<TAB>text")
            sample_id, text = line.split("\t", 1)
            samples.append((sample_id, text))
    return samples


class HashEncoder:
    """Deterministic stand-in encoder: token states from seeded hashes."""

    def __init__(self, dim: int, seed: int = 0, pooling: str = MEAN_POOLING):
        if dim < 1:
            raise EncoderError("hash encoder dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self.pooling = pooling

    def _token_state(self, token: str) -> np.ndarray:
        key = self.seed.to_bytes(16, "little", signed=True)
        state = np.empty(self.dim, dtype=np.float64)
        counter = 0
        produced = 0
        while produced < self.dim:
            digest = hashlib.blake2b(
                token.encode("utf-8") + counter.to_bytes(4, "little"),
                digest_size=32, key=key,
            ).digest()
            for off in range(0, 32, 8):
                if produced == self.dim:
                    break
                raw = int.from_bytes(digest[off : off + 8], "little")
                state[produced] = (raw >> 11) / float(1 << 53) * 2.0 - 1.0
                produced += 1
            counter += 1
        norm = float(np.linalg.norm(state))
        return state / norm if norm > 0 else state

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = text.split()
            if not tokens:
                continue
            states = [self._token_state(t) for t in tokens]
            out[i] = states[0] if self.pooling == CLS_POOLING else np.mean(states, axis=0)
        return out


class SentenceTransformerEncoder:
    """Real pre-trained encoder via sentence-transformers (eval mode)."""

    def __init__(self, model_name: str, pooling: str = MEAN_POOLING):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                "sentence-transformers is not installed; install the [st] extra"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderError(f"failed to load encoder {model_name!r}: {exc}") from exc
        self._model.eval()
        if pooling == CLS_POOLING:
            # swap the pooling module's mode when the model exposes one
            for module in self._model.modules():
                if hasattr(module, "pooling_mode_mean_tokens"):
                    module.pooling_mode_mean_tokens = False
                    module.pooling_mode_cls_token = True
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        import torch

        with torch.no_grad():
            vectors = self._model.encode(texts, convert_to_numpy=True,
                                         show_progress_bar=False,
                                         normalize_embeddings=False)
        return np.asarray(vectors, dtype=np.float64)


def build_encoder(name: str, pooling: str):
    if name.startswith("hash:"):
        parts = name.split(":")
        dim = int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else 0
        return HashEncoder(dim, seed, pooling)
    if name.startswith("st:"):
        return SentenceTransformerEncoder(name[3:], pooling)
    return SentenceTransformerEncoder(name, pooling)


def export(job: ExportJob) -> int:
    """Embed every sample and write the store; returns the record count."""
    if job.pooling not in (MEAN_POOLING, CLS_POOLING):
        raise ValueError(f"unknown pooling {job.pooling!r}")
    if job.batch_size < 1:
        raise ValueError("batch size must be >= 1")
    encoder = build_encoder(job.encoder, job.pooling)
    samples = read_samples(job.input_path)

    with open(job.output_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": EMBED_FORMAT, "version": EMBED_VERSION,
                             "dim": encoder.dim}) + "\n")
        for start in range(0, len(samples), job.batch_size):
            batch = samples[start : start + job.batch_size]
            vectors = encoder.encode([text for _, text in batch])
            if vectors.shape != (len(batch), encoder.dim):
                raise EncoderError(
                    f"encoder returned shape {vectors.shape}, expected "
                    f"({len(batch)}, {encoder.dim})"
                )
            for (sample_id, _), vector in zip(batch, vectors):
                record = {"sample_id": sample_id,
                          "vector": [float(x) for x in vector]}
                fh.write(json.dumps(record) + "\n")
    return len(samples)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="contextfed-export",
        description="Embed a samples file into a contextfed embedding store",
    )
    parser.add_argument("--in", dest="input_path", required=True,
                        help="samples file: sample_id<TAB>text per line")
    parser.add_argument("--out", dest="output_path", required=True)
    parser.add_argument("--encoder", default="hash:256",
                        help="st:<model>, bare model name, or hash:<dim>[:<seed>]")
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--pooling", choices=[MEAN_POOLING, CLS_POOLING],
                        default=MEAN_POOLING)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    job = ExportJob(input_path=args.input_path, output_path=args.output_path,
                    encoder=args.encoder, batch_size=args.batch,
                    pooling=args.pooling)
    try:
        count = export(job)
    except (EncoderError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} records to {job.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
