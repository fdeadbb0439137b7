"""Pretrained word vectors: text-format loading and total lookup.

Vector files are plain text, one entry per line, ``word f1 f2 ... fd``
separated by single spaces, no header.  The dimension is inferred from
the first line.  Lookup never fails: exact match first, then the
lowercased token, then the unknown-word vector (the mean of all loaded
vectors).
"""

from __future__ import annotations

import io

import numpy as np


class EmbeddingError(ValueError):
    pass


class EmbeddingTable:
    def __init__(self, dim: int, entries: dict):
        if dim <= 0:
            raise EmbeddingError(f"dimension must be positive, got {dim}")
        self.dim = dim
        self.entries = entries
        for w, v in entries.items():
            if v.shape != (dim,):
                raise EmbeddingError(f"vector for {w!r} has length {v.shape}, expected {dim}")
        if entries:
            self.unk = np.mean(np.stack(list(entries.values())), axis=0)
        else:
            self.unk = np.zeros(dim)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, token: str) -> np.ndarray:
        v = self.entries.get(token)
        if v is not None:
            return v
        v = self.entries.get(token.lower())
        if v is not None:
            return v
        return self.unk


def load_text_embeddings(source) -> EmbeddingTable:
    """Load a text-format vector file from a path or open text stream.

    Duplicate words keep their first occurrence.  Raises on an empty
    file, a non-numeric field, or a row whose dimension disagrees with
    the first row.
    """
    if isinstance(source, io.TextIOBase):
        lines = source
        return _load_lines(lines)
    with open(source, encoding="utf-8") as fh:
        return _load_lines(fh)


def _load_lines(lines) -> EmbeddingTable:
    entries: dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split(" ")
        word, fields = parts[0], parts[1:]
        if dim is None:
            if not fields:
                raise EmbeddingError(f"line {lineno}: no vector components")
            dim = len(fields)
        elif len(fields) != dim:
            raise EmbeddingError(
                f"line {lineno}: expected {dim} components, got {len(fields)}"
            )
        try:
            vec = np.array([float(f) for f in fields], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingError(f"line {lineno}: non-numeric field") from exc
        if word not in entries:
            entries[word] = vec
    if dim is None:
        raise EmbeddingError("empty embedding file")
    return EmbeddingTable(dim, entries)


def from_vocabulary(words, dim: int, seed: int, scale: float = 0.5) -> EmbeddingTable:
    """Deterministic random table over a fixed vocabulary.

    Handy for synthetic corpora and tests where no pretrained file is
    available.
    """
    rng = np.random.default_rng(seed)
    ordered = sorted(set(words))
    entries = {w: rng.uniform(-scale, scale, size=dim) for w in ordered}
    return EmbeddingTable(dim, entries)
