"""Corpus ingestion: vocabulary, datasets, pretrained vectors, padded batches.

File formats (all UTF-8, whitespace-pretokenized):
  single sentences: ``label<TAB>tok tok tok``
  sentence pairs:   ``label<TAB>hypothesis toks<TAB>premise toks``
  embeddings:       ``token v1 v2 ... v_dim`` per line
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .encoder import PAD_ID, UNK_ID, EmbeddingTable

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


class DataError(Exception):
    pass


class Vocab:
    """token <-> id maps with ids 0/1 reserved for padding and unknowns."""

    def __init__(self, id_to_token):
        if id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise DataError("vocab must reserve ids 0/1 for the pad/unk tokens")
        self.id_to_token = list(id_to_token)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}

    def __len__(self):
        return len(self.id_to_token)

    def id(self, token):
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens):
        return np.array([self.id(t) for t in tokens], dtype=np.int64)

    @classmethod
    def from_tokens(cls, id_to_token):
        return cls(id_to_token)


def build_vocab(corpus, min_count=1):
    """Vocabulary over token lists: frequency desc, ties lexicographic.

    Tokens below ``min_count`` fall back to the unknown id.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for tokens in corpus:
        counts.update(tokens)
    if not counts:
        raise DataError("empty corpus")
    kept = sorted((tok for tok, c in counts.items() if c >= min_count),
                  key=lambda tok: (-counts[tok], tok))
    return Vocab([PAD_TOKEN, UNK_TOKEN] + kept)


@dataclass
class Example:
    tokens: np.ndarray
    label: int


@dataclass
class PairExample:
    hypothesis: np.ndarray
    premise: np.ndarray
    label: int


def _tokenize(text, lowercase):
    return (text.lower() if lowercase else text).split()


def _parse_line(line, lineno, path, vocab, pairs, lowercase):
    cells = line.rstrip("\n").split("\t")
    want = 3 if pairs else 2
    if len(cells) != want:
        raise DataError(f"{path}:{lineno}: expected {want} tab-separated fields, got {len(cells)}")
    try:
        label = int(cells[0])
    except ValueError:
        raise DataError(f"{path}:{lineno}: label is not an integer: {cells[0]!r}") from None
    if label < 0:
        raise DataError(f"{path}:{lineno}: label must be >= 0")
    token_lists = [_tokenize(cell, lowercase) for cell in cells[1:]]
    if any(not toks for toks in token_lists):
        raise DataError(f"{path}:{lineno}: empty sentence")
    if pairs:
        return PairExample(vocab.encode(token_lists[0]), vocab.encode(token_lists[1]), label)
    return Example(vocab.encode(token_lists[0]), label)


def load_dataset(path, vocab, pairs=False, lowercase=False):
    """Parse a labeled dataset file into examples; unknown words map to UNK."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            examples.append(_parse_line(line, lineno, path, vocab, pairs, lowercase))
    if not examples:
        raise DataError(f"{path}: no examples")
    return examples


def corpus_tokens(path, pairs=False, lowercase=False):
    """Token lists of a dataset file, for vocabulary building."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            want = 3 if pairs else 2
            if len(cells) != want:
                raise DataError(f"{path}:{lineno}: expected {want} tab-separated fields, got {len(cells)}")
            for cell in cells[1:]:
                out.append(_tokenize(cell, lowercase))
    return out


def load_pretrained(path, vocab, dim, rng, dtype=T.DEFAULT_DTYPE):
    """Embedding table seeded from a whitespace text file of vectors.

    Vocabulary rows found in the file take the file's values; the rest stay
    randomly initialized. Returns the table and the coverage ratio over
    non-reserved vocabulary tokens.
    """
    table = EmbeddingTable.random(len(vocab), dim, rng, dtype)
    covered = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            idx = vocab.token_to_id.get(token)
            if idx is None or idx in (PAD_ID, UNK_ID):
                continue
            try:
                table.table.data[idx] = np.array([float(v) for v in values], dtype=dtype)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector component") from None
            covered += 1
    real = max(len(vocab) - 2, 1)
    return table, covered / real


@dataclass
class Batch:
    tokens: np.ndarray  # B x L int
    mask: np.ndarray    # B x L bool
    labels: np.ndarray  # B

    def __len__(self):
        return self.tokens.shape[0]


@dataclass
class PairBatch:
    hyp_tokens: np.ndarray
    hyp_mask: np.ndarray
    prem_tokens: np.ndarray
    prem_mask: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.hyp_tokens.shape[0]


def _pad_block(token_lists):
    width = max(len(t) for t in token_lists)
    tokens = np.full((len(token_lists), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(token_lists), width), dtype=bool)
    for i, toks in enumerate(token_lists):
        tokens[i, :len(toks)] = toks
        mask[i, :len(toks)] = True
    return tokens, mask


def batch(examples, size, rng=None):
    """Shuffle (when given an rng) and pad; every batch pads to its own max length."""
    if size < 1:
        raise ValueError("batch size must be >= 1")
    order = np.arange(len(examples))
    if rng is not None:
        order = rng.permutation(len(examples))
    batches = []
    for start in range(0, len(examples), size):
        chunk = [examples[i] for i in order[start:start + size]]
        labels = np.array([ex.label for ex in chunk], dtype=np.int64)
        if isinstance(chunk[0], PairExample):
            hyp_tokens, hyp_mask = _pad_block([ex.hypothesis for ex in chunk])
            prem_tokens, prem_mask = _pad_block([ex.premise for ex in chunk])
            batches.append(PairBatch(hyp_tokens, hyp_mask, prem_tokens, prem_mask, labels))
        else:
            tokens, mask = _pad_block([ex.tokens for ex in chunk])
            batches.append(Batch(tokens, mask, labels))
    return batches
