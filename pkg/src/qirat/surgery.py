"""Tokenizer and embedding-table surgery.

Covers training a small BPE tokenizer, intersecting two vocabularies,
trimming an embedding table down to the kept tokens, extending it with new
tokens initialized as the mean of their subtoken rows, and transformer
parameter accounting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

END_OF_WORD = "</w>"

UNK_TOKEN = "<unk>"
PAD_TOKEN = "<pad>"
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
SPECIAL_TOKENS = [UNK_TOKEN, PAD_TOKEN, BOS_TOKEN, EOS_TOKEN]


@dataclass
class TokenizerModel:
    """BPE tokenizer: base alphabet plus an ordered merge list.

    Ids are dense: special tokens first, then the alphabet (sorted), then one
    token per merge in training order. Words end with the ``</w>`` marker.
    """

    alphabet: list[str]
    merges: list[tuple[str, str]]
    token_to_id: dict[str, int]
    specials: list[str] = field(default_factory=lambda: list(SPECIAL_TOKENS))

    def __post_init__(self) -> None:
        known = set(self.specials) | set(self.alphabet)
        for a, b in self.merges:
            if a not in known or b not in known:
                raise ValueError(f"merge ({a!r}, {b!r}) references unknown parts")
            known.add(a + b)
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise ValueError("token ids must be dense 0..vocab-1")

    @property
    def vocab_size(self) -> int:
        return len(self.token_to_id)

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    def tokens(self) -> list[str]:
        """Vocabulary ordered by id."""
        by_id = sorted(self.token_to_id.items(), key=lambda kv: kv[1])
        return [tok for tok, _ in by_id]

    def _word_symbols(self, word: str) -> list[str]:
        symbols = list(word)
        symbols[-1] += END_OF_WORD
        for a, b in self.merges:
            merged = a + b
            i = 0
            out = []
            while i < len(symbols):
                if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            symbols = out
        return symbols

    def encode_tokens(self, text: str) -> list[str]:
        """Token strings for a text; unknown symbols become the UNK token."""
        tokens = []
        for word in text.split():
            for sym in self._word_symbols(word):
                tokens.append(sym if sym in self.token_to_id else UNK_TOKEN)
        return tokens

    def encode(self, text: str) -> list[int]:
        return [self.token_to_id[t] for t in self.encode_tokens(text)]

    def decode(self, ids: Sequence[int]) -> str:
        by_id = {i: t for t, i in self.token_to_id.items()}
        text = "".join(by_id[i] for i in ids)
        return text.replace(END_OF_WORD, " ").strip()

    def save(self, path: str | Path) -> None:
        doc = {
            "alphabet": self.alphabet,
            "merges": [list(m) for m in self.merges],
            "token_to_id": self.token_to_id,
            "specials": self.specials,
            "end_of_word": END_OF_WORD,
        }
        Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TokenizerModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            alphabet=doc["alphabet"],
            merges=[tuple(m) for m in doc["merges"]],
            token_to_id=doc["token_to_id"],
            specials=doc["specials"],
        )


def train_bpe(corpus: Iterable[str], vocab_size: int) -> TokenizerModel:
    """Train a BPE tokenizer with whitespace pre-tokenization.

    ``vocab_size`` counts alphabet plus merged tokens (special tokens come on
    top). Merging stops early when no adjacent pair occurs twice. Frequency
    ties break on the lexicographically smallest pair.
    """
    word_freq: dict[str, int] = {}
    for line in corpus:
        for word in line.split():
            word_freq[word] = word_freq.get(word, 0) + 1
    if not word_freq:
        raise ValueError("cannot train a tokenizer on an empty corpus")

    words: list[tuple[list[str], int]] = []
    alphabet_set: set[str] = set()
    for word, freq in word_freq.items():
        symbols = list(word)
        symbols[-1] += END_OF_WORD
        alphabet_set.update(symbols)
        words.append((symbols, freq))
    alphabet = sorted(alphabet_set)
    if vocab_size < len(alphabet):
        raise ValueError(
            f"vocab_size {vocab_size} is below the corpus alphabet size {len(alphabet)}"
        )

    merges: list[tuple[str, str]] = []
    while len(alphabet) + len(merges) < vocab_size:
        pair_freq: dict[tuple[str, str], int] = {}
        for symbols, freq in words:
            for i in range(len(symbols) - 1):
                pair = (symbols[i], symbols[i + 1])
                pair_freq[pair] = pair_freq.get(pair, 0) + freq
        if not pair_freq:
            break
        best = min(pair_freq.items(), key=lambda kv: (-kv[1], kv[0]))
        if best[1] < 2:
            break
        a, b = best[0]
        merges.append((a, b))
        merged = a + b
        for symbols, _ in words:
            i = 0
            while i < len(symbols) - 1:
                if symbols[i] == a and symbols[i + 1] == b:
                    symbols[i:i + 2] = [merged]
                else:
                    i += 1

    token_to_id: dict[str, int] = {}
    for tok in SPECIAL_TOKENS:
        token_to_id[tok] = len(token_to_id)
    for tok in alphabet:
        token_to_id[tok] = len(token_to_id)
    for a, b in merges:
        token = a + b
        if token not in token_to_id:
            token_to_id[token] = len(token_to_id)
    return TokenizerModel(alphabet, merges, token_to_id)


@dataclass
class EmbeddingTable:
    """vocab_size x d weight table; row index = token id."""

    weights: np.ndarray
    tokens: list[str]

    def __post_init__(self) -> None:
        if self.weights.ndim != 2:
            raise ValueError("embedding table must be 2-D")
        if self.weights.shape[0] != len(self.tokens):
            raise ValueError("row count must equal vocabulary size")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("embedding table contains NaN/Inf")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate token in vocabulary")

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def row(self, token: str) -> np.ndarray:
        return self.weights[self.tokens.index(token)]


@dataclass
class SurgeryReport:
    kept: int
    dropped: int
    added: int
    old_vocab: int
    new_vocab: int
    old_params: int
    new_params: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kept": self.kept,
            "dropped": self.dropped,
            "added": self.added,
            "old_vocab": self.old_vocab,
            "new_vocab": self.new_vocab,
            "old_params": self.old_params,
            "new_params": self.new_params,
            "notes": self.notes,
        }


def intersect_vocab(original: TokenizerModel, fresh: TokenizerModel) -> list[str]:
    """Tokens present in both vocabularies, ordered by original-model id.

    Special tokens are always kept.
    """
    fresh_tokens = set(fresh.token_to_id)
    kept = []
    for token in original.tokens():
        if token in fresh_tokens or token in original.specials:
            kept.append(token)
    return kept


def reduce_embeddings(
    table: EmbeddingTable, kept: Sequence[str]
) -> tuple[EmbeddingTable, dict[int, int], SurgeryReport]:
    """Keep only the rows of ``kept`` tokens, bit-identically, in kept order."""
    index = {t: i for i, t in enumerate(table.tokens)}
    missing = [t for t in kept if t not in index]
    if missing:
        raise ValueError(f"kept tokens missing from the table: {missing[:5]}")
    old_rows = [index[t] for t in kept]
    new_weights = table.weights[old_rows].copy()
    remap = {old: new for new, old in enumerate(old_rows)}
    reduced = EmbeddingTable(new_weights, list(kept))
    report = SurgeryReport(
        kept=len(kept),
        dropped=table.vocab_size - len(kept),
        added=0,
        old_vocab=table.vocab_size,
        new_vocab=reduced.vocab_size,
        old_params=table.vocab_size * table.dim,
        new_params=reduced.vocab_size * reduced.dim,
    )
    return reduced, remap, report


def extend_vocab(
    table: EmbeddingTable, tokenizer: TokenizerModel, new_tokens: Sequence[str]
) -> tuple[EmbeddingTable, SurgeryReport]:
    """Append new tokens with rows = mean of their subtoken rows.

    Subtoken decomposition uses ``tokenizer`` (the post-reduction model);
    tokens already present are skipped with a report note.
    """
    index = {t: i for i, t in enumerate(table.tokens)}
    notes: list[str] = []
    appended_tokens: list[str] = []
    appended_rows: list[np.ndarray] = []
    for token in new_tokens:
        if token in index or token in appended_tokens:
            notes.append(f"skipped duplicate token {token!r}")
            continue
        subtokens = tokenizer.encode_tokens(token)
        rows = [index[s] for s in subtokens if s != UNK_TOKEN and s in index]
        if not rows:
            raise ValueError(f"new token {token!r} has no known subtokens")
        appended_tokens.append(token)
        appended_rows.append(table.weights[rows].mean(axis=0, dtype=table.weights.dtype))
    if appended_rows:
        new_weights = np.vstack([table.weights, np.stack(appended_rows)])
    else:
        new_weights = table.weights.copy()
    extended = EmbeddingTable(new_weights, table.tokens + appended_tokens)
    report = SurgeryReport(
        kept=table.vocab_size,
        dropped=0,
        added=len(appended_tokens),
        old_vocab=table.vocab_size,
        new_vocab=extended.vocab_size,
        old_params=table.vocab_size * table.dim,
        new_params=extended.vocab_size * extended.dim,
        notes=notes,
    )
    return extended, report


@dataclass(frozen=True)
class ModelShape:
    vocab_size: int
    hidden: int
    layers: int
    ffn: int
    max_positions: int
    type_vocab: int = 1

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


def count_params(shape: ModelShape) -> tuple[int, int, int]:
    """(embedding params, encoder params, total) for a BERT-family encoder.

    Embedding block: token + position + type embeddings plus its layer norm.
    Per layer: QKV+output projections with biases, the two feed-forward
    projections with biases, and two layer norms. The masked-LM head is
    excluded by convention.
    """
    d = shape.hidden
    embedding = (shape.vocab_size + shape.max_positions + shape.type_vocab) * d + 2 * d
    per_layer = (
        4 * (d * d + d)              # Q, K, V, attention output
        + (d * shape.ffn + shape.ffn)  # feed-forward up
        + (shape.ffn * d + d)          # feed-forward down
        + 2 * 2 * d                    # two layer norms
    )
    encoder = shape.layers * per_layer
    return embedding, encoder, embedding + encoder


def vocab_embedding_params(shape: ModelShape) -> int:
    """The vocabulary-embedding share alone (the dominant term)."""
    return shape.vocab_size * shape.hidden


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    """Persist a table in the shared binary format with a ``.vocab`` sidecar
    (one token per line, line n = row n)."""
    from . import formats

    path = Path(path)
    with open(path, "wb") as f:
        formats.write_header(
            f, formats.MAGIC_EMBEDDINGS, np.dtype(np.float32), False,
            table.dim, table.vocab_size,
        )
        f.write(np.ascontiguousarray(table.weights, dtype="<f4").tobytes())
    path.with_suffix(".vocab").write_text(
        "".join(t + "\n" for t in table.tokens), encoding="utf-8"
    )


def load_table(path: str | Path) -> EmbeddingTable:
    from . import formats
    from .errors import TruncatedFileError

    path = Path(path)
    with open(path, "rb") as f:
        dtype, _, dim, count = formats.read_header(f, formats.MAGIC_EMBEDDINGS)
        weights = formats.read_array(f, dtype, (count, dim)).astype(np.float32)
    tokens = path.with_suffix(".vocab").read_text(encoding="utf-8").splitlines()
    if len(tokens) != count:
        raise TruncatedFileError(
            f"vocab sidecar has {len(tokens)} lines but table declares {count} rows"
        )
    return EmbeddingTable(weights, tokens)
