"""Subword vocabulary construction and sentence-pair encoding.

The vocabulary is built by frequency-driven merging of adjacent subword
units (characters up), with "##" marking word-internal pieces. Encoding is
greedy longest-match-first over that vocabulary, with BERT's special-token
layout: [CLS] A [SEP] (B [SEP])? [PAD]...
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)
SPECIAL_IDS = frozenset(range(5))

_MAX_PIECE_CHARS = 64


@dataclass
class Vocab:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.token_to_id:
            self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if self.id_to_token[:5] != list(SPECIAL_TOKENS):
            raise ValueError(f"vocab must start with the special tokens {SPECIAL_TOKENS}")
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocab contains duplicate tokens")

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def non_special_size(self):
        return len(self.id_to_token) - len(SPECIAL_TOKENS)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# minibert vocab, one token per line, line number = id\n")
            fh.write("# lines starting with '# ' (hash space) are comments\n")
            for tok in self.id_to_token:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path):
        tokens = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# ") or not line:
                    continue
                tokens.append(line)
        return cls(tokens)


@dataclass
class TokenizedPair:
    ids: list[int]
    segments: list[int]
    attn_mask: list[int]
    word_boundaries: list[tuple[int, int]]

    def __post_init__(self):
        if not (len(self.ids) == len(self.segments) == len(self.attn_mask)):
            raise ValueError("ids, segments and attn_mask must have equal length")

    @property
    def length(self):
        return sum(self.attn_mask)


def pretokenize(text):
    """Lowercase and split into words: alphanumeric runs plus single
    punctuation characters."""
    words, current = [], []
    for ch in text.lower():
        if ch.isspace():
            if current:
                words.append("".join(current))
                current = []
        elif ch.isalnum():
            current.append(ch)
        else:
            if current:
                words.append("".join(current))
                current = []
            words.append(ch)
    if current:
        words.append("".join(current))
    return words


def _word_units(word):
    return [word[0]] + ["##" + c for c in word[1:]]


def build_vocab(corpus, target_size):
    """Frequency-merge subword units until the vocabulary reaches target_size.

    Every character seen in the corpus stays in the vocabulary (both in
    word-initial and "##" continuation form), so no line re-encodes to
    all-[UNK] regardless of target_size.
    """
    word_freq = Counter()
    for line in corpus:
        word_freq.update(pretokenize(line))
    if not word_freq:
        raise ValueError("cannot build a vocabulary from an empty corpus")

    alphabet = {c for w in word_freq for c in w}
    if target_size < len(SPECIAL_TOKENS) + len(alphabet):
        raise ValueError(
            f"target_size {target_size} is below specials + alphabet size "
            f"({len(SPECIAL_TOKENS)} + {len(alphabet)})"
        )

    words = {w: _word_units(w) for w in word_freq}
    base_units = sorted({u for units in words.values() for u in units})
    vocab_tokens = list(SPECIAL_TOKENS) + base_units
    seen = set(vocab_tokens)

    while len(vocab_tokens) < target_size:
        pair_freq = Counter()
        for w, units in words.items():
            f = word_freq[w]
            for i in range(len(units) - 1):
                pair_freq[(units[i], units[i + 1])] += f
        if not pair_freq:
            break
        best_count = max(pair_freq.values())
        first, second = min(p for p, c in pair_freq.items() if c == best_count)
        merged = first + second.removeprefix("##")
        for w, units in words.items():
            i = 0
            while i < len(units) - 1:
                if units[i] == first and units[i + 1] == second:
                    units[i : i + 2] = [merged]
                else:
                    i += 1
        if merged not in seen:
            vocab_tokens.append(merged)
            seen.add(merged)

    return Vocab(vocab_tokens)


def word_to_pieces(vocab, word):
    """Greedy longest-match-first segmentation; characters with no matching
    piece become [UNK] and scanning continues."""
    pieces = []
    i = 0
    while i < len(word):
        prefix = "" if i == 0 else "##"
        end = min(len(word), i + _MAX_PIECE_CHARS)
        match = None
        for j in range(end, i, -1):
            candidate = prefix + word[i:j]
            if candidate in vocab.token_to_id:
                match = (candidate, j)
                break
        if match is None:
            pieces.append(UNK)
            i += 1
        else:
            pieces.append(match[0])
            i = match[1]
    return pieces


def _sentence_pieces(vocab, text):
    """Per-word piece groups for one sentence."""
    return [word_to_pieces(vocab, w) for w in pretokenize(text)]


def _truncate_longest_first(groups_a, groups_b, budget):
    """Drop pieces from the end of the longer sentence until both fit."""
    flat_a = [p for g in groups_a for p in g]
    flat_b = [p for g in groups_b for p in g]
    sizes_a = [len(g) for g in groups_a]
    sizes_b = [len(g) for g in groups_b]
    while len(flat_a) + len(flat_b) > budget:
        if len(flat_a) >= len(flat_b):
            flat_a.pop()
            _shrink_last(sizes_a)
        else:
            flat_b.pop()
            _shrink_last(sizes_b)
    return _regroup(flat_a, sizes_a), _regroup(flat_b, sizes_b)


def _shrink_last(sizes):
    while sizes and sizes[-1] == 0:
        sizes.pop()
    if sizes:
        sizes[-1] -= 1
        if sizes[-1] == 0:
            sizes.pop()


def _regroup(flat, sizes):
    groups, i = [], 0
    for s in sizes:
        groups.append(flat[i : i + s])
        i += s
    return groups


def encode_pair(vocab, sentence_a, sentence_b=None, max_len=64):
    """Encode a sentence or sentence pair into the fixed [CLS]/[SEP] layout."""
    if max_len < 3:
        raise ValueError(f"max_len must be at least 3, got {max_len}")
    groups_a = _sentence_pieces(vocab, sentence_a)
    groups_b = _sentence_pieces(vocab, sentence_b) if sentence_b is not None else []
    n_specials = 3 if sentence_b is not None else 2
    groups_a, groups_b = _truncate_longest_first(groups_a, groups_b, max_len - n_specials)

    ids = [CLS_ID]
    boundaries = []
    for group in groups_a:
        if group:
            boundaries.append((len(ids), len(ids) + len(group)))
            ids.extend(vocab.token_to_id[p] for p in group)
    ids.append(SEP_ID)
    first_sep = len(ids) - 1
    if sentence_b is not None:
        for group in groups_b:
            if group:
                boundaries.append((len(ids), len(ids) + len(group)))
                ids.extend(vocab.token_to_id[p] for p in group)
        ids.append(SEP_ID)

    attn = [1] * len(ids) + [0] * (max_len - len(ids))
    if sentence_b is not None:
        segments = [0 if i <= first_sep else 1 for i in range(max_len)]
    else:
        segments = [0] * max_len
    ids = ids + [PAD_ID] * (max_len - len(ids))
    return TokenizedPair(ids=ids, segments=segments, attn_mask=attn, word_boundaries=boundaries)


def decode(vocab, ids):
    """Inverse of encoding for display: joins pieces, fusing "##" continuations."""
    words = []
    for i in ids:
        tok = vocab.id_to_token[i]
        if i in SPECIAL_IDS:
            continue
        if tok.startswith("##") and words:
            words[-1] += tok[2:]
        else:
            words.append(tok)
    return " ".join(words)
