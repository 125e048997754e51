import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minibert.tokenizer import (
    CLS_ID,
    MASK_ID,
    PAD_ID,
    SEP_ID,
    SPECIAL_IDS,
    UNK_ID,
    TokenizedPair,
    Vocab,
    build_vocab,
    decode,
    encode_pair,
    pretokenize,
    word_to_pieces,
)

WORDS = ["the", "movie", "was", "great", "awful", "fun", "boring", "a", "cat", "sat"]


@pytest.fixture(scope="module")
def vocab():
    rng = np.random.default_rng(0)
    corpus = [" ".join(rng.choice(WORDS, size=5)) for _ in range(300)]
    return build_vocab(corpus, target_size=80)


def test_reserved_special_ids(vocab):
    assert vocab.id_to_token[:5] == ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    assert (PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID) == (0, 1, 2, 3, 4)


def test_minimal_corpus():
    v = build_vocab(["aa aa", "ab"], target_size=10)
    assert "a" in v
    assert len(v) >= 5
    pair = encode_pair(v, "aa", max_len=8)
    assert decode(v, pair.ids) == "aa"


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        build_vocab([], target_size=10)
    with pytest.raises(ValueError):
        build_vocab(["   ", ""], target_size=10)


def test_target_below_alphabet_rejected():
    with pytest.raises(ValueError, match="target_size"):
        build_vocab(["abcdefgh"], target_size=6)


def test_vocab_size_close_to_target(vocab):
    # merging may stop early on tiny corpora but never overshoots by a merge
    assert len(vocab) <= 80
    assert len(vocab) > 5


def test_unk_fraction_on_build_corpus_below_one_percent():
    rng = np.random.default_rng(1)
    corpus = [" ".join(rng.choice(WORDS, size=4)) for _ in range(1000)]
    v = build_vocab(corpus, target_size=200)
    total = unk = 0
    for line in corpus:
        for w in pretokenize(line):
            for p in word_to_pieces(v, w):
                total += 1
                unk += p == "[UNK]"
    assert unk / total < 0.01


def test_roundtrip_every_vocab_word(vocab):
    for tok in vocab.id_to_token[5:]:
        if tok.startswith("##"):
            continue
        pair = encode_pair(vocab, tok, max_len=32)
        assert decode(vocab, pair.ids) == tok


def test_empty_sentence_layout(vocab):
    pair = encode_pair(vocab, "", None, max_len=8)
    assert pair.ids == [CLS_ID, SEP_ID] + [PAD_ID] * 6
    assert pair.segments == [0] * 8
    assert pair.attn_mask == [1, 1] + [0] * 6
    assert pair.word_boundaries == []


def test_single_sentence_layout():
    v = build_vocab(
        ["a visually stunning rumination on love", "the movie was fun"], target_size=60
    )
    pair = encode_pair(v, "a visually stunning rumination on love", None, max_len=16)
    assert pair.ids[0] == CLS_ID
    assert pair.ids.count(SEP_ID) == 1
    assert pair.segments == [0] * 16


def test_pair_layout(vocab):
    pair = encode_pair(vocab, "ab", "ab", max_len=10)
    assert pair.ids.count(SEP_ID) == 2
    assert 0 in pair.segments and 1 in pair.segments
    first_sep = pair.ids.index(SEP_ID)
    assert all(s == 0 for s in pair.segments[: first_sep + 1])
    assert all(s == 1 for s in pair.segments[first_sep + 1 :])


def test_unknown_characters_become_unk(vocab):
    pair = encode_pair(vocab, "the é movie", max_len=16)
    assert UNK_ID in pair.ids


def test_truncation_drops_from_longer_sentence_first(vocab):
    long_a = "the movie was great fun and the cat sat"
    short_b = "awful"
    pair = encode_pair(vocab, long_a, short_b, max_len=12)
    assert len(pair.ids) == 12
    assert pair.ids.count(SEP_ID) == 2
    # sentence b survives intact: its single word is still decodable
    seg1 = [i for i, s in zip(pair.ids, pair.segments) if s == 1 and i != SEP_ID and i != PAD_ID]
    assert decode(vocab, seg1) == "awful"


def test_word_boundaries_partition_non_special_positions(vocab):
    pair = encode_pair(vocab, "the movie was great", "boring cat", max_len=20)
    covered = []
    for start, end in pair.word_boundaries:
        assert start < end
        covered.extend(range(start, end))
    expected = [
        pos
        for pos, (i, m) in enumerate(zip(pair.ids, pair.attn_mask))
        if m == 1 and i not in SPECIAL_IDS
    ]
    assert sorted(covered) == covered == expected


def test_encoding_deterministic(vocab):
    a = encode_pair(vocab, "the movie was great", "boring cat", max_len=20)
    b = encode_pair(vocab, "the movie was great", "boring cat", max_len=20)
    assert a == b


def test_max_len_too_small(vocab):
    with pytest.raises(ValueError):
        encode_pair(vocab, "a", max_len=2)


def test_vocab_file_roundtrip(vocab, tmp_path):
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    loaded = Vocab.load(path)
    assert loaded.id_to_token == vocab.id_to_token


def test_vocab_file_hash_token_survives_comments(tmp_path):
    v = build_vocab(["a # b ## c"], target_size=16)
    assert "#" in v
    path = tmp_path / "vocab.txt"
    v.save(path)
    assert Vocab.load(path).id_to_token == v.id_to_token


def test_mismatched_field_lengths_rejected():
    with pytest.raises(ValueError):
        TokenizedPair(ids=[2, 3], segments=[0], attn_mask=[1, 1], word_boundaries=[])


@settings(max_examples=50, deadline=None)
@given(
    a=st.text(alphabet="abcdef .,", max_size=40),
    b=st.one_of(st.none(), st.text(alphabet="abcdef .,", max_size=40)),
    max_len=st.integers(min_value=3, max_value=24),
)
def test_encode_invariants_hold_for_all_inputs(a, b, max_len):
    v = build_vocab(["abc def fed cab . ,"], target_size=20)
    pair = encode_pair(v, a, b, max_len=max_len)
    assert len(pair.ids) == len(pair.segments) == len(pair.attn_mask) == max_len
    assert pair.ids[0] == CLS_ID
    assert all(0 <= i < len(v) for i in pair.ids)
    # padding has mask 0 and id [PAD]
    for i, m in zip(pair.ids, pair.attn_mask):
        assert (m == 0) == (i == PAD_ID)
    # segments flip at most once, from 0 to 1
    flips = sum(s2 != s1 for s1, s2 in zip(pair.segments, pair.segments[1:]))
    assert flips <= 1
    assert pair.segments[0] == 0
    expected_seps = 1 if b is None else 2
    assert pair.ids.count(SEP_ID) == expected_seps
