"""Training-corruption generators.

Every operation is a pure function of (inputs, seed): token-level masking
with the 80/10/10 action split, whole-word masking over word boundaries,
geometric span masking, denoising corruptions (deletion, sentence-block
shuffling), and replaced-token-detection labeling. Special-token and
padding positions are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from minibert.tokenizer import CLS_ID, MASK_ID, PAD_ID, SEP_ID, SPECIAL_IDS, TokenizedPair, Vocab

IGNORE = -1
ORIGINAL, REPLACED = 0, 1

_N_SPECIALS = len(SPECIAL_IDS)


class Action(IntEnum):
    KEEP = 0
    MASKED = 1
    RANDOM = 2
    UNCHANGED_SELECTED = 3
    DELETED = 4


SELECTED_ACTIONS = (Action.MASKED, Action.RANDOM, Action.UNCHANGED_SELECTED)


@dataclass
class CorruptionPlan:
    input_ids: list[int]
    labels: list[int]
    action: list[Action]
    rng_seed: int
    saturated: bool = False

    def selected_positions(self):
        return [i for i, a in enumerate(self.action) if a in SELECTED_ACTIONS]

    def masked_positions(self):
        return [i for i, a in enumerate(self.action) if a == Action.MASKED]


@dataclass
class RtdExample:
    input_ids: list[int]
    rtd_labels: list[int]
    attn_mask: list[int] = field(default_factory=list)


def eligible_positions(pair):
    """Positions open to corruption: real tokens that are not specials."""
    return [
        i
        for i, (tok, m) in enumerate(zip(pair.ids, pair.attn_mask))
        if m == 1 and tok not in SPECIAL_IDS
    ]


def _require_rate(rate, lo_open=True):
    if not (0.0 < rate < 1.0 if lo_open else 0.0 <= rate < 1.0):
        raise ValueError(f"rate must lie in {'(0, 1)' if lo_open else '[0, 1)'}, got {rate}")


def _random_replacement(rng, vocab):
    return int(rng.integers(_N_SPECIALS, len(vocab)))


def _require_replaceable(vocab):
    if vocab.non_special_size() == 0:
        raise ValueError("vocabulary has no non-special tokens; random replacement is impossible")


def _draw_action(rng):
    u = rng.random()
    if u < 0.8:
        return Action.MASKED
    if u < 0.9:
        return Action.RANDOM
    return Action.UNCHANGED_SELECTED


def _fresh_plan(pair, seed):
    return CorruptionPlan(
        input_ids=list(pair.ids),
        labels=[IGNORE] * len(pair.ids),
        action=[Action.KEEP] * len(pair.ids),
        rng_seed=seed,
    )


def _apply(plan, pair, pos, action, rng, vocab):
    plan.action[pos] = action
    plan.labels[pos] = pair.ids[pos]
    if action == Action.MASKED:
        plan.input_ids[pos] = MASK_ID
    elif action == Action.RANDOM:
        plan.input_ids[pos] = _random_replacement(rng, vocab)


def mlm_corrupt(pair, vocab, select_rate=0.15, seed=0):
    """Independent per-position selection; selected positions are masked,
    randomized or kept with probability 0.8 / 0.1 / 0.1."""
    _require_rate(select_rate)
    _require_replaceable(vocab)
    rng = np.random.default_rng(seed)
    plan = _fresh_plan(pair, seed)
    for pos in eligible_positions(pair):
        if rng.random() < select_rate:
            _apply(plan, pair, pos, _draw_action(rng), rng, vocab)
    return plan


def wwm_corrupt(pair, vocab, select_rate=0.15, seed=0):
    """Whole-word masking: selection and action class are drawn once per
    word; every subword of a selected word gets that class, labeled with its
    own original id."""
    _require_rate(select_rate)
    _require_replaceable(vocab)
    rng = np.random.default_rng(seed)
    plan = _fresh_plan(pair, seed)
    for start, end in pair.word_boundaries:
        if rng.random() < select_rate:
            action = _draw_action(rng)
            for pos in range(start, end):
                _apply(plan, pair, pos, action, rng, vocab)
    return plan


def sample_span_length(rng, geo_p, max_span):
    """Geometric(geo_p) span length on {1, 2, ...}, clipped to max_span."""
    return min(int(rng.geometric(geo_p)), max_span)


def span_corrupt(pair, vocab, mask_budget, geo_p=0.2, max_span=10, seed=0, attempt_limit=1000):
    """Mask contiguous spans with geometric lengths until the masked count
    reaches mask_budget x eligible count.

    Spans overlapping specials, padding or already-masked positions are
    rejected and redrawn; after attempt_limit consecutive rejections the
    plan is returned as-is with saturated=True.
    """
    _require_rate(mask_budget)
    _require_rate(geo_p)
    if max_span < 1:
        raise ValueError(f"max_span must be >= 1, got {max_span}")
    rng = np.random.default_rng(seed)
    plan = _fresh_plan(pair, seed)
    eligible = eligible_positions(pair)
    eligible_set = set(eligible)
    if not eligible:
        return plan
    target = mask_budget * len(eligible)
    masked = set()
    rejections = 0
    while len(masked) < target:
        if rejections >= attempt_limit:
            plan.saturated = True
            break
        length = sample_span_length(rng, geo_p, max_span)
        start = eligible[int(rng.integers(len(eligible)))]
        span = range(start, start + length)
        if all(p in eligible_set and p not in masked for p in span):
            for pos in span:
                _apply(plan, pair, pos, Action.MASKED, rng, vocab)
                masked.add(pos)
            rejections = 0
        else:
            rejections += 1
    return plan


def _sentence_blocks(pair):
    """Split ids into ([CLS], block_a, [SEP], block_b?, [SEP]?) structure."""
    real = [tok for tok, m in zip(pair.ids, pair.attn_mask) if m == 1]
    sep_positions = [i for i, tok in enumerate(real) if tok == SEP_ID]
    blocks = []
    prev = 1  # skip [CLS]
    for sp in sep_positions:
        blocks.append(real[prev:sp])
        prev = sp + 1
    return blocks


def dae_corrupt(pair, delete_rate, shuffle_sentences=False, seed=0):
    """Denoising corruption: independent token deletion and/or sentence-block
    shuffling. Returns (corrupted ids, clean original ids)."""
    _require_rate(delete_rate, lo_open=False)
    rng = np.random.default_rng(seed)
    blocks = _sentence_blocks(pair)
    corrupted_blocks = []
    for block in blocks:
        kept = [tok for tok in block if not (rng.random() < delete_rate)]
        corrupted_blocks.append(kept)
    if shuffle_sentences and len(corrupted_blocks) > 1:
        order = rng.permutation(len(corrupted_blocks))
        corrupted_blocks = [corrupted_blocks[i] for i in order]
    ids = [CLS_ID]
    for block in corrupted_blocks:
        ids.extend(block)
        ids.append(SEP_ID)
    ids.extend([PAD_ID] * (len(pair.ids) - len(ids)))
    return ids, list(pair.ids)


def rtd_label(pair, plan, generator_ids):
    """Fill the plan's MASKED slots with generator predictions and mark each
    position REPLACED exactly where the prediction differs from the original."""
    masked = plan.masked_positions()
    if len(generator_ids) != len(masked):
        raise ValueError(
            f"generator produced {len(generator_ids)} ids for {len(masked)} masked positions"
        )
    input_ids = list(plan.input_ids)
    labels = [ORIGINAL] * len(input_ids)
    for pos, pred in zip(masked, generator_ids):
        input_ids[pos] = int(pred)
        if int(pred) != pair.ids[pos]:
            labels[pos] = REPLACED
    return RtdExample(input_ids=input_ids, rtd_labels=labels, attn_mask=list(pair.attn_mask))
