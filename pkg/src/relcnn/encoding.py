"""Index-space encoding: vocabularies, position ids, pooling segment bounds.

Words map to dense ids with ``<pad>`` fixed at 0 and ``<unk>`` at 1; the
three concept placeholders are always present so they can never fall out
of vocabulary.  Positions are signed token distances to the two concept
placeholders, clipped to a radius and shifted to the dense id range
``[0, 2 * max_distance]``.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import PLACEHOLDER, RelationInstance, ReplacedInstance, replace_concepts
from .relations import Category, ConceptType, RelationType

PAD = "<pad>"
UNK = "<unk>"
SPECIAL_TOKENS = (PAD, UNK) + tuple(PLACEHOLDER[t] for t in ConceptType)

PAD_ID = 0
UNK_ID = 1

VOCAB_FORMAT = "relcnn-vocab v1"


@dataclass(frozen=True)
class EncoderConfig:
    """Encoding knobs the annotation scheme leaves open.

    max_distance: position clip radius; distances beyond it share the
        boundary id.  Clinical sentences put most pairs within 20 tokens
        but the tail is long, so the default radius is generous.
    concept_len: fixed length for concept-content id sequences (pad or
        truncate).  Mean concept length in this domain is ~2 tokens with a
        fast-decaying tail, so 5 keeps nearly all heads intact.
    min_word_freq: words rarer than this in the training set map to <unk>.
    """

    max_distance: int = 60
    concept_len: int = 5
    min_word_freq: int = 1

    def __post_init__(self) -> None:
        if self.max_distance < 1 or self.concept_len < 1 or self.min_word_freq < 1:
            raise ValueError(f"all EncoderConfig fields must be >= 1: {self}")


@dataclass
class Vocab:
    """Word, position, and concept-type id maps."""

    word_ids: dict[str, int]
    max_distance: int
    ctype_ids: dict[str, int]

    @property
    def n_words(self) -> int:
        return len(self.word_ids)

    @property
    def n_positions(self) -> int:
        return 2 * self.max_distance + 1

    @property
    def n_ctypes(self) -> int:
        return len(self.ctype_ids)

    def word_id(self, token: str) -> int:
        return self.word_ids.get(token, UNK_ID)

    def position_id(self, distance: int) -> int:
        d = max(-self.max_distance, min(self.max_distance, distance))
        return d + self.max_distance


@dataclass
class EncodedInstance:
    """Index-space view of a replaced instance, ready for the model."""

    token_ids: np.ndarray  # (n,) int64
    pos1_ids: np.ndarray  # (n,) int64, distance to placeholder 1
    pos2_ids: np.ndarray  # (n,) int64, distance to placeholder 2
    ctype_ids: tuple[int, int]
    content1_ids: np.ndarray  # (concept_len,) int64, original concept tokens
    content2_ids: np.ndarray  # (concept_len,) int64
    p1: int  # 1-based placeholder positions
    p2: int
    gold: RelationType
    category: Category

    @property
    def n_tokens(self) -> int:
        return int(self.token_ids.shape[0])


def build_vocab(train_instances: Sequence[RelationInstance], cfg: EncoderConfig) -> Vocab:
    """Build the word vocabulary from training instances.

    Frequencies are counted over the original (pre-replacement) sentence
    tokens, which also covers every concept-content word.  Words below
    min_word_freq map to <unk> at encode time.
    """
    if not train_instances:
        raise ValueError("cannot build a vocabulary from an empty training set")
    counts: Counter[str] = Counter()
    for inst in train_instances:
        counts.update(inst.tokens)
    word_ids = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
    for tok in sorted(counts):
        if counts[tok] >= cfg.min_word_freq and tok not in word_ids:
            word_ids[tok] = len(word_ids)
    ctype_ids = {t.value: i for i, t in enumerate(ConceptType)}
    return Vocab(word_ids=word_ids, max_distance=cfg.max_distance, ctype_ids=ctype_ids)


def _content_ids(vocab: Vocab, tokens: Sequence[str], concept_len: int) -> np.ndarray:
    ids = [vocab.word_id(t) for t in tokens[:concept_len]]
    ids += [PAD_ID] * (concept_len - len(ids))
    return np.asarray(ids, dtype=np.int64)


def encode(inst: ReplacedInstance, vocab: Vocab, cfg: EncoderConfig) -> EncodedInstance:
    """Map a replaced instance into index space.

    Position ids at token i are clip(i - p1) and clip(i - p2).  Concept
    contents come from the original concept tokens (pre-replacement),
    padded with <pad> to concept_len or truncated to the first
    concept_len tokens.
    """
    n = len(inst.tokens)
    token_ids = np.asarray([vocab.word_id(t) for t in inst.tokens], dtype=np.int64)
    idx = np.arange(1, n + 1)
    pos1_ids = np.asarray([vocab.position_id(int(d)) for d in idx - inst.p1], dtype=np.int64)
    pos2_ids = np.asarray([vocab.position_id(int(d)) for d in idx - inst.p2], dtype=np.int64)
    orig = inst.original
    return EncodedInstance(
        token_ids=token_ids,
        pos1_ids=pos1_ids,
        pos2_ids=pos2_ids,
        ctype_ids=(
            vocab.ctype_ids[orig.concept1.ctype.value],
            vocab.ctype_ids[orig.concept2.ctype.value],
        ),
        content1_ids=_content_ids(vocab, orig.concept1.tokens, cfg.concept_len),
        content2_ids=_content_ids(vocab, orig.concept2.tokens, cfg.concept_len),
        p1=inst.p1,
        p2=inst.p2,
        gold=orig.gold,
        category=orig.category,
    )


def encode_instances(
    instances: Iterable[RelationInstance], vocab: Vocab, cfg: EncoderConfig
) -> list[EncodedInstance]:
    return [encode(replace_concepts(inst), vocab, cfg) for inst in instances]


def segment_bounds(p1: int, p2: int, n: int, k: int) -> list[tuple[int, int] | None]:
    """Three column ranges over the convolution output, 1-based inclusive.

    The n - k + 1 convolution columns split at the two placeholder
    positions: [1, p1-1], [p1, p2-1], [p2, n-k+1].  Ranges are clamped to
    the valid column interval; a range whose start exceeds its end is
    returned as None (empty segment).
    """
    if not 1 <= p1 < p2 <= n:
        raise ValueError(f"need 1 <= p1 < p2 <= n, got p1={p1}, p2={p2}, n={n}")
    if k < 1:
        raise ValueError(f"window size must be >= 1, got {k}")
    ncols = n - k + 1
    out: list[tuple[int, int] | None] = []
    for start, end in ((1, p1 - 1), (p1, p2 - 1), (p2, ncols)):
        start, end = max(start, 1), min(end, ncols)
        out.append((start, end) if start <= end else None)
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    """Versioned text format: header lines, then one `<token>\\t<id>` per word."""
    lines = [VOCAB_FORMAT, f"max_distance\t{vocab.max_distance}"]
    lines.append("ctypes\t" + "\t".join(t for t, _ in sorted(vocab.ctype_ids.items(), key=lambda kv: kv[1])))
    for tok, idx in sorted(vocab.word_ids.items(), key=lambda kv: kv[1]):
        lines.append(f"{tok}\t{idx}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocab:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != VOCAB_FORMAT:
        raise ValueError(f"{path}: not a {VOCAB_FORMAT} file")
    max_distance = int(lines[1].split("\t")[1])
    ctypes = lines[2].split("\t")[1:]
    word_ids: dict[str, int] = {}
    for line in lines[3:]:
        if not line:
            continue
        tok, idx = line.rsplit("\t", 1)
        word_ids[tok] = int(idx)
    ids = sorted(word_ids.values())
    if ids != list(range(len(ids))):
        raise ValueError(f"{path}: word ids are not dense from 0")
    return Vocab(
        word_ids=word_ids,
        max_distance=max_distance,
        ctype_ids={name: i for i, name in enumerate(ctypes)},
    )


def vocab_hash(path: str | Path) -> str:
    """SHA-256 of the serialized vocab file, used to pin checkpoints to vocabs."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
