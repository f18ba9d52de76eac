"""Deterministic synthetic corpus with segment-localized label signals.

Each generated sentence contains one annotated concept pair plus an
exact signal n-gram planted entirely inside one of the three regions the
pair induces: before the first concept, between the two, or after the
second.  The gold label is a pure function of (signal, region).  When
the SAME n-gram maps to different labels in different regions, a model
that max-pools over the whole sentence sees identical features for both
labels, while segment-wise pooling separates them; this is the testbed
for the multi- vs max-pooling comparison.

Construction guarantees:

* filler, concept and signal words come from disjoint pools, so the
  signal n-gram occurs only where planted: the informative spot, plus an
  optional distractor copy in a fixed non-informative region;
* all three pooling segments have at least window-size columns, keeping
  the headline experiment away from empty-segment edge cases;
* every instance satisfies the full annotation invariants and the word
  forms are normalization fixed points (lowercase letters only).

The distractor exists because position channels make label placement
visible to whole-sentence pooling even when word content is ambiguous:
a distractor copy in every sentence removes the "signal present at all"
shortcut, so whole-sentence pooling must learn position-conjunctive
filters while segment pooling still reads the label off one segment.

The ledger records the planted truth per instance and `self_check`
verifies corpus and ledger agree; with label-noise rate r a rule reader
scores about 1 - r, exactly 1 at r = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import (
    Concept,
    RelationInstance,
    instance_from_dict,
    instance_to_dict,
    replace_concepts,
)
from .relations import (
    CATEGORY_OF,
    ConceptType,
    RelationType,
    category_for_pair,
)

BEFORE_C1 = "before_c1"
BETWEEN = "between"
AFTER_C2 = "after_c2"
PLACEMENTS = (BEFORE_C1, BETWEEN, AFTER_C2)

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _suffix(i: int, width: int = 3) -> str:
    out = []
    for _ in range(width):
        out.append(_LETTERS[i % 26])
        i //= 26
    return "".join(reversed(out))


def filler_word(i: int) -> str:
    return "w" + _suffix(i)


def concept_word(i: int) -> str:
    return "cw" + _suffix(i)


DEFAULT_SIGNAL = ("siga", "sigb", "sigc", "sigd")


class SynthCheckError(RuntimeError):
    """Corpus and ledger disagree; message names the offending instance."""


@dataclass(frozen=True)
class LabelRule:
    """Plant `signal` in `placement`; the instance's gold type is `label`."""

    label: RelationType
    placement: str
    signal: tuple[str, ...]


@dataclass(frozen=True)
class SynthSpec:
    """Generator configuration.  Lengths refer to the replaced sentence
    (placeholders in place of concepts), the form the model consumes."""

    rules: tuple[LabelRule, ...]
    concept_types: tuple[ConceptType, ConceptType] = (ConceptType.TEST, ConceptType.PROBLEM)
    sentences_per_type: int = 100
    len_lo: int = 18
    len_hi: int = 26
    window: int = 4
    vocab_size: int = 120
    concept_vocab_size: int = 12
    n_concepts: int = 2
    concept_tokens: int = 1
    noise_rate: float = 0.0
    seed: int = 0
    # When set, every instance additionally carries its rule's signal in
    # this region, regardless of label.  Must differ from every rule's
    # informative placement.
    distractor_placement: str | None = None

    def __post_init__(self) -> None:
        if not self.rules:
            raise ValueError("need at least one label rule")
        counts = (
            self.sentences_per_type,
            self.window,
            self.vocab_size,
            self.concept_vocab_size,
            self.concept_tokens,
        )
        if any(c < 1 for c in counts):
            raise ValueError(f"counts must be >= 1: {self}")
        if self.n_concepts < 2:
            raise ValueError(f"n_concepts must be >= 2: {self.n_concepts}")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError(f"noise_rate must lie in [0, 1): {self.noise_rate}")
        if self.len_hi < self.len_lo:
            raise ValueError(f"empty length range [{self.len_lo}, {self.len_hi}]")
        cat = category_for_pair(*self.concept_types)
        if cat is None:
            raise ValueError(f"concept types {self.concept_types} form no category")
        for rule in self.rules:
            if rule.placement not in PLACEMENTS:
                raise ValueError(f"unknown placement {rule.placement!r}")
            if not rule.signal:
                raise ValueError(f"rule {rule.label.value}: empty signal")
            if CATEGORY_OF[rule.label] is not cat:
                raise ValueError(
                    f"label {rule.label.value} does not fit concept types {self.concept_types}"
                )
            if self.len_lo < self.min_length(len(rule.signal)):
                raise ValueError(
                    f"len_lo={self.len_lo} cannot fit signal of {len(rule.signal)} tokens, "
                    f"two concepts and window-{self.window} segments "
                    f"(need >= {self.min_length(len(rule.signal))})"
                )
            if self.len_lo - 2 - len(rule.signal) < self.n_concepts - 2:
                raise ValueError("not enough filler positions for extra concept tokens")
        if self.noise_rate > 0 and len({r.label for r in self.rules}) < 2:
            raise ValueError("label noise needs at least two distinct labels to flip between")
        if self.distractor_placement is not None:
            if self.distractor_placement not in PLACEMENTS:
                raise ValueError(f"unknown placement {self.distractor_placement!r}")
            informative = {r.placement for r in self.rules}
            if self.distractor_placement in informative:
                raise ValueError(
                    f"distractor region {self.distractor_placement!r} collides with an "
                    "informative placement; the task would become ambiguous"
                )

    def min_length(self, signal_len: int) -> int:
        """Shortest replaced sentence fitting the signal anywhere with all
        three pooling segments at least window-size wide."""
        k = self.window
        p1_lo = max(signal_len, k) + 1
        gap = max(k, signal_len + 1)
        tail = max(2 * k - 2, signal_len)
        return p1_lo + gap + tail

    def to_dict(self) -> dict:
        return {
            "rules": [
                {"label": r.label.value, "placement": r.placement, "signal": list(r.signal)}
                for r in self.rules
            ],
            "concept_types": [t.value for t in self.concept_types],
            "sentences_per_type": self.sentences_per_type,
            "len_lo": self.len_lo,
            "len_hi": self.len_hi,
            "window": self.window,
            "vocab_size": self.vocab_size,
            "concept_vocab_size": self.concept_vocab_size,
            "n_concepts": self.n_concepts,
            "concept_tokens": self.concept_tokens,
            "noise_rate": self.noise_rate,
            "seed": self.seed,
            "distractor_placement": self.distractor_placement,
        }

    @staticmethod
    def from_dict(d: dict) -> "SynthSpec":
        fields = dict(d)
        fields["rules"] = tuple(
            LabelRule(RelationType(r["label"]), r["placement"], tuple(r["signal"]))
            for r in d["rules"]
        )
        fields["concept_types"] = tuple(ConceptType(t) for t in d["concept_types"])
        return SynthSpec(**fields)


def placement_task_spec(
    sentences_per_type: int = 1000, seed: int = 0, **overrides
) -> SynthSpec:
    """The two-label placement-only task: one shared signal n-gram, label
    decided purely by which side of the concept pair it lands on.

    A between-region distractor copy is planted in every sentence so the
    mere presence of the signal carries no label information; see the
    module docstring for why the headline comparison needs this.
    """
    overrides.setdefault("distractor_placement", BETWEEN)
    return SynthSpec(
        rules=(
            LabelRule(RelationType.TERP, BEFORE_C1, DEFAULT_SIGNAL),
            LabelRule(RelationType.TECP, AFTER_C2, DEFAULT_SIGNAL),
        ),
        sentences_per_type=sentences_per_type,
        seed=seed,
        **overrides,
    )


@dataclass(frozen=True)
class LedgerEntry:
    doc_id: str
    rule_label: RelationType
    gold: RelationType
    placement: str
    signal: tuple[str, ...]
    flipped: bool
    p1: int  # placeholder positions in the replaced sentence, 1-based
    p2: int
    signal_start: int  # 1-based position of the signal in the replaced sentence
    distractor_start: int | None = None

    def to_dict(self) -> dict:
        d = vars(self).copy()
        d["rule_label"] = self.rule_label.value
        d["gold"] = self.gold.value
        d["signal"] = list(self.signal)
        return d

    @staticmethod
    def from_dict(d: dict) -> "LedgerEntry":
        fields = dict(d)
        fields["rule_label"] = RelationType(d["rule_label"])
        fields["gold"] = RelationType(d["gold"])
        fields["signal"] = tuple(d["signal"])
        return LedgerEntry(**fields)


@dataclass
class SynthLedger:
    spec: SynthSpec
    entries: list[LedgerEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "entries": [e.to_dict() for e in self.entries]}

    @staticmethod
    def from_dict(d: dict) -> "SynthLedger":
        return SynthLedger(
            spec=SynthSpec.from_dict(d["spec"]),
            entries=[LedgerEntry.from_dict(e) for e in d["entries"]],
        )


def _signal_slot_range(placement: str, p1: int, p2: int, n: int, s: int) -> tuple[int, int]:
    """Valid 1-based start positions keeping the s-gram strictly inside the region."""
    if placement == BEFORE_C1:
        return 1, p1 - s
    if placement == BETWEEN:
        return p1 + 1, p2 - s
    return p2 + 1, n - s + 1


def generate(spec: SynthSpec) -> tuple[list[RelationInstance], SynthLedger]:
    """Materialize the corpus and its ledger.

    Instances are generated independently, one spawned RNG stream each,
    so output is deterministic in the seed and insensitive to generation
    order.  Gold labels follow the instance's rule except that with
    probability noise_rate the label flips to another rule's label
    (ledger records both truth and flip).
    """
    total = len(spec.rules) * spec.sentences_per_type
    streams = np.random.SeedSequence(spec.seed).spawn(total)
    labels = sorted({r.label for r in spec.rules}, key=lambda t: t.value)
    instances: list[RelationInstance] = []
    ledger = SynthLedger(spec=spec)
    idx = 0
    for rule in spec.rules:
        s = len(rule.signal)
        k = spec.window
        p1_lo = max(s, k) + 1
        gap = max(k, s + 1)
        tail = max(2 * k - 2, s)
        for _ in range(spec.sentences_per_type):
            rng = np.random.default_rng(streams[idx])
            n = int(rng.integers(spec.len_lo, spec.len_hi + 1))
            p2_hi = n - tail
            p1 = int(rng.integers(p1_lo, p2_hi - gap + 1))
            p2 = int(rng.integers(p1 + gap, p2_hi + 1))
            lo, hi = _signal_slot_range(rule.placement, p1, p2, n, s)
            start = int(rng.integers(lo, hi + 1))

            words = [filler_word(int(i)) for i in rng.integers(0, spec.vocab_size, n)]
            for off, w in enumerate(rule.signal):
                words[start - 1 + off] = w
            distractor_start: int | None = None
            if spec.distractor_placement is not None:
                dlo, dhi = _signal_slot_range(spec.distractor_placement, p1, p2, n, s)
                distractor_start = int(rng.integers(dlo, dhi + 1))
                for off, w in enumerate(rule.signal):
                    words[distractor_start - 1 + off] = w
            taken = {p1, p2} | set(range(start, start + s))
            if distractor_start is not None:
                taken |= set(range(distractor_start, distractor_start + s))
            free = [pos for pos in range(1, n + 1) if pos not in taken]
            extra = spec.n_concepts - 2
            if extra:
                for pos_i in rng.choice(len(free), size=extra, replace=False):
                    words[free[int(pos_i)] - 1] = concept_word(
                        int(rng.integers(0, spec.concept_vocab_size))
                    )

            flipped = spec.noise_rate > 0 and bool(rng.random() < spec.noise_rate)
            gold = rule.label
            if flipped:
                others = [t for t in labels if t != rule.label]
                gold = others[int(rng.integers(0, len(others)))]

            m = spec.concept_tokens
            c1_words = [
                concept_word(int(i)) for i in rng.integers(0, spec.concept_vocab_size, m)
            ]
            c2_words = [
                concept_word(int(i)) for i in rng.integers(0, spec.concept_vocab_size, m)
            ]
            tokens: list[str] = []
            for pos in range(1, n + 1):
                if pos == p1:
                    tokens.extend(c1_words)
                elif pos == p2:
                    tokens.extend(c2_words)
                else:
                    tokens.append(words[pos - 1])
            c1 = Concept(tokens=c1_words, start=p1, end=p1 + m - 1, ctype=spec.concept_types[0])
            c2_start = p2 + (m - 1)
            c2 = Concept(
                tokens=c2_words, start=c2_start, end=c2_start + m - 1, ctype=spec.concept_types[1]
            )
            inst = RelationInstance(
                tokens=tokens,
                concept1=c1,
                concept2=c2,
                gold=gold,
                doc_id=f"synth-{idx:05d}",
                sent_index=0,
            )
            inst.validate()
            instances.append(inst)
            ledger.entries.append(
                LedgerEntry(
                    doc_id=inst.doc_id,
                    rule_label=rule.label,
                    gold=gold,
                    placement=rule.placement,
                    signal=rule.signal,
                    flipped=flipped,
                    p1=p1,
                    p2=p2,
                    signal_start=start,
                    distractor_start=distractor_start,
                )
            )
            idx += 1
    return instances, ledger


@dataclass
class SelfCheckReport:
    n: int
    rule_accuracy: float  # fraction of instances whose gold matches their rule


def self_check(
    instances: Sequence[RelationInstance], ledger: SynthLedger
) -> SelfCheckReport:
    """Verify corpus and ledger agree; raise SynthCheckError on any mismatch.

    Checks per instance: annotation invariants, ledger identity, the
    signal planted at the recorded spot inside the recorded region, gold
    vs rule/flip bookkeeping, and serialization round-trip.  Returns the
    rule-reader accuracy, which must be 1 when the noise rate is 0 and
    concentrates around 1 - noise_rate otherwise.
    """
    if len(instances) != len(ledger.entries):
        raise SynthCheckError(
            f"{len(instances)} instances vs {len(ledger.entries)} ledger entries"
        )
    hits = 0
    for inst, entry in zip(instances, ledger.entries):
        def fail(msg: str) -> SynthCheckError:
            return SynthCheckError(f"{entry.doc_id}: {msg}")

        if inst.doc_id != entry.doc_id:
            raise fail(f"instance doc id {inst.doc_id} does not match ledger")
        inst.validate()
        rep = replace_concepts(inst)
        if (rep.p1, rep.p2) != (entry.p1, entry.p2):
            raise fail(f"placeholders at {(rep.p1, rep.p2)}, ledger says {(entry.p1, entry.p2)}")
        s = len(entry.signal)

        def check_planted(a: int, region: str, what: str) -> None:
            if tuple(rep.tokens[a - 1 : a - 1 + s]) != entry.signal:
                raise fail(f"{what} {entry.signal} not found at position {a}")
            ok_region = {
                BEFORE_C1: a >= 1 and a + s - 1 < entry.p1,
                BETWEEN: a > entry.p1 and a + s - 1 < entry.p2,
                AFTER_C2: a > entry.p2 and a + s - 1 <= len(rep.tokens),
            }[region]
            if not ok_region:
                raise fail(f"{what} at {a} is outside region {region}")

        check_planted(entry.signal_start, entry.placement, "signal")
        if ledger.spec.distractor_placement is not None:
            if entry.distractor_start is None:
                raise fail("spec requests a distractor but ledger records none")
            check_planted(
                entry.distractor_start, ledger.spec.distractor_placement, "distractor"
            )
        if inst.gold != entry.gold:
            raise fail(f"gold {inst.gold.value} disagrees with ledger {entry.gold.value}")
        if (entry.gold == entry.rule_label) == entry.flipped:
            raise fail("flip flag inconsistent with gold vs rule label")
        if instance_from_dict(instance_to_dict(inst)) != inst:
            raise fail("serialization round-trip changed the instance")
        hits += entry.gold == entry.rule_label
    n = len(instances)
    return SelfCheckReport(n=n, rule_accuracy=hits / n if n else 1.0)
