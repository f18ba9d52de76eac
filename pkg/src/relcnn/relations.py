"""Relation taxonomy: 11 types in 3 categories over 3 concept types.

Class indices follow the fixed table order below (confusion matrices and
probability vectors use the same order everywhere):

    TrIP TrWP TrCP TrAP TrNAP NTrP | TeRP TeCP NTeP | PIP NPP

The three N* types are the negative ("no relation") classes; the other
eight are positive.  Each relation type belongs to exactly one category,
determined by the concept-type pair: problem-treatment (TrP),
problem-test (TeP), problem-problem (PP).
"""

from __future__ import annotations

from enum import Enum


class ConceptType(str, Enum):
    PROBLEM = "problem"
    TREATMENT = "treatment"
    TEST = "test"


class Category(str, Enum):
    TRP = "TrP"
    TEP = "TeP"
    PP = "PP"


class RelationType(str, Enum):
    TRIP = "TrIP"
    TRWP = "TrWP"
    TRCP = "TrCP"
    TRAP = "TrAP"
    TRNAP = "TrNAP"
    NTRP = "NTrP"
    TERP = "TeRP"
    TECP = "TeCP"
    NTEP = "NTeP"
    PIP = "PIP"
    NPP = "NPP"


RELATION_TYPES: tuple[RelationType, ...] = tuple(RelationType)
N_CLASSES = len(RELATION_TYPES)

CLASS_INDEX: dict[RelationType, int] = {t: i for i, t in enumerate(RELATION_TYPES)}

NEGATIVE_TYPES = frozenset({RelationType.NTRP, RelationType.NTEP, RelationType.NPP})
POSITIVE_TYPES: tuple[RelationType, ...] = tuple(
    t for t in RELATION_TYPES if t not in NEGATIVE_TYPES
)

CATEGORY_TYPES: dict[Category, tuple[RelationType, ...]] = {
    Category.TRP: (
        RelationType.TRIP,
        RelationType.TRWP,
        RelationType.TRCP,
        RelationType.TRAP,
        RelationType.TRNAP,
        RelationType.NTRP,
    ),
    Category.TEP: (RelationType.TERP, RelationType.TECP, RelationType.NTEP),
    Category.PP: (RelationType.PIP, RelationType.NPP),
}

CATEGORY_CLASS_IDS: dict[Category, tuple[int, ...]] = {
    cat: tuple(CLASS_INDEX[t] for t in types) for cat, types in CATEGORY_TYPES.items()
}

CATEGORY_OF: dict[RelationType, Category] = {
    t: cat for cat, types in CATEGORY_TYPES.items() for t in types
}

NEGATIVE_OF_CATEGORY: dict[Category, RelationType] = {
    Category.TRP: RelationType.NTRP,
    Category.TEP: RelationType.NTEP,
    Category.PP: RelationType.NPP,
}


def category_for_pair(t1: ConceptType, t2: ConceptType) -> Category | None:
    """Category of a concept-type pair, or None if the pair carries no relation.

    Order does not matter.  Pairs without a medical problem (treatment-treatment,
    test-test, treatment-test) are not annotated in this scheme.
    """
    pair = {t1, t2}
    if pair == {ConceptType.PROBLEM, ConceptType.TREATMENT}:
        return Category.TRP
    if pair == {ConceptType.PROBLEM, ConceptType.TEST}:
        return Category.TEP
    if pair == {ConceptType.PROBLEM}:
        return Category.PP
    return None


def is_positive(t: RelationType) -> bool:
    return t not in NEGATIVE_TYPES
