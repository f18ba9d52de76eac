"""Tests for corpus parsing, normalization, replacement, and serialization."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relcnn import corpus
from relcnn.corpus import (
    AnnotationError,
    Concept,
    RelationInstance,
    corpus_stats,
    document_instances,
    generate_negatives,
    instance_from_dict,
    instance_to_dict,
    parse_document,
    read_instances,
    replace_concepts,
    tokenize_normalize,
    write_instances,
)
from relcnn.relations import ConceptType, RelationType

from conftest import RAW_DOCS, build_instance

# ---------------------------------------------------------------------------
# Tokenization / normalization
# ---------------------------------------------------------------------------

# Hand-worked fixtures: raw string -> token list under the published rules
# (lowercase, punctuation split off, digit runs collapsed to "0").
NORMALIZATION_FIXTURES = [
    ("She was treated.", ["she", "was", "treated", "."]),
    ("WBC 4.5, Hct 33.", ["wbc", "0.0", ",", "hct", "0", "."]),
    ("The dose was 125 mg/day.", ["the", "dose", "was", "0", "mg/day", "."]),
    ("x-ray #2 (repeat)", ["x-ray", "#", "0", "(", "repeat", ")"]),
    ("LVEF of 42%", ["lvef", "of", "0", "%"]),
    ("pt's temp 98.6F", ["pt's", "temp", "0.0f"]),
    ("q.d., p.r.n.", ["q.d", ".", ",", "p.r.n", "."]),
    ("CT-scan was negative", ["ct-scan", "was", "negative"]),
    ("10/21/93 admission", ["0/0/0", "admission"]),
    ("dose: 5 , then 10", ["dose", ":", "0", ",", "then", "0"]),
    ("he said \"stop\" loudly", ["he", "said", '"', "stop", '"', "loudly"]),
    ("3rd hospital day", ["0rd", "hospital", "day"]),
    ("s/p CABG x 4", ["s/p", "cabg", "x", "0"]),
    ("[**2563-6-12**]", ["[", "*", "*", "0-0-0", "*", "*", "]"]),
    ("b.i.d.", ["b.i.d", "."]),
    ("K+ was 4.0", ["k", "+", "was", "0.0"]),
    ("Na: 140, K: 4.0", ["na", ":", "0", ",", "k", ":", "0.0"]),
    ("  leading   spaces  ", ["leading", "spaces"]),
    ("", []),
    ("anti-inflammatory meds;", ["anti-inflammatory", "meds", ";"]),
]


@pytest.mark.parametrize("raw,expected", NORMALIZATION_FIXTURES)
def test_normalization_fixtures(raw, expected):
    assert tokenize_normalize(raw) == expected


@given(st.text(alphabet=st.characters(codec="ascii"), max_size=60))
def test_tokens_are_lowercase_nonempty_digitfree(raw):
    for tok in tokenize_normalize(raw):
        assert tok, "empty token emitted"
        assert tok == tok.lower()
        assert not any(ch.isspace() for ch in tok)
        # digit runs collapse: no token may contain two adjacent digits
        assert "00" not in "".join(ch if ch.isdigit() else " " for ch in tok).replace(" ", "#")


@given(st.lists(st.sampled_from(["Fever", "102.4", "x-ray", ",", "(", "mg/day"]), max_size=8))
def test_tokenization_is_whitespace_stable(words):
    raw = " ".join(words)
    assert tokenize_normalize(raw) == tokenize_normalize("  " + raw.replace(" ", "   ") + " ")


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------


def _parse_fixture(doc_id: str = "record-01"):
    parts = RAW_DOCS[doc_id]
    return parse_document(doc_id, parts["txt"], parts["con"], parts["rel"],
                          f"{doc_id}.con", f"{doc_id}.rel")


def test_parse_document_golden():
    doc = _parse_fixture()
    assert [len(s) for s in doc.sentences[:3]] == [18, 11, 12]
    assert doc.sentences[0][:5] == ["she", "was", "treated", "with", "steroids"]
    golds = [(i.sent_index, i.gold) for i in doc.positives]
    assert golds == [(1, RelationType.TRIP), (2, RelationType.TERP)]
    inst = doc.positives[0]
    assert inst.concept1.tokens == ["steroids"]
    assert inst.concept2.tokens == ["this", "swelling"]
    assert inst.concept1.ctype is ConceptType.TREATMENT
    assert inst.concept2.ctype is ConceptType.PROBLEM


def test_document_instances_appends_negatives():
    doc = _parse_fixture()
    insts = document_instances(doc)
    golds = [i.gold for i in insts]
    # sentence 3 has two unannotated test/problem pairs -> two NTeP negatives
    assert golds == [RelationType.TRIP, RelationType.TERP,
                     RelationType.NTEP, RelationType.NTEP]
    for neg in insts[2:]:
        assert neg.sent_index == 3
        assert {neg.concept1.ctype, neg.concept2.ctype} == {ConceptType.TEST,
                                                            ConceptType.PROBLEM}


def test_generate_negatives_skips_incompatible_pairs():
    # test+test and test+treatment pairs have no category -> no instance
    text = "MRI and EKG after surgery .\n"
    con = ('c="mri" 1:0 1:0||t="test"\n'
           'c="ekg" 1:2 1:2||t="test"\n'
           'c="surgery" 1:4 1:4||t="treatment"\n')
    doc = parse_document("d", text, con, "", "d.con", "d.rel")
    assert generate_negatives(doc.sentence_concepts(), doc.positives) == []


def test_parse_errors():
    parts = RAW_DOCS["record-01"]

    with pytest.raises(AnnotationError, match="unknown concept type"):
        parse_document("d", parts["txt"], parts["con"].replace('t="test"', 't="gadget"'),
                       "", "f.con", "f.rel")
    with pytest.raises(AnnotationError, match="out of range"):
        parse_document("d", parts["txt"], 'c="x" 1:40 1:41||t="test"\n', "", "f.con", "f.rel")
    with pytest.raises(AnnotationError, match="malformed"):
        parse_document("d", parts["txt"], "not an annotation\n", "", "f.con", "f.rel")
    with pytest.raises(AnnotationError, match="unannotated concept"):
        parse_document("d", parts["txt"], parts["con"],
                       'c="steroids" 1:4 1:4||r="TrIP"||c="hospital" 1:11 1:11\n',
                       "f.con", "f.rel")
    with pytest.raises(AnnotationError, match="conflicting"):
        parse_document("d", parts["txt"], parts["con"],
                       parts["rel"] + 'c="steroids" 1:4 1:4||r="TrAP"||c="this swelling" 1:6 1:7\n',
                       "f.con", "f.rel")
    with pytest.raises(AnnotationError, match="does not fit category"):
        parse_document("d", parts["txt"], parts["con"],
                       'c="steroids" 1:4 1:4||r="TeRP"||c="this swelling" 1:6 1:7\n',
                       "f.con", "f.rel")
    # relations across sentences reference a span that line cannot hold
    with pytest.raises(AnnotationError):
        parse_document("d", parts["txt"], parts["con"],
                       'c="steroids" 1:4 1:4||r="TrIP"||c="x" 2:4 2:6\n', "f.con", "f.rel")


def test_duplicate_identical_relation_is_deduped():
    parts = RAW_DOCS["record-01"]
    doc = parse_document("d", parts["txt"], parts["con"], parts["rel"] + parts["rel"],
                         "f.con", "f.rel")
    assert len(doc.positives) == 2


# ---------------------------------------------------------------------------
# Concept replacement
# ---------------------------------------------------------------------------


def test_replacement_of_multiword_concepts():
    doc = _parse_fixture()
    rep = replace_concepts(doc.positives[0])
    assert rep.tokens[:8] == ["she", "was", "treated", "with", "__treatment__",
                              "for", "__problem__", "at"]
    assert (rep.p1, rep.p2) == (5, 7)  # 1-based placeholder positions
    assert len(rep.tokens) == 17       # 18 tokens - (1-1) - (2-1)


@given(st.integers(0, 10 ** 6), st.sampled_from(list(RelationType)))
def test_replacement_geometry(seed, gold):
    inst = build_instance(np.random.default_rng(seed), gold)
    rep = replace_concepts(inst)
    l1 = len(inst.concept1.tokens)
    l2 = len(inst.concept2.tokens)
    assert len(rep.tokens) == len(inst.tokens) - (l1 - 1) - (l2 - 1)
    assert rep.p1 == inst.concept1.start          # spans are 1-based
    assert rep.p2 == inst.concept2.start - (l1 - 1)
    assert rep.tokens[rep.p1 - 1] == corpus.PLACEHOLDER[inst.concept1.ctype]
    assert rep.tokens[rep.p2 - 1] == corpus.PLACEHOLDER[inst.concept2.ctype]
    assert rep.p1 < rep.p2
    # context words survive unchanged around the placeholders
    assert rep.tokens[: rep.p1 - 1] == inst.tokens[: inst.concept1.start - 1]
    assert rep.original is inst


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def test_corpus_stats_hand_computed():
    rng = np.random.default_rng(0)
    insts = [
        build_instance(rng, RelationType.TRIP),
        build_instance(rng, RelationType.TRIP),
        build_instance(rng, RelationType.NPP),
    ]
    stats = corpus_stats(insts)
    assert stats.n_instances == 3
    assert stats.relation_counts[RelationType.TRIP] == 2
    assert stats.relation_counts[RelationType.NPP] == 1
    lengths = [len(i.concept1.tokens) for i in insts] + [len(i.concept2.tokens) for i in insts]
    assert stats.mean_concept_tokens_all == pytest.approx(sum(lengths) / len(lengths))
    assert sum(stats.concept_length_hist.values()) == 6
    d = stats.to_dict()
    assert d["n_instances"] == 3
    assert json.dumps(d)  # JSON-serializable


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


@given(st.integers(0, 10 ** 6), st.sampled_from(list(RelationType)))
def test_instance_dict_round_trip(seed, gold):
    inst = build_instance(np.random.default_rng(seed), gold)
    assert instance_from_dict(instance_to_dict(inst)) == inst


def test_write_read_instances_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    insts = [build_instance(rng, g) for g in RelationType]
    path = tmp_path / "insts.jsonl"
    write_instances(path, insts)
    assert read_instances(path) == insts
    # one JSON object per line
    lines = path.read_text().splitlines()
    assert len(lines) == len(insts)
    assert all(json.loads(line) for line in lines)


def test_read_instances_rejects_malformed(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"not": "an instance"}\n')
    with pytest.raises((KeyError, ValueError, AnnotationError)):
        read_instances(path)


def test_concept_validation():
    with pytest.raises(ValueError):
        Concept(tokens=["a"], start=0, end=0, ctype=ConceptType.TEST).validate()
    with pytest.raises(ValueError):
        Concept(tokens=["a", "b"], start=2, end=2, ctype=ConceptType.TEST).validate()
    Concept(tokens=["a"], start=1, end=1, ctype=ConceptType.TEST).validate()


def test_instance_validation_rejects_overlap():
    toks = ["a", "b", "c", "d"]
    c1 = Concept(tokens=["b", "c"], start=2, end=3, ctype=ConceptType.TEST)
    c2 = Concept(tokens=["c", "d"], start=3, end=4, ctype=ConceptType.PROBLEM)
    with pytest.raises(ValueError):
        RelationInstance(tokens=toks, concept1=c1, concept2=c2,
                         gold=RelationType.TERP).validate()
