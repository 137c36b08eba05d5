import json

import pytest
from hypothesis import given, settings

from re_forge import brat
from re_forge.errors import (
    DanglingReference,
    MalformedLine,
    MalformedRow,
    SchemaViolation,
    SpanMismatch,
    UnknownDocId,
    UnknownLabel,
)
from re_forge.model import Corpus, CprGroup, Document, FineRelation

from synth import corpora, documents

ASPIRIN_TXT = "aspirin\tinhibits COX-2"
ASPIRIN_ANN = "T1\tCHEMICAL 0 7\taspirin\nT2\tGENE 17 22\tCOX-2\nR1\tCPR:4 Arg1:T1 Arg2:T2\n"


def test_parse_example():
    doc = brat.parse_brat(ASPIRIN_TXT, ASPIRIN_ANN, "1")
    assert len(doc.entities) == 2 and len(doc.relations) == 1
    assert doc.relations[0].label is CprGroup.CPR4
    assert doc.entities[1].surface == "COX-2"


def test_emit_reproduces_example():
    doc = brat.parse_brat(ASPIRIN_TXT, ASPIRIN_ANN, "1")
    assert brat.emit_brat(doc) == (ASPIRIN_TXT, ASPIRIN_ANN)


def test_emit_canonical_order():
    shuffled = "R1\tCPR:4 Arg1:T1 Arg2:T2\nT2\tGENE 17 22\tCOX-2\nT1\tCHEMICAL 0 7\taspirin\n"
    assert brat.emit_brat(brat.parse_brat(ASPIRIN_TXT, shuffled))[1] == ASPIRIN_ANN


def test_empty_ann():
    doc = brat.parse_brat("title\tbody", "")
    assert doc.entities == () and doc.relations == ()
    assert brat.emit_brat(doc) == ("title\tbody", "")


def test_span_mismatch():
    with pytest.raises(SpanMismatch):
        brat.parse_brat(ASPIRIN_TXT, "T1\tCHEMICAL 0 7\twrong\n")


def test_dangling_reference():
    with pytest.raises(DanglingReference):
        brat.parse_brat(ASPIRIN_TXT, "T1\tCHEMICAL 0 7\taspirin\nR1\tCPR:4 Arg1:T1 Arg2:T5\n")


@pytest.mark.parametrize("line,lineno", [
    ("T1\tCHEMICAL 0 3;5 7\tasp", 1),
    ("T1 CHEMICAL 0 7 aspirin", 1),
    ("T1\tPROTEIN 0 7\taspirin", 1),
    ("R1\tBINDS Arg1:T1 Arg2:T2", 1),
    ("R1\tCPR:4 T1 T2", 1),
])
def test_malformed_lines(line, lineno):
    with pytest.raises(MalformedLine) as err:
        brat.parse_brat(ASPIRIN_TXT, line + "\n")
    assert err.value.lineno == lineno


def test_malformed_reports_line_number():
    with pytest.raises(MalformedLine) as err:
        brat.parse_brat(ASPIRIN_TXT, "T1\tCHEMICAL 0 7\taspirin\n\nT2\tGENE x y\tCOX-2\n")
    assert err.value.lineno == 3


def test_other_lines_survive_verbatim():
    ann = ASPIRIN_ANN + "A1\tNegated R1\n#1\tAnnotatorNotes T1\tnote\n"
    doc = brat.parse_brat(ASPIRIN_TXT, ann)
    assert doc.other_lines == ("A1\tNegated R1", "#1\tAnnotatorNotes T1\tnote")
    assert brat.emit_brat(doc)[1] == ann


def test_crlf_stripped():
    doc = brat.parse_brat(ASPIRIN_TXT, ASPIRIN_ANN.replace("\n", "\r\n"))
    assert brat.emit_brat(doc)[1] == ASPIRIN_ANN


def test_offsets_count_code_points():
    txt = "β-blocker\tα-synuclein binds"
    ann = "T1\tCHEMICAL 0 9\tβ-blocker\nT2\tGENE-Y 10 21\tα-synuclein\n"
    doc = brat.parse_brat(txt, ann)
    assert doc.entities[1].surface == "α-synuclein"
    assert brat.emit_brat(doc)[1] == ann


def test_drugprot_hyphen_labels():
    ann = "T1\tCHEMICAL 0 7\taspirin\nT2\tGENE 17 22\tCOX-2\nR1\tPRODUCT-OF Arg1:T1 Arg2:T2\n"
    doc = brat.parse_brat(ASPIRIN_TXT, ann)
    assert doc.relations[0].label is FineRelation.PRODUCT_OF


@settings(max_examples=200, deadline=None)
@given(documents())
def test_brat_roundtrip(doc):
    txt, ann = brat.emit_brat(doc)
    back = brat.parse_brat(txt, ann, doc.doc_id)
    assert back == doc
    assert brat.emit_brat(back) == (txt, ann)


def test_brat_dir_roundtrip(tmp_path):
    doc = brat.parse_brat(ASPIRIN_TXT, ASPIRIN_ANN, "12345")
    corpus = Corpus.from_documents("train", [doc])
    brat.write_brat_dir(corpus, tmp_path / "c")
    assert (tmp_path / "c" / "12345.txt").read_text(encoding="utf-8") == ASPIRIN_TXT
    assert brat.read_brat_dir(tmp_path / "c") == corpus
    assert brat.detect_format(tmp_path / "c") == "brat"


# -- TSV ---------------------------------------------------------------------

ABSTRACTS = "100\taspirin\tinhibits COX-2\n"
ENTITIES = "100\tT1\tCHEMICAL\t0\t7\taspirin\n100\tT2\tGENE-N\t17\t22\tCOX-2\n"
RELATIONS = "100\tINHIBITOR\tArg1:T1\tArg2:T2\n"


def test_tsv_example():
    corpus = brat.parse_biocreative_tsv(ABSTRACTS, ENTITIES, RELATIONS)
    doc = corpus.docs["100"]
    assert len(corpus) == 1 and len(doc.entities) == 2 and len(doc.relations) == 1
    assert doc.relations[0].label is FineRelation.INHIBITOR


def test_tsv_chemprot_six_columns():
    rel = "100\tCPR:4\tY\tINHIBITOR\tArg1:T1\tArg2:T2\n"
    doc = brat.parse_biocreative_tsv(ABSTRACTS, ENTITIES, rel).docs["100"]
    assert doc.relations[0].label is FineRelation.INHIBITOR


def test_tsv_unknown_doc():
    with pytest.raises(UnknownDocId):
        brat.parse_biocreative_tsv(ABSTRACTS, "999\tT1\tCHEMICAL\t0\t7\taspirin\n", "")


def test_tsv_unknown_label():
    with pytest.raises(UnknownLabel):
        brat.parse_biocreative_tsv(ABSTRACTS, ENTITIES, "100\tBINDS\tArg1:T1\tArg2:T2\n")


def test_tsv_malformed_row():
    with pytest.raises(MalformedRow):
        brat.parse_biocreative_tsv(ABSTRACTS, "100\tT1\tCHEMICAL\t0\n", "")


def test_tsv_duplicate_rows_kept_once():
    corpus = brat.parse_biocreative_tsv(ABSTRACTS, ENTITIES, RELATIONS * 2)
    assert len(corpus.docs["100"].relations) == 1


def test_tsv_dir_roundtrip(tmp_path):
    corpus = brat.parse_biocreative_tsv(ABSTRACTS, ENTITIES, RELATIONS)
    brat.write_tsv_dir(corpus, tmp_path)
    assert brat.detect_format(tmp_path) == "tsv"
    assert brat.read_tsv_dir(tmp_path) == corpus


# -- JSON --------------------------------------------------------------------

def test_empty_corpus_json():
    text = brat.emit_json_corpus(Corpus("train", {}))
    assert text == '{"split":"train","docs":{}}'
    assert brat.parse_json_corpus(text) == Corpus("train", {})


def test_two_doc_json():
    d1 = brat.parse_brat(ASPIRIN_TXT, ASPIRIN_ANN, "1")
    d2 = Document("2", "t", "a")
    data = json.loads(brat.emit_json_corpus(Corpus.from_documents("validation", [d1, d2])))
    assert sorted(data["docs"]) == ["1", "2"]


def test_schema_violation_path():
    bad = {"split": "train", "docs": {"1": {"title": "t", "abstract": "a", "entities": [{"id": "T1"}],
                                            "relations": []}}}
    with pytest.raises(SchemaViolation) as err:
        brat.corpus_from_dict(bad)
    assert err.value.path.startswith("$.docs")


def test_schema_rejects_unknown_split():
    with pytest.raises(SchemaViolation):
        brat.parse_json_corpus('{"split":"test","docs":{}}')


@settings(max_examples=100, deadline=None)
@given(corpora())
def test_json_roundtrip(corpus):
    text = brat.emit_json_corpus(corpus)
    back = brat.parse_json_corpus(text)
    assert back == corpus
    assert [d.provenance for d in back] == [d.provenance for d in corpus]
    assert brat.emit_json_corpus(back) == text


def test_read_corpus_dispatch(tmp_path):
    corpus = Corpus.from_documents("train", [brat.parse_brat(ASPIRIN_TXT, ASPIRIN_ANN, "7")])
    for fmt, target in (("json", tmp_path / "c.json"), ("tsv", tmp_path / "t"), ("brat", tmp_path / "b")):
        brat.write_corpus(corpus, target, fmt)
        assert brat.read_corpus(target) == corpus
