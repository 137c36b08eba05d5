"""Reading and writing corpora: BRAT standoff, BioCreative TSV and JSON.

BRAT ``.ann`` grammar handled here::

    T<n> TAB <TYPE> <start> <end> TAB <surface>
    R<n> TAB <LABEL> Arg1:T<i> Arg2:T<j>

Any other line kind (events, attributes, notes) is carried through verbatim.
The ``.txt`` side is ``title TAB abstract``.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import (
    DuplicateId,
    MalformedLine,
    MalformedRow,
    SchemaViolation,
    UnknownDocId,
    UnknownLabel,
)
from .model import (
    SOURCE_TYPES,
    TITLE_SEPARATOR,
    Corpus,
    Document,
    Entity,
    Relation,
    Span,
    label_text,
    parse_label,
)

log = logging.getLogger(__name__)

_ENTITY_RE = re.compile(r"(T\d+)\t(\S+) (\d+) (\d+)\t(.*)")
_RELATION_RE = re.compile(r"(R\d+)\t(\S+) Arg1:(T\d+) Arg2:(T\d+)")


@dataclass(frozen=True)
class AnnLine:
    kind: str  # "entity", "relation" or "other"
    raw: str
    payload: object = None


def _split_txt(txt_content: str):
    txt_content = txt_content.replace("\r", "")
    title, sep, abstract = txt_content.partition(TITLE_SEPARATOR)
    return title, abstract


def parse_ann_lines(ann_content: str) -> list:
    """Classify and parse every non-empty line of an ``.ann`` file."""
    out = []
    for lineno, raw in enumerate(ann_content.replace("\r", "").split("\n"), start=1):
        if not raw.strip():
            continue
        if raw.startswith("T"):
            fields = raw.split("\t")
            if len(fields) >= 2 and ";" in fields[1]:
                raise MalformedLine(lineno, "discontinuous entity spans are not supported", raw)
            m = _ENTITY_RE.fullmatch(raw)
            if not m:
                raise MalformedLine(lineno, "entity line does not match 'T<n>\\t<TYPE> <start> <end>\\t<text>'", raw)
            ident, etype, start, end, surface = m.groups()
            if etype not in SOURCE_TYPES:
                raise MalformedLine(lineno, f"unknown entity type {etype!r}", raw)
            start, end = int(start), int(end)
            if start >= end:
                raise MalformedLine(lineno, "empty or inverted span", raw)
            out.append(AnnLine("entity", raw, Entity(ident, etype, Span(start, end), surface)))
        elif raw.startswith("R"):
            m = _RELATION_RE.fullmatch(raw)
            if not m:
                raise MalformedLine(lineno, "relation line does not match 'R<n>\\t<LABEL> Arg1:T<i> Arg2:T<j>'", raw)
            ident, label, arg1, arg2 = m.groups()
            try:
                parsed = parse_label(label)
            except ValueError:
                raise MalformedLine(lineno, f"unknown relation label {label!r}", raw) from None
            out.append(AnnLine("relation", raw, Relation(ident, parsed, arg1, arg2)))
        else:
            out.append(AnnLine("other", raw))
    return out


def parse_brat(txt_content: str, ann_content: str, doc_id: str = "", provenance=frozenset()) -> Document:
    """Build a validated :class:`Document` from a ``.txt``/``.ann`` pair.

    Raises MalformedLine, SpanMismatch or DanglingReference.
    """
    title, abstract = _split_txt(txt_content)
    entities, relations, other = [], [], []
    for line in parse_ann_lines(ann_content):
        if line.kind == "entity":
            entities.append(line.payload)
        elif line.kind == "relation":
            rel = line.payload
            relations.append(Relation(rel.id, rel.label, rel.arg1, rel.arg2, frozenset(provenance)))
        else:
            other.append(line.raw)
    return Document(doc_id, title, abstract, tuple(entities), tuple(relations), tuple(other), frozenset(provenance))


def emit_brat(doc: Document):
    """Return ``(txt_content, ann_content)`` in canonical order."""
    lines = []
    for ent in doc.entities:
        lines.append(f"{ent.id}\t{ent.source_type} {ent.start} {ent.end}\t{ent.surface}")
    for rel in doc.relations:
        lines.append(f"{rel.id}\t{label_text(rel.label)} Arg1:{rel.arg1} Arg2:{rel.arg2}")
    lines.extend(doc.other_lines)
    ann = "".join(line + "\n" for line in lines)
    return doc.text, ann


def _read_text(path) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read().replace("\r", "")


def _write_text(path, content: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(content)


def read_brat_dir(path, split: str = "train", provenance=frozenset()) -> Corpus:
    """Load every ``<doc_id>.txt``/``<doc_id>.ann`` pair in ``path``."""
    path = Path(path)
    docs = []
    for txt in sorted(path.glob("*.txt")):
        ann = txt.with_suffix(".ann")
        ann_content = _read_text(ann) if ann.exists() else ""
        docs.append(parse_brat(_read_text(txt), ann_content, txt.stem, provenance))
    return Corpus.from_documents(split, docs)


def write_brat_dir(corpus: Corpus, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for doc in corpus:
        txt, ann = emit_brat(doc)
        _write_text(path / f"{doc.doc_id}.txt", txt)
        _write_text(path / f"{doc.doc_id}.ann", ann)


# -- BioCreative TSV ---------------------------------------------------------

def _rows(content: str):
    for lineno, line in enumerate(content.replace("\r", "").split("\n"), start=1):
        if line == "":
            continue
        yield lineno, line.split("\t")


def parse_biocreative_tsv(abstracts: str, entities: str, relations: str,
                          split: str = "train", provenance=frozenset()) -> Corpus:
    """Assemble a corpus from the three BioCreative tab-separated files.

    Relation rows are either ``doc_id, label, Arg1:T<i>, Arg2:T<j>`` or the
    six-column ChemProt layout ``doc_id, CPR:<n>, Y|N, label, Arg1, Arg2``,
    in which case the fine label is used.  Relation ids are assigned R1..Rn in
    file order per document; exact duplicate rows are kept once.
    """
    provenance = frozenset(provenance)
    texts = {}
    for lineno, cols in _rows(abstracts):
        if len(cols) == 2:
            cols = cols + [""]
        if len(cols) != 3:
            raise MalformedRow(f"abstracts line {lineno}: expected 3 columns, got {len(cols)}")
        doc_id, title, abstract = cols
        if doc_id in texts:
            raise DuplicateId(f"abstracts line {lineno}: duplicate doc_id {doc_id}")
        texts[doc_id] = (title, abstract)

    ents = {doc_id: [] for doc_id in texts}
    for lineno, cols in _rows(entities):
        if len(cols) != 6:
            raise MalformedRow(f"entities line {lineno}: expected 6 columns, got {len(cols)}")
        doc_id, ident, etype, start, end, surface = cols
        if doc_id not in texts:
            raise UnknownDocId(f"entities line {lineno}: unknown doc_id {doc_id}")
        if etype not in SOURCE_TYPES:
            raise MalformedRow(f"entities line {lineno}: unknown entity type {etype!r}")
        try:
            span = Span(int(start), int(end))
        except ValueError as exc:
            raise MalformedRow(f"entities line {lineno}: bad offsets ({exc})") from None
        ents[doc_id].append(Entity(ident, etype, span, surface))

    rels = {doc_id: [] for doc_id in texts}
    seen = {doc_id: set() for doc_id in texts}
    duplicates = 0
    for lineno, cols in _rows(relations):
        if len(cols) == 4:
            doc_id, label, arg1, arg2 = cols
        elif len(cols) == 6:
            doc_id, _group, _evaluated, label, arg1, arg2 = cols
        else:
            raise MalformedRow(f"relations line {lineno}: expected 4 or 6 columns, got {len(cols)}")
        if doc_id not in texts:
            raise UnknownDocId(f"relations line {lineno}: unknown doc_id {doc_id}")
        if not (arg1.startswith("Arg1:") and arg2.startswith("Arg2:")):
            raise MalformedRow(f"relations line {lineno}: arguments must be Arg1:<id> Arg2:<id>")
        try:
            parsed = parse_label(label)
        except ValueError:
            raise UnknownLabel(f"relations line {lineno}: unknown relation label {label!r}") from None
        key = (arg1[5:], arg2[5:], parsed)
        if key in seen[doc_id]:
            duplicates += 1
            continue
        seen[doc_id].add(key)
        rid = f"R{len(rels[doc_id]) + 1}"
        rels[doc_id].append(Relation(rid, parsed, key[0], key[1], provenance))
    if duplicates:
        log.warning("dropped %d duplicate relation rows", duplicates)

    docs = [
        Document(doc_id, title, abstract, tuple(ents[doc_id]), tuple(rels[doc_id]), (), provenance)
        for doc_id, (title, abstract) in texts.items()
    ]
    return Corpus.from_documents(split, docs)


def emit_biocreative_tsv(corpus: Corpus):
    """Inverse of :func:`parse_biocreative_tsv` (4-column relation layout)."""
    abstracts, entities, relations = [], [], []
    for doc in corpus:
        abstracts.append(f"{doc.doc_id}\t{doc.title}\t{doc.abstract}\n")
        for ent in doc.entities:
            entities.append(f"{doc.doc_id}\t{ent.id}\t{ent.source_type}\t{ent.start}\t{ent.end}\t{ent.surface}\n")
        for rel in doc.relations:
            relations.append(f"{doc.doc_id}\t{label_text(rel.label)}\tArg1:{rel.arg1}\tArg2:{rel.arg2}\n")
    return "".join(abstracts), "".join(entities), "".join(relations)


def _find_tsv(path: Path, *needles):
    for candidate in sorted(path.glob("*.tsv")):
        name = candidate.name.lower()
        if any(n in name for n in needles):
            return candidate
    raise FileNotFoundError(f"no *.tsv file matching {needles} in {path}")


def read_tsv_dir(path, split: str = "train", provenance=frozenset()) -> Corpus:
    """Read a directory holding ``*abstracts*.tsv``, ``*entities*.tsv`` and ``*relations*.tsv``.

    DrugProt's ``*_abstracs.tsv`` misspelling is accepted.
    """
    path = Path(path)
    return parse_biocreative_tsv(
        _read_text(_find_tsv(path, "abstract", "abstrac")),
        _read_text(_find_tsv(path, "entities")),
        _read_text(_find_tsv(path, "relations")),
        split,
        provenance,
    )


def write_tsv_dir(corpus: Corpus, path, prefix: str = "corpus") -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    abstracts, entities, relations = emit_biocreative_tsv(corpus)
    _write_text(path / f"{prefix}_abstracts.tsv", abstracts)
    _write_text(path / f"{prefix}_entities.tsv", entities)
    _write_text(path / f"{prefix}_relations.tsv", relations)


# -- JSON --------------------------------------------------------------------

_ENTITY_SCHEMA = {
    "type": "object",
    "required": ["id", "type", "start", "end", "text"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "pattern": r"^T\d+$"},
        "type": {"enum": sorted(SOURCE_TYPES)},
        "start": {"type": "integer", "minimum": 0},
        "end": {"type": "integer", "minimum": 1},
        "text": {"type": "string"},
    },
}

_RELATION_SCHEMA = {
    "type": "object",
    "required": ["id", "label", "arg1", "arg2"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "pattern": r"^R\d+$"},
        "label": {"type": "string"},
        "arg1": {"type": "string"},
        "arg2": {"type": "string"},
        "provenance": {"type": "array", "items": {"type": "string"}},
    },
}

CORPUS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["split", "docs"],
    "additionalProperties": False,
    "properties": {
        "split": {"enum": ["train", "validation"]},
        "docs": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["title", "abstract", "entities", "relations"],
                "additionalProperties": False,
                "properties": {
                    "title": {"type": "string"},
                    "abstract": {"type": "string"},
                    "entities": {"type": "array", "items": _ENTITY_SCHEMA},
                    "relations": {"type": "array", "items": _RELATION_SCHEMA},
                    "provenance": {"type": "array", "items": {"type": "string"}},
                    "other": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "instances": {"type": "array"},
    },
}

_validator = jsonschema.Draft202012Validator(CORPUS_SCHEMA)


def corpus_to_dict(corpus: Corpus) -> dict:
    docs = {}
    for doc in corpus:
        entry = {
            "title": doc.title,
            "abstract": doc.abstract,
            "entities": [
                {"id": e.id, "type": e.source_type, "start": e.start, "end": e.end, "text": e.surface}
                for e in doc.entities
            ],
            "relations": [],
        }
        for rel in doc.relations:
            item = {"id": rel.id, "label": label_text(rel.label), "arg1": rel.arg1, "arg2": rel.arg2}
            if rel.provenance:
                item["provenance"] = sorted(rel.provenance)
            entry["relations"].append(item)
        if doc.provenance:
            entry["provenance"] = sorted(doc.provenance)
        if doc.other_lines:
            entry["other"] = list(doc.other_lines)
        docs[doc.doc_id] = entry
    return {"split": corpus.split, "docs": docs}


def emit_json_corpus(corpus: Corpus) -> str:
    """Compact, deterministic JSON (docs keyed and ordered by doc_id)."""
    return json.dumps(corpus_to_dict(corpus), ensure_ascii=False, separators=(",", ":"))


def corpus_from_dict(data) -> Corpus:
    errors = sorted(_validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaViolation(err.json_path, err.message)
    docs = []
    for doc_id, entry in data["docs"].items():
        entities = []
        for i, e in enumerate(entry["entities"]):
            if e["start"] >= e["end"]:
                raise SchemaViolation(f"$.docs.{doc_id}.entities[{i}]", "start must be < end")
            entities.append(Entity(e["id"], e["type"], Span(e["start"], e["end"]), e["text"]))
        relations = []
        for i, r in enumerate(entry["relations"]):
            try:
                label = parse_label(r["label"])
            except ValueError:
                raise SchemaViolation(f"$.docs.{doc_id}.relations[{i}].label", f"unknown label {r['label']!r}") from None
            relations.append(Relation(r["id"], label, r["arg1"], r["arg2"], frozenset(r.get("provenance", ()))))
        docs.append(Document(
            doc_id, entry["title"], entry["abstract"], tuple(entities), tuple(relations),
            tuple(entry.get("other", ())), frozenset(entry.get("provenance", ())),
        ))
    return Corpus.from_documents(data["split"], docs)


def parse_json_corpus(content: str) -> Corpus:
    try:
        data = json.loads(content)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc}") from None
    return corpus_from_dict(data)


def read_json_corpus(path) -> Corpus:
    return parse_json_corpus(_read_text(path))


def write_json_corpus(corpus: Corpus, path) -> None:
    _write_text(path, emit_json_corpus(corpus) + "\n")


# -- format dispatch ---------------------------------------------------------

FORMATS = ("brat", "tsv", "json")


def detect_format(path) -> str:
    path = Path(path)
    if path.suffix == ".json":
        return "json"
    if path.is_dir():
        if any(path.glob("*.ann")) or (any(path.glob("*.txt")) and not any(path.glob("*.tsv"))):
            return "brat"
        if any(path.glob("*.tsv")):
            return "tsv"
    raise FileNotFoundError(f"cannot determine corpus format of {path}")


def read_corpus(path, fmt: Optional[str] = None, split: str = "train", provenance=frozenset()) -> Corpus:
    fmt = fmt or detect_format(path)
    if fmt == "brat":
        return read_brat_dir(path, split, provenance)
    if fmt == "tsv":
        return read_tsv_dir(path, split, provenance)
    if fmt == "json":
        corpus = read_json_corpus(path)
        if provenance:
            corpus = Corpus(corpus.split, {
                k: Document(d.doc_id, d.title, d.abstract, d.entities, d.relations, d.other_lines,
                            d.provenance | frozenset(provenance))
                for k, d in corpus.docs.items()
            })
        return corpus
    raise ValueError(f"unknown format {fmt!r}")


def write_corpus(corpus: Corpus, path, fmt: str) -> None:
    if fmt == "brat":
        write_brat_dir(corpus, path)
    elif fmt == "tsv":
        write_tsv_dir(corpus, path)
    elif fmt == "json":
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        write_json_corpus(corpus, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
