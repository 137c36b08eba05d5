"""Document, entity, relation and instance types shared by every stage.

All character offsets index the *full text* of a document, which is the
title and the abstract joined by a single TAB (the BioCreative convention
for ChemProt and DrugProt).  Offsets count Unicode code points.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .errors import (
    ArgumentRoleError,
    DanglingReference,
    DuplicateId,
    DuplicateRelation,
    ReForgeError,
    SpanMismatch,
)

TITLE_SEPARATOR = "\t"

PROVENANCE_TAGS = ("ChemProt", "DrugProt", "Merged")


class EntityType(enum.Enum):
    CHEMICAL = "CHEMICAL"
    GENE = "GENE"


# Source type strings found in the distributions and how they normalize.
SOURCE_TYPES = {
    "CHEMICAL": EntityType.CHEMICAL,
    "GENE": EntityType.GENE,
    "GENE-Y": EntityType.GENE,
    "GENE-N": EntityType.GENE,
}


class FineRelation(enum.Enum):
    PART_OF = "PART_OF"
    REGULATOR = "REGULATOR"
    DIRECT_REGULATOR = "DIRECT_REGULATOR"
    INDIRECT_REGULATOR = "INDIRECT_REGULATOR"
    UPREGULATOR = "UPREGULATOR"
    ACTIVATOR = "ACTIVATOR"
    INDIRECT_UPREGULATOR = "INDIRECT_UPREGULATOR"
    DOWNREGULATOR = "DOWNREGULATOR"
    INHIBITOR = "INHIBITOR"
    INDIRECT_DOWNREGULATOR = "INDIRECT_DOWNREGULATOR"
    AGONIST = "AGONIST"
    AGONIST_ACTIVATOR = "AGONIST-ACTIVATOR"
    AGONIST_INHIBITOR = "AGONIST-INHIBITOR"
    ANTAGONIST = "ANTAGONIST"
    MODULATOR = "MODULATOR"
    MODULATOR_ACTIVATOR = "MODULATOR-ACTIVATOR"
    MODULATOR_INHIBITOR = "MODULATOR-INHIBITOR"
    COFACTOR = "COFACTOR"
    SUBSTRATE = "SUBSTRATE"
    PRODUCT_OF = "PRODUCT-OF"
    SUBSTRATE_PRODUCT_OF = "SUBSTRATE_PRODUCT-OF"
    NO_RELATION = "NO_RELATION"

    @classmethod
    def parse(cls, text: str) -> "FineRelation":
        """Accept both the enum name and the distribution spelling.

        DrugProt writes some labels with hyphens (``AGONIST-ACTIVATOR``,
        ``PRODUCT-OF``); both ``PRODUCT_OF`` and ``PRODUCT-OF`` resolve to the
        same member.
        """
        key = text.strip()
        if key in cls.__members__:
            return cls[key]
        try:
            return cls(key)
        except ValueError:
            pass
        folded = key.upper().replace("-", "_")
        if folded in cls.__members__:
            return cls[folded]
        if folded == "NOT":
            return cls.NO_RELATION
        raise ValueError(f"unknown relation category {text!r}")


class CprGroup(enum.Enum):
    CPR1 = 1
    CPR2 = 2
    CPR3 = 3
    CPR4 = 4
    CPR5 = 5
    CPR6 = 6
    CPR7 = 7
    CPR8 = 8
    CPR9 = 9
    CPR10 = 10

    @property
    def label(self) -> str:
        return f"CPR:{self.value}"

    @classmethod
    def parse(cls, text: str) -> "CprGroup":
        m = re.fullmatch(r"CPR[:\-]?(\d+)", text.strip(), flags=re.IGNORECASE)
        if not m or not 1 <= int(m.group(1)) <= 10:
            raise ValueError(f"not a CPR group: {text!r}")
        return cls(int(m.group(1)))

    def __lt__(self, other):
        if not isinstance(other, CprGroup):
            return NotImplemented
        return self.value < other.value


NEGATIVE_GROUP = CprGroup.CPR10

Label = Union[FineRelation, CprGroup]


def label_text(label: Label) -> str:
    """Serialized form: the fine category's name or ``CPR:<n>``."""
    if isinstance(label, CprGroup):
        return label.label
    return label.name


def parse_label(text: str) -> Label:
    """Inverse of :func:`label_text`; raises ``ValueError`` on unknown labels."""
    if text.upper().startswith("CPR"):
        return CprGroup.parse(text)
    return FineRelation.parse(text)


_ID_RE = re.compile(r"([A-Za-z#*]*)(\d*)(.*)")


def id_sort_key(ident: str):
    """Natural ordering so that T2 sorts before T10."""
    prefix, digits, rest = _ID_RE.fullmatch(ident).groups()
    return (prefix, int(digits) if digits else -1, rest)


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ReForgeError(f"invalid span [{self.start},{self.end})")

    def __len__(self):
        return self.end - self.start

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Entity:
    """An entity mention.

    ``source_type`` keeps the distribution's type string (``GENE-Y``,
    ``GENE-N``, ...); :attr:`etype` is the normalized CHEMICAL/GENE type.
    """

    id: str
    source_type: str
    span: Span
    surface: str

    def __post_init__(self):
        if self.source_type not in SOURCE_TYPES:
            raise ReForgeError(f"unknown entity type {self.source_type!r}")

    @property
    def etype(self) -> EntityType:
        return SOURCE_TYPES[self.source_type]

    @property
    def start(self) -> int:
        return self.span.start

    @property
    def end(self) -> int:
        return self.span.end


@dataclass(frozen=True)
class Relation:
    id: str
    label: Label
    arg1: str
    arg2: str
    provenance: frozenset = field(default=frozenset(), compare=False)


def _validate_text(name, value, forbid):
    for ch in forbid:
        if ch in value:
            raise ReForgeError(f"{name} may not contain {ch!r}")


@dataclass(frozen=True)
class Document:
    """One PubMed abstract with its annotations.

    Entities are stored ordered by (start offset, id) and relations by id,
    so equality does not depend on the order annotations were supplied in.
    ``other_lines`` holds BRAT lines of kinds this package does not model
    (events, attributes, notes), kept verbatim.  Provenance does not take
    part in equality.
    """

    doc_id: str
    title: str
    abstract: str
    entities: tuple = ()
    relations: tuple = ()
    other_lines: tuple = ()
    provenance: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        _validate_text("title", self.title, "\t\n\r")
        _validate_text("abstract", self.abstract, "\r")
        ents = tuple(sorted(self.entities, key=lambda e: (e.span.start, id_sort_key(e.id))))
        rels = tuple(sorted(self.relations, key=lambda r: id_sort_key(r.id)))
        object.__setattr__(self, "entities", ents)
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "other_lines", tuple(self.other_lines))
        object.__setattr__(self, "provenance", frozenset(self.provenance))
        self._validate()

    @property
    def text(self) -> str:
        return self.title + TITLE_SEPARATOR + self.abstract

    def _validate(self):
        text = self.text
        by_id = {}
        for ent in self.entities:
            if not ent.id.startswith("T"):
                raise ReForgeError(f"{self.doc_id}: entity id {ent.id!r} must start with 'T'")
            if ent.id in by_id:
                raise DuplicateId(f"{self.doc_id}: duplicate entity id {ent.id}")
            if ent.span.end > len(text):
                raise SpanMismatch(
                    f"{self.doc_id}: {ent.id} span [{ent.start},{ent.end}) exceeds text length {len(text)}"
                )
            sliced = text[ent.start:ent.end]
            if sliced != ent.surface:
                raise SpanMismatch(
                    f"{self.doc_id}: {ent.id} surface {ent.surface!r} != text {sliced!r}"
                )
            _validate_text(f"{self.doc_id}: {ent.id} surface", ent.surface, "\t\n\r")
            by_id[ent.id] = ent
        seen_rel_ids = set()
        triples = set()
        for rel in self.relations:
            if not rel.id.startswith("R"):
                raise ReForgeError(f"{self.doc_id}: relation id {rel.id!r} must start with 'R'")
            if rel.id in seen_rel_ids:
                raise DuplicateId(f"{self.doc_id}: duplicate relation id {rel.id}")
            seen_rel_ids.add(rel.id)
            for role, arg, want in (("Arg1", rel.arg1, EntityType.CHEMICAL), ("Arg2", rel.arg2, EntityType.GENE)):
                ent = by_id.get(arg)
                if ent is None:
                    raise DanglingReference(f"{self.doc_id}: {rel.id} {role}:{arg} does not resolve")
                if ent.etype is not want:
                    raise ArgumentRoleError(
                        f"{self.doc_id}: {rel.id} {role}:{arg} is {ent.etype.value}, expected {want.value}"
                    )
            triple = (rel.arg1, rel.arg2, rel.label)
            if triple in triples:
                raise DuplicateRelation(f"{self.doc_id}: duplicate relation {triple}")
            triples.add(triple)

    def entity(self, ident: str) -> Entity:
        for ent in self.entities:
            if ent.id == ident:
                return ent
        raise KeyError(ident)

    def entity_map(self) -> dict:
        return {e.id: e for e in self.entities}


@dataclass(frozen=True)
class Corpus:
    split: str
    docs: Mapping[str, Document]

    def __post_init__(self):
        if self.split not in ("train", "validation"):
            raise ReForgeError(f"split must be 'train' or 'validation', got {self.split!r}")
        docs = dict(sorted(self.docs.items()))
        for key, doc in docs.items():
            if key != doc.doc_id:
                raise ReForgeError(f"corpus key {key!r} != doc_id {doc.doc_id!r}")
        object.__setattr__(self, "docs", docs)

    @classmethod
    def from_documents(cls, split: str, documents) -> "Corpus":
        docs = {}
        for doc in documents:
            if doc.doc_id in docs:
                raise DuplicateId(f"duplicate doc_id {doc.doc_id}")
            docs[doc.doc_id] = doc
        return cls(split, docs)

    def __len__(self):
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs.values())


@dataclass(frozen=True)
class Sentence:
    span: Span
    text: str


@dataclass(frozen=True)
class RelationInstance:
    doc_id: str
    sentence_index: int
    sentence: Sentence
    chem: Entity
    gene: Entity
    label: CprGroup
    masked_text: str
    is_synthetic_negative: bool = False

    def __post_init__(self):
        if not (self.sentence.span.contains(self.chem.span) and self.sentence.span.contains(self.gene.span)):
            raise ReForgeError("instance entities must lie inside the sentence")
        if self.is_synthetic_negative and self.label is not NEGATIVE_GROUP:
            raise ReForgeError("synthetic negatives must be labelled CPR:10")


# -- sentence segmentation ---------------------------------------------------

ABBREVIATIONS = frozenset(
    w.lower()
    for w in (
        "Fig.", "Figs.", "al.", "i.e.", "e.g.", "vs.", "cf.", "approx.", "ca.",
        "Dr.", "No.", "Nos.", "Eq.", "Ref.", "Refs.", "Tab.", "St.", "resp.",
        "Mr.", "Ms.", "Prof.", "viz.", "etc.",
    )
)

_BOUNDARY_RE = re.compile(r"[.?!](?=\s+[A-Z0-9])")


def _guarded(text: str, punct_pos: int) -> bool:
    if text[punct_pos] != ".":
        return False
    word_start = punct_pos
    while word_start > 0 and not text[word_start - 1].isspace():
        word_start -= 1
    word = text[word_start:punct_pos + 1]
    # Single capital initials ("J.") are deliberately not guarded: names
    # such as "vitamin B." end sentences far more often in abstracts.
    return word.lower() in ABBREVIATIONS


def split_sentences(text: str, offset: int = 0) -> list:
    """Rule-based segmentation of ``text``; spans are shifted by ``offset``.

    A boundary follows '.', '?' or '!' when whitespace and then an uppercase
    letter or digit come next, unless the word ending in the period is a
    known abbreviation.
    """
    cuts = [0]
    for m in _BOUNDARY_RE.finditer(text):
        pos = m.start()
        if not _guarded(text, pos):
            cuts.append(pos + 1)
    cuts.append(len(text))
    sentences = []
    for lo, hi in zip(cuts, cuts[1:]):
        while lo < hi and text[lo].isspace():
            lo += 1
        while hi > lo and text[hi - 1].isspace():
            hi -= 1
        if lo < hi:
            sentences.append(Sentence(Span(lo + offset, hi + offset), text[lo:hi]))
    return sentences


def segment_sentences(doc: Document) -> list:
    """Sentences of ``doc`` over its full text.

    The title is always its own segment; the abstract is split with
    :func:`split_sentences`.
    """
    sentences = split_sentences(doc.title, 0)
    sentences.extend(split_sentences(doc.abstract, len(doc.title) + len(TITLE_SEPARATOR)))
    return sentences


def sentence_index_of(sentences: Sequence[Sentence], span: Span) -> Optional[int]:
    """Index of the sentence fully containing ``span``, or None when it crosses a boundary."""
    for i, sent in enumerate(sentences):
        if sent.span.contains(span):
            return i
    return None
