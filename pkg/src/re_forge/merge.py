"""Abstract-by-abstract merging of two corpora with relation-conflict handling.

Entities of a shared abstract are aligned on (span, normalized type); their
ids play no part.  Relations are keyed on (chemical span, gene span, label).
When both sources annotate the same chemical-gene pair with different label
sets, the pair is a conflict and is settled by a :class:`ConflictPolicy`.
"""

from __future__ import annotations

import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .errors import EntityTextMismatch, MalformedRow, ReForgeError, SplitMismatch, UnresolvedConflict
from .model import (
    CprGroup,
    Corpus,
    Document,
    Entity,
    Relation,
    Span,
    label_text,
    parse_label,
)
from .prep import map_to_cpr

FAIL = "fail"
PREFER_A = "prefer-a"
PREFER_B = "prefer-b"
DROP = "drop"
RESOLUTION_FILE = "resolution-file"
POLICY_KINDS = (FAIL, PREFER_A, PREFER_B, DROP, RESOLUTION_FILE)


@dataclass(frozen=True)
class ConflictPolicy:
    kind: str = FAIL
    # (doc_id, chem_start, chem_end, gene_start, gene_end) -> tuple of labels
    resolutions: Optional[dict] = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ReForgeError(f"unknown conflict policy {self.kind!r}")
        if self.kind == RESOLUTION_FILE and self.resolutions is None:
            raise ReForgeError("resolution-file policy needs resolutions")

    @classmethod
    def from_resolution_file(cls, content: str) -> "ConflictPolicy":
        return cls(RESOLUTION_FILE, parse_resolutions(content))


def parse_resolutions(content: str) -> dict:
    """Parse ``doc_id, chem_start, chem_end, gene_start, gene_end, chosen_label`` rows.

    ``chosen_label`` may list several labels separated by commas, or be
    empty to drop the pair.  Lines starting with '#' are comments; columns
    past the sixth are ignored, so a conflict TSV is itself a valid
    resolution file (it then keeps corpus A's labels).
    """
    out = {}
    for lineno, line in enumerate(content.replace("\r", "").split("\n"), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < 5:
            raise MalformedRow(f"resolution line {lineno}: expected at least 5 columns")
        try:
            key = (cols[0], int(cols[1]), int(cols[2]), int(cols[3]), int(cols[4]))
        except ValueError:
            raise MalformedRow(f"resolution line {lineno}: offsets must be integers") from None
        raw = cols[5] if len(cols) > 5 else ""
        try:
            labels = tuple(sorted({parse_label(x) for x in raw.split(",") if x.strip()}, key=label_text))
        except ValueError as exc:
            raise MalformedRow(f"resolution line {lineno}: {exc}") from None
        out[key] = labels
    return out


@dataclass(frozen=True)
class ConflictRecord:
    doc_id: str
    chem_span: Span
    chem_surface: str
    gene_span: Span
    gene_surface: str
    label_a: tuple
    label_b: tuple

    @property
    def key(self):
        return (self.doc_id, self.chem_span.start, self.chem_span.end, self.gene_span.start, self.gene_span.end)

    def describe(self) -> str:
        return "{}:[{},{})-[{},{})".format(*self.key)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chem": {"start": self.chem_span.start, "end": self.chem_span.end, "text": self.chem_surface},
            "gene": {"start": self.gene_span.start, "end": self.gene_span.end, "text": self.gene_surface},
            "label_a": [label_text(x) for x in self.label_a],
            "label_b": [label_text(x) for x in self.label_b],
        }


@dataclass
class MergeReport:
    abstracts_only_a: int = 0
    abstracts_only_b: int = 0
    abstracts_shared: int = 0
    entity_text_mismatches: list = field(default_factory=list)
    conflicts: list = field(default_factory=list)
    duplicate_relations: int = 0
    dropped_other_lines: int = 0
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "abstracts_only_a": self.abstracts_only_a,
            "abstracts_only_b": self.abstracts_only_b,
            "abstracts_shared": self.abstracts_shared,
            "entity_text_mismatches": list(self.entity_text_mismatches),
            "conflict_count": len(self.conflicts),
            "conflicts": [c.to_dict() for c in self.conflicts],
            "duplicate_relations": self.duplicate_relations,
            "dropped_other_lines": self.dropped_other_lines,
            "stats": self.stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def conflicts_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("#doc_id\tchem_start\tchem_end\tgene_start\tgene_end\tlabel_a\tlabel_b\tchem_text\tgene_text\n")
        for c in self.conflicts:
            buf.write("\t".join([
                c.doc_id, str(c.chem_span.start), str(c.chem_span.end),
                str(c.gene_span.start), str(c.gene_span.end),
                ",".join(label_text(x) for x in c.label_a),
                ",".join(label_text(x) for x in c.label_b),
                c.chem_surface, c.gene_surface,
            ]) + "\n")
        return buf.getvalue()


def corpus_stats(corpus: Corpus) -> dict:
    """Abstract, entity and relation counts plus relations per CPR group."""
    per_group = Counter()
    n_entities = n_relations = 0
    for doc in corpus:
        n_entities += len(doc.entities)
        n_relations += len(doc.relations)
        for rel in doc.relations:
            group = rel.label if isinstance(rel.label, CprGroup) else map_to_cpr(rel.label)
            per_group[group] += 1
    return {
        "abstracts": len(corpus),
        "entities": n_entities,
        "relations": n_relations,
        "per_cpr": {g.label: per_group[g] for g in CprGroup},
    }


def _entity_sort_key(ent: Entity):
    return (ent.start, ent.end, ent.etype.value, ent.source_type)


def _label_key(label):
    return label_text(label)


def _build_document(doc_id, title, abstract, entities, relation_items, provenance) -> Document:
    """Assign canonical ids.

    ``entities`` is an iterable of Entity (ids ignored); ``relation_items`` is
    an iterable of ``(chem_key, gene_key, label, provenance)`` where the keys
    are (Span, EntityType).
    """
    ordered = sorted(entities, key=_entity_sort_key)
    new_ents = []
    index = {}
    for ent in ordered:
        key = (ent.span, ent.etype)
        if key in index:
            continue  # same span and type twice: one alignment key, one entity
        new = Entity(f"T{len(new_ents) + 1}", ent.source_type, ent.span, ent.surface)
        new_ents.append(new)
        index[key] = (len(new_ents), new.id)
    unique = {}
    for chem, gene, label, prov in relation_items:
        k = (chem, gene, label)
        unique[k] = unique.get(k, frozenset()) | frozenset(prov)
    rows = sorted(
        ((chem, gene, label, prov) for (chem, gene, label), prov in unique.items()),
        key=lambda it: (index[it[0]][0], index[it[1]][0], _label_key(it[2])),
    )
    new_rels = tuple(
        Relation(f"R{i}", label, index[chem][1], index[gene][1], frozenset(prov))
        for i, (chem, gene, label, prov) in enumerate(rows, start=1)
    )
    return Document(doc_id, title, abstract, tuple(new_ents), new_rels, (), frozenset(provenance))


def renumber(doc: Document) -> Document:
    """Canonical renumbering: entities by (start, end, type), relations by (arg1, arg2, label).

    Lines of unmodelled kinds are dropped because they reference old ids.
    """
    ents = doc.entity_map()
    items = [
        ((ents[r.arg1].span, ents[r.arg1].etype), (ents[r.arg2].span, ents[r.arg2].etype), r.label, r.provenance)
        for r in doc.relations
    ]
    return _build_document(doc.doc_id, doc.title, doc.abstract, doc.entities, items, doc.provenance)


def _pair_labels(doc: Document) -> dict:
    """(chem_key, gene_key) -> {label: provenance}"""
    ents = doc.entity_map()
    out = defaultdict(dict)
    for rel in doc.relations:
        c, g = ents[rel.arg1], ents[rel.arg2]
        key = ((c.span, c.etype), (g.span, g.etype))
        out[key][rel.label] = rel.provenance or doc.provenance
    return out


def _merge_document(da: Document, db: Document, policy: ConflictPolicy, report: MergeReport,
                    strict: bool, unresolved: list):
    if da.text != db.text:
        msg = f"{da.doc_id}: document text differs between corpora"
        if strict:
            raise EntityTextMismatch(msg)
        report.entity_text_mismatches.append({"doc_id": da.doc_id, "reason": "document text differs"})

    entities = {}
    for ent in da.entities:
        key = (ent.span, ent.etype)
        prev = entities.get(key)
        entities[key] = ent if prev is None else min(prev, ent, key=lambda e: e.source_type)
    dropped_b = set()
    for ent in db.entities:
        key = (ent.span, ent.etype)
        mine = entities.get(key)
        if mine is None:
            if da.text[ent.start:ent.end] != ent.surface:
                if strict:
                    raise EntityTextMismatch(f"{da.doc_id}: entity {ent.id} text disagrees with corpus A")
                report.entity_text_mismatches.append(
                    {"doc_id": da.doc_id, "start": ent.start, "end": ent.end, "text_b": ent.surface})
                dropped_b.add(key)
                continue
            entities[key] = ent
        elif mine.surface != ent.surface:
            if strict:
                raise EntityTextMismatch(
                    f"{da.doc_id}: [{ent.start},{ent.end}) is {mine.surface!r} in A but {ent.surface!r} in B")
            report.entity_text_mismatches.append(
                {"doc_id": da.doc_id, "start": ent.start, "end": ent.end,
                 "text_a": mine.surface, "text_b": ent.surface})
            dropped_b.add(key)
        elif mine.source_type != ent.source_type:
            # symmetric choice keeps merge(a, b) == merge(b, a)
            entities[key] = min(mine, ent, key=lambda e: e.source_type)

    pairs_a = _pair_labels(da)
    pairs_b = {k: v for k, v in _pair_labels(db).items() if k[0] not in dropped_b and k[1] not in dropped_b}

    items = []
    for pair in sorted(set(pairs_a) | set(pairs_b), key=lambda p: (p[0][0], p[1][0])):
        la, lb = pairs_a.get(pair), pairs_b.get(pair)
        if la is not None and lb is not None and set(la) != set(lb):
            chem = entities[pair[0]]
            gene = entities[pair[1]]
            record = ConflictRecord(
                da.doc_id, chem.span, chem.surface, gene.span, gene.surface,
                tuple(sorted(la, key=_label_key)), tuple(sorted(lb, key=_label_key)),
            )
            report.conflicts.append(record)
            chosen = _resolve(record, la, lb, policy)
            if chosen is None:
                unresolved.append(record)
                continue
            for label, prov in chosen.items():
                items.append((pair[0], pair[1], label, prov))
            continue
        merged = {}
        for source in (la, lb):
            for label, prov in (source or {}).items():
                if label in merged:
                    report.duplicate_relations += 1
                    merged[label] = merged[label] | prov
                else:
                    merged[label] = prov
        for label, prov in merged.items():
            items.append((pair[0], pair[1], label, prov))

    report.dropped_other_lines += len(da.other_lines) + len(db.other_lines)
    provenance = da.provenance | db.provenance
    return _build_document(da.doc_id, da.title, da.abstract, entities.values(), items, provenance)


def _resolve(record, la, lb, policy):
    if policy.kind == PREFER_A:
        return la
    if policy.kind == PREFER_B:
        return lb
    if policy.kind == DROP:
        return {}
    if policy.kind == RESOLUTION_FILE and record.key in policy.resolutions:
        chosen = {}
        for label in policy.resolutions[record.key]:
            chosen[label] = la.get(label, frozenset()) | lb.get(label, frozenset())
        return chosen
    return None


def merge_corpora(a: Corpus, b: Corpus, policy: ConflictPolicy = ConflictPolicy(), *, strict: bool = True):
    """Merge ``a`` and ``b`` into one corpus and report what happened.

    Abstracts found in only one corpus are copied unchanged.  Shared
    abstracts receive the union of entities and relations with canonical
    ids.  Raises UnresolvedConflict when the policy leaves any conflict
    open, listing all of them.
    """
    if a.split != b.split:
        raise SplitMismatch(f"cannot merge split {a.split!r} with {b.split!r}")
    report = MergeReport()
    docs = {}
    unresolved = []
    for doc_id in sorted(set(a.docs) | set(b.docs)):
        da, db = a.docs.get(doc_id), b.docs.get(doc_id)
        if db is None:
            report.abstracts_only_a += 1
            docs[doc_id] = da
        elif da is None:
            report.abstracts_only_b += 1
            docs[doc_id] = db
        else:
            report.abstracts_shared += 1
            docs[doc_id] = _merge_document(da, db, policy, report, strict, unresolved)
    if unresolved:
        raise UnresolvedConflict(unresolved)
    merged = Corpus(a.split, docs)
    report.stats = corpus_stats(merged)
    return merged, report
