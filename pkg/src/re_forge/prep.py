"""From a merged corpus to classifier-ready relation instances.

Order of operations in :func:`prepare_dataset`: generate instances (positives
and synthetic CPR:10 negatives per sentence), drop excluded groups, split
80/20 stratified, then downsample negatives in the training part.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

from .errors import EmptyInput, MalformedRow, OverlappingEntities, ReForgeError
from .model import (
    NEGATIVE_GROUP,
    Corpus,
    CprGroup,
    Document,
    Entity,
    EntityType,
    FineRelation,
    RelationInstance,
    Sentence,
    Span,
    label_text,
    segment_sentences,
    sentence_index_of,
)
from .rng import SplitMix64

F = FineRelation
CPR_MAP = {
    F.PART_OF: CprGroup.CPR1,
    F.REGULATOR: CprGroup.CPR2,
    F.DIRECT_REGULATOR: CprGroup.CPR2,
    F.INDIRECT_REGULATOR: CprGroup.CPR2,
    F.UPREGULATOR: CprGroup.CPR3,
    F.ACTIVATOR: CprGroup.CPR3,
    F.INDIRECT_UPREGULATOR: CprGroup.CPR3,
    F.DOWNREGULATOR: CprGroup.CPR4,
    F.INHIBITOR: CprGroup.CPR4,
    F.INDIRECT_DOWNREGULATOR: CprGroup.CPR4,
    F.AGONIST: CprGroup.CPR5,
    F.AGONIST_ACTIVATOR: CprGroup.CPR5,
    F.AGONIST_INHIBITOR: CprGroup.CPR5,
    F.ANTAGONIST: CprGroup.CPR6,
    F.MODULATOR: CprGroup.CPR7,
    F.MODULATOR_ACTIVATOR: CprGroup.CPR7,
    F.MODULATOR_INHIBITOR: CprGroup.CPR7,
    F.COFACTOR: CprGroup.CPR8,
    F.SUBSTRATE: CprGroup.CPR9,
    F.PRODUCT_OF: CprGroup.CPR9,
    F.SUBSTRATE_PRODUCT_OF: CprGroup.CPR9,
    F.NO_RELATION: CprGroup.CPR10,
}
del F


def map_to_cpr(fine: FineRelation) -> CprGroup:
    return CPR_MAP[fine]


def to_cpr(label) -> CprGroup:
    """CPR group of a fine or already-grouped label."""
    return label if isinstance(label, CprGroup) else CPR_MAP[label]


class MaskMode(enum.Enum):
    MASK_TARGETS = "mask-targets"
    MASK_NON_TARGETS = "mask-non-targets"
    NO_MASK = "none"


@dataclass(frozen=True)
class MaskStrategy:
    mode: MaskMode = MaskMode.MASK_TARGETS
    chem_token: str = "@CHEMICAL$"
    gene_token: str = "@GENE$"

    def __post_init__(self):
        for tok in (self.chem_token, self.gene_token):
            if not tok or tok.split() != [tok]:
                raise ReForgeError(f"mask token {tok!r} must be a single whitespace-free token")

    def token_for(self, ent: Entity) -> str:
        return self.chem_token if ent.etype is EntityType.CHEMICAL else self.gene_token


@dataclass(frozen=True)
class PrepConfig:
    seed: int
    downsample_ratio: float = 0.6
    split_ratio: float = 0.8
    excluded_groups: frozenset = frozenset({CprGroup.CPR7, CprGroup.CPR8})
    masking: MaskStrategy = MaskStrategy()
    downsample_validation: bool = False

    def __post_init__(self):
        if not 0 <= self.downsample_ratio <= 1:
            raise ReForgeError("downsample_ratio must lie in [0, 1]")
        if not 0 < self.split_ratio < 1:
            raise ReForgeError("split_ratio must lie in (0, 1)")
        object.__setattr__(self, "excluded_groups", frozenset(self.excluded_groups))


@dataclass
class CrossSentenceReport:
    """What instance generation could not turn into sentence-level pairs."""

    cross_sentence_relations: list = field(default_factory=list)
    cross_boundary_entities: list = field(default_factory=list)
    overlapping_pairs: list = field(default_factory=list)

    def extend(self, other: "CrossSentenceReport"):
        self.cross_sentence_relations.extend(other.cross_sentence_relations)
        self.cross_boundary_entities.extend(other.cross_boundary_entities)
        self.overlapping_pairs.extend(other.overlapping_pairs)

    def to_json(self) -> str:
        body = {
            "cross_sentence_relations": self.cross_sentence_relations,
            "cross_boundary_entities": self.cross_boundary_entities,
            "overlapping_pairs": self.overlapping_pairs,
        }
        return json.dumps(body, indent=2, ensure_ascii=False) + "\n"


def mask_entities(sentence_text: str, chem: Entity, gene: Entity, others: Sequence[Entity],
                  strategy: MaskStrategy, offset: int = 0) -> str:
    """Replace entity mentions with type tokens.

    Entity spans are document offsets; ``offset`` is the sentence's start in
    the same coordinates.  Raises OverlappingEntities if two spans that need
    replacing overlap.
    """
    if strategy.mode is MaskMode.NO_MASK:
        return sentence_text
    if strategy.mode is MaskMode.MASK_TARGETS:
        targets = [chem, gene]
    else:
        targets = [e for e in others if e is not chem and e is not gene]
    targets = sorted(targets, key=lambda e: (e.start, e.end))
    for left, right in zip(targets, targets[1:]):
        if left.span.overlaps(right.span):
            raise OverlappingEntities(f"{left.id} [{left.start},{left.end}) overlaps {right.id} [{right.start},{right.end})")
    text = sentence_text
    for ent in reversed(targets):
        lo, hi = ent.start - offset, ent.end - offset
        if lo < 0 or hi > len(sentence_text):
            raise ReForgeError(f"{ent.id} lies outside the sentence")
        text = text[:lo] + strategy.token_for(ent) + text[hi:]
    return text


def _maskable_others(chem, gene, sentence_entities):
    """Non-target entities that can be masked without touching the targets or each other."""
    kept = []
    candidates = sorted(
        (e for e in sentence_entities if e is not chem and e is not gene),
        key=lambda e: (e.start, -(e.end - e.start)),
    )
    for ent in candidates:
        if ent.span.overlaps(chem.span) or ent.span.overlaps(gene.span):
            continue
        if kept and kept[-1].span.overlaps(ent.span):
            continue
        kept.append(ent)
    return kept


def _document_instances(doc: Document, sentences: Sequence[Sentence], cfg: PrepConfig):
    report = CrossSentenceReport()
    where = {}
    for ent in doc.entities:
        where[ent.id] = sentence_index_of(sentences, ent.span)
        if where[ent.id] is None:
            report.cross_boundary_entities.append(
                {"doc_id": doc.doc_id, "entity": ent.id, "start": ent.start, "end": ent.end})

    annotated = defaultdict(set)
    for rel in doc.relations:
        s1, s2 = where[rel.arg1], where[rel.arg2]
        if s1 is None or s2 is None or s1 != s2:
            report.cross_sentence_relations.append({
                "doc_id": doc.doc_id, "relation": rel.id, "label": label_text(rel.label),
                "arg1": rel.arg1, "arg2": rel.arg2,
                "arg1_sentence": s1, "arg2_sentence": s2,
            })
            continue
        annotated[(rel.arg1, rel.arg2)].add(to_cpr(rel.label))

    by_sentence = defaultdict(list)
    for ent in doc.entities:
        if where[ent.id] is not None:
            by_sentence[where[ent.id]].append(ent)

    instances = []
    masking = cfg.masking
    for idx, sent in enumerate(sentences):
        ents = by_sentence.get(idx, [])
        chems = [e for e in ents if e.etype is EntityType.CHEMICAL]
        genes = [e for e in ents if e.etype is EntityType.GENE]
        for chem in chems:
            for gene in genes:
                if masking.mode is MaskMode.MASK_TARGETS and chem.span.overlaps(gene.span):
                    report.overlapping_pairs.append({"doc_id": doc.doc_id, "chem": chem.id, "gene": gene.id})
                    continue
                others = _maskable_others(chem, gene, ents) if masking.mode is MaskMode.MASK_NON_TARGETS else ()
                masked = mask_entities(sent.text, chem, gene, others, masking, offset=sent.span.start)
                labels = annotated.get((chem.id, gene.id))
                if labels:
                    for label in sorted(labels):
                        instances.append(RelationInstance(doc.doc_id, idx, sent, chem, gene, label, masked, False))
                else:
                    instances.append(RelationInstance(doc.doc_id, idx, sent, chem, gene, NEGATIVE_GROUP, masked, True))
    return instances, report


def generate_instances(corpus: Corpus, cfg: PrepConfig, *,
                       segmenter: Callable[[Document], Sequence[Sentence]] = segment_sentences,
                       sentences: Optional[Mapping[str, Sequence[Sentence]]] = None,
                       threads: int = 1):
    """One instance per annotated same-sentence pair plus one CPR:10 per unannotated pair.

    ``sentences`` supplies pre-segmented input per doc_id and bypasses
    ``segmenter``.  Instances whose group is in ``cfg.excluded_groups`` are
    removed.  Returns ``(instances, CrossSentenceReport)``; the result does
    not depend on ``threads``.
    """
    docs = list(corpus)

    def work(doc):
        sents = sentences[doc.doc_id] if sentences is not None else segmenter(doc)
        return _document_instances(doc, sents, cfg)

    if threads > 1 and len(docs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, docs))
    else:
        results = [work(doc) for doc in docs]

    instances = []
    report = CrossSentenceReport()
    for doc_instances, doc_report in results:
        instances.extend(i for i in doc_instances if i.label not in cfg.excluded_groups)
        report.extend(doc_report)
    return instances, report


def _floor_fraction(ratio: float, n: int) -> int:
    # decimal reading of the ratio, so 0.29 * 100 gives 29 rather than 28
    return math.floor(Fraction(str(ratio)) * n)


def downsample_negatives(instances: Sequence, ratio: float, seed: int, negative: CprGroup = NEGATIVE_GROUP) -> list:
    """Keep every positive and ``floor(ratio * n_negative)`` negatives chosen uniformly.

    Survivors keep their original order.
    """
    if not 0 <= ratio <= 1:
        raise ReForgeError("ratio must lie in [0, 1]")
    negatives = [i for i, inst in enumerate(instances) if inst.label == negative]
    k = _floor_fraction(ratio, len(negatives))
    chosen = {negatives[j] for j in SplitMix64(seed).sample(len(negatives), k)}
    return [inst for i, inst in enumerate(instances) if inst.label != negative or i in chosen]


def split_sizes(counts: Mapping, split_ratio: float) -> dict:
    """Per-class training share: ``floor(ratio * n)``, at least 1 when n >= 1."""
    out = {}
    for label, n in counts.items():
        k = _floor_fraction(split_ratio, n)
        if n >= 1 and k == 0:
            k = 1
        out[label] = k
    return out


def _label_order(label):
    if isinstance(label, CprGroup):
        return (0, label.value, "")
    return (1, 0, str(label))


def stratified_split(instances: Sequence, split_ratio: float, seed: int):
    """Per-class seeded split; returns ``(train, validation)`` in input order.

    Classes are visited in label order, each drawing from one shared
    generator: shuffle the class's members and send the first
    ``split_sizes`` of them to train.
    """
    if not 0 < split_ratio < 1:
        raise ReForgeError("split_ratio must lie in (0, 1)")
    members = defaultdict(list)
    for i, inst in enumerate(instances):
        members[inst.label].append(i)
    sizes = split_sizes({k: len(v) for k, v in members.items()}, split_ratio)
    rng = SplitMix64(seed)
    to_train = set()
    for label in sorted(members, key=_label_order):
        idx = members[label]
        picked = rng.sample(len(idx), sizes[label])
        to_train.update(idx[j] for j in picked)
    train = [inst for i, inst in enumerate(instances) if i in to_train]
    validation = [inst for i, inst in enumerate(instances) if i not in to_train]
    return train, validation


def class_weights(instances) -> dict:
    """Inverse-frequency weights ``N / (K * n_c)`` over the K classes present.

    Accepts instances (anything with ``.label``) or bare labels.
    """
    counts = Counter(getattr(x, "label", x) for x in instances)
    if not counts:
        raise EmptyInput("class_weights needs at least one instance")
    total = sum(counts.values())
    k = len(counts)
    return {label: total / (k * n) for label, n in sorted(counts.items(), key=lambda kv: _label_order(kv[0]))}


def sample_weights(instances, weights: Mapping) -> list:
    return [weights[inst.label] for inst in instances]


@dataclass
class PreparedData:
    train: list
    validation: list
    report: CrossSentenceReport
    weights: dict


def prepare_dataset(corpus: Corpus, cfg: PrepConfig, *, threads: int = 1, **kwargs) -> PreparedData:
    instances, report = generate_instances(corpus, cfg, threads=threads, **kwargs)
    train, validation = stratified_split(instances, cfg.split_ratio, cfg.seed)
    train = downsample_negatives(train, cfg.downsample_ratio, cfg.seed)
    if cfg.downsample_validation:
        validation = downsample_negatives(validation, cfg.downsample_ratio, cfg.seed)
    weights = class_weights(train) if train else {}
    return PreparedData(train, validation, report, weights)


# -- serialization -----------------------------------------------------------

class InstanceRow(NamedTuple):
    """The TSV projection of a :class:`RelationInstance`."""

    doc_id: str
    sentence_index: int
    chem_span: Span
    gene_span: Span
    label: CprGroup
    masked_text: str


def _flat(text: str) -> str:
    return text.replace("\t", " ").replace("\n", " ")


def to_row(inst) -> InstanceRow:
    if isinstance(inst, InstanceRow):
        return inst
    return InstanceRow(inst.doc_id, inst.sentence_index, inst.chem.span, inst.gene.span, inst.label, inst.masked_text)


def instances_to_tsv(instances) -> str:
    """``doc_id, sentence_idx, chem_span, gene_span, label, masked_text``; spans as ``start-end``.

    Tabs and newlines inside the masked text become spaces.
    """
    lines = []
    for inst in map(to_row, instances):
        lines.append("\t".join([
            inst.doc_id, str(inst.sentence_index),
            f"{inst.chem_span.start}-{inst.chem_span.end}",
            f"{inst.gene_span.start}-{inst.gene_span.end}",
            inst.label.label, _flat(inst.masked_text),
        ]) + "\n")
    return "".join(lines)


def _parse_span(text: str, lineno: int) -> Span:
    try:
        lo, hi = text.split("-")
        return Span(int(lo), int(hi))
    except (ValueError, ReForgeError):
        raise MalformedRow(f"instances line {lineno}: bad span {text!r}") from None


def parse_instances_tsv(content: str) -> list:
    rows = []
    for lineno, line in enumerate(content.replace("\r", "").split("\n"), start=1):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != 6:
            raise MalformedRow(f"instances line {lineno}: expected 6 columns, got {len(cols)}")
        doc_id, sidx, chem, gene, label, text = cols
        try:
            group = CprGroup.parse(label)
            sidx = int(sidx)
        except ValueError as exc:
            raise MalformedRow(f"instances line {lineno}: {exc}") from None
        rows.append(InstanceRow(doc_id, sidx, _parse_span(chem, lineno), _parse_span(gene, lineno), group, text))
    return rows


def instance_to_dict(inst: RelationInstance) -> dict:
    return {
        "doc_id": inst.doc_id,
        "sentence_index": inst.sentence_index,
        "sentence": {"start": inst.sentence.span.start, "end": inst.sentence.span.end},
        "chem": {"id": inst.chem.id, "start": inst.chem.start, "end": inst.chem.end},
        "gene": {"id": inst.gene.id, "start": inst.gene.start, "end": inst.gene.end},
        "label": inst.label.label,
        "masked_text": inst.masked_text,
        "synthetic_negative": inst.is_synthetic_negative,
    }


def instances_to_json(corpus: Corpus, instances) -> str:
    """The corpus JSON document extended with an ``instances`` array."""
    from .brat import corpus_to_dict

    body = corpus_to_dict(corpus)
    body["instances"] = [instance_to_dict(i) for i in instances]
    return json.dumps(body, ensure_ascii=False, separators=(",", ":"))
