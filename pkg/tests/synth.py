"""Random valid documents and corpora for property tests."""

import random
import re

from hypothesis import strategies as st

from re_forge.model import (
    SOURCE_TYPES,
    Corpus,
    CprGroup,
    Document,
    Entity,
    EntityType,
    FineRelation,
    Relation,
    Span,
)

ALPHABET = "abcdefgh XYZ-0123.,()αβé"
LABELS = list(FineRelation) + list(CprGroup)
CHEM_TYPES = [t for t, e in SOURCE_TYPES.items() if e is EntityType.CHEMICAL]
GENE_TYPES = [t for t, e in SOURCE_TYPES.items() if e is EntityType.GENE]
OTHER_LINE_TEMPLATES = [
    "A{n}\tNegated R1",
    "#{n}\tAnnotatorNotes T1\tchecked by hand",
    "E{n}\tPhosphorylation:T2 Theme:T1",
    "N{n}\tReference T1 ChEBI:15365\taspirin",
    "M{n}\tConfidence E1 High",
]


def _segments(text):
    """(start, end) of maximal runs without tab, newline or carriage return."""
    return [(m.start(), m.end()) for m in re.finditer(r"[^\t\n\r]+", text)]


@st.composite
def documents(draw, doc_id="D1"):
    title = draw(st.text(alphabet=ALPHABET, max_size=30))
    abstract = draw(st.text(alphabet=ALPHABET + "\n\t", max_size=120))
    text = title + "\t" + abstract
    segments = _segments(text)
    entities = []
    if segments:
        n = draw(st.integers(0, 8))
        numbers = draw(st.lists(st.integers(1, 99), min_size=n, max_size=n, unique=True))
        for num in numbers:
            lo, hi = draw(st.sampled_from(segments))
            start = draw(st.integers(lo, hi - 1))
            end = draw(st.integers(start + 1, hi))
            etype = draw(st.sampled_from(sorted(SOURCE_TYPES)))
            entities.append(Entity(f"T{num}", etype, Span(start, end), text[start:end]))
    chems = [e for e in entities if e.etype is EntityType.CHEMICAL]
    genes = [e for e in entities if e.etype is EntityType.GENE]
    relations = []
    if chems and genes:
        triples = draw(st.lists(
            st.tuples(st.sampled_from(chems), st.sampled_from(genes), st.sampled_from(LABELS)),
            max_size=6, unique_by=lambda t: (t[0].id, t[1].id, t[2]),
        ))
        numbers = draw(st.lists(st.integers(1, 99), min_size=len(triples), max_size=len(triples), unique=True))
        relations = [Relation(f"R{k}", lab, c.id, g.id) for k, (c, g, lab) in zip(numbers, triples)]
    others = draw(st.lists(st.sampled_from(OTHER_LINE_TEMPLATES), max_size=3))
    other_lines = [tpl.format(n=i + 1) for i, tpl in enumerate(others)]
    provenance = draw(st.frozensets(st.sampled_from(["ChemProt", "DrugProt", "Merged"])))
    return Document(doc_id, title, abstract, tuple(entities), tuple(relations), tuple(other_lines), provenance)


@st.composite
def corpora(draw, max_docs=4):
    ids = draw(st.lists(st.integers(1, 10 ** 8).map(str), max_size=max_docs, unique=True))
    split = draw(st.sampled_from(["train", "validation"]))
    return Corpus.from_documents(split, [draw(documents(doc_id=i)) for i in ids])


# -- plain-random generators (seeded, fast) ---------------------------------

WORDS = ["aspirin", "inhibits", "COX-2", "binds", "the", "receptor", "and", "dopamine",
         "D2", "kinase", "via", "ibuprofen", "EGFR", "of", "levels", "in", "cells"]


def random_text(rng: random.Random, n_words: int) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n_words))


def random_base_document(rng: random.Random, doc_id: str):
    """Title, abstract and a pool of non-duplicated (span, type) entity candidates."""
    title = random_text(rng, rng.randint(1, 6))
    abstract = random_text(rng, rng.randint(3, 25))
    text = title + "\t" + abstract
    words = [(m.start(), m.end()) for m in re.finditer(r"\S+", text)]
    pool = {}
    for start, end in rng.sample(words, min(len(words), rng.randint(2, 10))):
        etype = rng.choice([EntityType.CHEMICAL, EntityType.GENE])
        pool[(Span(start, end), etype)] = text[start:end]
    return title, abstract, pool


def random_view(rng: random.Random, doc_id, title, abstract, pool, label_pool, provenance):
    """One source's annotation of a shared abstract: entity subset plus one label per chosen pair."""
    keys = sorted(pool, key=lambda k: (k[0], k[1].value))
    chosen = [k for k in keys if rng.random() < 0.8]
    entities = []
    for i, (span, etype) in enumerate(chosen, start=1):
        types = CHEM_TYPES if etype is EntityType.CHEMICAL else GENE_TYPES
        entities.append(Entity(f"T{i}", rng.choice(types), span, pool[(span, etype)]))
    chems = [e for e in entities if e.etype is EntityType.CHEMICAL]
    genes = [e for e in entities if e.etype is EntityType.GENE]
    relations = []
    for c in chems:
        for g in genes:
            if rng.random() < 0.5:
                relations.append(Relation(f"R{len(relations) + 1}", rng.choice(label_pool), c.id, g.id,
                                          frozenset(provenance)))
    return Document(doc_id, title, abstract, tuple(entities), tuple(relations), (), frozenset(provenance))


def random_corpus_pair(rng: random.Random, split="train"):
    """Two corpora over partly shared abstracts, with agreements and disagreements."""
    n = rng.randint(1, 6)
    label_pool = rng.sample(list(FineRelation), rng.randint(1, 4))
    docs_a, docs_b = [], []
    for k in range(n):
        doc_id = str(1000 + k)
        title, abstract, pool = random_base_document(rng, doc_id)
        where = rng.choice(["a", "b", "both", "both"])
        if where in ("a", "both"):
            docs_a.append(random_view(rng, doc_id, title, abstract, pool, label_pool, {"ChemProt"}))
        if where in ("b", "both"):
            docs_b.append(random_view(rng, doc_id, title, abstract, pool, label_pool, {"DrugProt"}))
    return Corpus.from_documents(split, docs_a), Corpus.from_documents(split, docs_b)


def random_sentence_document(rng: random.Random, doc_id: str):
    """An abstract of several sentences with non-overlapping word-level entities."""
    sentences = []
    for _ in range(rng.randint(1, 5)):
        words = random_text(rng, rng.randint(2, 12)).split()
        words[0] = words[0][0].upper() + words[0][1:]
        sentences.append(" ".join(words) + ".")
    title = random_text(rng, rng.randint(1, 5))
    abstract = " ".join(sentences)
    text = title + "\t" + abstract
    entities = []
    for m in re.finditer(r"[^\s.]+", text):
        if "\t" in m.group() or rng.random() < 0.5:
            continue
        etype = rng.choice(["CHEMICAL", "GENE", "GENE-Y", "GENE-N"])
        entities.append(Entity(f"T{len(entities) + 1}", etype, Span(m.start(), m.end()), m.group()))
    chems = [e for e in entities if e.etype is EntityType.CHEMICAL]
    genes = [e for e in entities if e.etype is EntityType.GENE]
    relations = []
    seen = set()
    for _ in range(rng.randint(0, 6)):
        if not chems or not genes:
            break
        c, g = rng.choice(chems), rng.choice(genes)
        label = rng.choice(list(FineRelation))
        if (c.id, g.id, label) in seen:
            continue
        seen.add((c.id, g.id, label))
        relations.append(Relation(f"R{len(relations) + 1}", label, c.id, g.id))
    return Document(doc_id, title, abstract, tuple(entities), tuple(relations))
