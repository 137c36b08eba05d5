"""Chemical-gene relation corpora: merging, instance preparation, vocabulary graphs and scoring."""

from .errors import ReForgeError
from .model import Corpus, CprGroup, Document, Entity, EntityType, FineRelation, Relation, Span

__all__ = [
    "Corpus",
    "CprGroup",
    "Document",
    "Entity",
    "EntityType",
    "FineRelation",
    "ReForgeError",
    "Relation",
    "Span",
]
__version__ = "0.1.0"
