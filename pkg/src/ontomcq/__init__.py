"""Ontology-based multiple-choice question generation with difficulty prediction."""
from .ontology import Condition, Literal, Ontology, load_ontology
from .generator import P1, P2, P3, PatternShape, Slot, Stem, ChoiceSet

__all__ = ["Condition", "Literal", "Ontology", "load_ontology",
           "P1", "P2", "P3", "PatternShape", "Slot", "Stem", "ChoiceSet"]
__version__ = "0.1.0"
