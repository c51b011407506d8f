"""Numerical tools for planar quasifields: loop sections, spread sets and their structure."""
from .linalg_core import GroupCoords, compose, decompose_gl2plus
from .section_model import (NumericPolicy, QuasifieldLoop, SectionPair, complex_section,
                            left_divide, multiply, right_divide)
from .structure_analysis import ClassificationReport, classify
from .betten_catalog import FAMILY_IDS, FamilySpec, instantiate, expected_verdicts, validate

__all__ = ["GroupCoords", "compose", "decompose_gl2plus", "NumericPolicy", "QuasifieldLoop",
           "SectionPair", "complex_section", "left_divide", "multiply", "right_divide",
           "ClassificationReport", "classify", "FAMILY_IDS", "FamilySpec", "instantiate",
           "expected_verdicts", "validate"]
__version__ = "0.1.0"
