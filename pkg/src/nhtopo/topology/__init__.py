from .braids import BraidWord, braid_word
from .contours import (DegeneracyContour, contour_residual, degeneracy_contours, loop_crossings,
                       sheet_grid)
from .exceptional import ExceptionalPoint, locate_eps, winding_number, winding_phase
from .invariants import (Classification, InvariantReport, classification_order, classify,
                         excitation_type_count, invariants, m_matrix, pair_bit, two_band_bit)

__all__ = [
    "BraidWord", "braid_word", "DegeneracyContour", "contour_residual", "degeneracy_contours",
    "loop_crossings", "sheet_grid", "ExceptionalPoint", "locate_eps", "winding_number",
    "winding_phase", "Classification", "InvariantReport", "classification_order", "classify",
    "excitation_type_count", "invariants", "m_matrix", "pair_bit", "two_band_bit",
]
