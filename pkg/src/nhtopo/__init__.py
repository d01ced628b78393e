"""Topology of complex-eigenvalue Riemann surfaces of non-Hermitian Bloch Hamiltonians."""
from .errors import (ConfigurationError, DegeneracyError, DimensionError, DomainError,
                     GeometryError, NHTopoError, NumericalError, SweepError, TrackingError)
from .model import (BlochModel, BlockModel, BuiltinModel, HoppingModel, HoppingTerm,
                    MomentumPoint, SumModel, builtin, builtin_FA, builtin_FC, builtin_TEST,
                    load_model, parse_model, random_trigonometric)
from .scan import ModelFamily, SweepResult, sweep, threading_report
from .spectral import SheetPath, TrackOptions, discriminant2, eigenvalues, monodromy, track
from .topology import (BraidWord, DegeneracyContour, ExceptionalPoint, InvariantReport,
                       braid_word, classify, degeneracy_contours, excitation_type_count,
                       invariants, locate_eps, m_matrix, winding_number)

__version__ = "0.1.0"
