"""Numerical toolkit for variable-exponent Lebesgue spaces on the line.

Piecewise-constant grid functions, Luxemburg norms, fractional maximal
operators, weight-class testers, Calderon-Zygmund sparse families and kernel
probes, plus a scenario harness (``verify`` on the command line).
"""

from .errors import (ExponentMismatch, NotInFamily, ParseError, PreconditionError, QuadratureError, RangeError,
                     RootAboveThreshold, ScenarioInvalid, VarfracError)
from .exponent import (VariableExponent, beta_from_pair, combine, complement, conjugate, constant, harmonic_mean,
                       verify_log_holder)
from .grid import CubeFamily, DyadicFamily, Grid, GridFunction, Interval, integrate, local_cubes, test_cubes
from .luxemburg import conjugate_norm, holder, indicator_norm, luxemburg_norm, modular, power_norm_identity_check
from .maximal import MaximalConfig, average_op, dyadic_maximal, maximal, sharp_maximal
from .weights import Weight, test_Ap_classical, test_Ap_variable, test_Apr
from .cz_sparse import build_sparse, cz_decompose, sparse_operator
from .kernels import (apply_operator, bmo_seminorm, hormander_class_probe, hormander_sum, kernel_K, kernel_K1,
                      kernel_K2, kernel_Ktilde, fractional, size_condition_probe)

__version__ = "0.1.0"
