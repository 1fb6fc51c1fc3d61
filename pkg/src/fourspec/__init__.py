"""Numerical three-spectra machinery for fourth-order operators.

Builds regularized first-order systems for y'''' - (p y')' + q y with
distributional coefficients, integrates the quasi-derivative frames,
evaluates characteristic determinants and the Weyl matrix, localizes the
three spectra, and runs the invariance/uniqueness experiments.
"""

from .coeffs import (CoefficientModel, MatrixKind, Regime, RegularizationMatrix,
                     build_coefficients, build_matrix, star_matrix)
from .charfun import (AsymptoticModel, CharSample, apply_forms, asymptotic_model,
                      char_samples, delta, delta_fn, verify_asymptotics)
from .errors import FourspecError
from .propagator import (Problem, QuasiFrame, SolverOptions, lagrange_bracket,
                         make_problem, propagate, solutions_C, solutions_S,
                         system_matrix)
from .spectra import (ClassWReport, SearchOptions, SpectrumSet, Window,
                      classW_check, count_zeros, find_zeros,
                      hadamard_reconstruct, three_spectra)
from .weyl import (LaurentExpansion, WeylSample, check_symplectic, laurent_at,
                   spectral_mapping, weyl_matrix, weyl_solutions)
from .lab import (ProblemConfig, RunRecord, run_cross_regularization,
                  run_hadamard, run_identities, run_spectra,
                  run_uniqueness_probe)

__version__ = "0.1.0"
