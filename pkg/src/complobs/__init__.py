"""Entanglement recovery from guessing two complementary observables.

Certificates bound how well a composed recovery isometry restores a
maximally entangled pair, given how well Bob can guess the amplitude (Z) and
phase (X) of Alice's system, or how secret those are from the environment.
"""

from .measurements import Povm, optimize_min_error, p_guess_with, p_secure, pgm
from .recovery import Isometry, compose_recovery, recovery_error
from .states import PureState, ensemble_for_observable, haar_random_state, phi_d, z_extension
from .theorems import analyze, duality_check, theorem1_certificate, theorem2_certificate

__all__ = [
    "Isometry",
    "Povm",
    "PureState",
    "analyze",
    "compose_recovery",
    "duality_check",
    "ensemble_for_observable",
    "haar_random_state",
    "optimize_min_error",
    "p_guess_with",
    "p_secure",
    "pgm",
    "phi_d",
    "recovery_error",
    "theorem1_certificate",
    "theorem2_certificate",
    "z_extension",
]
