"""Stochastic simulation of the SIR infection tree and its limit theory.

Submodules:
  lambertw   - principal-branch Lambert W with certified lower bounds
  theory     - closed-form limit constants (z, m, t, kappa, critical rate)
  walks      - the embedded SIR jump chain and coupled +-1 walks
  freezetree - uniform attachment with freezing, profiles, martingales
  couplings  - geometric branching trees and the three-forest sandwich
  polya      - time-dependent urn with removals
  harness    - Monte Carlo experiments, seeding, aggregation, persistence
"""

__version__ = "0.1.0"

from .lambertw import DomainError, lambert_w0
from .theory import TheoryConstants, constants_for, lambda_c

__all__ = [
    "__version__",
    "DomainError",
    "lambert_w0",
    "TheoryConstants",
    "constants_for",
    "lambda_c",
]
