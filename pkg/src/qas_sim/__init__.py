"""Weak-absorption estimation with correlated photons, at desk scale.

Simulates the correlated-photon (QAS) and coherent-light (CAS) measurement
pipelines exactly in the Gaussian formalism, cross-checks everything against
a truncated Fock-basis oracle, and runs seeded Bayesian Monte Carlo
experiments over the absorption coefficient.
"""

__version__ = "0.1.0"
