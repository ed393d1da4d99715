"""
Gaussian states in a few lines
==============================

Covariance matrices, symplectic eigenvalues, entropies and fidelities
with the conventions used throughout the package (vacuum variance 1/2).
"""

import numpy as np

from qbmdarwin import GaussianState, fidelity_single_mode, symplectic_eigenvalues, von_neumann_entropy
from qbmdarwin.gaussian_core import random_symplectic, thermal_cov, vacuum_cov

# A thermal mode with symplectic eigenvalue 1 carries about 0.9548 nats.
print("h(1) =", von_neumann_entropy(thermal_cov(1.0)))

# Symplectic maps leave the spectrum alone, however squeezed the result.
rng = np.random.default_rng(1)
s = random_symplectic(3, rng)
cov = s @ thermal_cov([0.5, 1.0, 2.5]) @ s.T
print("nu =", symplectic_eigenvalues(0.5 * (cov + cov.T)))

# Fidelity of the vacuum with a thermal state, and of two displaced vacua.
vac = GaussianState(np.zeros(2), vacuum_cov(1))
print("F(vac, thermal) =", fidelity_single_mode(vac, GaussianState(np.zeros(2), thermal_cov(1.0))))
print("F(displaced)    =", fidelity_single_mode(vac, GaussianState(np.array([2.0, 0.0]), vacuum_cov(1))))
