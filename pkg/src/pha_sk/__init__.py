"""Gaussian-step ascent on a smoothed potential for maximizing SK energies.

The package is organised bottom-up:

- ``instance``: coupling matrices, the Hamiltonian, on-disk format
- ``parisi``: Parisi measures, the backward PDE, functional, oracles
- ``legendre``: regularized Legendre dual of the PDE solution
- ``potential``: the time-dependent objective and its derivatives
- ``spectral``: Cauchy transforms, free edge and the step covariance
- ``krylov``: Lanczos approximation of f(B) v
- ``sampler``: Gaussian steps with the step covariance
- ``pha``: the ascent loop, truncation and rounding
- ``sde``: Auffinger-Chen SDE ensembles and Wasserstein distances
- ``baselines``: random signs, top eigenvector, exhaustive search
- ``verify``: the invariant and oracle checks behind ``pha-sk verify``
- ``config``, ``cli``: run configuration and the ``pha-sk`` command
"""

__version__ = "0.1.0"
