"""Structure-preserving mixed finite elements for coupled port-Hamiltonian systems.

Two subdomain discretizations with dual boundary causality are coupled through a
gyrator interface and advanced with a staggered implicit-midpoint scheme.  The
package ships the Euler-Bernoulli beam and the 2D wave equation as worked models.
"""

__version__ = "0.1.0"
