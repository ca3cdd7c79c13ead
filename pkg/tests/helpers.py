"""Small hand-built systems shared by the time-integration tests."""

import numpy as np
import scipy.sparse as sp

from phdd.phcore import couple, subsystem_from_matrices


def _empty(n):
    return sp.csr_matrix((n, 0)), sp.csr_matrix((0, n)), sp.csr_matrix((0, 0))


def oscillator(sigma=1):
    """Scalar pair e1' = e2, e2' = -e1 through the interface coupling (G = 1)."""
    B, T, P = _empty(1)
    one = sp.csr_matrix(np.ones((1, 1)))
    s1 = subsystem_from_matrices(1, one, sp.csr_matrix((1, 1)), B, one, T, one, P, one, 0)
    s2 = subsystem_from_matrices(2, one, sp.csr_matrix((1, 1)), B, one, T, one, P, one, 1)
    return couple(s1, s2, sigma=sigma)


def random_pair(rng, n1=5, n2=4, coupled=True, ninp=2):
    """Two random port systems with SPD mass, skew J and one interface channel."""
    def sub(side, n):
        X = rng.normal(size=(n, n))
        M = X @ X.T + n * np.eye(n)
        Y = rng.normal(size=(n, n))
        J = np.triu(Y, 1)
        J = J - J.T
        T_ext = rng.normal(size=(ninp, n))
        P_ext = np.eye(ninp)
        T_int = rng.normal(size=(1, n)) if coupled else np.zeros((1, n))
        P_int = np.eye(1)
        return subsystem_from_matrices(side, M, J, T_ext.T @ P_ext, T_int.T @ P_int, T_ext, T_int, P_ext, P_int,
                                       n // 2)
    return couple(sub(1, n1), sub(2, n2))
