"""Per-subdomain port-Hamiltonian systems and their gyrator interconnection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import skew_defect


@dataclass(frozen=True)
class PHSubsystem:
    """``M e' = J e + B_ext u_ext + B_int u_int``, ``y = T e``.

    The state is ordered ``(alpha, beta)``.  ``P_ext``/``P_int`` give the
    power pairing of the ports, ``<y, u> = y^T P u``, and ``B = T^T P`` up to
    round-off.  ``side`` is 1 for the Dirichlet-side system (ports act on the
    beta block) and 2 for the Neumann-side system (ports act on alpha).
    """

    side: int
    M: sp.csr_matrix
    J: sp.csr_matrix
    B_ext: sp.csr_matrix
    B_int: sp.csr_matrix
    T_ext: sp.csr_matrix
    T_int: sp.csr_matrix
    P_ext: sp.csr_matrix
    P_int: sp.csr_matrix
    n_alpha: int
    n_beta: int

    @property
    def n(self) -> int:
        return self.n_alpha + self.n_beta

    def hamiltonian(self, e) -> float:
        return 0.5 * float(e @ (self.M @ e))

    def alpha(self, e):
        return e[: self.n_alpha]

    def beta(self, e):
        return e[self.n_alpha:]


def _embed_cols(T, side, n_alpha, n_beta, on_beta):
    T = sp.csr_matrix(T)
    if on_beta:
        return sp.hstack([sp.csr_matrix((T.shape[0], n_alpha)), T], format="csr")
    return sp.hstack([T, sp.csr_matrix((T.shape[0], n_beta))], format="csr")


def build_subsystem(
    side: int,
    M_alpha,
    M_beta,
    D,
    T_ext,
    T_int,
    P_ext,
    P_int,
    B_ext=None,
    B_int=None,
) -> PHSubsystem:
    """Assemble one subdomain system from its blocks.

    Side 1 takes ``D = D_{L*}`` (alpha rows, beta columns) and builds
    ``J = [[0, -D], [D^T, 0]]``; its traces and inputs act on the beta block.
    Side 2 takes ``D = D_L`` (beta rows, alpha columns) and builds
    ``J = [[0, -D^T], [D, 0]]``; its traces and inputs act on the alpha block.

    ``T_*`` and ``B_*`` are given over the block that carries the traces.
    When ``B_*`` is omitted it is formed as ``T^T P``.
    """
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    M_alpha = sp.csr_matrix(M_alpha)
    M_beta = sp.csr_matrix(M_beta)
    D = sp.csr_matrix(D)
    na, nb = M_alpha.shape[0], M_beta.shape[0]
    if side == 1:
        if D.shape != (na, nb):
            raise ValueError(f"D_L* must be {na}x{nb}, got {D.shape}")
        J = sp.bmat([[None, -D], [D.T, None]], format="csr")
    else:
        if D.shape != (nb, na):
            raise ValueError(f"D_L must be {nb}x{na}, got {D.shape}")
        J = sp.bmat([[None, -D.T], [D, None]], format="csr")
    if J.shape != (na + nb, na + nb):
        J = sp.csr_matrix((na + nb, na + nb)) + J
    M = sp.block_diag([M_alpha, M_beta], format="csr")
    on_beta = side == 1
    nblk = nb if on_beta else na
    out = {}
    for name, T, P, B in (("ext", T_ext, P_ext, B_ext), ("int", T_int, P_int, B_int)):
        T = sp.csr_matrix(T)
        P = sp.csr_matrix(P)
        if T.shape[1] != nblk:
            raise ValueError(f"T_{name} has {T.shape[1]} columns, expected {nblk}")
        if P.shape[0] != T.shape[0]:
            raise ValueError(f"P_{name} rows must match T_{name} rows")
        if B is None:
            B = (T.T @ P).tocsr()
        B = sp.csr_matrix(B)
        if B.shape != (nblk, P.shape[1]):
            raise ValueError(f"B_{name} must be {nblk}x{P.shape[1]}, got {B.shape}")
        Tf = _embed_cols(T, side, na, nb, on_beta)
        Bf = _embed_cols(B.T, side, na, nb, on_beta).T.tocsr()
        out[name] = (Bf, Tf, P)
    return PHSubsystem(side, M, J, out["ext"][0], out["int"][0], out["ext"][1], out["int"][1],
                       out["ext"][2], out["int"][2], na, nb)


def subsystem_from_matrices(side, M, J, B_ext, B_int, T_ext, T_int, P_ext, P_int, n_alpha) -> PHSubsystem:
    """Wrap raw full-size matrices (used for small test systems)."""
    c = sp.csr_matrix
    M = c(M)
    return PHSubsystem(side, M, c(J), c(B_ext), c(B_int), c(T_ext), c(T_int), c(P_ext), c(P_int),
                       n_alpha, M.shape[0] - n_alpha)


@dataclass(frozen=True)
class CoupledSystem:
    """Gyrator interconnection ``u_1 = sigma y_2``, ``u_2 = -sigma y_1`` of two systems.

    ``L`` has the beta rows of system 1 and the alpha columns of system 2 in
    full subsystem coordinates; the staggered view uses ``G = sigma L``.
    """

    sub1: PHSubsystem
    sub2: PHSubsystem
    L: sp.csr_matrix
    sigma: int
    M: sp.csr_matrix
    J: sp.csr_matrix
    B: sp.csr_matrix
    T: sp.csr_matrix

    @property
    def G(self) -> sp.csr_matrix:
        return self.sigma * self.L

    @property
    def n1(self) -> int:
        return self.sub1.n

    @property
    def n2(self) -> int:
        return self.sub2.n

    def split(self, e):
        return e[: self.n1], e[self.n1:]

    def hamiltonian(self, e) -> float:
        return 0.5 * float(e @ (self.M @ e))


def couple(sub1: PHSubsystem, sub2: PHSubsystem, Psi=None, sigma: int = 1) -> CoupledSystem:
    """Build the monolithic interconnected system.

    ``L = T_int1^T P_int1 T_int2``, which equals ``(Psi T_beta)^T T_alpha``
    with ``P_int1 = Psi^T``.  When ``Psi`` is given it must agree with the
    pairings stored on the subsystems.
    """
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    P1, P2 = sub1.P_int, sub2.P_int
    if P1.shape != P2.T.shape or abs(P1 - P2.T).max() != 0:
        raise ValueError("interface pairings of the two subsystems are not transposes")
    if Psi is not None:
        Psi = sp.csr_matrix(Psi)
        if Psi.shape != P2.shape or abs(Psi - P2).max() != 0:
            raise ValueError("Psi does not match the interface trace spaces")
    if sub1.T_int.shape[0] != P1.shape[0] or sub2.T_int.shape[0] != P1.shape[1]:
        raise ValueError("incompatible interface trace spaces")
    L = (sub1.T_int.T @ P1 @ sub2.T_int).tocsr()
    L.eliminate_zeros()
    G = sigma * L
    M = sp.block_diag([sub1.M, sub2.M], format="csr")
    J = sp.bmat([[sub1.J, G], [-G.T, sub2.J]], format="csr")
    B = sp.block_diag([sub1.B_ext, sub2.B_ext], format="csr")
    T = sp.block_diag([sub1.T_ext, sub2.T_ext], format="csr")
    cs = CoupledSystem(sub1, sub2, L, sigma, M, J, B, T)
    if skew_defect(J) != 0.0:
        raise AssertionError("monolithic J is not exactly skew")
    return cs
