"""Modal analysis of the coupled system: ``i omega M psi = J psi``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .linalg import dense_generalized_eig
from .phcore import CoupledSystem


@dataclass
class ModeSet:
    """Positive eigenfrequencies (rad/s) in ascending order with their eigenvectors.

    ``vectors[:, j]`` is the complex eigenvector of ``omegas[j]`` in the
    monolithic DOF layout ``(alpha1, beta1, alpha2, beta2)``; ``None`` when
    only frequencies were requested.  ``n_zero`` counts the kernel modes
    removed by the threshold ``|omega| < zero_tol * omega_max``.
    """

    omegas: np.ndarray
    vectors: np.ndarray | None
    residuals: np.ndarray | None
    n_zero: int
    max_real_ratio: float

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.omegas / (2.0 * math.pi)


def solve_modes(system: CoupledSystem, n_modes: int, vectors: bool = True, zero_tol: float = 1e-8) -> ModeSet:
    """The ``n_modes`` smallest strictly positive frequencies of the coupled system.

    Boundary inputs are set to zero, so both boundary conditions enter
    naturally and no rows or columns are removed.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be positive")
    M = system.M
    J = system.J
    lam, V = dense_generalized_eig(M, J, vectors=vectors)
    mag = np.abs(lam)
    wmax = mag.max() if mag.size else 0.0
    real_ratio = float(np.max(np.abs(lam.real) / np.maximum(mag, 1e-300))) if mag.size else 0.0
    zero = mag < zero_tol * wmax
    pos = np.flatnonzero(~zero & (lam.imag > 0))
    order = pos[np.argsort(lam.imag[pos], kind="stable")][:n_modes]
    omegas = lam.imag[order].copy()
    vecs = res = None
    if vectors:
        vecs = V[:, order]
        Md = M.toarray() if hasattr(M, "toarray") else M
        Jd = J.toarray() if hasattr(J, "toarray") else J
        r = Jd @ vecs - (1j * omegas)[None, :] * (Md @ vecs)
        res = np.linalg.norm(r, axis=0) / np.linalg.norm(vecs, axis=0)
    n_zero = int(np.count_nonzero(zero))
    return ModeSet(omegas, vecs, res, n_zero, real_ratio)


def beam_analytical_betas(n: int, L: float = 1.0) -> np.ndarray:
    """Roots of ``cos(bL) cosh(bL) + 1 = 0``.

    The ``k``-th root lies in ``((k-1) pi, k pi) / L`` where the scaled
    function ``cos z + 1/cosh z`` changes sign exactly once.
    """
    if n < 1:
        raise ValueError("n must be positive")

    def f(z):
        # cos z cosh z + 1 scaled by 1/cosh z for large arguments
        return math.cos(z) + 1.0 / math.cosh(z)

    betas = []
    for k in range(1, n + 1):
        a, b = (k - 1) * math.pi, k * math.pi
        z = brentq(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        betas.append(z / L)
    return np.array(betas)


def beam_analytical_freqs(n: int, EI: float = 1.0, rhoA: float = 1.0, L: float = 1.0) -> np.ndarray:
    """``omega_k = beta_k^2 sqrt(EI / rhoA)`` for the cantilever beam."""
    if EI <= 0 or rhoA <= 0 or L <= 0:
        raise ValueError("parameters must be positive")
    return beam_analytical_betas(n, L) ** 2 * math.sqrt(EI / rhoA)


def wave_analytical_freqs(count: int, L: float = 1.0) -> np.ndarray:
    """Smallest ``count`` values of ``(pi / 2L) sqrt((2m-1)^2 + (2n-1)^2)``, ``m, n >= 1``."""
    if L <= 0:
        raise ValueError("L must be positive")
    if count < 1:
        return np.zeros(0)
    r = int(math.ceil(math.sqrt(count))) + 2
    vals = sorted(
        (math.pi / (2.0 * L)) * math.sqrt((2 * m - 1) ** 2 + (2 * n - 1) ** 2)
        for m in range(1, r + 1)
        for n in range(1, r + 1)
    )
    return np.array(vals[:count])


def relative_errors_pct(num, ana) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    ana = np.asarray(ana, dtype=float)
    return np.abs(num - ana) / ana * 100.0
