"""Problem definitions: Euler-Bernoulli beam (1D) and wave equation (2D).

Beam (Omega_2 = [0, x_int] left, Omega_1 = [x_int, L] right)::

    Omega_1: e_alpha = velocity in DG1,  e_beta = bending moment in Hermite
    Omega_2: e_alpha = velocity in Hermite, e_beta = bending moment in DG1

Wave on the unit square (Omega_1 below the diagonal, Omega_2 above)::

    Omega_1: e_alpha in DG_{k-1}, e_beta in RT_k
    Omega_2: e_alpha in CG_k,     e_beta in NED_k
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import assembly as asm
from .elements import _gauss_interval, shifted_legendre
from .mesh import GAMMA_1, GAMMA_2, GAMMA_INT, build_interval_decomposed, build_square_decomposed
from .phcore import CoupledSystem, build_subsystem, couple


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BeamConfig:
    EI: float = 1.0
    rhoA: float = 1.0
    L: float = 1.0
    omega: float = 4.0
    n1: int = 3
    n2: int = 3
    dt: float = 1e-3
    t_end: float = 1.0
    x_int: float | None = None

    def __post_init__(self):
        for name in ("EI", "rhoA", "L", "omega", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("n1", "n2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")

    @property
    def interface(self) -> float:
        return 0.5 * self.L if self.x_int is None else self.x_int


@dataclass(frozen=True)
class WaveConfig:
    n: int = 10
    k: int = 1
    dt: float = 1e-3
    t_end: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.k not in (1, 2, 3):
            raise ValueError("k must be 1 or 2 (3 is experimental)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")


@dataclass
class Problem:
    """A coupled system together with its spaces, inputs and initial state."""

    system: CoupledSystem
    spaces: dict
    u1: Callable
    u2: Callable
    e1_0: np.ndarray
    e2_0: np.ndarray
    config: object
    extras: dict

    def u_stacked(self, t):
        return np.concatenate([self.u1(t), self.u2(t)])


# ---------------------------------------------------------------------------
# beam
# ---------------------------------------------------------------------------
def _beam_kappa(omega, EI, rhoA):
    return (omega**2 * rhoA / EI) ** 0.25


def beam_exact(x, t, omega: float = 4.0, EI: float = 1.0, rhoA: float = 1.0) -> dict:
    """Closed-form cantilever-type solution ``w = (cosh(kx) + cos(kx))/2 sin(wt)``.

    ``k = (w^2 rhoA / EI)^(1/4)`` which reduces to ``sqrt(w)`` for unit
    coefficients.  Returns a dict with ``w``, ``w_t``, ``w_tt``, ``w_x``,
    ``w_tx``, ``w_xx``, ``w_xxx``, ``w_xxxx``, ``moment = EI w_xx`` and
    ``moment_x = EI w_xxx``.
    """
    x = np.asarray(x, dtype=float)
    k = _beam_kappa(omega, EI, rhoA)
    kx = k * x
    ch, sh, c, s = np.cosh(kx), np.sinh(kx), np.cos(kx), np.sin(kx)
    X = [0.5 * (ch + c), 0.5 * k * (sh - s), 0.5 * k**2 * (ch - c), 0.5 * k**3 * (sh + s), 0.5 * k**4 * (ch + c)]
    st, ct = np.sin(omega * t), np.cos(omega * t)
    out = {
        "w": X[0] * st,
        "w_t": omega * X[0] * ct,
        "w_tt": -(omega**2) * X[0] * st,
        "w_x": X[1] * st,
        "w_tx": omega * X[1] * ct,
        "w_xx": X[2] * st,
        "w_xxx": X[3] * st,
        "w_xxxx": X[4] * st,
        "w_txx": omega * X[2] * ct,
    }
    out["moment"] = EI * out["w_xx"]
    out["moment_x"] = EI * out["w_xxx"]
    return out


def beam_boundary_inputs(t: float, config: BeamConfig):
    """Boundary inputs ``(u2, u1)``.

    ``u2`` at the free end ``x=0`` is ``(EI w_xxx, -EI w_xx)`` (force and
    torque); ``u1`` at the driven end ``x=L`` is ``(w_t, w_tx)`` (velocity and
    rotation rate).  The ordering matches the endpoint trace components.
    """
    c = config
    e0 = beam_exact(0.0, t, c.omega, c.EI, c.rhoA)
    eL = beam_exact(c.L, t, c.omega, c.EI, c.rhoA)
    u2 = np.array([c.EI * e0["w_xxx"], -c.EI * e0["w_xx"]])
    u1 = np.array([eL["w_t"], eL["w_tx"]])
    return u2, u1


def build_beam_problem(config: BeamConfig, sigma: int = 1) -> Problem:
    c = config
    mesh = build_interval_decomposed(c.L, c.n1, c.n2, c.interface)
    a1 = asm.build_space(mesh, 1, "DG1d", 1)
    b1 = asm.build_space(mesh, 1, "Hermite", 3)
    a2 = asm.build_space(mesh, 2, "Hermite", 3)
    b2 = asm.build_space(mesh, 2, "DG1d", 1)
    I2 = sp.identity(2, format="csr")
    sub1 = build_subsystem(
        1,
        asm.assemble_mass(a1, c.rhoA),
        asm.assemble_mass(b1, 1.0 / c.EI),
        asm.assemble_d(a1, b1, "dxx"),
        asm.trace_matrix(b1, GAMMA_1),
        asm.trace_matrix(b1, GAMMA_INT),
        I2,
        I2,
        B_ext=asm.assemble_B(b1, asm.dual_boundary_space(b1, GAMMA_1), GAMMA_1),
        B_int=asm.assemble_B(b1, asm.dual_boundary_space(b1, GAMMA_INT), GAMMA_INT),
    )
    sub2 = build_subsystem(
        2,
        asm.assemble_mass(a2, c.rhoA),
        asm.assemble_mass(b2, 1.0 / c.EI),
        asm.assemble_d(b2, a2, "dxx"),
        asm.trace_matrix(a2, GAMMA_2),
        asm.trace_matrix(a2, GAMMA_INT),
        I2,
        I2,
        B_ext=asm.assemble_B(a2, asm.dual_boundary_space(a2, GAMMA_2), GAMMA_2),
        B_int=asm.assemble_B(a2, asm.dual_boundary_space(a2, GAMMA_INT), GAMMA_INT),
    )
    system = couple(sub1, sub2, I2, sigma)

    def ex(x, t, key):
        return beam_exact(x, t, c.omega, c.EI, c.rhoA)[key]

    e1_0 = np.concatenate([
        asm.interpolate(a1, lambda x, d: ex(x, 0.0, "w_t")),
        asm.interpolate(b1, lambda x, d: ex(x, 0.0, "moment" if d == 0 else "moment_x")),
    ])
    e2_0 = np.concatenate([
        asm.interpolate(a2, lambda x, d: ex(x, 0.0, "w_t" if d == 0 else "w_tx")),
        asm.interpolate(b2, lambda x, d: ex(x, 0.0, "moment")),
    ])
    spaces = {"alpha1": a1, "beta1": b1, "alpha2": a2, "beta2": b2, "mesh": mesh}
    return Problem(
        system,
        spaces,
        u1=lambda t: beam_boundary_inputs(t, c)[1],
        u2=lambda t: beam_boundary_inputs(t, c)[0],
        e1_0=e1_0,
        e2_0=e2_0,
        config=c,
        extras={},
    )


# ---------------------------------------------------------------------------
# wave
# ---------------------------------------------------------------------------
SQ2 = np.sqrt(2.0)


def wave_time(t):
    """``(f, f')`` with ``f(t) = 2 sin(sqrt2 t) + 3 cos(sqrt2 t)``."""
    f = 2.0 * np.sin(SQ2 * t) + 3.0 * np.cos(SQ2 * t)
    fp = SQ2 * (2.0 * np.cos(SQ2 * t) - 3.0 * np.sin(SQ2 * t))
    return f, fp


def wave_g(x):
    x = np.atleast_2d(x)
    return np.cos(x[:, 0]) * np.sin(x[:, 1])


def wave_grad_g(x):
    x = np.atleast_2d(x)
    return np.column_stack([-np.sin(x[:, 0]) * np.sin(x[:, 1]), np.cos(x[:, 0]) * np.cos(x[:, 1])])


def wave_exact(x, y, t):
    """Exact co-energy fields ``(e_alpha, e_beta)`` at points ``(x, y)`` and time ``t``."""
    pts = np.column_stack([np.atleast_1d(x), np.atleast_1d(y)]).astype(float)
    f, fp = wave_time(t)
    return wave_g(pts) * fp, wave_grad_g(pts) * f


def flux_moments(space: asm.FunctionSpace, tag: int, vfunc) -> np.ndarray:
    """Outward normal moments of a vector field against the flux trace basis on ``tag``."""
    k = space.degree
    s, w = _gauss_interval(k + 4)
    verts = space.mesh.vertices
    out = []
    for rec in space.facet_records(tag):
        t = verts[rec.hi] - verts[rec.lo]
        n_out = rec.sign * np.array([t[1], -t[0]])  # length |e|, absorbs ds
        x = verts[rec.lo] + s[:, None] * t
        vn = vfunc(x) @ n_out
        out.extend((w * shifted_legendre(j, s)) @ vn for j in range(k))
    return np.array(out)


def build_wave_problem(config: WaveConfig, sigma: int = 1) -> Problem:
    c = config
    k = c.k
    mesh = build_square_decomposed(c.n)
    a1 = asm.build_space(mesh, 1, "DG", k - 1)
    b1 = asm.build_space(mesh, 1, "RT", k)
    a2 = asm.build_space(mesh, 2, "CG", k)
    b2 = asm.build_space(mesh, 2, "NED", k)

    # boundary bases: Lagrange traces carry e_alpha data, flux traces e_beta.n data
    lag_g1 = asm.dual_boundary_space(b1, GAMMA_1)
    flx_g1 = asm.boundary_space(b1, GAMMA_1)
    flx_g2 = asm.dual_boundary_space(a2, GAMMA_2)
    lag_g2 = asm.boundary_space(a2, GAMMA_2)
    lag_int = asm.boundary_space(a2, GAMMA_INT)
    flx_int = asm.boundary_space(b1, GAMMA_INT)
    psi_g1 = asm.psi_interface(lag_g1, flx_g1)
    psi_g2 = asm.psi_interface(lag_g2, flx_g2)
    psi_int = asm.psi_interface(lag_int, flx_int)

    D_div = asm.assemble_d(a1, b1, "div")
    sub1 = build_subsystem(
        1,
        asm.assemble_mass(a1),
        asm.assemble_mass(b1),
        -D_div,
        asm.trace_matrix(b1, GAMMA_1),
        asm.trace_matrix(b1, GAMMA_INT),
        psi_g1.T.tocsr(),
        psi_int.T.tocsr(),
        B_ext=asm.assemble_B(b1, lag_g1, GAMMA_1),
        B_int=asm.assemble_B(b1, asm.dual_boundary_space(b1, GAMMA_INT), GAMMA_INT),
    )
    sub2 = build_subsystem(
        2,
        asm.assemble_mass(a2),
        asm.assemble_mass(b2),
        asm.assemble_d(b2, a2, "grad"),
        asm.trace_matrix(a2, GAMMA_2),
        asm.trace_matrix(a2, GAMMA_INT),
        psi_g2,
        psi_int,
        B_ext=asm.assemble_B(a2, flx_g2, GAMMA_2),
        B_int=asm.assemble_B(a2, asm.dual_boundary_space(a2, GAMMA_INT), GAMMA_INT),
    )
    system = couple(sub1, sub2, psi_int, sigma)

    g_g1 = asm.boundary_projection(lag_g1, wave_g, mesh)
    dg_g2 = flux_moments(a2, GAMMA_2, wave_grad_g)

    f0, fp0 = wave_time(0.0)
    Ggrad = asm.inclusion_matrix(a2, b2, "grad")
    g_cg = asm.interpolate(a2, wave_g)
    e1_0 = np.concatenate([fp0 * asm.interpolate(a1, wave_g), f0 * asm.interpolate(b1, wave_grad_g)])
    e2_0 = np.concatenate([fp0 * g_cg, f0 * (Ggrad @ g_cg)])

    spaces = {"alpha1": a1, "beta1": b1, "alpha2": a2, "beta2": b2, "mesh": mesh}
    extras = {
        "psi_int": psi_int,
        "psi_g1": psi_g1,
        "psi_g2": psi_g2,
        "bspaces": {"lag_g1": lag_g1, "flx_g1": flx_g1, "lag_g2": lag_g2, "flx_g2": flx_g2,
                    "lag_int": lag_int, "flx_int": flx_int},
        "grad_matrix": Ggrad,
        "D_div": D_div,
    }
    return Problem(
        system,
        spaces,
        u1=lambda t: wave_time(t)[1] * g_g1,
        u2=lambda t: wave_time(t)[0] * dg_g2,
        e1_0=e1_0,
        e2_0=e2_0,
        config=c,
        extras=extras,
    )
