"""Hamiltonians, discrete power balances, curl norms, L2 errors and rates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly as asm
from .elements import quadrature
from .phcore import CoupledSystem


def hamiltonian(e, M) -> float:
    """``H = 1/2 e^T M e``."""
    e = np.asarray(e, dtype=float)
    if M.shape[0] != e.shape[0]:
        raise ValueError("state and mass matrix dimensions differ")
    return 0.5 * float(e @ (M @ e))


# ---------------------------------------------------------------------------
# power balance
# ---------------------------------------------------------------------------
def interface_power(system: CoupledSystem, e1, e2):
    """Interface power entering each subsystem for states at a common time.

    Returns ``(p1, p2)`` with ``p1 = y1^T P1 (sigma y2)`` and
    ``p2 = y2^T P2 (-sigma y1)``; the gyrator makes ``p1 + p2 = 0``.
    """
    s1, s2 = system.sub1, system.sub2
    y1 = s1.T_int @ e1
    y2 = s2.T_int @ e2
    p1 = float(y1 @ (s1.P_int @ (system.sigma * y2)))
    p2 = float(y2 @ (s2.P_int @ (-system.sigma * y1)))
    return p1, p2


def _energy_increment(M, a, b) -> float:
    """``H(b) - H(a)`` evaluated as ``1/2 (b - a)^T M (b + a)`` to avoid cancellation."""
    return 0.5 * float((b - a) @ (M @ (b + a)))


def power_terms(traj, index: int, shifted: bool = False) -> dict:
    """Per-step terms of the discrete power balance of one subsystem.

    Subsystem 1, step ``n``: ``(H1(e1^{n+1}) - H1(e1^n)) / dt`` against the
    port power with outputs at the midpoint ``(e1^n + e1^{n+1}) / 2``, the
    external input ``u1(t_{n+1/2})`` and the interface input
    ``sigma y2(e2^{n+1/2})``.

    Subsystem 2, step ``n >= 1``: ``(H2(e2^{n+1/2}) - H2(e2^{n-1/2})) / dt``
    against outputs at the midpoint of the two half states, ``u2(t_n)`` and
    ``-sigma y1(e1^n)``.  Step 0 is the explicit bootstrap and is reported
    as NaN.  ``shifted=True`` evaluates the system 2 pairing with the outputs
    at ``e2^{n+1/2}`` and inputs at ``t_{n+1}`` instead.
    """
    if not traj.stored or len(traj.e1) != traj.nsteps + 1:
        raise ValueError("power balance needs every stored state (run with store=True)")
    sysm = traj.system
    s1, s2 = sysm.sub1, sysm.sub2
    sg = sysm.sigma
    dt = traj.dt
    N = traj.nsteps
    dH = np.full(N, np.nan)
    pext = np.full(N, np.nan)
    pint = np.full(N, np.nan)
    if index == 1:
        for n in range(N):
            a, b = traj.e1[n], traj.e1[n + 1]
            mid = 0.5 * (a + b)
            dH[n] = _energy_increment(s1.M, a, b) / dt
            pext[n] = (s1.T_ext @ mid) @ (s1.P_ext @ traj.u1[n]) if s1.P_ext.shape[1] else 0.0
            pint[n] = (s1.T_int @ mid) @ (s1.P_int @ (sg * (s2.T_int @ traj.e2[n + 1])))
    elif index == 2:
        for n in range(1, N):
            a, b = traj.e2[n], traj.e2[n + 1]
            dH[n] = _energy_increment(s2.M, a, b) / dt
            if shifted:
                y = s2.T_ext @ b, s2.T_int @ b
                u_ext = traj.u2[n + 1] if n + 1 < N else traj.u2[n]
                e1 = traj.e1[n + 1]
            else:
                mid = 0.5 * (a + b)
                y = s2.T_ext @ mid, s2.T_int @ mid
                u_ext = traj.u2[n]
                e1 = traj.e1[n]
            pext[n] = y[0] @ (s2.P_ext @ u_ext) if s2.P_ext.shape[1] else 0.0
            pint[n] = y[1] @ (s2.P_int @ (-sg * (s1.T_int @ e1)))
    else:
        raise ValueError("subsystem index must be 1 or 2")
    return {"dH": dH, "ext": pext, "int": pint, "residual": dH - pext - pint}


def power_residual(traj, index: int, shifted: bool = False) -> np.ndarray:
    """Discrete power-balance residual per step (NaN where undefined)."""
    return power_terms(traj, index, shifted)["residual"]


def scaled_power_residual(traj, index: int) -> np.ndarray:
    """Residual divided by ``max(1, |dH/dt|, |P_ext|, |P_int|)`` per step."""
    t = power_terms(traj, index)
    scale = np.maximum.reduce([np.ones_like(t["dH"]), np.abs(t["dH"]), np.abs(t["ext"]), np.abs(t["int"])])
    return t["residual"] / scale


# ---------------------------------------------------------------------------
# field norms and errors
# ---------------------------------------------------------------------------
def curl_norm(space: asm.FunctionSpace, coeffs) -> float:
    """``|| d_x v_y - d_y v_x ||_{L2}`` of a NED field over its subdomain."""
    if space.family != "NED":
        raise ValueError("curl_norm expects a NED space")
    q = quadrature("triangle", 2 * space.degree)
    c = asm.evaluate(space, coeffs, q.points, deriv=True)
    w = space.detB[:, None] * q.weights[None, :]
    return float(np.sqrt(np.sum(w * c**2)))


def weak_curl_matrix(cg: asm.FunctionSpace, rt: asm.FunctionSpace, M_beta) -> np.ndarray:
    """Rows ``(rot phi_j)^T M_beta`` for CG functions vanishing on the subdomain boundary."""
    R = asm.inclusion_matrix(cg, rt, "rot")
    bnd = set()
    for tag in (1, 2, 3):
        try:
            recs = cg.facet_records(tag)
        except ValueError:
            continue
        for rec in recs:
            bnd.update(int(d) for d in cg.cell_dofs[rec.cell, cg.facet_local_dofs(rec)])
    interior = np.array(sorted(set(range(cg.ndofs)) - bnd), dtype=np.int64)
    return (M_beta @ R[:, interior]).T


def l2_error(space: asm.FunctionSpace, coeffs, exact, qorder: int | None = None) -> float:
    """``|| u_h - u_exact ||_{L2}`` over the subdomain of ``space``.

    ``exact(x)`` takes physical points ``(n, dim)`` (1D: ``(n,)``) and returns
    values matching the field shape.
    """
    p = {"Hermite": 3, "DG1d": 1}.get(space.family, space.degree)
    qo = min(10, qorder if qorder is not None else 2 * p + 2)
    if space.dim == 1:
        q = quadrature("interval", qo)
        t = q.points[:, 0]
        uh = asm.evaluate(space, coeffs, t)
        x = space.points_1d(t)
        ue = np.asarray(exact(x.ravel())).reshape(x.shape)
        w = space.h[:, None] * q.weights[None, :]
        return float(np.sqrt(np.sum(w * (uh - ue) ** 2)))
    q = quadrature("triangle", qo)
    uh = asm.evaluate(space, coeffs, q.points)
    X = space.map_points(q.points)
    ue = np.asarray(exact(X.reshape(-1, 2))).reshape(uh.shape)
    w = space.detB[:, None] * q.weights[None, :]
    d = (uh - ue) ** 2
    if d.ndim == 3:
        d = d.sum(axis=2)
    return float(np.sqrt(np.sum(w * d)))


def l2_norm(space: asm.FunctionSpace, coeffs) -> float:
    zero = (lambda x: np.zeros(np.asarray(x).shape[0])) if space.value_shape == () else (
        lambda x: np.zeros((np.asarray(x).shape[0], 2)))
    return l2_error(space, coeffs, zero)


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------
@dataclass
class ConvergenceRecord:
    """Errors per variable against mesh size ``h`` (strictly decreasing)."""

    h: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    def add(self, h: float, **errs):
        if self.h and not h < self.h[-1]:
            raise ValueError("mesh sizes must be strictly decreasing")
        for key, val in errs.items():
            if not val > 0:
                raise ValueError(f"error for {key} must be positive")
        self.h.append(float(h))
        for key, val in errs.items():
            self.errors.setdefault(key, []).append(float(val))

    def rates(self) -> dict:
        return {key: fit_rate(self.h, vals) for key, vals in self.errors.items()}


def fit_rate(h, errors=None) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``.

    Accepts either ``(h, errors)`` or a single sequence of ``(h, error)``
    pairs.
    """
    if errors is None:
        pairs = np.asarray(h, dtype=float)
        h, errors = pairs[:, 0], pairs[:, 1]
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if h.size < 3 or h.size != errors.size:
        raise ValueError("need at least three (h, error) pairs")
    if np.any(h <= 0) or np.any(errors <= 0):
        raise ValueError("mesh sizes and errors must be positive")
    slope, _ = np.polyfit(np.log(h), np.log(errors), 1)
    return float(slope)
