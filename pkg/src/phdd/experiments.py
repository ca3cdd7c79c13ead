"""Experiment drivers shared by the command-line runner and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly as asm
from . import diagnostics as dg
from .models import (
    BeamConfig,
    WaveConfig,
    beam_exact,
    build_beam_problem,
    build_wave_problem,
    wave_g,
    wave_grad_g,
    wave_time,
)
from .spectral import (
    beam_analytical_freqs,
    relative_errors_pct,
    solve_modes,
    wave_analytical_freqs,
)
from .timeint import simulate_monolithic_midpoint, simulate_staggered, stable_time_step


# ---------------------------------------------------------------------------
# errors of a finished run
# ---------------------------------------------------------------------------
def wave_errors(problem, e1, e2, t1: float, t2: float) -> dict:
    """L2 errors of the four wave fields; system 2 is compared at its own time ``t2``."""
    s = problem.system
    sp = problem.spaces
    na1, na2 = s.sub1.n_alpha, s.sub2.n_alpha
    f1, fp1 = wave_time(t1)
    f2, fp2 = wave_time(t2)
    return {
        "err_alpha_1": dg.l2_error(sp["alpha1"], e1[:na1], lambda x: fp1 * wave_g(x)),
        "err_beta_1": dg.l2_error(sp["beta1"], e1[na1:], lambda x: f1 * wave_grad_g(x)),
        "err_alpha_2": dg.l2_error(sp["alpha2"], e2[:na2], lambda x: fp2 * wave_g(x)),
        "err_beta_2": dg.l2_error(sp["beta2"], e2[na2:], lambda x: f2 * wave_grad_g(x)),
    }


def beam_errors(problem, e1, e2, t1: float, t2: float) -> dict:
    """L2 errors of velocity and bending moment on both subdomains."""
    s = problem.system
    sp = problem.spaces
    c = problem.config
    na1, na2 = s.sub1.n_alpha, s.sub2.n_alpha

    def ex(t, key):
        return lambda x: beam_exact(x, t, c.omega, c.EI, c.rhoA)[key]

    return {
        "err_alpha_1": dg.l2_error(sp["alpha1"], e1[:na1], ex(t1, "w_t")),
        "err_beta_1": dg.l2_error(sp["beta1"], e1[na1:], ex(t1, "moment")),
        "err_alpha_2": dg.l2_error(sp["alpha2"], e2[:na2], ex(t2, "w_t")),
        "err_beta_2": dg.l2_error(sp["beta2"], e2[na2:], ex(t2, "moment")),
    }


# ---------------------------------------------------------------------------
# simulations
# ---------------------------------------------------------------------------
@dataclass
class SimResult:
    problem: object
    traj: object
    errors: dict
    extra: dict = field(default_factory=dict)


def run_beam_sim(cfg: BeamConfig, sigma: int = 1, bootstrap: str = "full") -> SimResult:
    """Staggered beam run; records tip velocities and reconstructed displacements."""
    P = build_beam_problem(cfg, sigma)
    tr = simulate_staggered(P.system, cfg.t_end, cfg.dt, P.u1, P.u2, P.e1_0, P.e2_0, bootstrap=bootstrap)
    s = P.system
    a2 = P.spaces["alpha2"]
    a1 = P.spaces["alpha1"]
    # Omega_2 velocity at x = 0 is the Hermite value DOF of vertex 0 (half-step samples)
    v0 = np.array([e[2 * a2.vertex_index[0]] for e in tr.e2])
    # Omega_1 velocity at x = L is the right DOF of the last DG1 cell (integer samples)
    vL = np.array([e[a1.cell_dofs[-1, 1]] for e in tr.e1])
    t2 = tr.t2
    t1 = tr.t1
    # displacement by trapezoidal integration of the velocity from w(x, 0)
    w0 = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t2) * (v0[1:] + v0[:-1]))])
    wL = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t1) * (vL[1:] + vL[:-1]))])
    w0 += beam_exact(0.0, 0.0, cfg.omega, cfg.EI, cfg.rhoA)["w"]
    wL += beam_exact(cfg.L, 0.0, cfg.omega, cfg.EI, cfg.rhoA)["w"]
    ex0 = beam_exact(0.0, t2, cfg.omega, cfg.EI, cfg.rhoA)
    exL = beam_exact(cfg.L, t1, cfg.omega, cfg.EI, cfg.rhoA)
    errs = beam_errors(P, tr.e1[-1], tr.e2[-1], t1[-1], t2[-1])
    extra = {
        "x0": {"t": t2, "v_num": v0, "v_exact": ex0["w_t"], "w_num": w0, "w_exact": ex0["w"]},
        "xL": {"t": t1, "v_num": vL, "v_exact": exL["w_t"], "w_num": wL, "w_exact": exL["w"]},
    }
    del s
    return SimResult(P, tr, errs, extra)


def run_wave_sim(cfg: WaveConfig, sigma: int = 1, bootstrap: str = "full") -> SimResult:
    """Staggered wave run with exact-solution boundary data."""
    P = build_wave_problem(cfg, sigma)
    tr = simulate_staggered(P.system, cfg.t_end, cfg.dt, P.u1, P.u2, P.e1_0, P.e2_0, bootstrap=bootstrap)
    errs = wave_errors(P, tr.e1[-1], tr.e2[-1], tr.t1[-1], tr.t2[-1])
    return SimResult(P, tr, errs)


@dataclass
class ConservationResult:
    residual_1: np.ndarray
    residual_2: np.ndarray
    curl_norms: np.ndarray
    weak_curl: np.ndarray
    interface_sum: np.ndarray
    sim: SimResult


def run_conservation(cfg: WaveConfig, sigma: int = 1, bootstrap: str = "full") -> ConservationResult:
    """Power balances, curl norms and interface power neutrality of a wave run."""
    sim = run_wave_sim(cfg, sigma, bootstrap)
    P, tr = sim.problem, sim.traj
    s = P.system
    r1 = dg.power_residual(tr, 1)
    r2 = dg.power_residual(tr, 2)
    nb2 = s.sub2.n_alpha
    curls = np.array([dg.curl_norm(P.spaces["beta2"], e[nb2:]) for e in tr.e2])
    cg1 = asm.build_space(P.spaces["mesh"], 1, "CG", cfg.k)
    na1 = s.sub1.n_alpha
    Mb1 = s.sub1.M[na1:, na1:]
    W = dg.weak_curl_matrix(cg1, P.spaces["beta1"], Mb1)
    weak = np.array([
        np.abs(W @ ((tr.e1[n + 1][na1:] - tr.e1[n][na1:]) / tr.dt)).max() if W.shape[0] else 0.0
        for n in range(tr.nsteps)
    ])
    isum = np.array([sum(dg.interface_power(s, tr.e1[n], tr.e2[n + 1])) for n in range(tr.nsteps)])
    return ConservationResult(r1, r2, curls, weak, isum, sim)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------
@dataclass
class SpectrumResult:
    modes: object
    analytical: np.ndarray
    rel_err_pct: np.ndarray
    problem: object


def run_beam_spectrum(cfg: BeamConfig, n_modes: int = 10, sigma: int = 1, vectors: bool = False) -> SpectrumResult:
    P = build_beam_problem(cfg, sigma)
    ms = solve_modes(P.system, n_modes, vectors=vectors)
    ana = beam_analytical_freqs(len(ms.omegas), cfg.EI, cfg.rhoA, cfg.L)
    return SpectrumResult(ms, ana, relative_errors_pct(ms.omegas, ana), P)


def run_wave_spectrum(cfg: WaveConfig, n_modes: int = 6, sigma: int = 1, vectors: bool = False) -> SpectrumResult:
    P = build_wave_problem(cfg, sigma)
    ms = solve_modes(P.system, n_modes, vectors=vectors)
    ana = wave_analytical_freqs(len(ms.omegas))
    return SpectrumResult(ms, ana, relative_errors_pct(ms.omegas, ana), P)


def interface_mismatch(problem, vec) -> float:
    """Relative L2 jump of ``e_alpha`` across the interface for a complex mode.

    In 1D this is the jump of the velocity at the interface vertex relative
    to the velocity L2 norm; in 2D the jump is integrated along the
    interface edges.
    """
    s = problem.system
    sp = problem.spaces
    na1, na2 = s.sub1.n_alpha, s.sub2.n_alpha
    v1 = vec[:na1]
    v2 = vec[s.n1: s.n1 + na2]
    a1, a2 = sp["alpha1"], sp["alpha2"]
    norm = np.sqrt(_l2sq(a1, v1) + _l2sq(a2, v2))
    if a1.dim == 1:
        xi = problem.spaces["mesh"].gamma_int_vertex
        left = v2[2 * a2.vertex_index[xi]]
        right = v1[a1.cell_dofs[0, 0]]
        return float(abs(left - right) / norm)
    from .elements import _gauss_interval
    from .mesh import GAMMA_INT

    s_, w = _gauss_interval(a2.degree + 2)
    jump = 0.0
    r1s, r2s = a1.facet_records(GAMMA_INT), a2.facet_records(GAMMA_INT)
    verts = a1.mesh.vertices
    for r1, r2 in zip(r1s, r2s):
        L = np.linalg.norm(verts[r1.hi] - verts[r1.lo])
        p1 = a1.tabulate(a1.facet_ref_points(r1, s_)[None], cells=[r1.cell])[0] @ v1[a1.cell_dofs[r1.cell]]
        p2 = a2.tabulate(a2.facet_ref_points(r2, s_)[None], cells=[r2.cell])[0] @ v2[a2.cell_dofs[r2.cell]]
        jump += L * np.sum(w * np.abs(p1 - p2) ** 2)
    return float(np.sqrt(jump) / norm)


def _l2sq(space, c):
    return dg.l2_error(space, c.real, _zero(space)) ** 2 + dg.l2_error(space, c.imag, _zero(space)) ** 2


def _zero(space):
    return lambda x: np.zeros(np.asarray(x).shape[0])


# ---------------------------------------------------------------------------
# convergence sweeps
# ---------------------------------------------------------------------------
def wave_convergence(k: int, ns=(4, 8, 16, 32), dt_factor: float = 0.1, t_end: float = 1.0,
                     bootstrap: str = "half", sigma: int = 1) -> dg.ConvergenceRecord:
    """Final-time L2 errors for ``h = 1/n`` with ``dt = dt_factor * h``."""
    rec = dg.ConvergenceRecord()
    for n in ns:
        h = 1.0 / n
        dt = dt_factor * h
        cfg = WaveConfig(n=n, k=k, dt=dt, t_end=t_end)
        P = build_wave_problem(cfg, sigma)
        tr = simulate_staggered(P.system, t_end, dt, P.u1, P.u2, P.e1_0, P.e2_0, bootstrap=bootstrap, store=False)
        rec.add(h, **wave_errors(P, tr.e1[-1], tr.e2[-1], tr.t1[-1], tr.t2[-1]))
    return rec


def beam_convergence(ns=(2, 4, 8, 16), dt_factor: float = 0.1, t_end: float = 1.0,
                     bootstrap: str = "half", sigma: int = 1, safety: float = 0.5):
    """Beam sweep with ``n`` elements per subdomain and ``h = L / (2 n)``.

    The step is ``min(dt_factor * h, safety * 2 / coupling_norm)`` so that the
    explicit interface exchange stays stable.  Returns the record (with the
    combined velocity and moment errors) and the time steps used.
    """
    rec = dg.ConvergenceRecord()
    parts = dg.ConvergenceRecord()
    dts = []
    for n in ns:
        base = BeamConfig(n1=n, n2=n, t_end=t_end)
        h = base.L / (2 * n)
        P0 = build_beam_problem(base, sigma)
        dt = stable_time_step(P0.system, dt_factor * h, t_end, safety)
        cfg = BeamConfig(n1=n, n2=n, dt=dt, t_end=t_end)
        P = build_beam_problem(cfg, sigma)
        tr = simulate_staggered(P.system, t_end, dt, P.u1, P.u2, P.e1_0, P.e2_0, bootstrap=bootstrap, store=False)
        e = beam_errors(P, tr.e1[-1], tr.e2[-1], tr.t1[-1], tr.t2[-1])
        rec.add(h, velocity=np.hypot(e["err_alpha_1"], e["err_alpha_2"]),
                moment=np.hypot(e["err_beta_1"], e["err_beta_2"]))
        parts.add(h, **e)
        dts.append(dt)
    return rec, parts, dts


def staggered_self_convergence(cfg: BeamConfig, dts, bootstrap: str = "half", sigma: int = 1):
    """Final-time difference between the staggered and monolithic-midpoint runs."""
    P = build_beam_problem(cfg, sigma)
    diffs = []
    for dt in dts:
        st = simulate_staggered(P.system, cfg.t_end, dt, P.u1, P.u2, P.e1_0, P.e2_0, bootstrap=bootstrap, store=False)
        mono = simulate_monolithic_midpoint(P.system, cfg.t_end, dt, P.u_stacked,
                                            np.concatenate([P.e1_0, P.e2_0]), store=False)
        e1_m = mono.e[-1][: P.system.n1]
        M1 = P.system.sub1.M
        d = st.e1[-1] - e1_m
        diffs.append(float(np.sqrt(d @ (M1 @ d))))
    return np.array(diffs)
