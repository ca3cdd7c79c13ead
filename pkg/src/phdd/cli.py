"""Batch experiment runner: ``phdd run <config> [--out DIR] [--no-plots]``.

Config files are INI-style ``key = value`` text with ``[section]`` headers::

    [experiment]
    name = beam-spectrum
    output = out/beam-spectrum
    plots = true
    sigma = 1
    bootstrap = full

    [beam]
    n1 = 10
    n2 = 10

    [spectrum]
    modes = 10
    vectors = true

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import experiments as ex
from .diagnostics import fit_rate
from .mesh import write_mesh
from .models import BeamConfig, WaveConfig
from .plot import Series, plot
from .timeint import BOOTSTRAP_VARIANTS, NumericalError

log = logging.getLogger("phdd")

EXPERIMENTS = (
    "beam-sim",
    "beam-spectrum",
    "wave-sim",
    "wave-spectrum",
    "wave-convergence",
    "beam-convergence",
    "conservation",
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid config; ``key`` is the ``section.option`` path at fault."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class ExperimentConfig:
    experiment: str
    output: Path
    plots: bool = True
    sigma: int = 1
    bootstrap: str = "full"
    beam: BeamConfig = field(default_factory=BeamConfig)
    wave: WaveConfig = field(default_factory=WaveConfig)
    modes: int = 10
    vectors: bool = False
    conv_k: int = 1
    conv_n: tuple = (4, 8, 16, 32)
    conv_dt_factor: float = 0.1
    conv_t_end: float = 1.0
    conv_bootstrap: str = "half"
    digest: str = ""


_SECTIONS = {
    "experiment": {"name", "output", "plots", "sigma", "bootstrap"},
    "beam": {f.name for f in fields(BeamConfig)},
    "wave": {f.name for f in fields(WaveConfig)},
    "spectrum": {"modes", "vectors"},
    "convergence": {"k", "n_values", "dt_factor", "t_end", "bootstrap"},
}


def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} ({exc})") from None


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _int_list(s: str) -> tuple:
    vals = tuple(int(v) for v in s.replace(",", " ").split())
    if not vals:
        raise ValueError("empty list")
    return vals


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` naming the offending key."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # model parameters such as EI are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(sec, "unknown section")
        for key in cp.options(sec):
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key")
    if not cp.has_option("experiment", "name"):
        raise ConfigError("experiment.name", "missing")
    name = cp.get("experiment", "name").strip()
    if name not in EXPERIMENTS:
        raise ConfigError("experiment.name", f"unknown experiment {name!r}; expected one of {', '.join(EXPERIMENTS)}")
    out = Path(_get(cp, "experiment", "output", str, f"out/{name}"))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    sigma = _get(cp, "experiment", "sigma", int, 1)
    if sigma not in (1, -1):
        raise ConfigError("experiment.sigma", "must be 1 or -1")
    bootstrap = _get(cp, "experiment", "bootstrap", str, "full").strip()
    if bootstrap not in BOOTSTRAP_VARIANTS:
        raise ConfigError("experiment.bootstrap", f"expected one of {BOOTSTRAP_VARIANTS}")

    def model(section, cls):
        kwargs = {}
        for f in fields(cls):
            conv = int if f.name in ("n", "k", "n1", "n2") else float
            if cp.has_option(section, f.name):
                kwargs[f.name] = _get(cp, section, f.name, conv, None)
        try:
            return cls(**kwargs)
        except ValueError as exc:
            # model validation messages start with the offending field name
            bad = str(exc).split()[0]
            raise ConfigError(f"{section}.{bad}" if bad in kwargs else section, str(exc)) from None

    cfg = ExperimentConfig(
        experiment=name,
        output=out,
        plots=_get(cp, "experiment", "plots", _bool, True),
        sigma=sigma,
        bootstrap=bootstrap,
        beam=model("beam", BeamConfig),
        wave=model("wave", WaveConfig),
        modes=_get(cp, "spectrum", "modes", int, 10),
        vectors=_get(cp, "spectrum", "vectors", _bool, False),
        conv_k=_get(cp, "convergence", "k", int, 1),
        conv_n=_get(cp, "convergence", "n_values", _int_list, (4, 8, 16, 32) if name == "wave-convergence" else (2, 4, 8, 16)),
        conv_dt_factor=_get(cp, "convergence", "dt_factor", float, 0.1),
        conv_t_end=_get(cp, "convergence", "t_end", float, 1.0),
        conv_bootstrap=_get(cp, "convergence", "bootstrap", str, "half").strip(),
        digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )
    if cfg.modes < 1:
        raise ConfigError("spectrum.modes", "must be at least 1")
    if cfg.conv_k not in (1, 2):
        raise ConfigError("convergence.k", "must be 1 or 2")
    if len(cfg.conv_n) < 2 or any(n < 1 for n in cfg.conv_n) or list(cfg.conv_n) != sorted(set(cfg.conv_n)):
        raise ConfigError("convergence.n_values", "need at least two strictly increasing positive sizes")
    if not cfg.conv_dt_factor > 0:
        raise ConfigError("convergence.dt_factor", "must be positive")
    if not cfg.conv_t_end > 0:
        raise ConfigError("convergence.t_end", "must be positive")
    if cfg.conv_bootstrap not in BOOTSTRAP_VARIANTS:
        raise ConfigError("convergence.bootstrap", f"expected one of {BOOTSTRAP_VARIANTS}")
    return cfg


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------
def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "" if np.isnan(v) else f"{v:.17g}"


def write_csv(path: Path, header, rows, cfg: ExperimentConfig) -> Path:
    """Write a provenance comment, the header and ``rows`` (LF, 17 significant digits)."""
    lines = [f"# phdd {cfg.experiment} config-sha256={cfg.digest}", ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


def _residual_rows(r1, r2):
    return [(n, a, b) for n, (a, b) in enumerate(zip(r1, r2))]


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------
def _beam_sim(cfg, out):
    res = ex.run_beam_sim(cfg.beam, cfg.sigma, cfg.bootstrap)
    from .diagnostics import power_residual

    files = []
    for key, where in (("x0", "omega2_x0"), ("xL", "omega1_xL")):
        d = res.extra[key]
        files.append(write_csv(out / f"beam_{where}.csv", ["t", "v_num", "v_exact", "w_num", "w_exact"],
                               zip(d["t"], d["v_num"], d["v_exact"], d["w_num"], d["w_exact"]), cfg))
    tr = res.traj
    files.append(write_csv(out / "residuals.csv", ["step", "residual_omega1", "residual_omega2"],
                           _residual_rows(power_residual(tr, 1), power_residual(tr, 2)), cfg))
    files.append(write_csv(out / "hamiltonian.csv", ["t", "H1", "H2"], zip(tr.t1, tr.H1, tr.H2), cfg))
    files.append(write_csv(out / "errors.csv", ["variable", "l2_error"], sorted(res.errors.items()), cfg))
    _write_beam_mesh(out, res.problem, cfg)
    if cfg.plots:
        d0, dL = res.extra["x0"], res.extra["xL"]
        plot([Series("numerical x=0", d0["t"], d0["w_num"]), Series("exact x=0", d0["t"], d0["w_exact"]),
              Series("numerical x=L", dL["t"], dL["w_num"]), Series("exact x=L", dL["t"], dL["w_exact"])],
             out / "displacement.svg", "beam tip displacements", "t", "w")
        plot([Series("numerical x=0", d0["t"], d0["v_num"]), Series("exact x=0", d0["t"], d0["v_exact"]),
              Series("numerical x=L", dL["t"], dL["v_num"]), Series("exact x=L", dL["t"], dL["v_exact"])],
             out / "velocity.svg", "beam tip velocities", "t", "w_t")
    return files


def _write_beam_mesh(out, problem, cfg):
    m = problem.spaces["mesh"]
    rows = [(i, x, int(t)) for i, (x, t) in enumerate(zip(m.vertices, list(m.cell_tags) + [m.cell_tags[-1]]))]
    return write_csv(out / "mesh_vertices.csv", ["vertex", "x", "tag_of_cell_to_right"], rows, cfg)


def _spectrum(cfg, out, which):
    if which == "beam":
        res = ex.run_beam_spectrum(cfg.beam, cfg.modes, cfg.sigma, vectors=cfg.vectors)
    else:
        res = ex.run_wave_spectrum(cfg.wave, cfg.modes, cfg.sigma, vectors=cfg.vectors)
        write_mesh(res.problem.spaces["mesh"], out / "mesh.txt")
    ms = res.modes
    header = ["mode", "omega_num", "omega_ana", "rel_err_pct"]
    files = [write_csv(out / "spectrum.csv", header,
                       [(i + 1, a, b, c) for i, (a, b, c) in enumerate(zip(ms.omegas, res.analytical, res.rel_err_pct))], cfg)]
    if which == "wave":
        tp = 2 * np.pi
        files.append(write_csv(out / "spectrum_hz.csv", header,
                               [(i + 1, a / tp, b / tp, c) for i, (a, b, c) in
                                enumerate(zip(ms.omegas, res.analytical, res.rel_err_pct))], cfg))
    else:
        _write_beam_mesh(out, res.problem, cfg)
    if cfg.vectors and ms.vectors is not None:
        s = res.problem.system
        block = ["alpha1"] * s.sub1.n_alpha + ["beta1"] * (s.n1 - s.sub1.n_alpha)
        block += ["alpha2"] * s.sub2.n_alpha + ["beta2"] * (s.n2 - s.sub2.n_alpha)
        V = ms.vectors
        head = ["dof", "block"] + [f"mode{j + 1}_{p}" for j in range(V.shape[1]) for p in ("re", "im")]
        rows = [[i, block[i]] + [x for j in range(V.shape[1]) for x in (V[i, j].real, V[i, j].imag)]
                for i in range(V.shape[0])]
        files.append(write_csv(out / "eigenvectors.csv", head, rows, cfg))
    if cfg.plots:
        m = np.arange(1, len(ms.omegas) + 1)
        plot([Series("numerical", m, ms.omegas, True), Series("analytical", m, res.analytical, True)],
             out / "spectrum.svg", f"{which} frequencies", "mode", "omega")
    return files


def _wave_sim(cfg, out):
    res = ex.run_wave_sim(cfg.wave, cfg.sigma, cfg.bootstrap)
    from .diagnostics import power_residual

    tr = res.traj
    write_mesh(res.problem.spaces["mesh"], out / "mesh.txt")
    files = [
        write_csv(out / "hamiltonian.csv", ["t", "H1", "H2"], zip(tr.t1, tr.H1, tr.H2), cfg),
        write_csv(out / "residuals.csv", ["step", "residual_omega1", "residual_omega2"],
                  _residual_rows(power_residual(tr, 1), power_residual(tr, 2)), cfg),
        write_csv(out / "errors.csv", ["variable", "l2_error"], sorted(res.errors.items()), cfg),
    ]
    if cfg.plots:
        plot([Series("H1 (integer steps)", tr.t1, tr.H1), Series("H2 (half steps)", tr.t2, tr.H2)],
             out / "hamiltonian.svg", "subdomain energies", "t", "H")
    return files


def _conservation(cfg, out):
    res = ex.run_conservation(cfg.wave, cfg.sigma, cfg.bootstrap)
    tr = res.sim.traj
    files = [
        write_csv(out / "residuals.csv", ["step", "residual_omega1", "residual_omega2"],
                  _residual_rows(res.residual_1, res.residual_2), cfg),
        write_csv(out / "curl.csv", ["t", "curl_norm_beta2"], zip(tr.t2, res.curl_norms), cfg),
        write_csv(out / "weak_curl.csv", ["step", "max_weak_curl_rate_beta1"], enumerate(res.weak_curl), cfg),
        write_csv(out / "interface_power.csv", ["step", "interface_power_sum"], enumerate(res.interface_sum), cfg),
    ]
    if cfg.plots:
        steps = np.arange(len(res.residual_1))
        plot([Series("omega 1", steps, np.abs(res.residual_1)), Series("omega 2", steps, np.abs(res.residual_2))],
             out / "residuals.svg", "power balance residuals", "step", "|residual|")
    return files


def _convergence(cfg, out, which):
    if which == "wave":
        rec = ex.wave_convergence(cfg.conv_k, cfg.conv_n, cfg.conv_dt_factor, cfg.conv_t_end,
                                  cfg.conv_bootstrap, cfg.sigma)
        extra = []
    else:
        combined, rec, dts = ex.beam_convergence(cfg.conv_n, cfg.conv_dt_factor, cfg.conv_t_end,
                                                 cfg.conv_bootstrap, cfg.sigma)
        extra = [(f"combined_{k}", fit_rate(combined.h, v)) for k, v in sorted(combined.errors.items())]
    keys = ["err_alpha_1", "err_beta_1", "err_alpha_2", "err_beta_2"]
    files = [write_csv(out / "convergence.csv", ["h"] + keys,
                       [[h] + [rec.errors[k][i] for k in keys] for i, h in enumerate(rec.h)], cfg)]
    rates = rec.rates()
    files.append(write_csv(out / "rates.csv", ["variable", "rate"], [(k, rates[k]) for k in keys] + extra, cfg))
    if which == "beam":
        files.append(write_csv(out / "time_steps.csv", ["h", "dt"], zip(rec.h, dts), cfg))
    if cfg.plots:
        plot([Series(k, rec.h, rec.errors[k], True) for k in keys], out / "convergence.svg",
             f"{which} convergence", "h", "L2 error", loglog=True, slope=round(rates[keys[2]]))
    return files


_DISPATCH = {
    "beam-sim": _beam_sim,
    "beam-spectrum": lambda c, o: _spectrum(c, o, "beam"),
    "wave-sim": _wave_sim,
    "wave-spectrum": lambda c, o: _spectrum(c, o, "wave"),
    "wave-convergence": lambda c, o: _convergence(c, o, "wave"),
    "beam-convergence": lambda c, o: _convergence(c, o, "beam"),
    "conservation": _conservation,
}


def run(config_path, out: str | None = None, plots: bool | None = None) -> int:
    """Run one experiment; returns the process exit code."""
    path = Path(config_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    if out is not None:
        cfg.output = Path(out)
    if plots is not None:
        cfg.plots = plots
    try:
        cfg.output.mkdir(parents=True, exist_ok=True)
        files = _DISPATCH[cfg.experiment](cfg, cfg.output)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    for f in files:
        log.info("wrote %s", f)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="phdd", description="Run a decomposed port-Hamiltonian experiment.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (overrides experiment.output)")
    p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    p.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run(args.config, args.out, False if args.no_plots else None)


if __name__ == "__main__":
    sys.exit(main())
