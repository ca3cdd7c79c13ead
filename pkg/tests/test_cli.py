import csv
import io
from pathlib import Path

import numpy as np
import pytest

from phdd.cli import ConfigError, main, parse_config, run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# phdd ") and "config-sha256=" in lines[0]
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    return rows[0], rows[1:]


def write_cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParse:
    def test_minimal(self):
        cfg = parse_config("[experiment]\nname = beam-spectrum\n")
        assert cfg.experiment == "beam-spectrum" and cfg.sigma == 1 and cfg.beam.n1 == 3

    def test_case_sensitive_model_key(self):
        cfg = parse_config("[experiment]\nname = beam-sim\n[beam]\nEI = 2.5  # stiffness\n")
        assert cfg.beam.EI == 2.5

    @pytest.mark.parametrize("text,key", [
        ("[experiment]\nname = nope\n", "experiment.name"),
        ("[experiment]\n", "experiment.name"),
        ("[experiment]\nname = beam-sim\nsigma = 2\n", "experiment.sigma"),
        ("[experiment]\nname = beam-sim\n[beam]\nn1 = x\n", "beam.n1"),
        ("[experiment]\nname = beam-sim\n[beam]\nn1 = 0\n", "beam.n1"),
        ("[experiment]\nname = beam-sim\n[beam]\ncolour = red\n", "beam.colour"),
        ("[experiment]\nname = wave-sim\n[wave]\nk = 7\nn = 5\n", "wave.k"),
        ("[experiment]\nname = wave-convergence\n[convergence]\nn_values = 8, 4\n", "convergence.n_values"),
        ("[experiment]\nname = beam-spectrum\n[spectrum]\nmodes = 0\n", "spectrum.modes"),
        ("[experiment]\nname = beam-sim\nbootstrap = quarter\n", "experiment.bootstrap"),
        ("[mystery]\na = 1\n", "mystery"),
    ])
    def test_errors_name_key(self, text, key):
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert exc.value.key == key

    def test_digest_depends_on_text(self):
        a = parse_config("[experiment]\nname = beam-spectrum\n").digest
        b = parse_config("[experiment]\nname = beam-spectrum\n\n").digest
        assert a != b and len(a) == 64


class TestExitCodes:
    def test_config_error(self, tmp_path, caplog):
        assert run(write_cfg(tmp_path, "[experiment]\nname = beam-sim\n[beam]\nrhoA = -1\n")) == 2
        assert "beam.rhoA" in caplog.text

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure(self, tmp_path):
        # dt * coupling norm (about 6.9) is far above the leapfrog limit 2 on the 3+3 beam
        text = f"[experiment]\nname = beam-sim\noutput = {tmp_path / 'o'}\n[beam]\ndt = 1e-3\nt_end = 1\n"
        assert run(write_cfg(tmp_path, text), plots=False) == 3

    def test_missing_config(self, tmp_path):
        assert run(tmp_path / "absent.cfg") == 4

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        cfg = write_cfg(tmp_path, "[experiment]\nname = beam-spectrum\n[spectrum]\nmodes = 2\n")
        assert run(cfg, out=str(blocker / "sub")) == 4

    def test_main_argv(self, tmp_path):
        cfg = write_cfg(tmp_path, "[experiment]\nname = beam-spectrum\n[spectrum]\nmodes = 2\n")
        assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--no-plots"]) == 0
        assert (tmp_path / "o" / "spectrum.csv").exists()
        assert not list((tmp_path / "o").glob("*.svg"))


class TestOutputs:
    def test_beam_spectrum_first_row(self, tmp_path):
        assert run(CONFIGS / "beam-spectrum.cfg", out=str(tmp_path)) == 0
        header, rows = read_csv(tmp_path / "spectrum.csv")
        assert header == ["mode", "omega_num", "omega_ana", "rel_err_pct"]
        assert abs(float(rows[0][1]) - 3.5160) <= 1e-3
        assert len(rows) == 10

    def test_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert run(CONFIGS / "beam-sim.cfg", out=str(tmp_path / sub)) == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert "residuals.csv" in names and "displacement.svg" in names
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_line_endings_and_digits(self, tmp_path):
        assert run(CONFIGS / "beam-spectrum.cfg", out=str(tmp_path), plots=False) == 0
        raw = (tmp_path / "spectrum.csv").read_bytes()
        assert b"\r" not in raw
        _, rows = read_csv(tmp_path / "spectrum.csv")
        assert float(rows[0][1]) == float(repr(float(rows[0][1])))

    def test_conservation_residuals(self, tmp_path):
        assert run(CONFIGS / "conservation.cfg", out=str(tmp_path), plots=False) == 0
        header, rows = read_csv(tmp_path / "residuals.csv")
        assert header == ["step", "residual_omega1", "residual_omega2"]
        vals = np.array([[float(v) if v else np.nan for v in r[1:]] for r in rows])
        assert len(rows) == 1000
        assert np.nanmax(np.abs(vals)) <= 1e-10
        _, curl = read_csv(tmp_path / "curl.csv")
        assert max(abs(float(r[1])) for r in curl) <= 1e-10


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.cfg")))
def test_shipped_config_exits_zero(name, tmp_path):
    assert run(CONFIGS / name, out=str(tmp_path), plots=True) == 0
    csvs = list(tmp_path.glob("*.csv"))
    assert csvs
    for p in csvs:
        read_csv(p)
    if name.startswith("wave-convergence") and "k2" not in name:
        _, rows = read_csv(tmp_path / "rates.csv")
        rates = {r[0]: float(r[1]) for r in rows}
        assert 1.7 <= rates["err_alpha_2"] <= 2.3
        for k in ("err_alpha_1", "err_beta_1", "err_beta_2"):
            assert 0.7 <= rates[k] <= 1.3
