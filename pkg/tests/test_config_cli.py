import math
from pathlib import Path

import numpy as np
import pytest

from qdsource import io as qio
from qdsource.cli import main
from qdsource.config import ConfigError, ExperimentConfig, defaults_table, dump, loads
from qdsource.emitter import config_digest
from qdsource.pipeline import protocol, sweep_temperature

ROOT = Path(__file__).resolve().parents[1]


def run(tmp_path, argv, text=None):
    args = list(argv)
    if text is not None:
        cfg = tmp_path / "run.cfg"
        cfg.write_text(text)
        args += ["--config", str(cfg)]
    return main(args)


def report(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if " = " in line and not line.startswith("#"):
            k, v = line.split(" = ", 1)
            out[k] = v
    return out


# --- config parsing -------------------------------------------------------

def test_defaults_round_trip():
    cfg = ExperimentConfig()
    assert loads(dump(cfg)) == cfg
    assert loads("") == cfg


def test_values_and_comments():
    cfg = loads("seed = 7  # master\nemitter.capture_rate = 2.5\n"
                "sweep.temperatures = [4, 300]\nfilter.center_nm = None\n")
    assert cfg.seed == 7
    assert cfg.emitter.capture_rate == 2.5
    assert cfg.sweep.temperatures == (4.0, 300.0)


@pytest.mark.parametrize("text,line,key", [
    ("emitter.capture_rat = 3.0", 1, "emitter.capture_rat"),
    ("\nfoo.bar = 1", 2, "foo.bar"),
    ("seed = 1\nbogus = 2", 2, "bogus"),
    ("emitter.capture_rate = -3.0", 1, "emitter.capture_rate"),
    ("drive.rep_rate = fast", 1, "drive.rep_rate"),
    ("seed = 1\nseed = 2", 2, "seed"),
    ("seed = -1", 1, "seed"),
])
def test_strict_errors_name_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert exc.value.line == line
    assert exc.value.key == key
    assert key in str(exc.value)


def test_syntax_error_line():
    with pytest.raises(ConfigError) as exc:
        loads("seed = 1\nthis is not an assignment")
    assert exc.value.line == 2


def test_defaults_table_lists_every_key():
    table = defaults_table()
    for line in dump(ExperimentConfig()).splitlines():
        assert line.split(" = ")[0] in table


def test_readme_defaults_table_current():
    readme = (ROOT / "README.md").read_text()
    assert defaults_table() in readme


# --- CLI -------------------------------------------------------------------

SMALL = "drive.n_pulses = 50000\n"


def test_simulate_outputs_and_digest(tmp_path):
    out = tmp_path / "o"
    assert run(tmp_path, ["simulate", "--out", str(out), "--seed", "3"], SMALL) == 0
    meta, header, rows = qio.read_table(out / "clicks.csv")
    cfg = loads(SMALL + "seed = 3\n")
    assert meta["config_digest"] == config_digest(cfg)
    assert header == ("channel", "time_ps") and rows
    s = qio.read_stream(out / "stream.csv")
    assert s.meta["config_digest"] == config_digest(cfg)


def test_simulate_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run(tmp_path, ["simulate", "--out", str(tmp_path / d), "--seed", "5"], SMALL) == 0
    for name in ("stream.csv", "clicks.csv", "stream.csv.json", "clicks.csv.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_output(tmp_path):
    run(tmp_path, ["simulate", "--out", str(tmp_path / "a"), "--seed", "1"], SMALL)
    run(tmp_path, ["simulate", "--out", str(tmp_path / "b"), "--seed", "2"], SMALL)
    assert (tmp_path / "a/stream.csv").read_bytes() != (tmp_path / "b/stream.csv").read_bytes()


def test_exit_2_on_bad_config(tmp_path, capsys):
    code = run(tmp_path, ["simulate", "--out", str(tmp_path)], "emitter.capture_rate = -1.0\n")
    assert code == 2
    assert "emitter.capture_rate" in capsys.readouterr().err


def test_exit_2_on_unknown_key(tmp_path, capsys):
    assert run(tmp_path, ["budget", "--out", str(tmp_path)], "budget.detected = 1.0\n") == 2
    assert "budget.detected" in capsys.readouterr().err


def test_exit_2_on_bad_jobs(tmp_path):
    assert main(["budget", "--out", str(tmp_path), "--jobs", "0"]) == 2


def test_exit_3_missing_config(tmp_path):
    assert main(["budget", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 3


def test_exit_3_unwritable_out(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["budget", "--out", str(blocker / "sub")]) == 3


def test_exit_3_missing_input(tmp_path):
    assert main(["g2", "--input", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 3


def test_exit_4_partial_report(tmp_path):
    text = "drive.n_pulses = 200000\ndetector.efficiency = 0.0\ndetector.dark_rate = 1e7\n"
    out = tmp_path / "o"
    assert run(tmp_path, ["g2", "--out", str(out)], text) == 4
    rep = report(out / "fit_report.txt")
    assert "error" in rep
    assert (out / "g2_histogram.csv").exists()


def test_g2_from_stream_file(tmp_path):
    out = tmp_path / "o"
    assert run(tmp_path, ["simulate", "--out", str(out)], "drive.n_pulses = 300000\n") == 0
    assert main(["g2", "--input", str(out / "stream.csv"), "--out", str(out)]) == 0
    rep = report(out / "fit_report.txt")
    assert float(rep["g2.g2_zero"]) < 0.06
    meta, header, rows = qio.read_table(out / "fit.csv")
    assert header == qio.FIT_HEADER and len(rows) == 1


@pytest.mark.parametrize("power,lo,hi", [(0.1, 0.0, 0.02), (1.0, 0.0, 0.05)])
def test_g2_4k_scenarios(tmp_path, power, lo, hi):
    out = tmp_path / "o"
    assert run(tmp_path, ["g2", "--out", str(out)], f"drive.power_ratio = {power}\n") == 0
    gi = float(report(out / "fit_report.txt")["g2.g2_integrated"])
    assert lo <= gi <= hi


def test_g2_saturation_above_low_power(tmp_path):
    vals = []
    for p in (0.1, 1.0):
        out = tmp_path / str(p)
        run(tmp_path, ["g2", "--out", str(out)], f"drive.power_ratio = {p}\n")
        vals.append(float(report(out / "fit_report.txt")["g2.g2_integrated"]))
    assert vals[0] < vals[1] <= 0.05


def test_g2_cascade_scenario(tmp_path):
    text = "drive.fixed_pairs = 2\nfilter.width_nm = 100.0\nemitter.spin_flip_rate = 0.0\n"
    out = tmp_path / "o"
    assert run(tmp_path, ["g2", "--out", str(out)], text) == 0
    gi = float(report(out / "fit_report.txt")["g2.g2_integrated"])
    assert gi == pytest.approx(0.5, abs=0.02)


def test_trpl_command(tmp_path):
    out = tmp_path / "o"
    assert run(tmp_path, ["trpl", "--out", str(out)], "drive.power_ratio = 0.05\n") == 0
    tau = float(report(out / "fit_report.txt")["trpl.lifetime"])
    assert tau == pytest.approx(2.1, rel=0.1)


def test_budget_command(tmp_path, capsys):
    assert main(["budget", "--out", str(tmp_path)]) == 0
    _, header, rows = qio.read_table(tmp_path / "budget.csv")
    rounded = {r[0]: float(r[2]) for r in rows}
    assert [rounded[k] for k in ("end_to_end_raw", "end_to_end_detcorr", "first_lens",
                                 "first_lens_single_photon", "first_lens_with_sideband")] == \
        [2.3, 2.6, 26.0, 25.0, 32.0]
    assert "25.83" in capsys.readouterr().out


def test_budget_lossless(tmp_path):
    text = ("budget.detector_efficiency = 1.0\nbudget.setup_throughput = 1.0\n"
            "budget.sideband_fraction = 0.0\nbudget.g2_zero = 0.0\n"
            "budget.mirror_reflectivity = None\n")
    assert run(tmp_path, ["budget", "--out", str(tmp_path)], text) == 0
    _, _, rows = qio.read_table(tmp_path / "budget.csv")
    assert len({r[1] for r in rows}) == 1


def test_waveguide_command(tmp_path):
    text = "waveguide.wavelength_min = 1300.0\nwaveguide.wavelength_max = 1400.0\n"
    assert run(tmp_path, ["waveguide", "--out", str(tmp_path)], text) == 0
    _, header, rows = qio.read_table(tmp_path / "waveguide.csv")
    assert header == qio.WAVEGUIDE_HEADER
    data = np.array(rows, dtype=float)
    for d in (270.0, 290.0, 310.0):
        f = data[data[:, 0] == d, 4]
        assert len(f) == 11 and np.all(np.diff(f) < 0)


def test_sweep_rows_in_order_regardless_of_jobs():
    cfg = loads("sweep.n_pulses = 100000\n")
    one = sweep_temperature(cfg, [4.0, 300.0, 150.0], jobs=1)
    two = sweep_temperature(cfg, [4.0, 300.0, 150.0], jobs=2)
    assert [r[0] for r in two] == [4.0, 300.0, 150.0]
    for a, b in zip(one, two):
        assert all((x == y) or (isinstance(x, float) and math.isnan(x) and math.isnan(y))
                   for x, y in zip(a, b))


def test_sweep_power_command(tmp_path):
    text = "sweep.n_pulses = 50000\nsweep.powers = [0.0, 0.1, 1.0]\n"
    assert run(tmp_path, ["sweep-power", "--out", str(tmp_path)], text) == 0
    _, _, rows = qio.read_table(tmp_path / "sweep_power.csv")
    assert [float(r[0]) for r in rows] == [0.0, 0.1, 1.0]
    rates = [float(r[2]) for r in rows]
    assert rates[0] == 0.0 < rates[1] < rates[2]


def test_sweep_temperature_command(tmp_path):
    text = "sweep.n_pulses = 100000\nsweep.temperatures = [4, 300]\n"
    assert run(tmp_path, ["sweep-temperature", "--out", str(tmp_path), "--jobs", "2"], text) == 0
    _, header, rows = qio.read_table(tmp_path / "sweep_temperature.csv")
    assert header[:5] == ("T_K", "wavelength_nm", "linewidth_uev", "lifetime_ns", "g2_zero")
    assert float(rows[0][1]) == pytest.approx(1301.28)
    _, _, lt = qio.read_table(tmp_path / "lifetime_curve.csv")
    assert float(lt[1][1]) == pytest.approx(10.8, rel=1e-6)


def test_protocol_schedule():
    assert protocol(4.0) == (0.5, 0.1)
    assert protocol(120.0) == (0.5, 0.1)
    assert protocol(175.0) == (0.25, 12.0)
    assert protocol(300.0) == (0.25, 25.0)
