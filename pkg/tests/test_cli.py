import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from omegapath.cli import (EXIT_CONFIG, EXIT_GUARD, EXIT_IO, EXIT_OK, OUTPUT_ENV, ConfigError, list_presets, main,
                           parse_config)
from omegapath.container import checksum
from omegapath.evolution import PRESETS, check_aptness, get_preset

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _run(tmp_path, text, *extra):
    cfg = _write(tmp_path, text)
    return main(["run", str(cfg), "--output-root", str(tmp_path / "out"), *extra])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


EVOLVE = """
[run]
experiment = evolve
[hamiltonian]
preset = {preset}
[study]
hbar = 1.0
meshes = 1/8
[grid]
levels = 16
"""


# exit codes


def test_negative_hbar_names_field(tmp_path, capsys):
    code = _run(tmp_path, "[run]\nexperiment = evolve\n[study]\nhbar = -1\n")
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "study.hbar" in err


@pytest.mark.parametrize("text, field", [
    ("[study]\nhbar = 1\n", "run"),
    ("[run]\nexperiment = nope\n", "run.experiment"),
    ("[run]\nexperiment = evolve\n[hamiltonian]\npreset = anharmonic\n", "hamiltonian.preset"),
    ("[run]\nexperiment = evolve\n[hamiltonian]\ncoefficients = 9 0 1\n", "hamiltonian.coefficients"),
    ("[run]\nexperiment = evolve\n[hamiltonian]\ncoefficients = 2 0 nan\n", "hamiltonian.coefficients"),
    ("[run]\nexperiment = evolve\n[hamiltonian]\ncoefficients = 2 0\n", "hamiltonian.coefficients"),
    ("[run]\nexperiment = evolve\n[study]\nmeshes = 0.5, 2\n", "study.meshes"),
    ("[run]\nexperiment = evolve\n[study]\nrule = lexicographic\n", "study.rule"),
    ("[run]\nexperiment = evolve\n[study]\nhbar = abc\n", "study.hbar"),
    ("[run]\nexperiment = evolve\n[grid]\nn = 33\n", "grid.n"),
    ("[run]\nexperiment = evolve\n[grid]\nlevels = 2\n", "grid.levels"),
    ("[run]\nexperiment = evolve\nseed = x\n", "run.seed"),
    ("not an ini file", "config"),
])
def test_validation(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field


def test_bad_study_param_exit_2(tmp_path, capsys):
    code = _run(tmp_path, "[run]\nexperiment = evolve\n[study]\nmeshes = 1/8\namplitude = big\n[grid]\nlevels = 16\n")
    assert code == EXIT_CONFIG
    assert "study.amplitude" in capsys.readouterr().err


def test_guard_failure_exit_3(tmp_path, capsys):
    text = "[run]\nexperiment = ordering-check\n[study]\nhbar = 1\nmax_degree = 3\ntolerance = 1e-300\n[grid]\nlevels = 32\n"
    assert _run(tmp_path, text) == EXIT_GUARD
    assert "ordering-table oracle" in capsys.readouterr().err


def test_quadrature_guard_exit_3(tmp_path, capsys):
    text = ("[run]\nexperiment = coherent-path\n[study]\nhbar = 1\nmeshes = 1/2\npoints = 4\n"
            "path_levels = 40\n")
    assert _run(tmp_path, text) == EXIT_GUARD
    assert "QuadratureError" in capsys.readouterr().err


def test_missing_config_exit_4(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.ini")]) == EXIT_IO
    assert "cannot read config" in capsys.readouterr().err


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    text = EVOLVE.format(preset="oscillator").replace("[run]\n", f"[run]\noutput = {blocker}/sub\n")
    assert main(["run", str(_write(tmp_path, text))]) == EXIT_IO


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


# presets


def test_list_presets(capsys):
    assert main(["list-presets"]) == EXIT_OK
    out = capsys.readouterr().out
    names = [line.split()[0] for line in out.splitlines() if line and not line[0].isspace()]
    assert len(names) == 5 and set(names) == set(PRESETS)
    assert list_presets() == out.rstrip("\n")


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_each_preset_runs(tmp_path, preset):
    assert _run(tmp_path, EVOLVE.format(preset=preset)) == EXIT_OK
    rows = _rows(tmp_path / "out" / "evolve" / "trajectory.csv")
    assert list(rows[0]) == ["hbar", "t", "norm", "energy"]
    assert len(rows) == 9 and float(rows[0]["t"]) == 0.0 and float(rows[-1]["t"]) == pytest.approx(1.0)


def test_quartic_apt_at_small_hbar():
    r = check_aptness(get_preset("quartic"), hbars=(0.1,))
    assert r.quasi_dissipative and r.hypoelliptic and r.t_continuous


def test_polynomial_hamiltonian(tmp_path):
    text = EVOLVE.format(preset="x").replace("preset = x", "name = mine\ncoefficients = 2 0 0.5; 0 2 0.5")
    assert _run(tmp_path, text) == EXIT_OK
    cfg = parse_config(text)
    assert cfg.hamiltonian.name == "mine"


# artifacts


def test_manifest_lists_every_file(tmp_path):
    assert main(["run", str(CONFIGS / "quantize.ini"), "--output-root", str(tmp_path)]) == EXIT_OK
    out = tmp_path / "quantize"
    man = json.loads((out / "manifest.json").read_text())
    files = {p.name for p in out.iterdir() if p.name != "manifest.json"}
    assert {e["file"] for e in man["files"]} == files
    assert any(f.endswith(".bin") for f in files) and any(f.endswith(".csv") for f in files)
    for e in man["files"]:
        assert e["sha256"] == checksum(out / e["file"])
        assert e["bytes"] == (out / e["file"]).stat().st_size
    assert man["experiment"] == "quantize" and man["seed"] == 20240917
    assert man["config"]["grid"]["levels"] == "64"
    assert {"omegapath", "python", "numpy", "scipy"} <= set(man["versions"])
    rt = _rows(out / "roundtrip_hbar1.csv")
    assert float(rt[0]["rel_error"]) < 1e-6


def test_deterministic_outputs(tmp_path):
    cfg = str(CONFIGS / "evolve.ini")
    assert main(["run", cfg, "--output-root", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", str(CONFIGS / "quantize.ini"), "--output-root", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", cfg, "--output-root", str(tmp_path / "b")]) == EXIT_OK
    assert main(["run", str(CONFIGS / "quantize.ini"), "--output-root", str(tmp_path / "b")]) == EXIT_OK
    for exp in ("evolve", "quantize"):
        a, b = tmp_path / "a" / exp, tmp_path / "b" / exp
        for p in sorted(a.glob("*.csv")):
            assert p.read_bytes() == (b / p.name).read_bytes()
        for p in sorted(a.glob("*.bin")):
            assert checksum(p) == checksum(b / p.name)
        ma = json.loads((a / "manifest.json").read_text())
        mb = json.loads((b / "manifest.json").read_text())
        assert ma["files"] == mb["files"]


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "envroot"))
    cfg = _write(tmp_path, EVOLVE.format(preset="free"))
    assert main(["run", str(cfg)]) == EXIT_OK
    assert (tmp_path / "envroot" / "evolve" / "manifest.json").exists()
    # explicit flag wins over the environment
    assert main(["run", str(cfg), "--output-root", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "evolve" / "trajectory.csv").exists()


def test_evolve_norms_contract(tmp_path):
    assert main(["run", str(CONFIGS / "evolve.ini"), "--output-root", str(tmp_path)]) == EXIT_OK
    norms = [float(r["norm"]) for r in _rows(tmp_path / "evolve" / "trajectory.csv")]
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))
    assert norms[-1] < norms[0]


def test_ordering_check_config(tmp_path):
    assert main(["run", str(CONFIGS / "ordering-check.ini"), "--output-root", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "ordering-check" / "ordering_check.csv")
    assert {r["rule"] for r in rows} >= {"weyl", "normal", "antinormal"}
    assert max(float(r["abs_error"]) for r in rows) < 1e-10


def test_converge_config_order_one(tmp_path):
    assert main(["run", str(CONFIGS / "converge.ini"), "--output-root", str(tmp_path)]) == EXIT_OK
    out = tmp_path / "converge"
    summary = _rows(out / "convergence_summary.csv")
    for r in summary:
        assert 0.8 <= float(r["fitted_order"]) <= 1.2
        assert r["monotone"] == "1"
    assert (out / "convergence.csv").exists() and (out / "aptness.csv").exists()


def test_dump(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "quantize.ini"), "--output-root", str(tmp_path)]) == EXIT_OK
    capsys.readouterr()
    assert main(["dump", str(tmp_path / "quantize" / "symbol_hbar1.bin"), "--entries", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "ordering=weyl" in out and "n_q=128" in out
    assert main(["dump", str(tmp_path / "quantize" / "operator_hbar1.bin")]) == EXIT_OK
    assert "FockBasis dim=64" in capsys.readouterr().out
    assert main(["dump", str(tmp_path / "quantize" / "roundtrip_hbar1.csv")]) == EXIT_CONFIG
    assert main(["dump", str(tmp_path / "missing.bin")]) == EXIT_IO


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "omegapath.cli", "list-presets"], capture_output=True, text=True)
    assert r.returncode == 0 and "quartic" in r.stdout
    bad = _write(tmp_path, "[run]\nexperiment = evolve\n[study]\nhbar = -1\n")
    r = subprocess.run([sys.executable, "-m", "omegapath.cli", "run", str(bad)], capture_output=True, text=True)
    assert r.returncode == 2 and "study.hbar" in r.stderr
