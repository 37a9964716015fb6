import numpy as np
import pytest

from csentangle.cli import main
from csentangle.config import (
    KEYS,
    build_config,
    describe_keys,
    format_complex,
    load_config,
    parse_complex,
    parse_text,
    time_grid,
)
from csentangle.errors import ConfigError


@pytest.mark.parametrize("text, value", [
    ("1.5-0.2i", 1.5 - 0.2j), ("2i", 2j), ("-1", -1), ("-i", -1j), ("1e-3+4.5e1j", 1e-3 + 45j), (".5", 0.5),
])
def test_parse_complex(text, value):
    assert parse_complex(text) == value
    assert parse_complex(format_complex(value)) == value


@pytest.mark.parametrize("bad", ["", "abc", "1+", "i1", "1..2"])
def test_parse_complex_rejects(bad):
    with pytest.raises(ConfigError):
        parse_complex(bad)


def test_text_format_and_unknown_keys():
    raw = parse_text("model = kerr  # comment\nmonomial = 1,0,1,1,0,0\nmonomial = 0.5,0,0,0,1,1\n")
    assert raw == {"model": "kerr", "monomial": ["1,0,1,1,0,0", "0.5,0,0,0,1,1"]}
    with pytest.raises(ConfigError):
        parse_text("nonsense = 1")
    with pytest.raises(ConfigError):
        parse_text("just words")


def test_precedence_defaults_file_env_cli(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("omega = 2.0\nhbar = 0.5\nT_count = 3\n")
    env = {"CSENTANGLE_HBAR": "0.25", "CSENTANGLE_SEED": "9"}
    c = load_config("propagator", str(cfg), {"seed": "4"}, environ=env)
    assert c.omega == 2.0 and c.hbar == 0.25 and c.seed == 4 and c.lam == 0.1
    assert len(c.T_grid) == 3


def test_scenario_time_defaults():
    ho = load_config("ho-check", environ={})
    assert len(ho.T_grid) == 33 and ho.T_grid[-1] == pytest.approx(4 * np.pi)
    kp = load_config("kerr-purity", environ={})
    assert kp.T_grid[-1] == pytest.approx(2 * np.pi / kp.Gamma)


def test_grid_validation():
    with pytest.raises(ConfigError):
        time_grid(0.0, 1.0, 0)
    with pytest.raises(ConfigError):
        time_grid(1.0, 0.5, 4)
    assert time_grid(0.0, 1.0, 3, [0.25]) == (0.0, 0.25, 0.5, 1.0)
    with pytest.raises(ConfigError):
        build_config("propagator", {"xi": "2"})
    with pytest.raises(ConfigError):
        build_config("propagator", {"hbar": "-1"})
    with pytest.raises(ConfigError):
        build_config("propagator", {"z0": "1"})


def test_custom_model_from_monomials():
    c = build_config("propagator", {"model": "custom", "n_modes": "1",
                                    "monomial": ["1, 0, 1, 1, 0, 0", "0.5, 0, 0, 0, 0, 0"]})
    model, kerr = c.build_model()
    assert kerr is None and model.n_modes == 1 and model.is_hermitian()
    with pytest.raises(ConfigError):
        build_config("propagator", {"model": "custom"}).build_model()


def test_help_lists_every_key(capsys):
    with pytest.raises(SystemExit) as info:
        main(["ho-check", "--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for key in KEYS:
        assert key in out
    assert all(key in describe_keys() for key in KEYS)


def test_empty_grid_is_a_config_error(capsys, monkeypatch):
    monkeypatch.setenv("CSENTANGLE_T_COUNT", "0")
    assert main(["ho-check"]) == 2
    assert "empty time grid" in capsys.readouterr().err


def test_propagator_csv_is_deterministic_across_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("CSENTANGLE_T_COUNT", "5")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["propagator", "--out", str(a)]) == 0
    assert main(["propagator", "--out", str(b), "--threads", "3"]) == 0
    assert a.read_text() == b.read_text()
    assert a.read_text().count("\n") == 6


def test_stdout_mode_separates_csv_and_summary(capsys, monkeypatch):
    monkeypatch.setenv("CSENTANGLE_T_COUNT", "2")
    assert main(["propagator", "--out", "-"]) == 0
    out, err = capsys.readouterr()
    assert out.splitlines()[0].startswith("T,")
    assert "propagator" in err


def test_bvp_subcommand(tmp_path, monkeypatch):
    monkeypatch.setenv("CSENTANGLE_MODEL", "kerr")
    out = tmp_path / "bvp.csv"
    code = main(["bvp-solve", "--z1", "1+0.5i, 0.3", "--z2", "0.8, 1-0.2i", "--T", "2", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and "residual" in lines[0]


def test_bvp_mode_mismatch_is_bad_input(capsys):
    assert main(["bvp-solve", "--z1", "1, 1", "--z2", "1, 1"]) == 2


def test_kerr_purity_reports_both_closed_forms(tmp_path, monkeypatch):
    monkeypatch.setenv("CSENTANGLE_T_COUNT", "9")
    out = tmp_path / "k.csv"
    assert main(["kerr-purity", "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert {"P_pipeline", "P_printed", "P_exact", "P_det_form", "x"} <= set(header)
