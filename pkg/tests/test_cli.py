import json
import logging
from pathlib import Path

import pytest

from djr.core.logging_setup import level_for
from djr.main import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv: str) -> tuple[int, str]:
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_block_prints_symbols(capsys):
    code, out = run(capsys, "block", "--a", "1", "--b", "2", "--k", "1")
    assert code == EXIT_OK
    assert out == "010\n"


def test_block_single_symbol_is_lazy(capsys):
    code, out = run(capsys, "block", "--a", "1", "--b", "2", "--k", "2", "--pos", "6")
    assert code == EXIT_OK
    assert out == "1\n"


def test_block_over_cap_is_a_usage_error(capsys):
    code = main(["block", "--a", "1", "--b", "2", "--k", "40"])
    assert code == EXIT_USAGE
    assert "exceeds the materialization cap" in capsys.readouterr().err


def test_block_written_to_file(tmp_path: Path, capsys):
    target = tmp_path / "b2.txt"
    code, out = run(
        capsys, "block", "--a", "1", "--b", "2", "--k", "2", "--out", str(target)
    )
    assert code == EXIT_OK
    assert out == ""
    assert target.read_text() == "0100101010010"


def test_invalid_family_is_a_usage_error(capsys):
    code, _ = run(capsys, "block", "--a", "2", "--b", "2", "--k", "1")
    assert code == EXIT_USAGE


def test_missing_required_flag(capsys):
    code, _ = run(capsys, "block", "--b", "2", "--k", "1")
    assert code == EXIT_USAGE


def test_density_text_and_json(capsys):
    code, out = run(capsys, "density", "--a", "1", "--b", "2", "--word", "1", "--level", "2")
    assert code == EXIT_OK
    assert out.startswith("d_2(1) = 5/13")

    code, out = run(
        capsys,
        "density", "--a", "1", "--b", "2", "--word", "1", "--level", "1", "--format", "json",
    )
    assert code == EXIT_OK
    assert json.loads(out) == {"density": ["1", "3"], "level": 1, "word": "1"}


def test_measure_of_spacer(capsys):
    code, out = run(
        capsys, "measure", "--a", "1", "--b", "2", "--spacer", "1", "--format", "json"
    )
    assert code == EXIT_OK
    document = json.loads(out)
    assert document["event"] == "S_1"
    assert document["measure"]["level"] == 5


def test_rigidity_pass_line(capsys):
    code, out = run(capsys, "rigidity", "--a", "1", "--b", "2", "--k", "3")
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "delta(T^h3) < 1/8: PASS"


def test_skew_orbit(capsys):
    code, out = run(capsys, "skew", "--q", "5", "--b", "2", "--steps", "2")
    assert code == EXIT_OK
    assert out == "(2,1) (4,3)\n"


def test_skew_needs_coprime_modulus(capsys):
    code, _ = run(capsys, "skew", "--q", "4", "--b", "2", "--steps", "2")
    assert code == EXIT_USAGE


def test_nq_single_modulus(capsys):
    code, out = run(capsys, "nq", "--b", "2", "--q", "3", "--k-max", "6")
    assert code == EXIT_OK
    assert out == "0 2 4 6\n"


def test_nq_csv_sweep(capsys):
    code, out = run(capsys, "nq", "--b", "2", "--q", "3", "5", "--k-max", "2", "--format", "csv")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "q,b,k,h_k_mod_q,in_Nq"
    assert lines[1] == "3,2,0,1,1"
    assert lines[-1] == "5,2,2,3,0"
    assert len(lines) == 7


def test_tower_json(capsys):
    code, out = run(
        capsys, "tower", "--a", "1", "--b", "2", "--q", "2", "--N", "2", "--format", "json"
    )
    document = json.loads(out)
    assert (document["q"], document["N"], document["M"]) == (2, 2, 5)
    assert code == (EXIT_OK if document["passed"] else EXIT_FAILED)


def test_tower_outside_nq_is_a_usage_error(capsys):
    code, _ = run(capsys, "tower", "--a", "1", "--b", "2", "--q", "3", "--N", "3")
    assert code == EXIT_USAGE


def test_bad_config_is_a_usage_error(tmp_path: Path, capsys):
    config = tmp_path / "djr.toml"
    config.write_text("[djr]\ncap = 0\n")
    code, _ = run(capsys, "block", "--a", "1", "--b", "2", "--k", "1", "--config", str(config))
    assert code == EXIT_USAGE


@pytest.mark.slow
def test_verify_report_is_deterministic(tmp_path: Path, capsys):
    first, second = tmp_path / "one.json", tmp_path / "two.json"
    args = ["verify", "--a", "1", "--b", "2", "--q-max", "2", "--k-max", "2"]
    assert main([*args, "--report", str(first)]) == EXIT_OK
    assert main([*args, "--report", str(second), "--html", str(tmp_path / "r.html")]) == EXIT_OK
    capsys.readouterr()

    assert first.read_bytes() == second.read_bytes()
    document = json.loads(first.read_text())
    assert document["schema"] == "djr-report/1"
    assert document["passed"] is True
    assert document["failed"] == []
    assert "Verification Report" in (tmp_path / "r.html").read_text()


def test_verbosity_levels():
    assert level_for() == logging.INFO
    assert level_for(verbose=True) == logging.DEBUG
    assert level_for(quiet=True) == logging.WARNING
