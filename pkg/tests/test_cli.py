import json

import pytest

from padicperiods.cli import (
    EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_PASS, SCHEMA_VERSION, ConfigError, build_parser, main, resolve_config,
)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def config(*argv, env=None):
    return resolve_config(build_parser().parse_args(list(argv)), env or {})


def test_witt_demo_passes(capsys):
    code, out, _ = run(capsys, "witt-demo", "--samples", "3", "--json")
    doc = json.loads(out)
    assert code == EXIT_PASS
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["config"]["samples"] == 3
    ids = [r["id"] for r in doc["rows"]]
    assert "theta:frobenius-limit" in ids and "big-witt:roundtrip" in ids
    assert all(r["status"] == "pass" for r in doc["rows"])
    assert all(r["ms"] is None for r in doc["rows"])


def test_period_check_passes(capsys):
    code, out, _ = run(capsys, "period-check", "--tsv", "--timings")
    lines = out.strip().split("\n")
    assert code == EXIT_PASS
    assert lines[0].split("\t") == ["id", "status", "values", "precision_loss", "ms"]
    rows = [line.split("\t") for line in lines[1:]]
    assert {r[0] for r in rows} >= {"theta:eps", "fil-order:t", "frobenius:t", "theta:log-ptilde:branch1"}
    assert all(r[1] == "pass" and float(r[4]) >= 0 for r in rows)


def test_precision_exhaustion_is_inconclusive(capsys):
    code, out, _ = run(capsys, "period-check", "--prec", "2", "--tau", "1", "--json")
    rows = {r["id"]: r for r in json.loads(out)["rows"]}
    assert code == EXIT_INCONCLUSIVE
    bad = rows["theta:log-ptilde:branch0"]
    assert bad["status"] == "inconclusive" and bad["precision_loss"]["reason"] == "p-precision"


def test_unstable_window_is_inconclusive(capsys):
    code, out, _ = run(capsys, "euler-table", "--characters", "ext(trivial;gamma)", "--prec", "6",
                       "--window", "4", "--window-max", "8", "--json")
    rows = json.loads(out)["rows"]
    assert code == EXIT_INCONCLUSIVE
    assert [r["status"] for r in rows] == ["inconclusive", "inconclusive"]
    assert rows[0]["precision_loss"]["reason"] == "window"
    assert [w["L"] for w in rows[0]["window_trace"]] == [4, 8]


def test_euler_table_selection(capsys):
    code, out, _ = run(capsys, "euler-table", "--characters", "trivial, char(2,1)", "--window", "16",
                       "--window-max", "32")
    assert code == EXIT_PASS
    assert "dims:char(2,1)" in out and "4 rows: 4 pass" in out


def exit_status(argv):
    # argparse-level errors leave through SystemExit
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.parametrize("argv", [
    ["witt-demo", "--p", "4"],
    ["witt-demo", "--p", "2"],
    ["cohomology", "--tau", "30"],
    ["bogus"],
    ["witt-demo", "--json", "--tsv"],
    ["euler-table", "--characters", "char(5,1)"],
    ["witt-demo", "--window", "32", "--window-max", "40"],
    ["witt-demo", "--witt-length", "9"],
])
def test_config_errors_exit_64(capsys, argv):
    assert exit_status(argv) == EXIT_CONFIG
    assert capsys.readouterr().err


def test_level_too_low_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("PADICPERIODS_LEVEL", "1")
    code, _, err = run(capsys, "period-check")
    assert code == EXIT_CONFIG and "level" in err


def test_precedence(tmp_path):
    prof = tmp_path / "profile.json"
    prof.write_text(json.dumps({"prec": 9, "seed": 5, "samples": 4, "fil-depth": 3}))
    base = config("witt-demo")
    assert (base.prec, base.seed, base.tau) == (6, 0, 3)
    assert config("cohomology").prec == 19
    cfg = config("witt-demo", "--profile", str(prof))
    assert (cfg.prec, cfg.seed, cfg.samples, cfg.fil_depth, cfg.tau) == (9, 5, 4, 3, 5)
    cfg = config("witt-demo", "--profile", str(prof), env={"PADICPERIODS_SEED": "7", "PADICPERIODS_PREC": "8"})
    assert (cfg.prec, cfg.seed, cfg.samples) == (8, 7, 4)
    cfg = config("witt-demo", "--profile", str(prof), "--seed", "11", env={"PADICPERIODS_SEED": "7"})
    assert cfg.seed == 11


def test_profile_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    with pytest.raises(ConfigError):
        config("witt-demo", "--profile", str(bad))
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        config("witt-demo", "--profile", str(bad))
    with pytest.raises(ConfigError):
        config("witt-demo", env={"PADICPERIODS_PREC": "six"})


def test_character_list_parsing():
    assert config("duality-check").characters == ("trivial", "omega", "char(2,1)", "char(3,g)")
    cfg = config("euler-table", "--characters", "char(1/3,g^-1),ext(char(2,1);phi)")
    assert cfg.characters == ("char(1/3,g^-1)", "ext(char(2,1);phi)")


def test_schedule_and_echo():
    cfg = config("cohomology", "--window", "16", "--window-max", "100")
    assert cfg.schedule == (16, 32, 64)
    echo = cfg.echo()
    assert echo["schedule"] == [16, 32, 64] and echo["tau"] == 10


def test_out_file(capsys, tmp_path):
    target = tmp_path / "rows.json"
    code = main(["period-check", "--json", "--out", str(target)])
    assert code == EXIT_PASS and capsys.readouterr().out == ""
    assert json.loads(target.read_text())["config"]["command"] == "period-check"
