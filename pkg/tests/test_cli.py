import filecmp

from conftest import SEQ_ARM, SEQ_X86
from persistprobe.cli import main, read_assignment


def test_profiles(capsys):
    assert main(["profiles"]) == 0
    out = capsys.readouterr().out
    assert "[arm-nopop]" in out and "reorder_window=8" in out


def test_run_exit_codes(tmp_path, capsys):
    assert main(["run", "--test", SEQ_ARM, "--profile", "arm-pop"]) == 0
    assert "verdict=held" in capsys.readouterr().out
    assert main(["run", "--test", SEQ_ARM, "--profile", "arm-nopop", "--out",
                 str(tmp_path / "r")]) == 2
    assert main(["run", "--test", str(tmp_path / "missing.litmus")]) == 1
    assert main(["run", "--test", SEQ_ARM, "--profile", "x86-wpq"]) == 1
    assert main(["run", "--test", SEQ_ARM, "--profile", "nope"]) == 1
    assert main(["run", "--test", SEQ_ARM, "--depth", "2"]) == 1


def test_run_twice_identical(tmp_path):
    args = ["run", "--test", SEQ_X86, "--profile", "x86-wpq", "--seed", "4", "--mapping-seed", "2"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and len(cmp.same_files) == 5


def test_analyze_matches_run(tmp_path, capsys):
    out = tmp_path / "r"
    main(["run", "--test", SEQ_ARM, "--out", str(out)])
    run_kv = dict(l.split("=", 1) for l in capsys.readouterr().out.splitlines())
    code = main(["analyze", "--log", str(out / "body.csv"), "--assignment",
                 str(out / "report.kv"), "--test", SEQ_ARM])
    got = capsys.readouterr().out.splitlines()
    kv = dict(l.split("=", 1) for l in got if not l.startswith("anomaly="))
    assert code == 2
    for key in ("reorderings", "deviation_pct", "violating_iterations", "signed_dev.x"):
        assert kv[key] == run_kv[key]
    assert sum(l.startswith("anomaly=") for l in got) == int(kv["reorderings"])


def test_assignment_file_formats(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("# hand written\nx=1,2,3,4\ny = 0,0,0,1\n")
    a = read_assignment(p)
    assert a["x"].row == 3 and a["y"].column == 1
    p.write_text("x=9,0,0,0\n")
    assert main(["analyze", "--log", str(p), "--assignment", str(p), "--test", SEQ_ARM]) == 1


def test_campaign_command(tmp_path, capsys):
    spec = tmp_path / "s.spec"
    spec.write_text(f"test = {SEQ_ARM}\nsweep = sleep_ns\nvalues = 0, 1\nrepetitions = 1\n")
    assert main(["campaign", "--spec", str(spec), "--out", str(tmp_path / "c")]) == 0
    assert "sleep_ns sweep" in capsys.readouterr().out
    assert (tmp_path / "c" / "campaign.csv").exists()
