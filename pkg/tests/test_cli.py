import json
import math
import time

import pytest

from bcfeedback import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_smoke_is_fast(capsys):
    t0 = time.perf_counter()
    code, out, _ = run(capsys, "--n-blocks", "10", "simulate", "fig1_r6")
    assert code == 0 and time.perf_counter() - t0 < 5
    lines = out.strip().splitlines()
    assert lines[0].startswith("rho_db,s,")
    assert len(lines) == 1 + 9 * 4


def test_simulate_writes_manifest(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "fig1_r12", "--n-blocks", "5", "--seed", "4", "--out", str(tmp_path))
    assert code == 0
    man = json.loads((tmp_path / "fig1_r12.manifest.json").read_text())
    assert man["subcommand"] == "simulate" and man["seed"] == 4
    assert man["config"]["rates"] == [12] * 4 and man["config"]["n_blocks"] == 5
    assert (tmp_path / "fig1_r12.csv").exists()


def test_manifest_reproduces_run(tmp_path, capsys):
    run(capsys, "simulate", "fig1_r6", "--n-blocks", "6", "--seed", "9", "--out", str(tmp_path / "a"))
    run(capsys, "simulate", "fig1_r6", "--n-blocks", "6", "--seed", "9", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "fig1_r6.csv").read_text() == (tmp_path / "b" / "fig1_r6.csv").read_text()


def test_select_reference_points(capsys):
    code, out, _ = run(capsys, "select", "fig1_r6", "--rho-db", "20")
    assert code == 0 and "# s_star=1 " in out
    code, out, _ = run(capsys, "select", "fig1_r12", "--rho-db", "15")
    assert "# s_star=3 " in out


def _ini(tmp_path, body):
    p = tmp_path / "c.ini"
    p.write_text(body)
    return str(p)


def test_select_heterogeneous_lists_strong_users_first(tmp_path, capsys):
    cfg = _ini(tmp_path, "[system]\nL = 4\nm = 4\nrate_bits = 8\nrho_db = 10\ngamma = 0.1\n"
                         "[users]\n1.gamma = 10\n3.gamma = 10\n")
    code, out, _ = run(capsys, "select", cfg)
    assert code == 0
    assert out.splitlines()[2].endswith(",1 3")


def test_select_all_zero_warns(tmp_path, capsys):
    cfg = _ini(tmp_path, "[system]\nL = 4\nrate_bits = 6\nrho_db = 10\ngamma = 0\n")
    code, out, err = run(capsys, "select", cfg)
    assert code == 0 and "zero" in err
    assert "# s_star=" in out


@pytest.mark.parametrize("body", [
    "[sweep]\nn_blocks = 3\n",
    "[system]\nL = four\nrate_bits = 6\n",
    "[system]\nL = 4\nrate_bits = 6\n[users]\n9.gamma = 1\n",
    "[system]\nL = 4\nrate_bits = 6\n[sweep]\nrho_db = 0:10:0\n",
    "[system]\nL = 4\nrate_bits = 6\n[sweep]\ncodebook_policy = lattice\n",
])
def test_bad_configs_exit_2(tmp_path, capsys, body):
    code, _, err = run(capsys, "simulate", _ini(tmp_path, body))
    assert code == 2 and "error" in err


def test_rate_guard_exit_2(tmp_path, capsys):
    cfg = _ini(tmp_path, "[system]\nL = 4\nrate_bits = 30\nrho_db = 10\n")
    assert run(capsys, "simulate", cfg, "--n-blocks", "2")[0] == 2
    assert run(capsys, "simulate", cfg, "--n-blocks", "2", "--policy", "implicit")[0] == 0


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "simulate")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "simulate", "no_such_config")[0] == 2
    assert run(capsys, "--n-blocks", "0", "verify", "lemma10")[0] == 2


def test_asymptotics_two_atom(tmp_path, capsys):
    p = tmp_path / "two.txt"
    p.write_text("mbar 2\n1 0.5\n2 0.5\n")
    code, out, _ = run(capsys, "asymptotics", str(p), "--grid-points", "5", "--raw")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines()[1:6]]
    assert float(rows[0][1]) == 0.0 and float(rows[-1][1]) == 0.0
    assert float(rows[2][1]) == pytest.approx(0.5 * math.log2(3), abs=1e-12)


def test_asymptotics_single_atom_curve(tmp_path, capsys):
    p = tmp_path / "one.txt"
    p.write_text("mbar 1\n1 1\n")
    code, out, _ = run(capsys, "asymptotics", str(p), "--grid-points", "11", "--raw")
    for line in out.splitlines()[2:-2]:
        s, v = map(float, line.split(","))
        assert v == pytest.approx(s * math.log2(1 + (1 - s) / s), rel=1e-12)
    assert "sbar_star=0.3678" in out


def test_asymptotics_bad_file(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("1 1\n")
    assert run(capsys, "asymptotics", str(p))[0] == 2


def test_verify_suites(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "lemma10", "--out", str(tmp_path))
    assert code == 0 and out.startswith("PASS")
    assert (tmp_path / "verify_lemma10.manifest.json").exists()
    assert run(capsys, "verify", "bogus")[0] == 2


def test_verify_failure_exit_3(capsys, monkeypatch):
    from bcfeedback import verify

    monkeypatch.setitem(verify.SUITES, "lemma10",
                        (lambda n, s: [verify.Check("forced", 1.0, "< 0", False)], 0))
    code, out, _ = run(capsys, "verify", "lemma10")
    assert code == 3 and out.startswith("FAIL")


def test_numeric_failure_exit_3(tmp_path, capsys, monkeypatch):
    from bcfeedback import asymptotics

    def boom(*a, **k):
        raise asymptotics.NonUnimodalError([], [], 2)

    monkeypatch.setattr(asymptotics, "optimal_sbar", boom)
    p = tmp_path / "one.txt"
    p.write_text("mbar 1\n1 1\n")
    assert run(capsys, "asymptotics", str(p))[0] == 3
