import csv
import io
import json

import pytest

from penaltylab.cli import main
from penaltylab.corpus import corpus_text
from penaltylab.report import COLUMNS


@pytest.fixture()
def corpus_file(tmp_path):
    def write(name):
        path = tmp_path / f"{name}.problem"
        path.write_text(corpus_text(name))
        return str(path)
    return write


def test_certify_csv_schema(corpus_file, tmp_path, capsys):
    out = tmp_path / "report.csv"
    rc = main(["certify", "--problem", corpus_file("ex4iii"),
               "--penalty", "plain(1.5)", "--out", str(out)])
    assert rc == 0
    assert "CertifiedExactOnDomain" in capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0].keys()) == COLUMNS["certify"]
    assert rows[0]["status"] == "CertifiedExactOnDomain"
    assert abs(float(rows[0]["penalized_inf"])) <= 1e-6
    assert rows[0]["c"] == "1.5"


def test_certify_json_format(corpus_file, tmp_path):
    out = tmp_path / "report.json"
    rc = main(["certify", "--problem", corpus_file("ex4i"),
               "--penalty", "plain(10)", "--format", "json", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["command"] == "certify"
    assert doc["rows"][0]["status"] == "UnboundedPenalized"


def test_cstar_cli(corpus_file, capsys):
    rc = main(["cstar", "--problem", corpus_file("ex4iii")])
    assert rc == 0
    assert "finite" in capsys.readouterr().out


def test_mfcq_cli(corpus_file, capsys):
    rc = main(["mfcq", "--problem", corpus_file("ex4iv"), "--at", "0 0"])
    assert rc == 0
    assert "holds True" in capsys.readouterr().out


def test_nu_cli(corpus_file, capsys):
    rc = main(["nu", "--problem", corpus_file("ex4iii"), "--at", "1 0"])
    assert rc == 0
    assert "nu_hat" in capsys.readouterr().out


def test_corpus_empty_filter_match_passes(capsys):
    rc = main(["corpus", "--filter", "nosuchproblem*"])
    assert rc == 0
    assert "0/0" in capsys.readouterr().out


def test_missing_problem_file_is_usage_error(capsys):
    rc = main(["certify", "--problem", "/no/such/file", "--penalty", "plain(1)"])
    assert rc == 2


def test_malformed_problem_file_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.problem"
    bad.write_text("name = bad\nn = 1\nobjective = x0 +\nresidual = abs(x0)\n"
                   "box.lo = -1\nbox.hi = 1\n")
    rc = main(["certify", "--problem", str(bad), "--penalty", "plain(1)"])
    assert rc == 2


def test_bad_penalty_spec_is_usage_error(corpus_file):
    rc = main(["certify", "--problem", corpus_file("ex4iii"),
               "--penalty", "plain(-1)"])
    assert rc == 2


def test_plotdata_c_sweep(corpus_file, tmp_path):
    out = tmp_path / "sweep.dat"
    rc = main(["plotdata", "--problem", corpus_file("ex4iii"),
               "--kind", "c-sweep", "--penalty", "plain(1)",
               "--c-values", "0.5,1.5,4", "--out", str(out)])
    assert rc == 0
    rows = [l.split() for l in out.read_text().splitlines() if not l.startswith("#")]
    gaps = {float(c): float(g) for c, g in rows}
    assert gaps[0.5] > 0.1
    assert abs(gaps[1.5]) <= 1e-6
    assert abs(gaps[4.0]) <= 1e-6


def test_plotdata_envelope_slope(corpus_file, tmp_path):
    out = tmp_path / "env.dat"
    rc = main(["plotdata", "--problem", corpus_file("vd41"),
               "--kind", "loglog-envelope", "--out", str(out)])
    assert rc == 0
    pts = [tuple(map(float, l.split())) for l in out.read_text().splitlines()
           if not l.startswith("#")]
    small = [(a, b) for a, b in pts if a <= -1.0]
    slope = (small[-1][1] - small[0][1]) / (small[-1][0] - small[0][0])
    assert abs(slope - 0.5) <= 0.1


def test_plotdata_calmness_jump(corpus_file, tmp_path):
    out = tmp_path / "calm.dat"
    rc = main(["plotdata", "--problem", corpus_file("ex4ii"),
               "--kind", "calmness", "--starts", "8", "--out", str(out)])
    assert rc == 0
    pts = [tuple(map(float, l.split())) for l in out.read_text().splitlines()
           if not l.startswith("#")]
    v_at = {}
    for nrm, v in pts:
        v_at.setdefault(nrm, []).append(v)
    assert all(abs(v - 1.0) <= 1e-9 for v in v_at[0.0])
    assert all(v <= 0.1 for v in v_at[1.0])


def test_envelope_cli(corpus_file, tmp_path, capsys):
    out = tmp_path / "env.csv"
    rc = main(["envelope", "--problem", corpus_file("vd41"), "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert 0.4 <= float(rows[0]["alpha_hat"]) <= 0.6
    assert rows[0]["single_exponent_feasible"] == "false"


def test_sequences_cli(corpus_file, capsys):
    rc = main(["sequences", "--problem", corpus_file("vd42i")])
    assert rc == 0
    text = capsys.readouterr().out
    assert "first-kind witness True" in text
    assert "second-kind witness True" in text


def test_distcond_cli(corpus_file, capsys):
    rc = main(["distcond", "--problem", corpus_file("vd42i")])
    assert rc == 0
    assert "holds on domain: False" in capsys.readouterr().out


def test_kinf_cli(corpus_file, capsys):
    rc = main(["kinf", "--problem", corpus_file("ex4ii")])
    assert rc == 0
    assert "ViolatedWithWitness" in capsys.readouterr().out


def test_corpus_cli_subset(capsys):
    rc = main(["corpus", "--filter", "ex3resid"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_stable_reports_are_byte_identical(corpus_file, tmp_path):
    f = corpus_file("ex4iii")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["certify", "--problem", f, "--penalty", "plain(1.5)",
                 "--seed", "5", "--stable", "--out", str(a)]) == 0
    assert main(["certify", "--problem", f, "--penalty", "plain(1.5)",
                 "--seed", "5", "--stable", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
