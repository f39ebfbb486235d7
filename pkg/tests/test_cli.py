import json

import pytest

from spectra.cli import main, parse_config, run
from spectra.errors import InputError
from spectra.oracles import load_fixtures


def _run(tmp_path, text, command, name="cfg.ini"):
    cfg = tmp_path / name
    cfg.write_text(text)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out)]), out


def test_bands_without_potential():
    cfg = parse_config("[run]\ncommand = bands\n[potential]\n")
    assert cfg.command == "bands" and cfg.potential is None
    assert cfg.model.b == 1.0


def test_unsorted_lambdas():
    with pytest.raises(InputError, match="lambda.values"):
        parse_config("[run]\ncommand = bands\n[lambda]\nvalues = 1e-3 1e-2\n")
    with pytest.raises(InputError, match="lambda.values"):
        parse_config("[run]\ncommand = bands\n[lambda]\nvalues = 1e-2 1e-2\n")


def test_rectangle_left_of_boundary():
    text = "[run]\ncommand = dirichlet-count\n[potential]\nkind = rectangle_indicator\nc = 1\nx0 = -0.5\nx1 = 1\ny0 = 0\ny1 = 1\n[lambda]\nvalues = 1e-2\n"
    with pytest.raises(InputError, match="potential"):
        parse_config(text)


def test_strict_keys_and_line_numbers():
    with pytest.raises(InputError, match="unknown key"):
        parse_config("[model]\nb = 1\nbee = 2\n", command="bands")
    with pytest.raises(InputError, match="unknown section"):
        parse_config("[modle]\nb = 1\n", command="bands")
    with pytest.raises(InputError, match="line 3"):
        parse_config("[model]\nb = 1\nthis line is broken\n", command="bands")
    with pytest.raises(InputError, match="line 1"):
        parse_config("b = 1\n", command="bands")
    with pytest.raises(InputError, match="model.b"):
        parse_config("[model]\nb = -1\n", command="bands")
    with pytest.raises(InputError, match="run.command"):
        parse_config("[run]\ncommand = bands\n", command="degennes")


def test_degennes_record(tmp_path, capsys):
    code, out = _run(tmp_path, "[run]\ncommand = degennes\n[model]\nb = 1\n", "degennes")
    assert code == 0
    printed = capsys.readouterr().out
    for key in ("k_star", "energy", "mu"):
        assert key in printed
    rec = json.loads((out / "degennes.json").read_text())
    ref = load_fixtures()["degennes_b1"]
    assert rec["energy"] == pytest.approx(ref["energy"], abs=1e-7)
    assert rec["k_star"] == pytest.approx(ref["k_star"], abs=1e-4)
    assert rec["mu"] == pytest.approx(ref["mu"], rel=1e-3)


DIRICHLET = """[run]
command = dirichlet-count
[model]
b = 1
[potential]
kind = rectangle_indicator
c = 1
x0 = 1
x1 = 2
y0 = -1
y1 = 1
[lambda]
values = 1e-2 1e-3
[geometry]
omega_minus = 1,-1; 2,-1; 2,1; 1,1
omega_plus = 1,-1; 2,-1; 2,1; 1,1
"""


def test_dirichlet_count_deterministic(tmp_path, capsys):
    code1, out = _run(tmp_path, DIRICHLET, "dirichlet-count")
    first = (out / "dirichlet_counts.csv").read_bytes()
    code2, _ = _run(tmp_path, DIRICHLET, "dirichlet-count")
    assert code1 == code2 == 0
    assert (out / "dirichlet_counts.csv").read_bytes() == first
    assert first.decode().splitlines()[0] == "lambda,count,lower_envelope,upper_envelope"
    assert capsys.readouterr().out.count("lambda = ") == 4


def test_neumann_count_artifacts(tmp_path):
    text = "[run]\ncommand = neumann-count\n[potential]\nkind = power_tail\nA = 1\nalpha = 2\nx0 = 0\nx1 = 16\n[lambda]\nvalues = 1e-2 1e-4\n[neumann]\ny_window = 100\nn_y = 2001\n"
    code, out = _run(tmp_path, text, "neumann-count")
    assert code == 0
    assert (out / "neumann_counts.csv").read_text().startswith("lambda,count,semiclassical")
    fit = json.loads((out / "tail_fit.json").read_text())
    assert fit["alpha"] == pytest.approx(2.0, abs=1e-2)


def test_sampled_potential_file(tmp_path):
    rows = ["x,-2,0,2"] + [f"{x},0.5,0.5,0.5" for x in range(0, 13)]
    (tmp_path / "v.csv").write_text("\n".join(rows) + "\n")
    text = "[run]\ncommand = bands\n[potential]\nkind = sampled\nfile = v.csv\n"
    cfg = parse_config(text, base=tmp_path)
    assert cfg.potential is not None and not cfg.potential.separable
    with pytest.raises(InputError, match="potential"):
        parse_config(text.replace("v.csv", "missing.csv"), base=tmp_path)


def test_exit_codes(tmp_path, capsys):
    assert main(["bands", "--config", str(tmp_path / "nope.ini")]) == 1
    code, _ = _run(tmp_path, "[run]\ncommand = dirichlet-count\n[lambda]\nvalues = 1e-2\n", "dirichlet-count")
    assert code == 1
    # a resolution the sinc count cannot certify is an input error with the needed size
    code, _ = _run(tmp_path, "[sinc-law]\nm = 200\nn_k = 10\n", "sinc-law")
    assert code == 1
    assert "input error" in capsys.readouterr().err


def test_gap_and_sinc_outputs(tmp_path):
    code, out = _run(tmp_path, "[gap-law]\nk_values = 2.5 3.5\n", "gap-law")
    assert code == 0
    lines = (out / "gap_law.csv").read_text().splitlines()
    assert lines[0] == "k,gap,asymptotic,ratio" and len(lines) == 3
    code, out = _run(tmp_path, "[sinc-law]\nm = 50\nn_k = 200\n", "sinc-law")
    assert code == 0
    assert (out / "sinc_law.csv").read_text().splitlines()[0] == "s,count,count_over_m,limit"


def test_selftest_reports_failures(monkeypatch):
    from spectra import acceptance

    def fake(echo):
        return [acceptance.Criterion(1, "ok", True, "", 0.0), acceptance.Criterion(2, "bad", False, "", 0.0)]

    monkeypatch.setattr(acceptance, "run_all", fake)
    lines = []
    assert run(parse_config("", command="selftest"), echo=lines.append) == 2
    assert "failed: [2]" in lines[-1]
    monkeypatch.setattr(acceptance, "run_all", lambda echo: fake(echo)[:1])
    assert run(parse_config("", command="selftest"), echo=lines.append) == 0
