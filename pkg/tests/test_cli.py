import json

import pytest

from tamelab.cli import main


def test_run_liealg(tmp_path):
    out = tmp_path / "o"
    code = main(["run", "--instance", "liealg-su2", "--perturb", "0.05", "--seed", "1", "--out", str(out)])
    assert code == 0
    ledger = (out / "ledger.csv").read_text()
    assert ledger.splitlines()[0].startswith("nu,")
    final_residual = float(ledger.strip().splitlines()[-1].split(",")[11])
    assert final_residual <= 1e-10
    g = json.loads((out / "symmetry.json").read_text())["g"]
    assert len(g) == 3


def test_run_darboux_zero_amp_trivial(tmp_path):
    out = tmp_path / "o"
    code = main(["run", "--instance", "darboux", "--amp", "0.0", "--grid", "65", "--out", str(out)])
    assert code == 0
    assert (out / "map.json").exists()


def test_run_malformed_config_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--instance", "nonsense"])
    assert exc.value.code == 2


def test_check_unknown_suite_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["check", "bogus"])
    assert exc.value.code == 2


def test_check_empty_corpus_exits_2(tmp_path):
    code = main(["check", "smoothing", "--corpus", "0", "--out", str(tmp_path)])
    assert code == 2


def test_check_lemma_a(tmp_path):
    assert main(["check", "lemmaA", "--out", str(tmp_path)]) == 0
    table = (tmp_path / "lemma_a_ratios.csv").read_text()
    assert table.splitlines()[0] == "eps,ratio"


def test_check_determinism_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["check", "smoothing", "--corpus", "3", "--kmax", "1", "--t", "2,4", "--seed", "5", "--out", str(a)])
    main(["check", "smoothing", "--corpus", "3", "--kmax", "1", "--t", "2,4", "--seed", "5", "--out", str(b)])
    assert (a / "smoothing_ratios.csv").read_bytes() == (b / "smoothing_ratios.csv").read_bytes()


def test_classify_elliptic_and_degenerate(tmp_path):
    from tamelab.poly import Polynomial
    from tamelab.symplectic import PolyIntegrableSystem
    from tamelab.williamson import WilliamsonType, normal_model

    f = tmp_path / "ell.json"
    f.write_text(normal_model(WilliamsonType(1, 0, 0)).to_json())
    assert main(["classify", str(f)]) == 0

    x = Polynomial.variable(0, 2)
    g = tmp_path / "cubic.json"
    g.write_text(PolyIntegrableSystem(1, (x**3,)).to_json())
    assert main(["classify", str(g)]) == 1

    assert main(["classify", str(tmp_path / "missing.json")]) == 2


def test_sweep_over_t0(tmp_path):
    out = tmp_path / "sw"
    code = main([
        "sweep", "--instance", "liealg-su2", "--vary", "t0=2.7,3.5",
        "--perturb", "0.03", "--out", str(out),
    ])
    assert code == 0
    assert (out / "sweep.csv").exists()
    assert (out / "t0=2.7" / "ledger.csv").exists()


def test_run_with_json_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"perturb": 0.03, "seed": 2, "tol": 1e-9}))
    out = tmp_path / "o"
    code = main(["run", "--instance", "liealg-su2", "--config", str(cfg), "--out", str(out)])
    assert code == 0


def test_run_with_toml_config_file(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('perturb = 0.03\nseed = 3\n')
    out = tmp_path / "o"
    code = main(["run", "--instance", "liealg-su2", "--config", str(cfg), "--out", str(out)])
    assert code == 0


def test_run_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    with pytest.raises(SystemExit) as exc:
        main(["run", "--instance", "liealg-su2", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_sweep_p_override_reports_smallest_converging(tmp_path):
    out = tmp_path / "sw"
    code = main([
        "sweep", "--instance", "liealg-su2", "--vary", "p_override=1,2",
        "--perturb", "0.03", "--out", str(out),
    ])
    assert code == 0
