import csv
import json

import pytest

from sparsesd.cli import UsageError, main, parse_grid, read_instance


@pytest.fixture(autouse=True)
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SPARSESD_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.chdir(tmp_path)
    return tmp_path / "out"


def load(path):
    with open(path) as fh:
        return json.load(fh)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_grid():
    assert parse_grid("0:25:5") == [0, 5, 10, 15, 20, 25]
    assert parse_grid("1,2,4", int) == [1, 2, 4]
    assert parse_grid("3") == [3.0]
    assert parse_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]
    for bad in ("1:2", "5:0:1", "a,b", "0:1:0"):
        with pytest.raises(UsageError):
            parse_grid(bad)


def test_decode_generated_noiseless(out_dir):
    assert main(["decode", "--m", "8", "--l", "3", "--alphabet", "ternary", "--seed", "4"]) == 0
    doc = load(out_dir / "decode.json")
    assert doc["x_hat"] == doc["x_true"]
    assert doc["mode"] == "fp_growing"
    assert (out_dir / "decode.manifest.json").exists()


def test_safe_mode_output_matches_plain(tmp_path):
    common = ["--m", "10", "--l", "3", "--snr", "5", "--seed", "2"]
    assert main(["decode", *common, "--decoder", "sparse_lb", "--safe-mode", "--out", "a"]) == 0
    assert main(["decode", *common, "--decoder", "sparse", "--out", "b"]) == 0
    a, b = load(tmp_path / "a/decode.json"), load(tmp_path / "b/decode.json")
    assert a["x_hat"] == b["x_hat"] and a["residual2"] == b["residual2"]


def test_decode_instance_file(tmp_path, out_dir):
    (tmp_path / "inst.txt").write_text("3 2\n1 0\n0 1\n0 0\n0.9 0.8 0\nbinary01 1 0.1\n")
    assert main(["decode", "--input", "inst.txt", "--decoder", "brute"]) == 0
    doc = load(out_dir / "decode.json")
    assert doc["x_hat"] == [1, 0]
    assert doc["residual2"] == pytest.approx(0.65)


@pytest.mark.parametrize("text, field", [
    ("3 x\n", "'n m'"),
    ("2 2\n1 0\n0 1 5\n1 1\nbinary01 1 0\n", "'H' row 2"),
    ("2 2\n1 0\n0 1\n1 q\nbinary01 1 0\n", "'y'"),
    ("2 2\n1 0\n0 1\n1\nbinary01 1 0\n", "'y'"),
    ("2 2\n1 0\n0 1\n1 1\nquinary 1 0\n", "'alphabet'"),
    ("2 2\n1 0\n0 1\n1 1\nbinary01 one 0\n", "'l'"),
    ("2 2\n1 0\n0 1\n1 1\nbinary01 1 zero\n", "'sigma2'"),
    ("2 2\n1 0\n0 1\n1 1\nbinary01 1\n", "'alphabet l sigma2'"),
])
def test_malformed_file_names_first_bad_field(tmp_path, capsys, text, field):
    (tmp_path / "bad.txt").write_text(text)
    assert main(["decode", "--input", "bad.txt"]) == 2
    assert field in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text('{"m": 4, "bogus": 1}')
    assert main(["decode", "--config", "cfg.json"]) == 2
    assert "bogus" in capsys.readouterr().err
    (tmp_path / "cfg.json").write_text("{not json")
    assert main(["decode", "--config", "cfg.json"]) == 2


def test_infeasible_dimensions_exit_code():
    assert main(["decode", "--m", "4", "--n", "3"]) == 2


def test_internal_error_exit_code(monkeypatch):
    import sparsesd.cli as cli

    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "decode_sparse", boom)
    assert main(["decode", "--m", "4", "--l", "1"]) == 1


def test_config_file_and_flag_override(tmp_path, out_dir):
    (tmp_path / "cfg.json").write_text(json.dumps({"m": 5, "l": 1, "seed": 9}))
    assert main(["decode", "--config", "cfg.json", "--l", "2"]) == 0
    manifest = load(out_dir / "decode.manifest.json")
    assert manifest["config"]["m"] == 5 and manifest["config"]["l"] == 2
    assert manifest["seed"] == 9


def test_analyze_columns(out_dir):
    assert main(["analyze", "--m", "20", "--l", "5", "--snr", "0:20:5"]) == 0
    table = rows(out_dir / "analyze.csv")
    assert len(table) == 2 * 5 * 20
    for alphabet in ("binary01", "ternary"):
        exps = [float(r["e_c"]) for r in table if r["alphabet"] == alphabet and r["k"] == "1"]
        assert exps == sorted(exps, reverse=True)
    assert "e_c_unaware" in table[0]


def test_analyze_full_sparsity_matches_unaware(out_dir):
    assert main(["analyze", "--m", "6", "--l", "6", "--snr", "5", "--alphabet", "binary01"]) == 0
    for r in rows(out_dir / "analyze.csv"):
        assert float(r["e_nk"]) == pytest.approx(float(r["e_nk_unaware"]), rel=1e-12)


def test_analyze_infinite_radius(out_dir):
    from math import comb, log

    assert main(["analyze", "--m", "6", "--l", "2", "--snr", "10", "--alphabet", "binary01",
                 "--infinite-radius"]) == 0
    table = rows(out_dir / "analyze.csv")
    counts = [sum(comb(k, j) for j in range(3)) for k in range(1, 7)]
    cost = sum((2 * k + 11) * c for k, c in enumerate(counts, 1))
    for r, c in zip(table, counts):
        assert float(r["e_nk"]) == pytest.approx(c, rel=1e-9)
        assert float(r["e_c"]) == pytest.approx(log(cost) / log(6), rel=1e-9)


def test_simulate_compare_theory(out_dir, capsys):
    assert main(["simulate", "--m", "6", "--l", "2", "--snr", "10", "--trials", "100",
                 "--compare-theory", "--workers", "1"]) == 0
    theory = rows(out_dir / "theory.csv")
    assert len(theory) == 6
    assert {"analytic", "empirical", "stderr", "z", "pass"} <= set(theory[0])
    assert "theory check" in capsys.readouterr().out


def test_channel_grid(out_dir):
    assert main(["channel", "--snr", "0:25:5", "--trials", "2", "--workers", "1"]) == 0
    table = rows(out_dir / "channel.csv")
    for method in ("oracle", "sparse_sd", "classical_sd", "omp"):
        assert len([r for r in table if r["method"] == method]) == 6


def test_manifest_rerun_is_byte_identical(tmp_path):
    args = ["simulate", "--m", "5", "--l", "1,2", "--snr", "0,10", "--trials", "10",
            "--decoders", "sparse,omp", "--workers", "1"]
    assert main([*args, "--out", "run1"]) == 0
    assert main(["simulate", "--config", "run1/simulate.manifest.json", "--out", "run2",
                 "--workers", "2"]) == 0
    assert (tmp_path / "run1/simulate.csv").read_bytes() == \
        (tmp_path / "run2/simulate.csv").read_bytes()


def test_floats_written_with_17_digits(out_dir):
    assert main(["analyze", "--m", "3", "--l", "1", "--snr", "7", "--alphabet", "ternary"]) == 0
    with open(out_dir / "analyze.csv") as fh:
        fh.readline()
        d2 = fh.readline().split(",")[6]
    assert float(d2) == float(f"{float(d2):.17g}")
    assert len(d2.replace(".", "").lstrip("0")) >= 15


def test_read_instance_roundtrip(tmp_path):
    (tmp_path / "i.txt").write_text("# comment\n2 1\n1.5\n-2e-1\n0.25 0.5\nternary 1 0.01\n")
    inst = read_instance(tmp_path / "i.txt")
    assert inst.h.tolist() == [[1.5], [-0.2]]
    assert inst.y.tolist() == [0.25, 0.5]
    assert inst.alphabet.name == "ternary" and inst.sigma2 == 0.01
