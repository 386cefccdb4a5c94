import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import dataset, oracle_records
from uqlab.cli import main
from uqlab.predstore import SHIFTED, save
from uqlab.preproc import Image, write_image

SVG_NS = "{http://www.w3.org/2000/svg}"


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(0)
    in_rows = [(f"i{k}", int(c >= 2), rng.random(3).tolist(), int(c)) for k, c in enumerate(rng.integers(0, 5, 30))]
    sh_rows = [(f"s{k}", int(k % 5 >= 2), rng.random(3).tolist(), k % 5, SHIFTED) for k in range(12)]
    paths = {
        "in": save(dataset(in_rows), tmp_path / "in.jsonl"),
        "shifted": save(dataset(sh_rows), tmp_path / "shifted.csv"),
        "oracle": save(oracle_records(), tmp_path / "oracle.jsonl"),
        "pair": save(dataset([("a", 1, [0.2, 0.8])]), tmp_path / "pair.jsonl"),
        "single": save(dataset([("a", 1, [0.6]), ("b", 1, [0.9])]), tmp_path / "single.jsonl"),
    }
    (tmp_path / "empty.jsonl").write_text("")
    paths["empty"] = tmp_path / "empty.jsonl"
    return paths


def test_decompose_bits_and_nats(tmp_path, files):
    assert run("decompose", "--in", files["pair"], "--out", tmp_path / "b", "--unit", "bits") == 0
    (r,) = rows(tmp_path / "b" / "uncertainty.csv")
    assert float(r["total"]) == 1.0
    assert run("decompose", "--in", files["pair"], "--out", tmp_path / "n") == 0
    (r,) = rows(tmp_path / "n" / "uncertainty.csv")
    assert r["total"] == "0.693147" and r["aleatoric"] == "0.500402" and r["epistemic"] == "0.192745"


def test_empty_input_fails_with_json_error(tmp_path, files, capsys):
    assert run("decompose", "--in", files["empty"], "--out", tmp_path / "x") != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    payload = json.loads(err[0])
    assert "empty.jsonl" in payload["message"]
    assert not (tmp_path / "x").exists()


def test_missing_file_fails(tmp_path, capsys):
    assert run("metrics", "--in", tmp_path / "nope.jsonl", "--out", tmp_path / "x") != 0
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_refer_oracle_fixture(tmp_path, files):
    out = tmp_path / "r"
    assert run("refer", "--in", files["oracle"], "--out", out, "--metric", "accuracy") == 0
    curve = rows(out / "referral_total.csv")
    assert len(curve) == 5
    assert list(curve[0]) == ["tau", "retained", "metric", "defined"]
    assert [r["metric"] for r in curve] == ["0.75", "1", "1", "1", "nan"]
    (area,) = rows(out / "referral_area.csv")
    assert float(area["area"]) == 0.9375
    svg = ET.parse(out / "referral.svg").getroot()
    assert len(svg.findall(f"{SVG_NS}polyline")) == 1
    labels = " ".join(t.text or "" for t in svg.iter(f"{SVG_NS}text"))
    assert "accuracy" in labels and "τ" in labels


def test_refer_multiple_kinds_one_polyline_each(tmp_path, files):
    out = tmp_path / "r"
    assert run("refer", "--in", files["in"], "--out", out, "--uncertainty", "total,aleatoric,epistemic") == 0
    svg = ET.parse(out / "referral.svg").getroot()
    assert len(svg.findall(f"{SVG_NS}polyline")) == 3
    assert len(rows(out / "referral_area.csv")) == 3


def test_refer_single_class_auroc_warns(tmp_path, files, capsys):
    assert run("refer", "--in", files["single"], "--out", tmp_path / "r", "--metric", "auroc") == 0
    assert all(r["defined"] == "false" for r in rows(tmp_path / "r" / "referral_total.csv"))
    assert "warning" in json.loads(capsys.readouterr().err.strip().splitlines()[0])


def test_bad_uncertainty_kind(tmp_path, files, capsys):
    assert run("refer", "--in", files["in"], "--out", tmp_path / "r", "--uncertainty", "total,vibes") != 0
    assert json.loads(capsys.readouterr().err)["error"] == "CliError"


def test_report(tmp_path, files):
    out = tmp_path / "rep"
    assert run("report", "--in", files["in"], "--shifted", files["shifted"], "--out", out) == 0
    table = rows(out / "report.csv")
    assert [r["metric"] for r in table] == ["nll", "accuracy", "auprc", "auroc", "ece", "meets_operating_point"]
    assert table[-1]["joint"] in ("true", "false")
    assert run("report", "--in", files["in"], "--shifted", files["in"], "--out", tmp_path / "same") == 0
    for r in rows(tmp_path / "same" / "report.csv"):
        assert r["in_domain"] == r["shifted"] == r["joint"]


def test_report_joint_is_concatenation(tmp_path, files):
    from uqlab.metrics import evaluate_all
    from uqlab.predstore import load

    assert run("report", "--in", files["in"], "--shifted", files["shifted"], "--out", tmp_path / "rep") == 0
    joint = list(load(files["in"])) + list(load(files["shifted"]))
    expected = evaluate_all(joint)
    for r in rows(tmp_path / "rep" / "report.csv")[:5]:
        assert float(r["joint"]) == pytest.approx(expected[r["metric"]].value, rel=1e-5)


def test_metrics_ood_hist_balance_rebalance(tmp_path, files):
    assert run("metrics", "--in", files["in"], "--out", tmp_path / "m", "--bins", 10) == 0
    assert [r["metric"] for r in rows(tmp_path / "m" / "metrics.csv")] == ["nll", "accuracy", "auprc", "auroc", "ece"]
    assert run("ood", "--in", files["in"], "--shifted", files["shifted"], "--out", tmp_path / "o") == 0
    assert [r["metric"] for r in rows(tmp_path / "o" / "ood.csv")] == ["auroc", "auprc"]
    assert run("hist", "--in", files["in"], "--out", tmp_path / "h", "--bins", 4) == 0
    h = rows(tmp_path / "h" / "histograms.csv")
    assert list(h[0]) == ["label", "bin_lo", "bin_hi", "correct_density", "incorrect_density"]
    assert float(h[3]["bin_hi"]) == pytest.approx(math.log(2), abs=1e-6)
    assert run("balance-joint", "--in", files["in"], "--shifted", files["shifted"], "--out", tmp_path / "j",
               "--seed", 3) == 0
    assert len((tmp_path / "j" / "joint.jsonl").read_text().splitlines()) == 60
    assert run("rebalance", "--in", files["shifted"], "--reference", files["in"], "--out", tmp_path / "rb",
               "--n", 50) == 0
    assert len((tmp_path / "rb" / "rebalanced.jsonl").read_text().splitlines()) == 50


def test_manifest_contents(tmp_path, files):
    out = tmp_path / "j"
    assert run("balance-joint", "--in", files["in"], "--shifted", files["shifted"], "--out", out, "--seed", 7) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "balance-joint"
    assert man["seeds"] == [7]
    assert set(man["input_hashes"]) == {str(files["in"]), str(files["shifted"])}
    assert all(len(h) == 64 for h in man["input_hashes"].values())
    assert {"arguments", "version", "timestamp"} <= set(man)
    assert sorted(p.name for p in out.iterdir()) == ["joint.jsonl", "manifest.json"]


def test_toy_small(tmp_path, monkeypatch):
    monkeypatch.setenv("UQLAB_THREADS", "2")
    out = tmp_path / "t"
    assert run("toy", "--method", "map", "--seeds", 2, "-K", 3, "-S", 5, "--steps", 20, "--out", out) == 0
    first = (out / "predictions_seed0_shifted.jsonl").read_text().splitlines()[0]
    rec = json.loads(first)
    assert len(rec["samples"]) == 15
    trace = rows(out / "trace.csv")
    assert list(trace[0]) == ["seed", "member", "step", "loss", "kl_weight", "elbo"]
    assert len(trace) == 2 * 3 * 20
    ET.parse(out / "referral.svg")


def test_bad_thread_cap(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("UQLAB_THREADS", "zero")
    assert run("toy", "--seeds", 1, "--steps", 1, "--out", tmp_path / "t") != 0
    assert "UQLAB_THREADS" in json.loads(capsys.readouterr().err)["message"]


def test_preproc_command(tmp_path):
    src = tmp_path / "imgs"
    src.mkdir()
    yy, xx = np.mgrid[0:64, 0:64] + 0.5
    d = ((yy - 32) ** 2 + (xx - 32) ** 2 <= 20**2) * 150.0
    write_image(Image(d), src / "a.pgm")
    write_image(Image(np.stack([d, d / 2, d / 3], axis=-1)), src / "b.ppm")
    (src / "notes.txt").write_text("ignored")
    out = tmp_path / "p"
    assert run("preproc", "--in", src, "--out", out, "--target-radius", 20, "--blur-constant", 5, "--clip", 0.9) == 0
    table = rows(out / "preproc.csv")
    assert [r["file"] for r in table] == ["a.pgm", "b.ppm"]
    assert table[0]["radius_in"] == "20"
    assert (out / "b.ppm").read_bytes()[:2] == b"P6"
    man = json.loads((out / "manifest.json").read_text())
    assert len(man["input_hashes"]) == 2


def test_csv_six_significant_digits(tmp_path, files):
    assert run("decompose", "--in", files["in"], "--out", tmp_path / "d") == 0
    for r in rows(tmp_path / "d" / "uncertainty.csv"):
        for k in ("total", "aleatoric", "epistemic"):
            digits = r[k].lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(digits) <= 6
