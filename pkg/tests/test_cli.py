import csv
import json

import numpy as np
import pytest

from mmgident import optimizer as opt
from mmgident.cli import EXIT_INPUT, EXIT_OK, EXIT_REJECTED, main, parse_budget, InputError
from mmgident.dataio import (DatasetManifest, ManifestEntry, read_manifest, read_parameters,
                             write_manifest, write_parameters, write_trajectory)
from mmgident.optimizer import LOG_COLUMNS


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "--out", str(out), "--seed", "0"]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def small_train(tmp_path_factory, short_set):
    root = tmp_path_factory.mktemp("train")
    total = sum(t.duration for t in short_set)
    entries = []
    for k, traj in enumerate(short_set):
        write_trajectory(root / f"s{k}.csv", traj)
        entries.append(ManifestEntry(f"s{k}.csv", "train", traj.label,
                                     round(traj.duration / total, 6)))
    write_manifest(root / "train.json", DatasetManifest("small", entries))
    return root / "train.json"


@pytest.fixture(scope="module")
def identified(tmp_path_factory, generated, small_train):
    out = tmp_path_factory.mktemp("ident")
    code = main(["identify", "--train", str(small_train), "--ref", str(generated / "truth.json"),
                 "--trials", "2", "--budget", "120", "--seed", "4", "--tf", "50",
                 "--out", str(out)])
    assert code == EXIT_OK
    return out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# generate -----------------------------------------------------------------

@pytest.mark.parametrize("name, duration", [("Train-R", 2695), ("Train-TR", 2580),
                                            ("Train-TZR", 2660), ("Test", 1624)])
def test_generated_manifests(generated, name, duration):
    m = read_manifest(generated / f"{name}.json")
    trajs = m.load()
    assert abs(sum(t.duration for t in trajs) - duration) <= 1.0
    assert {e.role for e in m.entries} == {"test" if name == "Test" else "train"}


def test_generate_is_deterministic(generated, tmp_path):
    assert main(["generate", "--out", str(tmp_path), "--seed", "0"]) == EXIT_OK
    for f in sorted(generated.rglob("*.csv")):
        assert (tmp_path / f.relative_to(generated)).read_bytes() == f.read_bytes()
    assert read_parameters(tmp_path / "truth.json")[0].tolist() == \
        read_parameters(generated / "truth.json")[0].tolist()


def test_generate_with_noise(tmp_path, generated):
    out = tmp_path / "noisy"
    assert main(["generate", "--out", str(out), "--noise", "0.01", "0.01", "0", "0", "0", "0"]) == 0
    clean = read_manifest(generated / "Test.json").load()[0]
    noisy = read_manifest(out / "Test.json").load()[0]
    assert np.array_equal(noisy.states[:, 2:], clean.states[:, 2:])
    assert not np.array_equal(noisy.states[:, :2], clean.states[:, :2])


# identify -----------------------------------------------------------------

def test_identify_outputs(identified):
    summary = json.loads((identified / "summary.json").read_text())
    assert summary["seeds"] == [4, 5]
    assert summary["status"] == "ok"
    for t in summary["trials"]:
        log = read_csv(identified / f"trial_{t['trial']}" / "log.csv")
        assert tuple(log[0]) == LOG_COLUMNS
        assert t["J_best"] <= float(log[0]["J_best"])
        assert t["evaluations"] <= 120
    assert (identified / "best_params.json").exists()


def test_identify_all_rejected(monkeypatch, tmp_path, generated, small_train):
    def fake(objective, domain, settings):
        far = domain.hi + 20 * (domain.hi - domain.lo)
        return opt.OptimizationRun(settings, domain, [], far, 0.0, far, 1, 0, [20], ["max_evaluations"])
    monkeypatch.setattr(opt, "run_with_restarts", fake)
    code = main(["identify", "--train", str(small_train), "--ref", str(generated / "truth.json"),
                 "--trials", "1", "--out", str(tmp_path)])
    assert code == EXIT_REJECTED
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "all_rejected"
    assert not (tmp_path / "best_params.json").exists()


@pytest.mark.parametrize("text, expected", [("20000", (20000, None)), ("600s", (None, 600.0))])
def test_parse_budget(text, expected):
    assert parse_budget(text) == expected


@pytest.mark.parametrize("text", ["0", "-5s", "ten", "1.5"])
def test_parse_budget_rejects(text):
    with pytest.raises(InputError):
        parse_budget(text)


# evaluate -----------------------------------------------------------------

def test_evaluate_tables(tmp_path, generated, identified):
    truth = generated / "truth.json"
    out = tmp_path / "report"
    code = main(["evaluate", "--params", f"truth={truth}", f"fit={identified}",
                 "--baseline", f"ref={truth}", "--test", str(generated / "Test.json"),
                 "--train", str(generated / "Train-R.json"),
                 "--subsets", "R,Z,T,B-S,B-P", "--out", str(out)])
    assert code == EXIT_OK
    rows = read_csv(out.with_suffix(".csv"))
    table = {(r["objective"], r["case"], r["subset"]): r for r in rows}
    assert {r["case"] for r in rows} == {"truth", "fit", "ref"}
    subsets = ["R", "Z", "T", "B-S", "B-P"]
    for v in ("J1", "J2", "J3"):
        assert float(table[v, "truth", "Total"]["mean"]) < 1e-10
        assert table[v, "fit", "R"]["n_trials"] == "2"
        parts = sum(float(table[v, "fit", s]["mean"]) for s in subsets)
        assert float(table[v, "fit", "Total"]["mean"]) == pytest.approx(parts, rel=1e-9)
    for s in subsets + ["Total"]:
        j1, j2, j3 = (float(table[v, "fit", s]["mean"]) for v in ("J1", "J2", "J3"))
        assert j2 == pytest.approx(j1 + j3, rel=1e-9)
    md = out.with_suffix(".md").read_text()
    assert "### J3" in md and "| ref (n=1) |" in md


def test_evaluate_missing_subset(tmp_path, generated):
    truth = generated / "truth.json"
    code = main(["evaluate", "--params", f"a={truth}", "--baseline", str(truth),
                 "--test", str(generated / "Test.json"), "--subsets", "R,X",
                 "--out", str(tmp_path / "r")])
    assert code == EXIT_INPUT


def test_evaluate_bad_params_argument(tmp_path, generated):
    truth = generated / "truth.json"
    code = main(["evaluate", "--params", str(truth), "--baseline", str(truth),
                 "--test", str(generated / "Test.json"), "--out", str(tmp_path / "r")])
    assert code == EXIT_INPUT


# simulate -----------------------------------------------------------------

def test_simulate_replays_exactly(tmp_path, generated):
    out = tmp_path / "sim.csv"
    replay = generated / "Test" / "T.csv"
    assert main(["simulate", "--params", str(generated / "truth.json"), "--replay", str(replay),
                 "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    names = ("x0", "y0", "psi", "u", "vm", "r")
    assert list(rows[0]) == ["t", "subsequence"] + [f"{n}_{k}" for n in names
                                                     for k in ("input", "sim")]
    dev = max(abs(float(r[f"{n}_input"]) - float(r[f"{n}_sim"])) for r in rows for n in names)
    assert dev < 1e-8
    assert len({r["subsequence"] for r in rows}) > 1


def test_simulate_single_subsequence_when_tf_exceeds_length(tmp_path, generated):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--params", str(generated / "truth.json"),
                 "--replay", str(generated / "Test" / "B-P.csv"), "--tf", "10000",
                 "--out", str(out)]) == EXIT_OK
    assert {r["subsequence"] for r in read_csv(out)} == {"0"}


# input errors -------------------------------------------------------------

def test_missing_file_is_an_input_error(tmp_path):
    code = main(["simulate", "--params", str(tmp_path / "none.json"),
                 "--replay", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_INPUT


def test_incomplete_parameter_file(tmp_path, generated, theta):
    p = tmp_path / "p.json"
    write_parameters(p, theta)
    d = json.loads(p.read_text())
    del d["Xvr_p"]
    p.write_text(json.dumps(d))
    code = main(["simulate", "--params", str(p), "--replay", str(generated / "Test" / "Z.csv"),
                 "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_INPUT


def test_zero_trials_rejected(tmp_path, generated, small_train):
    code = main(["identify", "--train", str(small_train), "--ref", str(generated / "truth.json"),
                 "--trials", "0", "--out", str(tmp_path)])
    assert code == EXIT_INPUT
