import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sann.cli import main, selftest_checks
from sann.vecio import read_dvec


def test_gen_build_query_recall(tmp_path, capsys):
    prefix = str(tmp_path / "inst")
    assert main(["gen", "--n", "300", "--d", "64", "--queries", "15", "--seed", "2", "--out", prefix]) == 0
    X = read_dvec(prefix + ".data.dvec")
    assert X.shape == (300, 64)
    assert len(json.load(open(prefix + ".json"))["planted"]) == 15
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"seed": 4, "leaf_cutoff": 16}))
    index = str(tmp_path / "f.sann")
    assert main(["build", "--data", prefix + ".data.dvec", "--params", str(params), "--trees", "2",
                 "--out", index]) == 0
    out_csv = tmp_path / "q.csv"
    assert main(["query", "--index", index, "--queries", prefix + ".queries.dvec",
                 "--out-csv", str(out_csv)]) == 0
    rows = list(csv.DictReader(open(out_csv)))
    assert len(rows) == 15
    for row in rows:
        if int(row["answer"]) >= 0:
            assert float(row["distance"]) <= 2.0
    report = tmp_path / "r.json"
    code = main(["recall", "--data", prefix + ".data.dvec", "--queries", prefix + ".queries.dvec",
                 "--params", str(params), "--trees", "2", "--param-seed", "5", "--report", str(report)])
    assert code == 0
    rep = json.load(open(report))
    assert rep["params"]["seed"] == 5 and rep["params"]["leaf_cutoff"] == 16
    assert (tmp_path / "r.csv").exists()
    assert main(["recall", "--data", prefix + ".data.dvec", "--queries", prefix + ".queries.dvec",
                 "--trees", "1", "--min-recall", "1.01"]) == 1


def test_vdc_and_collisions(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["vdc", "--sets", "3", "--size", "32", "--eps", "0.2,0.4", "--out-csv", str(out)]) == 0
    assert len(list(csv.DictReader(open(out)))) == 6
    out = tmp_path / "c.csv"
    main(["collisions", "--d", "16", "--trials", "500", "--out-csv", str(out)])
    header = open(out).readline().strip().split(",")
    assert header == ["family", "tau_uv", "tau_uw", "tau_vw", "d", "p_hat", "std_err", "predicted_ln_inv"]


def test_selftest_checks():
    assert all(selftest_checks(n=200, d=128, trees=2).values())


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sann", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "selftest" in res.stdout


def test_unknown_param_rejected(tmp_path):
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"nope": 1}))
    with pytest.raises(ValueError):
        main(["recall", "--data", "x", "--queries", "y", "--params", str(params)])
