import csv
import json

import numpy as np
import pytest

from fsir.cli import ExperimentConfig, main
from fsir.exceptions import ConfigInvalid, InconsistentResponse, OutOfInterval, ParseError
from fsir.io import ingest_csv, write_csv
from fsir.simulation import SimConfig, simulate_dataset


def write(path, text):
    path.write_text(text)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- ingestion -----------------------------------------------------------------


def test_ingest_two_subjects(tmp_path):
    p = write(tmp_path / "d.csv",
              "subject_id,time,value,response\n"
              "b,0.5,1.0,2.0\n"
              "a,0.1,3.0,7.5\n"
              "b,0.2,4.0,2.0\n"
              "a,0.9,5.0,7.5\n"
              "b,0.7,6.0,2.0\n")
    data = ingest_csv(p)
    assert data.n_subjects == 2
    assert data.ids == ["b", "a"]
    np.testing.assert_array_equal(data.n_obs, [3, 2])
    np.testing.assert_array_equal(data.times[0], [0.2, 0.5, 0.7])
    np.testing.assert_array_equal(data.values[0], [4.0, 1.0, 6.0])
    np.testing.assert_array_equal(data.response, [2.0, 7.5])
    assert data.interval == (0.1, 0.9)


def test_ingest_inconsistent_response(tmp_path):
    p = write(tmp_path / "d.csv", "subject_id,time,value,response\ns,0.1,1,5.0\ns,0.2,1,5.1\n")
    with pytest.raises(InconsistentResponse):
        ingest_csv(p)


@pytest.mark.parametrize(
    "body, line",
    [
        ("subject,time,value,response\n", 1),
        ("subject_id,time,value,response\ns,0.1,1,2\ns,oops,1,2\n", 3),
        ("subject_id,time,value,response\ns,0.1,1\n", 2),
        ("subject_id,time,value,response\n,0.1,1,2\n", 2),
        ("subject_id,time,value,response\ns,0.1,nan,2\n", 2),
        ("subject_id,time,value,response\n", 2),
    ],
)
def test_ingest_parse_errors(tmp_path, body, line):
    with pytest.raises(ParseError) as err:
        ingest_csv(write(tmp_path / "d.csv", body))
    assert err.value.line == line


def test_ingest_out_of_interval(tmp_path):
    p = write(tmp_path / "d.csv", "subject_id,time,value,response\ns,1.2,1,2\n")
    with pytest.raises(OutOfInterval):
        ingest_csv(p, interval=(0, 1))


@pytest.mark.parametrize("sparse", [False, True])
def test_round_trip(tmp_path, sparse):
    data, _ = simulate_dataset(SimConfig(n=25, sparse=sparse, seed=3))
    write_csv(data, tmp_path / "d.csv")
    assert ingest_csv(tmp_path / "d.csv", interval=(0.0, 1.0)).equals(data)


# -- config --------------------------------------------------------------------


def test_config_rejects_unknown_field():
    with pytest.raises(ConfigInvalid) as err:
        ExperimentConfig.from_dict({"mode": "fit", "bogus": 1})
    assert err.value.field == "bogus"


@pytest.mark.parametrize(
    "d, field",
    [
        ({"mode": "replicate-table1"}, "seed"),
        ({"mode": "rate-check", "seed": 1, "k": 0}, "k"),
        ({"mode": "fit"}, "input"),
        ({"mode": "simulate", "seed": 1, "fve_threshold": 0}, "fve_threshold"),
        ({"mode": "link", "seed": 1, "k": 3}, "k"),
        ({"mode": "simulate", "seed": 1, "smoother": {"h_t": 0.1}}, "smoother"),
        ({"mode": "replicate-table1", "seed": 1, "designs": ["dense"]}, "designs"),
    ],
)
def test_config_validation(d, field):
    with pytest.raises(ConfigInvalid) as err:
        ExperimentConfig.from_dict(d).validate()
    assert err.value.field == field


# -- command line --------------------------------------------------------------


def test_cli_invalid_k(tmp_path, capsys):
    code = main(["rate-check", "--seed", "1", "--k", "0", "--out", str(tmp_path)])
    assert code != 0
    record = json.loads((tmp_path / "error.json").read_text())
    assert record["field"] == "k"
    assert "k" in capsys.readouterr().err


def test_cli_missing_input_is_error(tmp_path):
    code = main(["fit", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)])
    assert code == 1
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "FileNotFoundError"


def test_cli_simulate_then_fit(tmp_path):
    sim_out, fit_out = tmp_path / "sim", tmp_path / "fit"
    assert main(["simulate", "--seed", "4", "--n", "80", "--sparse", "--out", str(sim_out)]) == 0
    data = ingest_csv(sim_out / "dataset.csv")
    assert data.n_subjects == 80
    assert main(["fit", "--input", str(sim_out / "dataset.csv"), "--k", "2",
                 "--out", str(fit_out)]) == 0
    rows = read_rows(fit_out / "directions.csv")
    assert rows[0] == ["t", "beta1", "beta2", "eta1", "eta2"]
    assert len(rows) == 32
    res = json.loads((fit_out / "results.json").read_text())
    assert res["mode"] == "fit" and res["results"]["k"] == 2
    assert set(res["results"]["bandwidths"]) >= {"h_t", "h_y", "h_mu", "h_phi"}


def test_cli_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "sim": {"n": 30}, "output_dir": str(tmp_path / "a")}))
    assert main(["simulate", "--config", str(cfg), "--n", "12"]) == 0
    assert ingest_csv(tmp_path / "a" / "dataset.csv").n_subjects == 12


def test_cli_table1_small(tmp_path):
    args = ["replicate-table1", "--seed", "3", "--n-runs", "2", "--ns", "60", "80",
            "--out", str(tmp_path / "a")]
    assert main(args) == 0
    rows = read_rows(tmp_path / "a" / "table1.csv")
    assert rows[0] == ["n", "data_type", "correlation", "ISB", "IVAR", "IMSE"]
    assert [r[:2] for r in rows[1:]] == [["60", "Complete"], ["60", "Sparse"],
                                         ["80", "Complete"], ["80", "Sparse"]]
    for r in rows[1:]:
        isb, ivar, imse = map(float, r[3:])
        assert abs(imse - (isb + ivar)) < 1e-10
    beta = read_rows(tmp_path / "a" / "beta_mean.csv")
    assert beta[0][:2] == ["t", "true_beta"] and len(beta) == 32
    # results.json reproducible apart from the timestamp
    args[-1] = str(tmp_path / "b")
    assert main(args) == 0
    a, b = (json.loads((tmp_path / d / "results.json").read_text()) for d in "ab")
    for r in (a, b):
        r.pop("timestamp")
        r["config"].pop("output_dir")
    assert a == b
    assert (tmp_path / "a" / "table1.csv").read_bytes() == (tmp_path / "b" / "table1.csv").read_bytes()


def test_cli_rate_check_small(tmp_path):
    assert main(["rate-check", "--seed", "2", "--n-runs", "3", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "ratios.csv")
    assert rows[0] == ["n_from", "n_to", "ivar_from", "ivar_to", "ratio"]
    assert [r[:2] for r in rows[1:]] == [["100", "200"], ["200", "400"]]
    res = json.loads((tmp_path / "results.json").read_text())
    assert len(res["results"]["ratios"]) == 2
    assert res["results"]["fixed_n_obs"] == 6


@pytest.mark.parametrize("k", [1, 2])
def test_cli_link(tmp_path, k):
    assert main(["link", "--seed", "6", "--n", "150", "--k", str(k), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "surface.csv")
    assert rows[0] == [f"index{j + 1}" for j in range(k)] + ["fitted"]
    assert len(rows) == 1 + 20**k
    res = json.loads((tmp_path / "results.json").read_text())
    assert res["results"]["fitted_error"] >= 0


def test_cli_link_from_csv(tmp_path):
    data, _ = simulate_dataset(SimConfig(n=120, sparse=True, seed=8))
    write_csv(data, tmp_path / "d.csv")
    assert main(["link", "--input", str(tmp_path / "d.csv"), "--out", str(tmp_path / "o")]) == 0
    assert len(read_rows(tmp_path / "o" / "surface.csv")) == 21
