import csv
import io

import numpy as np
import pytest

from smpm_schur import bench, cli
from smpm_schur.errors import ConfigError


def small_cfg(**kw):
    base = dict(method="dbj", n=4, m_x=4, m_z=2, l_z=2.0, trials=3, seed=7)
    base.update(kw)
    return bench.ExperimentConfig(**base)


def test_config_defaults():
    cfg = bench.ExperimentConfig()
    assert cfg.eta == pytest.approx(1.0)
    assert cfg.ly == cfg.l_z


@pytest.mark.parametrize("kw", [dict(method="cg"), dict(trials=0), dict(n=1), dict(tol=0.0),
                                dict(m_y=12, method="dbj"), dict(m_y=8, method="schur")])
def test_config_rejects(kw):
    with pytest.raises(ConfigError):
        small_cfg(**kw)


def test_trial_streams_are_independent_and_reproducible():
    a = [g.random(3) for g in bench.trial_generators(5, 3)]
    b = [g.random(3) for g in bench.trial_generators(5, 3)]
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a[0], a[1])


def test_experiment_rows():
    rows = bench.run_experiment(small_cfg())
    assert [r["trial"] for r in rows] == [0, 1, 2, "mean"]
    assert all(r["status"] == "ok" for r in rows)
    assert all(r["rel_residual"] <= 1e-10 for r in rows)
    assert rows[-1]["iterations"] == pytest.approx(np.mean([r["iterations"] for r in rows[:-1]]))


def test_reproducible_iterations():
    a = bench.run_experiment(small_cfg())
    b = bench.run_experiment(small_cfg(jobs=2))
    assert [r["iterations"] for r in a] == [r["iterations"] for r in b]


def test_iteration_cap_marks_failure():
    rows = bench.run_experiment(small_cfg(method="schur", max_iter=2))
    assert all(r["status"] == "failed" for r in rows[:-1])
    assert rows[-1]["status"] == "failed"


def test_sweep_has_ratio_row():
    rows = bench.sweep_mx(small_cfg(), m_xs=(4,), methods=("dbj", "2las"))
    means = bench.mean_iterations(rows)
    ratio = means[("dbj/2las", 4, 1.0, 0)]
    assert ratio == pytest.approx(means[("dbj", 4, 1.0, 0)] / means[("2las", 4, 1.0, 0)])


def test_csv_schema(tmp_path):
    rows = bench.run_experiment(small_cfg(trials=1))
    path = tmp_path / "out.csv"
    bench.write_csv(rows, path)
    with open(path) as fh:
        got = list(csv.DictReader(fh))
    assert tuple(got[0].keys()) == bench.CSV_COLUMNS
    assert len(got) == 2


def test_cli_sweep_writes_csv(tmp_path):
    out = tmp_path / "mx.csv"
    code = cli.run(["sweep-mx", "--n", "4", "--mx", "4,6", "--mz", "2", "--lz", "2",
                    "--method", "bj,dbj", "--trials", "2", "--out", str(out)])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["m_x"] for r in rows} == {"4", "6"}
    assert {r["method"] for r in rows} == {"bj", "dbj"}
    assert len(rows) == 2 * 2 * 3


def test_cli_3d_sweep(capsys):
    assert cli.run(["sweep-3d", "--n", "4", "--mx", "4", "--mz", "2", "--lz", "2", "--my", "4",
                    "--trials", "1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert {r["method"] for r in rows} == {"dbj", "2las", "dbj/2las"}
    assert all(r["m_y"] == "4" for r in rows)


def test_config_file_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# sweep settings\nn = 5\ntrials = 4\nmethod = bj\n")
    args = cli.build_parser().parse_args(["sweep-mx", "--config", str(conf), "--trials", "2"])
    settings = cli.resolve(args)
    assert settings["n"] == "5"          # from the file
    assert settings["trials"] == 2       # flag wins over the file
    assert settings["method"] == "bj"
    assert settings["mz"] == "10"        # built-in default
    cfg = cli.make_config(settings, m_x=8)
    assert (cfg.n, cfg.trials, cfg.method) == (5, 2, "bj")


def test_bad_config_line(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("n 5\n")
    with pytest.raises(ConfigError):
        cli.read_config(conf)


def test_invalid_method_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["sweep-mx", "--method", "cg", "--mx", "4", "--n", "3", "--mz", "2"])
    assert info.value.code == 2
    assert "cg" in capsys.readouterr().err


def test_validate_command(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["validate", "--n", "5", "--mx", "4", "--mz", "2", "--lz", "2"])
    out = capsys.readouterr().out
    assert info.value.code == 0
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_convergence_command(capsys):
    assert cli.run(["convergence", "--mx", "2", "--mz", "2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    errs = [float(r["L_inf_error"]) for r in rows]
    assert [r["n"] for r in rows] == ["6", "8", "10", "12"]
    assert errs[-1] < 1e-9 and errs[0] > errs[-1]
