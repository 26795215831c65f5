import dataclasses
from pathlib import Path

import numpy as np
import pytest
import yaml

from sviconf.box import BoxSet
from sviconf.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from sviconf.harness import (
    ConfigParse,
    DimensionNot2,
    ExperimentConfig,
    ModelSpec,
    Problem,
    config_from_dict,
    emit_ellipse_boundary,
    load_config,
    load_fixture,
    replicate,
    run_fixture,
    run_replications,
    write_config,
    write_outputs,
)
from sviconf.inference import (
    derivative_at,
    region_degenerate,
    region_fullrank,
    simultaneous_intervals,
)
from sviconf.model import SaaMap, two_dim_example

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_config(**kw):
    base = dict(model=ModelSpec(preset="two_dim"), sample_sizes=[10], replications=4, alphas=[0.1], seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_missing_alpha_names_field():
    raw = {"model": {"preset": "two_dim"}, "sample_sizes": [10], "replications": 2, "seed": 1}
    with pytest.raises(ConfigParse, match="alphas"):
        config_from_dict(raw)


def test_unknown_field_named():
    raw = {"model": {"preset": "two_dim"}, "sample_sizes": [10], "replications": 2, "seed": 1,
           "alphas": [0.1], "n_reps": 5}
    with pytest.raises(ConfigParse, match="n_reps"):
        config_from_dict(raw)


def test_bad_values_rejected():
    with pytest.raises(ConfigParse, match="alphas"):
        small_config(alphas=[1.5])
    with pytest.raises(ConfigParse, match="preset"):
        ModelSpec(preset="nope").build()


def test_yaml_error_reports_position(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("model: {preset: two_dim\nseed: [1,\n")
    with pytest.raises(ConfigParse, match="line"):
        load_config(p)


def test_config_round_trip(tmp_path):
    cfg = small_config(z0=[0.0, 0.0], rho0=1e-6, ellipse=True)
    write_config(cfg, tmp_path / "c.yaml")
    back = load_config(tmp_path / "c.yaml")
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_shipped_configs_parse():
    for p in CONFIGS.glob("*.yaml"):
        if p.name.startswith("fixture"):
            assert load_fixture(p).n == 10
        else:
            assert load_config(p).seed == 20140101


def test_single_replication_smoke(tmp_path):
    res = run_replications(small_config(replications=1))
    assert len(res.records) == 1
    files = write_outputs(res, tmp_path)
    for name in ("coverage.csv", "qq.csv", "replications.csv", "intervals.csv", "manifest.yaml"):
        assert (tmp_path / name).exists()
    assert set(files) >= {"coverage", "qq", "replications", "intervals"}
    manifest = yaml.safe_load((tmp_path / "manifest.yaml").read_text())
    assert manifest["seed"] == 3 and len(manifest["config_sha256"]) == 64


def _run_to(cfg, out):
    write_outputs(run_replications(cfg), out)
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_byte_identical_reruns(tmp_path):
    cfg = small_config(replications=8, sample_sizes=[10, 30])
    a = _run_to(cfg, tmp_path / "a")
    b = _run_to(cfg, tmp_path / "b")
    assert a == b


def test_thread_count_does_not_change_results(tmp_path):
    cfg = small_config(replications=8)
    a = _run_to(cfg, tmp_path / "a")
    b = _run_to(dataclasses.replace(cfg, threads=2), tmp_path / "b")
    assert a.pop("manifest.yaml") != b.pop("manifest.yaml")  # config records the thread count
    assert a == b


def test_replications_exchangeable():
    model = two_dim_example()
    prob = Problem(model, BoxSet.nonnegative_orthant(2), np.zeros(2), (0.1,), 11, None, 0.0)
    first = replicate(prob, 10, 5)
    # replication 5 does not depend on which others were run before it
    for r in range(5):
        replicate(prob, 10, r)
    again = replicate(prob, 10, 5)
    np.testing.assert_array_equal(first.z, again.z)
    assert not np.array_equal(first.z, replicate(prob, 10, 6).z)


def test_coverage_counts_consistent():
    res = run_replications(small_config(replications=20, alphas=[0.1, 0.01]))
    loose, tight = res.row(10, 0.1), res.row(10, 0.01)
    assert loose.valid + loose.noninvertible + loose.solver_failures + loose.other_failures == 20
    assert tight.simultaneous >= loose.simultaneous
    assert loose.region <= loose.simultaneous


def test_ellipse_boundary():
    fr = run_fixture(load_fixture(CONFIGS / "fixture_n10.yaml"))
    region = fr.regions[0.1]
    rows = emit_ellipse_boundary(region, points=400)
    for level, x, y in rows:
        assert level == pytest.approx(0.9)
        assert region.statistic([x, y]) == pytest.approx(region.critical_value, abs=1e-9)
    pts = np.array([(x, y) for _, x, y in rows])
    iv = fr.sim[0.1]
    np.testing.assert_allclose(pts.max(axis=0), iv.hi, atol=1e-3)
    np.testing.assert_allclose(pts.min(axis=0), iv.lo, atol=1e-3)


def test_ellipse_needs_two_dims():
    q = 3
    z = np.ones(q)
    d = derivative_at(SaaMap(np.eye(q), -z), BoxSet.nonnegative_orthant(q), z)
    with pytest.raises(DimensionNot2):
        emit_ellipse_boundary(region_fullrank(d, np.eye(q), 10, 0.1))
    d2 = derivative_at(SaaMap(np.eye(2), -z[:2]), BoxSet.nonnegative_orthant(2), z[:2])
    with pytest.raises(DimensionNot2):
        emit_ellipse_boundary(region_degenerate(d2, np.diag([1.0, 0.0]), 10, 0.1, rho0=0.5))
    assert simultaneous_intervals(region_degenerate(d2, np.diag([1.0, 0.0]), 10, 0.1, rho0=0.5)).hi[1] == 1.0


def test_fixture_cli_outputs(tmp_path, capsys):
    code = main(["fixture", str(CONFIGS / "fixture_n10.yaml"), "--out", str(tmp_path)])
    assert code == EXIT_OK
    lines = (tmp_path / "intervals.csv").read_text().splitlines()
    assert lines[0] == "coord,kind,lo,hi,alpha,n"
    assert lines[1].startswith("z1,sim,-0.52")
    assert (tmp_path / "ellipse.svg").read_text().startswith("<svg")
    regions = (tmp_path / "regions.csv").read_text().splitlines()
    assert regions[1].split(",")[-1] == "0"  # z0 outside at alpha = 0.1
    assert "z1" in capsys.readouterr().out


def test_cli_run_exit_ok(tmp_path):
    cfg = small_config(replications=3)
    write_config(cfg, tmp_path / "c.yaml")
    assert main(["run", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "o"), "--seed", "5"]) == EXIT_OK
    assert yaml.safe_load((tmp_path / "o" / "manifest.yaml").read_text())["seed"] == 5


def test_cli_config_errors(tmp_path):
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    (tmp_path / "c.yaml").write_text("model: {preset: two_dim}\nsample_sizes: [10]\nreplications: 2\nseed: 1\n")
    assert main(["run", str(tmp_path / "c.yaml")]) == EXIT_CONFIG


def test_cli_failure_cap(tmp_path):
    # Lambda identically zero: every Newton matrix on the positive orthant is singular
    cfg = ExperimentConfig(
        model=ModelSpec(lam_lo=[[0, 0], [0, 0]], lam_hi=[[0, 0], [0, 0]], b_lo=[-1, -1], b_hi=[-0.5, -0.5]),
        sample_sizes=[5], replications=3, alphas=[0.1], seed=1, z0=[0.0, 0.0], qq=False,
    )
    write_config(cfg, tmp_path / "c.yaml")
    assert main(["run", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL


def test_cli_limiting(tmp_path):
    cfg = small_config()
    write_config(cfg, tmp_path / "c.yaml")
    code = main(["limiting", str(tmp_path / "c.yaml"), "--samples", "20000", "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    rows = (tmp_path / "o" / "limiting.csv").read_text().splitlines()
    assert rows[0] == "alpha,coord,coverage,condition,coherent"
    assert len(rows) == 3
