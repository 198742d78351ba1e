import math
import os

import numpy as np
import pytest

import biobo


@pytest.fixture(scope="module")
def bench():
    p = biobo.SynthParams()
    p.n_genes = 200
    p.d = 6
    p.n_pathways = 10
    return biobo.synth_benchmark(p)


def test_hypergeom_and_scores():
    assert biobo.hypergeom_p(10, 4, 5, 3) == pytest.approx(66 / 252, rel=1e-12)
    assert biobo.odds_ratio(3, 2, 1, 4) == pytest.approx(6.0)
    assert biobo.bonferroni([0.01, 0.2]) == pytest.approx([0.02, 0.4])
    assert biobo.combined_score(6.0, 0.261905) == pytest.approx(-6.0 * math.log(0.261905), rel=1e-12)


def test_pool_and_enrichment(bench):
    pool, db, signal = bench
    assert len(pool) == 200
    assert pool.modality("synthetic").shape == (200, 6)
    top = biobo.true_topk(pool, 0.1)
    table = biobo.run_enrichment(top, pool, db)
    assert table.rows[0].pathway == signal[0]
    prior = biobo.build_prior([g for g in pool.ids if g not in top], table, db)
    assert sum(prior.prob) == pytest.approx(1.0, abs=1e-12)


def test_gp_and_acquisition():
    x = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.0, 1.0, 0.5])
    cfg = biobo.GPConfig()
    cfg.lengthscale = 1.0
    gp = biobo.fit_gp(x, y, cfg)
    post = gp.predict(np.array([[1.0], [5.0]]), ["a", "b"])
    assert post.mean.shape == (2,)
    assert np.all(post.sd > 0)
    scores = biobo.ucb(post, 1.0)
    assert scores.raw[0] == pytest.approx(post.mean[0] + post.sd[0])
    assert biobo.expected_improvement(0.0, 1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    s = biobo.AcquisitionScores(["A", "B", "C"], [3.0, 1.0, 2.0])
    assert biobo.select_batch(s, 2) == ["A", "C"]


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        biobo.parse_gmt("/nonexistent/file.gmt")
    with pytest.raises(ValueError):
        biobo.AcquisitionScores(["A"], [1.0, 2.0])


def test_run_is_deterministic(bench):
    pool, db, _ = bench
    cfg = biobo.RunConfig(cycles=3, batch_size=8, acquisition="ucb", prior="synthetic")
    assert cfg.label == "bio-ucb[synthetic]|gp|fusion"
    assert cfg.to_dict()["init_size"] == 8
    a = biobo.run(pool, db, cfg)
    b = biobo.run(pool, db, biobo.RunConfig.from_dict(cfg.to_dict()))
    assert a.records == b.records
    assert len(a.records) == 4
    assert a.labels_used == 32


def test_cli_run(tmp_path):
    spec = tmp_path / "spec.toml"
    spec.write_text(
        "seeds = [0, 1]\n[synthetic]\nn_genes = 100\nd = 4\nn_pathways = 5\n"
        "[run]\ncycles = 2\nbatch_size = 5\n[grid]\nacquisitions = [\"ucb\", \"random\"]\n"
    )
    out = biobo.cli.run(str(spec), out_dir=str(tmp_path / "out"))
    assert len(os.listdir(os.path.join(out, "runs"))) == 4
    report = biobo.cli.report(out, out_dir=str(tmp_path / "out"))
    with open(os.path.join(report, "plot_data.tsv")) as f:
        assert f.readline().startswith("# spec_hash=")
