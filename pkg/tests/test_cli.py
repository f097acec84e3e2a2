"""End-to-end tests for the command line interface and stage runner."""

import csv
import hashlib
import json
import shutil
import stat

import pytest

from newsgauge.cli import FREQUENCY_TOKENS, main
from newsgauge.decomposition import load_clusters
from newsgauge.indicator import read_indicator_csv
from newsgauge.pipeline import STAGES, DependencyError, Pipeline, PipelineConfig

ARTIFACTS = [
    "corpus_clean.jsonl",
    "relevance.blob",
    "corpus_relevant.jsonl",
    "sentiment.blob",
    "topics.blob",
    "scores.csv",
    "indicator_monthly.csv",
    "indicator_monthly_first7.csv",
    "indicator_monthly_first14.csv",
    "indicator_monthly_first21.csv",
    "indicator_standardized.csv",
    "indicator_standardized.csv.meta.json",
    "indicator_daily_mtd.csv",
    "assignments.csv",
    "contributions_raw.csv",
    "contributions_standardized.csv",
    "forecast_report.csv",
    "indicator_quarterly.csv",
    "correlations.csv",
    "crisis_h0.csv",
    "crisis_h1.csv",
] + [f"manifest_{stage}.json" for stage in STAGES]


@pytest.fixture(scope="module")
def config_path(fixture_dir):
    return fixture_dir / "config.yaml"


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, config_path):
    out = tmp_path_factory.mktemp("pipeline")
    rc = main(["run", "--config", str(config_path), "--output-dir", str(out)])
    assert rc == 0
    return out


class TestFullRun:
    def test_all_artifacts_written(self, run_dir):
        present = {p.name for p in run_dir.iterdir()}
        missing = [name for name in ARTIFACTS if name not in present]
        assert not missing
        assert present == set(ARTIFACTS)

    def test_manifests_record_artifact_hashes(self, run_dir):
        for stage in STAGES:
            manifest = json.loads((run_dir / f"manifest_{stage}.json").read_text())
            assert sorted(manifest) == [
                "elapsed_seconds",
                "inputs",
                "outputs",
                "seeds",
                "stage",
            ]
            assert manifest["stage"] == stage
            for name, digest in manifest["outputs"].items():
                actual = hashlib.sha256((run_dir / name).read_bytes()).hexdigest()
                assert actual == digest, f"{stage}: {name}"

    def test_rerun_is_byte_identical(self, run_dir, config_path, tmp_path):
        second = tmp_path / "again"
        rc = main(["run", "--config", str(config_path), "--output-dir", str(second)])
        assert rc == 0
        names = sorted(p.name for p in run_dir.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        for name in names:
            first_file = run_dir / name
            second_file = second / name
            if name.startswith("manifest_"):
                a = json.loads(first_file.read_text())
                b = json.loads(second_file.read_text())
                for key in ("stage", "inputs", "outputs", "seeds"):
                    assert a[key] == b[key], name
            else:
                assert first_file.read_bytes() == second_file.read_bytes(), name

    def test_forecast_report_has_both_horizons(self, run_dir):
        lines = (run_dir / "forecast_report.csv").read_text().splitlines()
        assert lines[0] == "horizon,n,rmse_model,rmse_benchmark,ratio,dm_stat,dm_p"
        horizons = [line.split(",")[0] for line in lines[1:]]
        assert horizons == ["0", "1"]


class TestStageControl:
    def test_missing_prerequisite_exits_three(self, config_path, tmp_path):
        rc = main(
            [
                "run",
                "--config",
                str(config_path),
                "--stages",
                "evaluate",
                "--output-dir",
                str(tmp_path / "empty"),
            ]
        )
        assert rc == 3

    def test_dependency_error_names_producer_stage(self, config_path, tmp_path):
        config = PipelineConfig.from_yaml(config_path, output_dir=tmp_path / "partial")
        with pytest.raises(DependencyError, match="run stage 'aggregate' first"):
            Pipeline(config).run(("evaluate",))

    def test_single_stage_writes_only_its_artifacts(self, config_path, tmp_path):
        out = tmp_path / "ingest_only"
        rc = main(
            [
                "run",
                "--config",
                str(config_path),
                "--stages",
                "ingest",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 0
        assert (out / "corpus_clean.jsonl").exists()
        assert not (out / "scores.csv").exists()

    def test_requested_stages_run_in_pipeline_order(self, config_path, tmp_path):
        config = PipelineConfig.from_yaml(config_path, output_dir=tmp_path / "ordered")
        Pipeline(config).run(("filter", "ingest"))
        assert (tmp_path / "ordered" / "corpus_relevant.jsonl").exists()

    def test_unknown_stage_exits_one(self, config_path, tmp_path):
        rc = main(
            [
                "run",
                "--config",
                str(config_path),
                "--stages",
                "bogus",
                "--output-dir",
                str(tmp_path / "x"),
            ]
        )
        assert rc == 1

    def test_jobs_flag_leaves_scores_unchanged(self, run_dir, config_path, tmp_path):
        out = tmp_path / "jobs"
        shutil.copytree(run_dir, out)
        rc = main(
            [
                "--jobs",
                "3",
                "run",
                "--config",
                str(config_path),
                "--stages",
                "score",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 0
        assert (out / "scores.csv").read_bytes() == (run_dir / "scores.csv").read_bytes()

    def test_keyword_method_without_terms_exits_one(self, config_path, tmp_path):
        rc = main(
            [
                "run",
                "--config",
                str(config_path),
                "--method",
                "keyword",
                "--output-dir",
                str(tmp_path / "kw"),
            ]
        )
        assert rc == 1

    def test_missing_config_path_exits_one(self, config_path, tmp_path):
        text = config_path.read_text(encoding="utf-8")
        broken = tmp_path / "broken.yaml"
        broken.write_text(
            text.replace("corpus: corpus_pipeline.jsonl", "corpus: nowhere.jsonl"),
            encoding="utf-8",
        )
        rc = main(["run", "--config", str(broken), "--output-dir", str(tmp_path / "o")])
        assert rc == 1

    def test_clustering_stage_writes_cluster_blob(
        self, run_dir, fixture_dir, tmp_path
    ):
        out = tmp_path / "clustered"
        shutil.copytree(run_dir, out)
        config = tmp_path / "clustering.yaml"
        config.write_text(
            "\n".join(
                [
                    f"corpus: {fixture_dir / 'corpus_pipeline.jsonl'}",
                    f"embeddings: {fixture_dir / 'embeddings_pipeline.emb'}",
                    f"anchors: {fixture_dir / 'anchors.jsonl'}",
                    f"anchor_embeddings: {fixture_dir / 'anchor_embeddings.emb'}",
                    f"gdp: {fixture_dir / 'gdp.csv'}",
                    f"output_dir: {out}",
                    "decompose:",
                    "  method: clustering",
                    "  clusters: 3",
                    "  reducer_dim: 4",
                    "  fit_month: 2021-11",
                    "seed: 0",
                ]
            )
            + "\n",
            encoding="utf-8",
        )
        rc = main(["run", "--config", str(config), "--stages", "decompose"])
        assert rc == 0
        model = load_clusters(out / "clusters.blob")
        assert model.k == 3
        assert model.fit_month == "2021-11"
        assignments = (out / "assignments.csv").read_text().splitlines()
        assert assignments[0] == "article_id,topic,weight"
        assert all(line.split(",")[1].startswith("cluster_") for line in assignments[1:])


class TestSubcommands:
    def test_ingest_matches_pipeline_stage(self, run_dir, fixture_dir, tmp_path):
        out = tmp_path / "clean.jsonl"
        rc = main(
            [
                "ingest",
                "--input",
                str(fixture_dir / "corpus_pipeline.jsonl"),
                "--output",
                str(out),
                "--corpus-filter",
                "languages=de",
            ]
        )
        assert rc == 0
        assert out.read_bytes() == (run_dir / "corpus_clean.jsonl").read_bytes()

    def test_score_matches_pipeline_stage(self, run_dir, fixture_dir, tmp_path):
        out = tmp_path / "scores.csv"
        rc = main(
            [
                "score",
                "--corpus",
                str(run_dir / "corpus_relevant.jsonl"),
                "--embeddings",
                str(fixture_dir / "embeddings_pipeline.emb"),
                "--model",
                str(run_dir / "sentiment.blob"),
                "--output",
                str(out),
            ]
        )
        assert rc == 0
        assert out.read_bytes() == (run_dir / "scores.csv").read_bytes()

    def test_train_sentiment_matches_pipeline_blobs(self, run_dir, fixture_dir, tmp_path):
        sent = tmp_path / "sent.blob"
        topics = tmp_path / "topics.blob"
        rc = main(
            [
                "train-sentiment",
                "--anchors",
                str(fixture_dir / "anchors.jsonl"),
                "--embeddings",
                str(fixture_dir / "anchor_embeddings.emb"),
                "--output",
                str(sent),
                "--topics-output",
                str(topics),
            ]
        )
        assert rc == 0
        assert sent.read_bytes() == (run_dir / "sentiment.blob").read_bytes()
        assert topics.read_bytes() == (run_dir / "topics.blob").read_bytes()

    @pytest.mark.parametrize("token", ["monthly", "first7", "first14", "first21"])
    def test_frequency_tokens_match_pipeline_artifacts(self, run_dir, tmp_path, token):
        out = tmp_path / f"{token}.csv"
        rc = main(
            [
                "build-indicator",
                "--scores",
                str(run_dir / "scores.csv"),
                "--output",
                str(out),
                "--frequency",
                token,
            ]
        )
        assert rc == 0
        expected = run_dir / f"indicator_{FREQUENCY_TOKENS[token]}.csv"
        assert out.read_bytes() == expected.read_bytes()

    def test_daily_mtd_restricted_to_month(self, run_dir, tmp_path):
        monthly = read_indicator_csv(run_dir / "indicator_monthly.csv")
        month = monthly.points[0].period
        out = tmp_path / "mtd.csv"
        rc = main(
            [
                "build-indicator",
                "--scores",
                str(run_dir / "scores.csv"),
                "--output",
                str(out),
                "--frequency",
                "daily-mtd",
                "--month",
                month,
            ]
        )
        assert rc == 0
        series = read_indicator_csv(out)
        assert all(p.period.startswith(month) for p in series.points)
        assert series.points[-1].value == monthly.points[0].value

    def test_standardize_flag_writes_moment_sidecar(self, run_dir, tmp_path):
        out = tmp_path / "std.csv"
        rc = main(
            [
                "build-indicator",
                "--scores",
                str(run_dir / "scores.csv"),
                "--output",
                str(out),
                "--standardize",
            ]
        )
        assert rc == 0
        assert out.read_bytes() == (run_dir / "indicator_standardized.csv").read_bytes()
        meta = json.loads((tmp_path / "std.csv.meta.json").read_text())
        assert set(meta) >= {"mean", "std"}

    def test_decompose_keyword_subcommand(self, run_dir, tmp_path):
        keywords = tmp_path / "keywords.yaml"
        keywords.write_text(
            "Geldpolitik: [Zins, Inflation]\nHandel: [Export, Zoll]\n",
            encoding="utf-8",
        )
        contrib = tmp_path / "contrib.csv"
        assignments = tmp_path / "assign.csv"
        rc = main(
            [
                "decompose",
                "--method",
                "keyword",
                "--scores",
                str(run_dir / "scores.csv"),
                "--corpus",
                str(run_dir / "corpus_relevant.jsonl"),
                "--keywords",
                str(keywords),
                "--output",
                str(contrib),
                "--assignments-output",
                str(assignments),
                "--standardize-from",
                str(run_dir / "indicator_standardized.csv"),
            ]
        )
        assert rc == 0
        header = contrib.read_text().splitlines()[0]
        assert header == "period,topic,contribution"
        topics = {line.split(",")[1] for line in assignments.read_text().splitlines()[1:]}
        assert topics <= {"Geldpolitik", "Handel", "Other"}

    def test_decompose_clustering_subcommand(self, run_dir, fixture_dir, tmp_path):
        contrib = tmp_path / "contrib.csv"
        blob = tmp_path / "clusters.blob"
        rc = main(
            [
                "decompose",
                "--method",
                "clustering",
                "--scores",
                str(run_dir / "scores.csv"),
                "--corpus",
                str(run_dir / "corpus_relevant.jsonl"),
                "--embeddings",
                str(fixture_dir / "embeddings_pipeline.emb"),
                "--clusters",
                "3",
                "--reducer-dim",
                "4",
                "--fit-month",
                "2019-03",
                "--clusters-output",
                str(blob),
                "--output",
                str(contrib),
            ]
        )
        assert rc == 0
        assert load_clusters(blob).k == 3

    def test_evaluate_forecast_with_crisis_prefix(self, run_dir, fixture_dir, tmp_path):
        report = tmp_path / "report.csv"
        rc = main(
            [
                "evaluate-forecast",
                "--gdp",
                str(fixture_dir / "gdp.csv"),
                "--indicator",
                str(run_dir / "indicator_monthly.csv"),
                "--output",
                str(report),
                "--horizons",
                "0,1",
                "--crisis-prefix",
                str(tmp_path / "crisis"),
            ]
        )
        assert rc == 0
        assert report.read_bytes() == (run_dir / "forecast_report.csv").read_bytes()
        assert (tmp_path / "crisis_h0.csv").exists()
        assert (tmp_path / "crisis_h1.csv").exists()

    def test_correlations_subcommand(self, run_dir, fixture_dir, tmp_path):
        out = tmp_path / "corr.csv"
        rc = main(
            [
                "correlations",
                "--gdp",
                str(fixture_dir / "gdp.csv"),
                "--indicator",
                str(run_dir / "indicator_monthly.csv"),
                "--output",
                str(out),
            ]
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "lag,correlation"
        assert lines[-2].startswith("avg_0_1,")
        assert lines[-1].startswith("avg_0_4,")

    def test_lexicon_score_subcommand(self, run_dir, fixture_dir, tmp_path):
        out = tmp_path / "lexicon.csv"
        rc = main(
            [
                "lexicon-score",
                "--corpus",
                str(run_dir / "corpus_relevant.jsonl"),
                "--lexicon",
                str(fixture_dir / "lexicon.csv"),
                "--output",
                str(out),
            ]
        )
        assert rc == 0
        series = read_indicator_csv(out, frequency="monthly")
        assert len(series.points) > 12

    def test_sample_for_labeling_subcommand(self, run_dir, tmp_path):
        out = tmp_path / "sample.csv"
        rc = main(
            [
                "sample-for-labeling",
                "--scores",
                str(run_dir / "scores.csv"),
                "--output",
                str(out),
                "--corpus",
                str(run_dir / "corpus_relevant.jsonl"),
                "--k",
                "5",
                "--bands",
                "0:0.3,0.7:1",
            ]
        )
        assert rc == 0
        with out.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["article_id", "date", "prob", "band", "text"]
        assert len(rows) == 1 + 10
        assert all(row[4] for row in rows[1:])

    def test_apply_relevance_threshold_override(self, run_dir, fixture_dir, tmp_path):
        out = tmp_path / "strict.jsonl"
        rc = main(
            [
                "apply-relevance",
                "--corpus",
                str(run_dir / "corpus_clean.jsonl"),
                "--embeddings",
                str(fixture_dir / "embeddings_pipeline.emb"),
                "--model",
                str(run_dir / "relevance.blob"),
                "--output",
                str(out),
                "--threshold",
                "0.95",
            ]
        )
        assert rc == 0
        strict = out.read_text().splitlines()
        relaxed = (run_dir / "corpus_relevant.jsonl").read_text().splitlines()
        assert 0 < len(strict) <= len(relaxed)

    def test_stability_subcommand_smoke(self, run_dir, fixture_dir, tmp_path):
        out = tmp_path / "stability.csv"
        rc = main(
            [
                "stability",
                "--anchors",
                str(fixture_dir / "anchors.jsonl"),
                "--anchor-embeddings",
                str(fixture_dir / "anchor_embeddings.emb"),
                "--corpus",
                str(run_dir / "corpus_relevant.jsonl"),
                "--embeddings",
                str(fixture_dir / "embeddings_pipeline.emb"),
                "--output",
                str(out),
                "--sizes",
                "8,16",
                "--repeats",
                "2",
            ]
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "size,repeat,seed,correlation,dispersion"
        assert len(lines) == 1 + 4


class TestEmbedAdapter:
    def test_missing_adapter_exits_one(self, monkeypatch):
        monkeypatch.setattr(shutil, "which", lambda name: None)
        assert main(["embed-adapter", "embed", "--help"]) == 1

    def test_exit_code_passes_through(self, monkeypatch, tmp_path):
        script = tmp_path / "fake-adapter"
        script.write_text("#!/bin/sh\nexit 7\n", encoding="utf-8")
        script.chmod(script.stat().st_mode | stat.S_IXUSR)
        monkeypatch.setattr(shutil, "which", lambda name: str(script))
        assert main(["embed-adapter", "embed", "--model", "hash:16"]) == 7
