import json

import numpy as np
import pytest

from contextfed.embed import EmbeddingStore, hash_embed, save_embeddings
from contextfed.evaluation import binarize_phq9
from contextfed.experiment import (
    ConfigError,
    ExperimentConfig,
    Report,
    emit_sample_texts,
    run_experiment,
    _assemble_nontext_samples,
    _init_linear,
    _run_cl_fold,
    _standardize,
)
from contextfed.model import (
    CLASSIFICATION,
    TrainConfig,
    predict_logit,
    sigmoid,
    train_model,
    zero_model,
)
from contextfed.seeding import derive_seed
from contextfed.synth import CohortSpec, generate_cohort

SMALL_SPEC = CohortSpec(num_users=6, days=3, rng_seed=13,
                        mean_words_per_day={"speech": 120.0, "keyboard": 90.0})


@pytest.fixture(scope="module")
def cohort():
    return generate_cohort(SMALL_SPEC)


def _config(**overrides):
    base = dict(method="fl_text", task="depression", sources=("keyboard",),
                rounds=3, local_epochs=1, cl_epochs=4, learning_rate=0.1,
                seeds=(1, 2))
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_unknown_method(self):
        with pytest.raises(ConfigError, match="method"):
            ExperimentConfig.from_dict({"method": "magic", "task": "depression"})

    def test_fedtherapist_requires_sources(self):
        with pytest.raises(ConfigError, match="sources"):
            _config(method="fedtherapist", sources=())

    def test_file_mode_requires_path(self):
        with pytest.raises(ConfigError, match="embedding_path"):
            _config(embedding_mode="file")

    def test_unknown_config_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_dict(
                {"method": "fl_text", "task": "depression", "warp_speed": 9}
            )

    def test_cohort_and_output_keys_allowed(self):
        config = ExperimentConfig.from_dict(
            {"method": "fl_text", "task": "stress", "cohort": {"spec": {}},
             "output_dir": "x"}
        )
        assert config.task == "stress"

    def test_no_context_data_reported_before_training(self, cohort):
        stripped = [c for c in cohort]
        for client in stripped:
            client.events = [e for e in client.events if e.source == "speech"]
        with pytest.raises(ConfigError, match="no text data"):
            run_experiment(_config(method="fedtherapist", ensemble_mode="E_A"),
                           cohort=stripped)
        # restore shared fixture
        regen = generate_cohort(SMALL_SPEC)
        for client, fresh in zip(stripped, regen):
            client.events = fresh.events


class TestRunExperiment:
    def test_deterministic_reports(self, cohort):
        a = run_experiment(_config(), cohort=cohort)
        b = run_experiment(_config(), cohort=cohort)
        assert a.to_dict() == b.to_dict()

    def test_fold_count_equals_user_count_for_every_method(self, cohort):
        for method in ("cl_nontext", "fl_text", "fedtherapist"):
            report = run_experiment(_config(method=method), cohort=cohort)
            assert report.n_folds == len(cohort)
            for seed in (1, 2):
                assert len(report.per_seed[seed]["predictions"]) + \
                    len(report.per_seed[seed]["skipped"]) >= len(cohort)

    def test_aggregate_mean_std_present(self, cohort):
        report = run_experiment(_config(), cohort=cohort)
        values = [report.per_seed[s]["metric"] for s in (1, 2)]
        assert report.aggregate["mean"] == pytest.approx(float(np.mean(values)))
        assert report.aggregate["std"] == pytest.approx(float(np.std(values)))

    def test_regression_task_runs_and_reports_mae(self, cohort):
        report = run_experiment(
            _config(task="stress", method="fedtherapist", ensemble_mode="E_E",
                    chunk_mode="single", seeds=(3,)),
            cohort=cohort,
        )
        assert report.metric_name == "mae"
        assert 0.0 <= report.per_seed[3]["metric"] <= 100.0
        assert report.per_seed[3]["per_member"]

    def test_predictions_lie_in_report_range(self, cohort):
        report = run_experiment(_config(task="mood", seeds=(3,)), cohort=cohort)
        for _, _, value, label in report.per_seed[3]["predictions"]:
            assert 0.0 <= value <= 100.0
            assert 0.0 <= label <= 100.0

    def test_ensemble_average_mode_runs(self, cohort):
        report = run_experiment(
            _config(method="fedtherapist", ensemble_mode="E_A", seeds=(3,)),
            cohort=cohort,
        )
        assert "per_member" in report.per_seed[3]

    def test_tfidf_embedding_mode(self, cohort):
        report = run_experiment(
            _config(embedding_mode="tfidf", tfidf_vocab_size=1000, seeds=(3,)),
            cohort=cohort,
        )
        assert 0.0 <= report.per_seed[3]["metric"] <= 1.0


class TestClOracle:
    def test_cl_fold_equals_standalone_trainer(self, cohort):
        # the harness's CL path must match the centralized trainer invoked
        # directly with the same derived seed and standardization
        config = _config(method="cl_nontext", seeds=(5,))
        per_user = _assemble_nontext_samples(cohort, "depression")
        users = [c.user_id for c in cohort]
        test_user, train_users = users[0], users[1:]
        run_seed = derive_seed(5, "fold", 0)
        train_cfg = TrainConfig(learning_rate=config.learning_rate,
                                batch_size=config.batch_size, epochs=1,
                                rng_seed=run_seed)
        rows = _run_cl_fold(per_user, test_user, train_users, config,
                            CLASSIFICATION, train_cfg, run_seed)

        train_rows = [r for u in train_users for r in per_user[u]]
        std_train = _standardize(train_rows, train_rows)
        std_test = _standardize(train_rows, per_user[test_user])
        model = _init_linear(zero_model(7, CLASSIFICATION), run_seed)
        model = train_model(model, [(r.x, r.label) for r in std_train],
                            TrainConfig(learning_rate=config.learning_rate,
                                        batch_size=config.batch_size,
                                        epochs=config.cl_epochs,
                                        rng_seed=run_seed))
        expected = float(sigmoid(predict_logit(model, std_test[0].x) - model.bias))
        assert rows == [(0, expected, float(binarize_phq9(cohort[0].phq9)))]


class TestFileEmbeddingRoundTrip:
    def test_file_mode_reproduces_hash_mode(self, cohort, tmp_path):
        # hash-embed every emitted sample text into a store; running in file
        # mode must then give the identical report
        config = _config(method="fedtherapist", ensemble_mode="E_E", seeds=(4,))
        pairs = emit_sample_texts(config, cohort)
        assert pairs
        store = EmbeddingStore()
        for sample_id, text in pairs:
            store.add(sample_id, hash_embed(text.split(), config.embedding_dim,
                                            config.embedding_seed))
        path = tmp_path / "store.jsonl"
        save_embeddings(store, path)

        hash_report = run_experiment(config, cohort=cohort)
        file_report = run_experiment(
            _config(method="fedtherapist", ensemble_mode="E_E", seeds=(4,),
                    embedding_mode="file", embedding_path=str(path)),
            cohort=cohort,
        )
        assert file_report.to_dict()["per_seed"] == hash_report.to_dict()["per_seed"]

    def test_missing_sample_id_is_config_error(self, cohort, tmp_path):
        store = EmbeddingStore()
        store.add("wrong|id", np.zeros(256))
        path = tmp_path / "store.jsonl"
        save_embeddings(store, path)
        with pytest.raises(ConfigError, match="lacks sample_id"):
            run_experiment(
                _config(embedding_mode="file", embedding_path=str(path)),
                cohort=cohort,
            )

    def test_emit_rejects_nontext_method(self, cohort):
        with pytest.raises(ConfigError, match="no text"):
            emit_sample_texts(_config(method="cl_nontext"), cohort)


class TestReportOutput:
    def test_write_produces_json_and_csv(self, cohort, tmp_path):
        report = run_experiment(_config(seeds=(1,)), cohort=cohort)
        report.write(tmp_path)
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["method"] == "fl_text"
        assert payload["aggregate"]["mean"] == report.aggregate["mean"]
        lines = (tmp_path / "report.csv").read_text().strip().splitlines()
        assert lines[0] == "seed,scope,name,value"
        assert any("aggregate" in line for line in lines)
