import numpy as np
import pytest

from contextfed.context import ContextLabel, GeoFix, cluster_fixes
from contextfed.synth import (
    ClientDataset,
    CohortSpec,
    TextEvent,
    cohort_spec_from_dict,
    generate_cohort,
    load_cohort,
    nontext_features,
    save_cohort,
)


@pytest.fixture(scope="module")
def small_cohort():
    return generate_cohort(CohortSpec(num_users=8, days=4, rng_seed=3))


class TestGenerateCohort:
    def test_shape(self, small_cohort):
        assert len(small_cohort) == 8
        for client in small_cohort:
            assert client.days == 4
            assert len(client.daily_labels) == 4
            assert len(client.device_logs) == 4

    def test_deterministic(self):
        spec = CohortSpec(num_users=3, days=2, rng_seed=11)
        a = generate_cohort(spec)
        b = generate_cohort(spec)
        for ca, cb in zip(a, b):
            assert ca.phq9 == cb.phq9
            assert ca.daily_labels == cb.daily_labels
            assert len(ca.events) == len(cb.events)
            for ea, eb in zip(ca.events, cb.events):
                assert ea.timestamp == eb.timestamp and ea.tokens == eb.tokens

    def test_seed_changes_cohort(self):
        a = generate_cohort(CohortSpec(num_users=2, days=2, rng_seed=1))
        b = generate_cohort(CohortSpec(num_users=2, days=2, rng_seed=2))
        assert any(
            ca.events[0].tokens != cb.events[0].tokens or ca.phq9 != cb.phq9
            for ca, cb in zip(a, b)
        )

    def test_label_ranges(self, small_cohort):
        for client in small_cohort:
            assert 0 <= client.phq9 <= 27
            for day in client.daily_labels:
                for name in ("stress", "anxiety", "mood"):
                    assert 0.0 <= day[name] <= 100.0

    def test_default_cohort_spans_phq9_threshold(self):
        cohort = generate_cohort(CohortSpec())
        labels = {client.phq9 >= 5 for client in cohort}
        assert labels == {True, False}

    def test_word_count_means_near_spec(self):
        cohort = generate_cohort(CohortSpec())
        for source, target in CohortSpec().mean_words_per_day.items():
            counts = [
                sum(len(e.tokens) for e in c.events if e.source == source)
                for c in cohort
            ]
            assert abs(np.mean(counts) - target * 10) / (target * 10) < 0.20

    def test_events_sorted_and_valid(self, small_cohort):
        for client in small_cohort:
            times = [e.timestamp for e in client.events]
            assert times == sorted(times)
            for event in client.events:
                assert event.tokens
                if event.source == "speech":
                    assert event.app_id is None
                else:
                    assert event.app_id is not None

    def test_vocabulary_pools_disjoint(self):
        spec = CohortSpec()
        assert not set(spec.signal_words) & set(spec.noise_words)
        with pytest.raises(ValueError, match="disjoint"):
            CohortSpec(signal_words=("same",), noise_words=("same", "other"))

    def test_signal_strength_bounds(self):
        with pytest.raises(ValueError):
            CohortSpec(signal_strength=1.5)

    def test_signal_words_concentrate_in_signal_context(self):
        spec = CohortSpec(num_users=6, days=6, rng_seed=5, signal_strength=1.0)
        cohort = generate_cohort(spec)
        signal_pool = set(spec.signal_words)
        # High-latent users (late indices) should show a high signal-word
        # rate inside (keyboard, T_N); low-latent users a low one.
        def signal_rate(client):
            tokens = [
                t
                for e in client.events
                if e.source == "keyboard"
                and (e.timestamp % 86400.0) // 3600 not in range(9, 18)
                for t in e.tokens
            ]
            return sum(t in signal_pool for t in tokens) / max(len(tokens), 1)

        assert signal_rate(cohort[-1]) > signal_rate(cohort[0]) + 0.3


class TestSignalMonotonicity:
    def test_signal_member_auroc_non_decreasing_in_strength(self):
        # fixed seed grid: the (keyboard, T_N) member's AUROC must not drop
        # as the planted signal strengthens
        from contextfed.experiment import ExperimentConfig, run_experiment

        aurocs = []
        for strength in (0.0, 0.5, 0.9):
            spec = CohortSpec(num_users=16, days=5, rng_seed=7,
                              signal_strength=strength,
                              mean_words_per_day={"speech": 300.0,
                                                  "keyboard": 400.0})
            report = run_experiment(
                ExperimentConfig(method="fedtherapist", task="depression",
                                 sources=("keyboard",), ensemble_mode="E_A",
                                 learning_rate=0.3, rounds=25, local_epochs=1,
                                 seeds=(17,)),
                cohort=generate_cohort(spec),
            )
            aurocs.append(report.per_seed[17]["per_member"]["keyboard:T_N"])
        assert aurocs == sorted(aurocs), aurocs


class TestNontextFeatures:
    def test_feature_vector_shape_and_determinism(self, small_cohort):
        client = small_cohort[0]
        a = nontext_features(client, 0)
        b = nontext_features(client, 0)
        assert a.shape == (7,)
        assert np.array_equal(a, b)

    def test_empty_day_defaults(self):
        client = ClientDataset(
            user_id="u", days=1,
            profile=generate_cohort(CohortSpec(num_users=1, days=1))[0].profile,
            events=[], daily_labels=[{"stress": 0, "anxiety": 0, "mood": 0}],
            phq9=0, device_logs=[{"sleep_end_h": 0.0, "unlock_duration_h": 0.0,
                                  "unlock_count": 0.0}],
        )
        features = nontext_features(client, 0)
        assert features.tolist() == [0.0, 0.0, 7.0, 0.0, 0.0, 0.0, 0.0]

    def test_places_visited_counts_separated_clusters(self):
        profile = generate_cohort(CohortSpec(num_users=1, days=1))[0].profile
        geo_a = GeoFix(latitude=40.0, longitude=-75.0, timestamp=10 * 3600.0)
        geo_b = GeoFix(latitude=40.1, longitude=-75.0, timestamp=11 * 3600.0)
        events = [
            TextEvent(user_id="u", timestamp=g.timestamp, source="speech",
                      tokens=("hi",), geo=g, motion="stationary")
            for g in (geo_a, geo_a, geo_b)
        ]
        client = ClientDataset(
            user_id="u", days=1, profile=profile, events=events,
            daily_labels=[{"stress": 0, "anxiety": 0, "mood": 0}], phq9=0,
            device_logs=[{}],
        )
        features = nontext_features(client, 0)
        # oracle: module clustering on the day's fixes
        assert features[6] == len(cluster_fixes([geo_a, geo_a, geo_b], 250.0)) == 2

    def test_conversation_count_is_speech_events(self, small_cohort):
        client = small_cohort[0]
        day = 1
        offset = client.profile.utc_offset_minutes * 60
        expected = sum(
            e.source == "speech"
            and int((e.timestamp + offset) // 86400.0) == day
            for e in client.events
        )
        assert nontext_features(client, day)[1] == expected

    def test_day_out_of_range(self, small_cohort):
        with pytest.raises(ValueError):
            nontext_features(small_cohort[0], 99)


class TestCohortSerialization:
    def test_round_trip(self, tmp_path, small_cohort):
        path = tmp_path / "cohort.jsonl"
        save_cohort(small_cohort, path)
        loaded = load_cohort(path)
        assert len(loaded) == len(small_cohort)
        for a, b in zip(small_cohort, loaded):
            assert a.user_id == b.user_id and a.phq9 == b.phq9
            assert a.daily_labels == b.daily_labels
            assert a.profile == b.profile
            assert len(a.events) == len(b.events)
            for ea, eb in zip(a.events, b.events):
                assert ea == eb

    def test_malformed_line_reports_position(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{broken\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 1"):
            load_cohort(path)


class TestSpecFromDict:
    def test_signal_context_parsing(self):
        spec = cohort_spec_from_dict(
            {"num_users": 3, "signal_context": ["speech", "T_D"]}
        )
        assert spec.num_users == 3
        assert spec.signal_context == ("speech", ContextLabel.T_D)

    def test_null_signal_context(self):
        spec = cohort_spec_from_dict({"signal_context": None})
        assert spec.signal_context is None

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown cohort spec"):
            cohort_spec_from_dict({"use_lasers": True})


class TestTextEventValidation:
    def test_speech_event_rejects_app_id(self):
        geo = GeoFix(latitude=0.0, longitude=0.0, timestamp=0.0)
        with pytest.raises(ValueError, match="app_id"):
            TextEvent(user_id="u", timestamp=0.0, source="speech",
                      tokens=("x",), geo=geo, motion="moving", app_id="notes")

    def test_empty_tokens_rejected(self):
        geo = GeoFix(latitude=0.0, longitude=0.0, timestamp=0.0)
        with pytest.raises(ValueError, match="token"):
            TextEvent(user_id="u", timestamp=0.0, source="speech",
                      tokens=(), geo=geo, motion="moving")
