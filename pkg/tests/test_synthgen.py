import json
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from hawkstream.synthgen import (GroundTruth, emit_documents, load_scenario,
                                 read_labels, scenario_from_config,
                                 simulate_events, write_labels)
from hawkstream.temporal import preset

MINUTE, _ = preset("minute")


def make_truth(K=1, alpha_diag=0.0, entry=1, rate=0.1, horizon=1000.0,
               words_per_topic=10, doc_length=None):
    alpha = np.zeros((K, K, MINUTE.size))
    alpha[np.arange(K), np.arange(K), entry] = alpha_diag
    V = K * words_per_topic
    probs = np.zeros((K, V))
    for k in range(K):
        probs[k, k * words_per_topic:(k + 1) * words_per_topic] = 1.0 / words_per_topic
    return GroundTruth(alpha=alpha, kernel=MINUTE,
                       background_rates=np.full(K, rate),
                       topic_word_probs=probs, horizon=horizon,
                       doc_length=doc_length or {"kind": "constant", "value": 5})


class TestSimulateEvents:
    def test_zero_horizon_empty(self, rng):
        truth = make_truth(horizon=0.0)
        assert simulate_events(truth, rng) == []

    def test_unstable_refused(self, rng):
        truth = make_truth(K=2, alpha_diag=1.0, rate=0.1)
        assert truth.spectral_radius() >= 1.0
        with pytest.raises(ValueError):
            simulate_events(truth, rng)

    def test_pure_poisson_counts(self, rng):
        # alpha = 0: each topic is homogeneous Poisson(rate * T)
        truth = make_truth(K=3, alpha_diag=0.0, rate=0.2, horizon=2000.0)
        events = simulate_events(truth, rng)
        mean = 0.2 * 2000.0
        for k in range(3):
            count = sum(1 for _, topic in events if topic == k)
            assert abs(count - mean) < 4 * math.sqrt(mean)

    def test_branching_identity(self):
        # E[total] ~= immigrants / (1 - branching ratio)
        truth = make_truth(K=1, alpha_diag=0.5, entry=1, rate=0.1,
                           horizon=1000.0)
        branching = 0.5 * truth.kernel.integral(0.0, 1e9)[1]
        expected = 0.1 * 1000.0 / (1.0 - branching)
        counts = [len(simulate_events(truth, np.random.default_rng(1000 + s)))
                  for s in range(50)]
        assert np.mean(counts) == pytest.approx(expected, rel=0.10)

    def test_sorted_and_in_range(self, rng):
        truth = make_truth(K=2, alpha_diag=0.6, rate=0.1, horizon=500.0)
        events = simulate_events(truth, rng)
        times = [t for t, _ in events]
        assert times == sorted(times)
        assert all(0.0 <= t < 500.0 for t in times)
        assert all(topic in (0, 1) for _, topic in events)

    def test_deterministic_under_seed(self):
        truth = make_truth(K=2, alpha_diag=0.6, rate=0.1, horizon=500.0)
        a = simulate_events(truth, np.random.default_rng(7))
        b = simulate_events(truth, np.random.default_rng(7))
        assert a == b

    def test_excitation_raises_counts(self):
        quiet = make_truth(K=1, alpha_diag=0.0, rate=0.1, horizon=3000.0)
        excited = make_truth(K=1, alpha_diag=0.8, rate=0.1, horizon=3000.0)
        n_quiet = len(simulate_events(quiet, np.random.default_rng(3)))
        n_excited = len(simulate_events(excited, np.random.default_rng(3)))
        assert n_excited > n_quiet


class TestEmitDocuments:
    def test_disjoint_vocabularies_identify_topic(self, rng):
        truth = make_truth(K=3, rate=0.2, horizon=500.0, words_per_topic=10)
        events = simulate_events(truth, rng)
        docs, labels, vocab, channels = emit_documents(events, truth, rng)
        assert len(docs) == len(labels) == len(events)
        assert vocab.size == 30
        assert channels == ["channel00", "channel01", "channel02"]
        for doc, lab in zip(docs, labels):
            for v in doc.counts:
                assert v // 10 == lab
            assert doc.channel == lab

    def test_constant_length_three(self, rng):
        truth = make_truth(rate=0.3, horizon=300.0,
                           doc_length={"kind": "constant", "value": 3})
        events = simulate_events(truth, rng)
        docs, _, _, _ = emit_documents(events, truth, rng)
        assert docs and all(d.token_total == 3 for d in docs)

    def test_length_below_three_rejected(self, rng):
        truth = make_truth(horizon=100.0,
                           doc_length={"kind": "constant", "value": 2})
        events = [(1.0, 0)]
        with pytest.raises(ValueError):
            emit_documents(events, truth, rng)

    def test_word_frequencies_match_topic_distribution(self, rng):
        truth = make_truth(K=1, words_per_topic=10,
                           doc_length={"kind": "constant", "value": 5})
        events = [(float(i), 0) for i in range(2000)]
        docs, _, _, _ = emit_documents(events, truth, rng)
        observed = np.zeros(10)
        for d in docs:
            for v, n in d.counts.items():
                observed[v] += n
        _, p = chisquare(observed)
        assert p > 0.01

    def test_stream_invariants(self, rng):
        truth = make_truth(K=2, alpha_diag=0.5, rate=0.2, horizon=400.0)
        events = simulate_events(truth, rng)
        docs, _, _, _ = emit_documents(events, truth, rng)
        times = [d.time for d in docs]
        assert times == sorted(times)
        assert all(d.token_total >= 3 for d in docs)
        assert [d.id for d in docs] == list(range(len(docs)))


class TestScenarioConfig:
    def test_alpha_assembly(self):
        truth = scenario_from_config({
            "topics": 3, "kernel": "minute", "self_alpha": 0.7,
            "self_alpha_entry": 2, "cross_alpha": 0.1, "horizon": 100.0,
        })
        assert truth.alpha.shape == (3, 3, 9)
        assert truth.alpha[0, 0, 2] == 0.7
        assert truth.alpha[0, 1, 2] == 0.1
        assert truth.alpha[0, 1, 1] == 0.0

    def test_vocab_overlap(self):
        truth = scenario_from_config({
            "topics": 2, "words_per_topic": 10, "vocab_overlap": 4,
            "horizon": 10.0,
        })
        assert truth.vocab_size == 16
        shared = (truth.topic_word_probs[0] > 0) & (truth.topic_word_probs[1] > 0)
        assert shared.sum() == 4

    def test_overlap_too_large_rejected(self):
        with pytest.raises(ValueError):
            scenario_from_config({"topics": 2, "words_per_topic": 10,
                                  "vocab_overlap": 10, "horizon": 10.0})

    def test_explicit_alpha_shape_checked(self):
        with pytest.raises(ValueError):
            scenario_from_config({"topics": 2, "kernel": "minute",
                                  "alpha": [[0.5]], "horizon": 10.0})

    def test_shipped_default_scenario(self, default_scenario_path):
        truth = load_scenario(default_scenario_path)
        assert truth.n_topics == 5
        assert truth.vocab_size == 250
        assert truth.kernel == MINUTE
        assert truth.spectral_radius() < 1.0
        # diagonal excitation only
        diag = truth.alpha[np.arange(5), np.arange(5), :]
        assert np.all(diag.sum(axis=1) == 0.8)
        off = truth.alpha.sum() - diag.sum()
        assert off == 0.0

    def test_labels_roundtrip(self, tmp_path):
        labels = [0, 2, 1, 1, 0]
        path = tmp_path / "labels.csv"
        write_labels(path, labels)
        assert read_labels(path) == labels
