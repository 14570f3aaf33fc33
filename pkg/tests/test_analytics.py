import math

import numpy as np
import pytest

from hawkstream.analytics import (cluster_report, effective_interaction,
                                  export_distribution, interaction_range,
                                  normalized_entropy, strength_report)
from hawkstream.inference import ClusterState, InferenceConfig, InferenceResult
from hawkstream.lang_model import ClusterWordCounts
from hawkstream.synthgen import GroundTruth, simulate_events
from hawkstream.temporal import preset
from oracles import effective_interaction_full

MINUTE, _ = preset("minute")
L = MINUTE.size


class TestEffectiveInteraction:
    def test_zero_alpha(self):
        histories = {0: [1.0, 5.0], 1: [2.0]}
        W = effective_interaction(np.zeros((2, 2, L)), histories, MINUTE, 0.01)
        assert np.all(W == 0)

    def test_clamped_below_background(self):
        # alpha * kappa peaks at 0.01 * 0.0798 << lam0
        alpha = np.full((1, 1, L), 0.01)
        W = effective_interaction(alpha, {0: [0.0, 10.0]}, MINUTE, 0.01)
        assert np.all(W == 0)

    def test_single_pair_arithmetic(self):
        alpha = np.zeros((2, 2, L))
        alpha[0, 1, 1] = 1.0
        histories = {0: [20.0], 1: [10.0]}  # lag 10 = mean of entry 1
        W = effective_interaction(alpha, histories, MINUTE, 0.01)
        peak = 1.0 / math.sqrt(2 * math.pi * 25.0)
        assert W[0, 1, 1] == pytest.approx(peak - 0.01, rel=1e-9)
        assert W[0, 1, 1] == pytest.approx(0.06979, abs=1e-5)
        W[0, 1, 1] = 0.0
        assert np.all(W == 0)

    def test_empty_target_row_zero(self):
        alpha = np.ones((2, 2, L))
        W = effective_interaction(alpha, {0: [], 1: [5.0, 15.0]}, MINUTE, 0.01)
        assert np.all(W[0] == 0)
        assert np.any(W[1] > 0)

    def test_matches_untruncated_oracle(self, rng):
        for _ in range(20):
            K = int(rng.integers(1, 4))
            histories = {c: sorted(rng.uniform(0, 300, size=rng.integers(0, 30)))
                         for c in range(K)}
            alpha = rng.uniform(0, 1, size=(K, K, L))
            lam0 = float(rng.choice([0.01, 0.001]))
            got = effective_interaction(alpha, histories, MINUTE, lam0)
            want = effective_interaction_full(alpha, histories, MINUTE, lam0)
            assert got == pytest.approx(want, abs=1e-9)

    def test_monotone_in_alpha(self, rng):
        histories = {0: sorted(rng.uniform(0, 100, size=15)),
                     1: sorted(rng.uniform(0, 100, size=15))}
        a1 = rng.uniform(0, 1, size=(2, 2, L))
        a2 = np.minimum(a1 + rng.uniform(0, 0.3, size=a1.shape), 1.0)
        W1 = effective_interaction(a1, histories, MINUTE, 0.01)
        W2 = effective_interaction(a2, histories, MINUTE, 0.01)
        assert np.all(W2 >= W1)

    def test_history_count_mismatch(self):
        with pytest.raises(ValueError):
            effective_interaction(np.zeros((2, 2, L)), {0: [1.0]}, MINUTE, 0.01)


class TestStrengthReport:
    def test_constant_alpha_weighted_mean(self, rng):
        alpha = np.full((3, 3, L), 0.4)
        W = rng.uniform(0, 1, size=(3, 3, L))
        rep = strength_report(alpha, W)
        assert rep.mean_A == pytest.approx(0.4)
        assert rep.mean_A_weighted == pytest.approx(0.4)
        assert rep.std_A_weighted == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_only_ratio_absent(self):
        W = np.zeros((2, 2, 1))
        W[0, 0, 0] = W[1, 1, 0] = 0.5
        rep = strength_report(np.full((2, 2, 1), 0.5), W)
        assert rep.intra_extra_ratio is None
        assert rep.intra_extra_ratio_std is None

    def test_zero_W_weighted_mean_absent(self):
        rep = strength_report(np.full((2, 2, 1), 0.3), np.zeros((2, 2, 1)))
        assert rep.mean_A_weighted is None
        assert rep.mean_W == 0.0

    def test_hand_built_two_by_two(self):
        # A = [[0.2, 0.4], [0.6, 0.8]], W = [[1, 2], [3, 4]] (single entry)
        alpha = np.array([0.2, 0.4, 0.6, 0.8]).reshape(2, 2, 1)
        W = np.array([1.0, 2.0, 3.0, 4.0]).reshape(2, 2, 1)
        rep = strength_report(alpha, W)
        assert rep.mean_A == pytest.approx(0.5)
        assert rep.mean_W == pytest.approx(2.5)
        # weighted: (0.2*1 + 0.4*2 + 0.6*3 + 0.8*4) / 10 = 6.0 / 10
        assert rep.mean_A_weighted == pytest.approx(0.6)
        # intra = mean(1, 4) = 2.5; extra = mean(2, 3) = 2.5
        assert rep.intra_extra_ratio == pytest.approx(1.0)

    def test_active_mask_excludes_pairs(self):
        alpha = np.zeros((2, 2, 1))
        alpha[0, 0, 0] = 0.9
        alpha[1, 1, 0] = 0.1
        W = np.zeros((2, 2, 1))
        rep = strength_report(alpha, W, active=np.array([True, False]))
        assert rep.mean_A == pytest.approx(0.9)

    def test_weighted_mean_bounded(self, rng):
        for _ in range(30):
            alpha = rng.uniform(0, 1, size=(3, 3, 2))
            W = rng.uniform(0, 1, size=(3, 3, 2))
            rep = strength_report(alpha, W)
            assert alpha.min() - 1e-12 <= rep.mean_A_weighted <= alpha.max() + 1e-12


class TestInteractionRange:
    def test_zero_tensor(self):
        assert interaction_range(np.zeros((2, 2, 4))).tolist() == [0.0] * 4

    def test_single_entry(self):
        W = np.zeros((2, 2, 4))
        W[:, :, 2] = 0.3
        out = interaction_range(W)
        assert out.tolist() == [0.0, 0.0, 0.3, 0.0]

    def test_first_entry_suppressed_by_causality(self):
        # Uniform interaction stream: the kernel entry centered at lag 0
        # loses half its mass to the t_j < t_i constraint, so its effective
        # interaction is below the interior entries.
        alpha = np.full((2, 2, L), 0.05)
        truth = GroundTruth(alpha=alpha, kernel=MINUTE,
                            background_rates=np.array([0.3, 0.3]),
                            topic_word_probs=np.full((2, 10), 0.1),
                            horizon=2000.0)
        events = simulate_events(truth, np.random.default_rng(17))
        histories = {0: [t for t, k in events if k == 0],
                     1: [t for t, k in events if k == 1]}
        W = effective_interaction(alpha, histories, MINUTE, 1e-4)
        rng_profile = interaction_range(W)
        assert rng_profile[0] < min(rng_profile[1:L - 1])


class TestNormalizedEntropy:
    def test_uniform_is_one(self):
        assert normalized_entropy([5, 5, 5, 5]) == pytest.approx(1.0)

    def test_single_category_zero(self):
        assert normalized_entropy([7]) == 0.0
        assert normalized_entropy([7, 0, 0]) == pytest.approx(0.0)

    def test_three_one_split(self):
        expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25)) / math.log(2)
        assert normalized_entropy([3, 1]) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.8113, abs=1e-4)

    def test_explicit_category_space(self):
        # two nonzero counts inside a 4-category space normalize by log 4
        h2 = normalized_entropy([1, 1])
        h4 = normalized_entropy([1, 1], n_categories=4)
        assert h4 == pytest.approx(h2 * math.log(2) / math.log(4))

    def test_all_zero_raises(self):
        with pytest.raises(ValueError):
            normalized_entropy([0, 0])

    def test_permutation_and_scale_invariance(self, rng):
        counts = rng.integers(1, 50, size=6)
        h = normalized_entropy(counts)
        assert normalized_entropy(counts[::-1]) == pytest.approx(h, rel=1e-12)
        assert normalized_entropy(counts * 7) == pytest.approx(h, rel=1e-12)
        assert 0.0 <= h <= 1.0


def make_result(cluster_specs, n_channels=3):
    """cluster_specs: list of (word_counts, channel_counts) per cluster."""
    cfg = InferenceConfig(kernel=MINUTE, lam0=0.01, theta0=0.01, r=1.0,
                          vocab_size=50)
    clusters = {}
    for cid, (wc, cc) in enumerate(cluster_specs):
        cs = ClusterState()
        cs.words = ClusterWordCounts(counts=dict(wc), total=sum(wc.values()),
                                     doc_count=sum(cc.values()),
                                     channel_counts=dict(cc))
        clusters[cid] = cs
    ids = sorted(clusters)
    return InferenceResult(cluster_ids=ids, clusters=clusters, allocations=[],
                           alpha=np.zeros((len(ids), len(ids), L)), config=cfg,
                           runtime_seconds=0.0,
                           n_documents=sum(sum(cc.values()) for _, cc in cluster_specs),
                           n_channels=n_channels)


class TestClusterReport:
    def test_empty(self):
        rep = cluster_report(make_result([]))
        assert rep.k == 0 and rep.top_clusters == []
        assert rep.s_text_top is None

    def test_singleton_clusters(self):
        specs = [({0: 3}, {0: 1}), ({1: 3}, {1: 1}), ({2: 3}, {2: 1})]
        rep = cluster_report(make_result(specs))
        assert rep.k == 3
        assert rep.mean_population == pytest.approx(1.0)

    def test_single_channel_cluster_entropy_zero(self):
        rep = cluster_report(make_result([({0: 5, 1: 5}, {2: 4})]))
        assert rep.s_sub_top == pytest.approx(0.0)
        assert rep.top_clusters[0].channel_entropy == 0.0

    def test_tie_at_boundary_broken_by_lower_id(self):
        specs = [({0: 3}, {0: 2})] * 4
        rep = cluster_report(make_result(specs), top_k=2)
        assert [s.cluster_id for s in rep.top_clusters] == [0, 1]

    def test_entropy_values(self):
        rep = cluster_report(make_result([({0: 3, 1: 1}, {0: 2, 1: 2})],
                                         n_channels=2))
        assert rep.top_clusters[0].text_entropy == pytest.approx(
            normalized_entropy([3, 1]))
        assert rep.top_clusters[0].channel_entropy == pytest.approx(1.0)


class TestExportDistribution:
    def test_zero_tensor_empty_histogram(self, tmp_path):
        path = tmp_path / "dist.csv"
        values = export_distribution(np.zeros((2, 2, 3)), path)
        assert values.size == 0
        assert path.read_text().strip() == "bin_low,bin_high,count"
        assert (tmp_path / "dist_values.csv").read_text().strip() == "value"

    def test_constant_entries_single_bin(self, tmp_path):
        W = np.full((10, 10, 1), 0.25)
        path = tmp_path / "dist.csv"
        export_distribution(W, path)
        lines = path.read_text().strip().splitlines()[1:]
        assert sum(int(l.split(",")[2]) for l in lines) == 100

    def test_counts_conserved(self, tmp_path, rng):
        W = rng.uniform(0, 1, size=(4, 4, 5))
        W[W < 0.3] = 0.0
        path = tmp_path / "dist.csv"
        values = export_distribution(W, path)
        n_nonzero = int((W > 0).sum())
        assert values.size == n_nonzero
        lines = path.read_text().strip().splitlines()[1:]
        assert sum(int(l.split(",")[2]) for l in lines) == n_nonzero
        vlines = (tmp_path / "dist_values.csv").read_text().strip().splitlines()[1:]
        assert len(vlines) == n_nonzero
        assert [float(v) for v in vlines] == sorted(W[W > 0].ravel())
