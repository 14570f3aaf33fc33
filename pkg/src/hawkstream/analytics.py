"""Post-hoc interaction analytics.

Turns an inference result (interaction tensor + per-cluster event
histories) into the effective-interaction tensor, strength and range
summaries, entropy-based cluster summaries, and distribution exports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .temporal import RBFKernel


def effective_interaction(alpha: np.ndarray, histories: Mapping[int, Sequence[float]],
                          kernel: RBFKernel, lam0: float,
                          cluster_ids: Optional[Sequence[int]] = None) -> np.ndarray:
    """Effective interaction tensor W (K x K x L).

    Entry (i, j, l) averages, over target cluster i's events, the summed
    excess of alpha[i,j,l] * kernel_l(lag) above the background lam0
    (clamped at zero) contributed by cluster j's earlier events. Rows of
    clusters without events are zero. Pair sums are truncated at the lag
    beyond which the kernel cannot exceed lam0, which is exact for weights
    bounded by 1.
    """
    if cluster_ids is None:
        cluster_ids = sorted(histories)
    K = alpha.shape[0]
    L = alpha.shape[2]
    if len(cluster_ids) != K:
        raise ValueError(f"{len(cluster_ids)} histories for K={K}")

    cutoff = kernel.cutoff_for(max(lam0, 1e-13))
    times = {cid: np.asarray(histories[cid], dtype=float) for cid in cluster_ids}
    W = np.zeros((K, K, L))
    for i, ci in enumerate(cluster_ids):
        Hi = times[ci]
        if Hi.size == 0:
            continue
        for j, cj in enumerate(cluster_ids):
            a = alpha[i, j]
            if not np.any(a > 0):
                continue
            Hj = times[cj]
            if Hj.size == 0:
                continue
            acc = np.zeros(L)
            for t in Hi:
                lo = np.searchsorted(Hj, t - cutoff, side="left")
                hi = np.searchsorted(Hj, t, side="left")
                lags = t - Hj[lo:hi]
                lags = lags[lags > 0]
                if lags.size:
                    kappa = kernel.evaluate_many(lags)  # (n, L)
                    acc += np.maximum(a[None, :] * kappa - lam0, 0.0).sum(axis=0)
            W[i, j] = acc / Hi.size
    return W


@dataclass
class StrengthReport:
    mean_A: float
    std_A: float
    mean_W: float
    std_W: float
    mean_A_weighted: Optional[float]
    std_A_weighted: Optional[float]
    intra_extra_ratio: Optional[float]
    intra_extra_ratio_std: Optional[float]


def strength_report(alpha: np.ndarray, W: np.ndarray,
                    active: Optional[np.ndarray] = None) -> StrengthReport:
    """Summary statistics of interaction strength over active cluster pairs.

    ``active`` is a per-cluster boolean mask (clusters with >= 1 event);
    pairs where either side is inactive are excluded. The weighted mean of
    alpha uses W as confidence weights and is absent when W is all zero;
    the intra/extra ratio is absent when the off-diagonal block is zero.
    """
    K = alpha.shape[0]
    if active is None:
        active = np.ones(K, dtype=bool)
    pair_mask = np.outer(active, active)

    a = alpha[pair_mask]  # (n_pairs, L)
    w = W[pair_mask]
    mean_A = float(a.mean()) if a.size else 0.0
    std_A = float(a.std()) if a.size else 0.0
    mean_W = float(w.mean()) if w.size else 0.0
    std_W = float(w.std()) if w.size else 0.0

    wsum = w.sum()
    if wsum > 0:
        mean_A_weighted = float((a * w).sum() / wsum)
        var = float((w * (a - mean_A_weighted) ** 2).sum() / wsum)
        std_A_weighted = math.sqrt(max(var, 0.0))
    else:
        mean_A_weighted = None
        std_A_weighted = None

    diag = np.eye(K, dtype=bool) & pair_mask
    off = ~np.eye(K, dtype=bool) & pair_mask
    intra = W[diag]
    extra = W[off]
    if extra.size and intra.size and extra.mean() > 0:
        ratio = float(intra.mean() / extra.mean())
        ratio_std = float(intra.std() / extra.mean())
    else:
        ratio = None
        ratio_std = None
    return StrengthReport(mean_A, std_A, mean_W, std_W,
                          mean_A_weighted, std_A_weighted, ratio, ratio_std)


def interaction_range(W: np.ndarray, active: Optional[np.ndarray] = None) -> np.ndarray:
    """Mean effective interaction per kernel entry, averaged over cluster
    pairs (restricted to active pairs when a mask is given)."""
    K = W.shape[0]
    if K == 0:
        return np.zeros(W.shape[2])
    if active is None:
        active = np.ones(K, dtype=bool)
    pair_mask = np.outer(active, active)
    w = W[pair_mask]
    if w.size == 0:
        return np.zeros(W.shape[2])
    return w.mean(axis=0)


def normalized_entropy(counts: Sequence[float], n_categories: Optional[int] = None) -> float:
    """Shannon entropy of a count vector divided by log of the category
    count. With an explicit ``n_categories``, zero-count categories dilute
    the normalizer; otherwise only the given entries define it. A single
    category yields 0 by convention."""
    arr = np.asarray(counts, dtype=float)
    total = arr.sum()
    if total <= 0:
        raise ValueError("entropy of an all-zero count vector is undefined")
    if n_categories is None:
        n_categories = arr.size
    if n_categories < arr.size:
        raise ValueError("n_categories smaller than the count vector")
    if n_categories == 1:
        return 0.0
    p = arr[arr > 0] / total
    h = -float((p * np.log(p)).sum())
    return h / math.log(n_categories)


@dataclass
class ClusterSummary:
    cluster_id: int
    size: int
    text_entropy: float
    channel_entropy: float
    top_words: list


@dataclass
class ClusterReport:
    k: int
    mean_population: float
    std_population: float
    s_text_top: Optional[float]
    s_text_top_std: Optional[float]
    s_sub_top: Optional[float]
    s_sub_top_std: Optional[float]
    top_clusters: list


def cluster_report(result, top_k: int = 20, top_words: int = 10) -> ClusterReport:
    """Cluster-level summary of an inference result.

    Entropy means are taken over the ``top_k`` most populated clusters
    (ties at the boundary broken by lower cluster id). Text entropy is over
    a cluster's observed vocabulary; channel entropy is over the full
    channel space of the run.
    """
    populated = [(cid, result.clusters[cid]) for cid in result.cluster_ids
                 if result.clusters[cid].words.doc_count > 0]
    if not populated:
        return ClusterReport(0, 0.0, 0.0, None, None, None, None, [])

    sizes = np.asarray([cs.words.doc_count for _, cs in populated], dtype=float)
    ranked = sorted(populated, key=lambda p: (-p[1].words.doc_count, p[0]))[:top_k]

    n_channels = max(result.n_channels, 1)
    summaries = []
    for cid, cs in ranked:
        word_counts = list(cs.words.counts.values())
        text_h = normalized_entropy(word_counts) if word_counts else 0.0
        chan_counts = [cs.words.channel_counts.get(c, 0) for c in range(n_channels)]
        chan_h = normalized_entropy(chan_counts, n_categories=n_channels)
        top = sorted(cs.words.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_words]
        summaries.append(ClusterSummary(cid, cs.words.doc_count, text_h, chan_h, top))

    text = np.asarray([s.text_entropy for s in summaries])
    chan = np.asarray([s.channel_entropy for s in summaries])
    return ClusterReport(
        k=len(populated),
        mean_population=float(sizes.mean()),
        std_population=float(sizes.std()),
        s_text_top=float(text.mean()),
        s_text_top_std=float(text.std()),
        s_sub_top=float(chan.mean()),
        s_sub_top_std=float(chan.std()),
        top_clusters=summaries,
    )


def export_distribution(W: np.ndarray, path: Path, n_bins: int = 30) -> np.ndarray:
    """Write a log-spaced histogram CSV of the nonzero entries of W.

    Columns are (bin_low, bin_high, count); the raw nonzero values are
    written alongside with a ``_values.csv`` suffix. Returns the nonzero
    values."""
    path = Path(path)
    values = np.sort(W[W > 0].ravel())
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_low,bin_high,count\n")
        if values.size:
            lo, hi = values[0], values[-1]
            if hi <= lo:
                edges = np.asarray([lo * 0.999, lo * 1.001]) if lo > 0 else np.asarray([0.0, 1.0])
            else:
                edges = np.logspace(math.log10(lo), math.log10(hi), n_bins + 1)
                edges[0] *= 0.999  # guard against round-off at the boundaries
                edges[-1] *= 1.001
            counts, edges = np.histogram(values, bins=edges)
            for a, b, n in zip(edges[:-1], edges[1:], counts):
                fh.write(f"{float(a)!r},{float(b)!r},{int(n)}\n")
    values_path = path.with_name(path.stem + "_values.csv")
    with open(values_path, "w", encoding="utf-8") as fh:
        fh.write("value\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")
    return values
