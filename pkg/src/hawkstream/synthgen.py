"""Ground-truth stream generator.

Samples labeled event streams from a fully specified multivariate
self-exciting process (known topics, interaction tensor, kernel) and dresses
the events with bags of words, so the inference engine and the analytics can
be validated against known truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Document, Vocabulary
from .temporal import RBFKernel, kernel_from_dict, preset


@dataclass
class GroundTruth:
    """A fully specified generative scenario.

    ``alpha`` is K x K x L (target, source, kernel entry); topic word
    probabilities are rows of a K x V matrix; ``background_rates`` are
    immigrant intensities in events/minute per topic.
    """

    alpha: np.ndarray
    kernel: RBFKernel
    background_rates: np.ndarray
    topic_word_probs: np.ndarray
    horizon: float
    doc_length: dict = field(default_factory=lambda: {"kind": "constant", "value": 5})
    topic_channel_probs: Optional[np.ndarray] = None  # rows: topic -> channel law

    @property
    def n_topics(self) -> int:
        return self.alpha.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.topic_word_probs.shape[1]

    def branching_matrix(self) -> np.ndarray:
        """Expected direct offspring per event; Gaussian entries integrate
        to ~1 on their support, so the sum over kernel entries is used."""
        return self.alpha.sum(axis=2)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.branching_matrix()))))


def simulate_events(truth: GroundTruth, rng: np.random.Generator,
                    ) -> list[tuple[float, int]]:
    """Sample a labeled event stream on [0, horizon] by thinning.

    The rejection bound is the background total plus, for each event still
    inside the numeric horizon, its largest possible excitation (kernel
    peaks); the bound is refreshed as events enter and leave the window.
    Refuses to simulate unstable scenarios.
    """
    rho = truth.spectral_radius()
    if rho >= 1.0:
        raise ValueError(f"unstable scenario: spectral radius {rho:.3f} >= 1")

    kernel = truth.kernel
    K = truth.n_topics
    sig = np.asarray(kernel.sigmas)
    peaks = 1.0 / np.sqrt(2.0 * np.pi * sig ** 2)  # (L,)
    # Max excitation any single event of source topic c' can add to sum_c lambda_c.
    peak_excite = np.einsum("kjl,l->j", truth.alpha, peaks)  # (K,)
    bg = np.asarray(truth.background_rates, dtype=float)
    bg_total = float(bg.sum())
    horizon = kernel.numeric_horizon

    times: list[float] = []
    topics: list[int] = []
    window_start = 0  # index of first event still inside the numeric horizon
    t = 0.0
    while True:
        while window_start < len(times) and times[window_start] < t - horizon:
            window_start += 1
        recent = topics[window_start:]
        bound = bg_total + float(peak_excite[recent].sum()) if recent else bg_total
        if bound <= 0:
            break
        t += rng.exponential(1.0 / bound)
        if t >= truth.horizon:
            break
        while window_start < len(times) and times[window_start] < t - horizon:
            window_start += 1
        lam = bg.copy()
        if window_start < len(times):
            lags = t - np.asarray(times[window_start:])
            kappa = kernel.evaluate_many(lags)  # (n, L)
            src = np.asarray(topics[window_start:])
            lam += np.einsum("knl,nl->k", truth.alpha[:, src, :], kappa)
        total = float(lam.sum())
        if rng.uniform(0.0, bound) <= total:
            topic = int(rng.choice(K, p=lam / total))
            times.append(t)
            topics.append(topic)
    return list(zip(times, topics))


def _draw_length(law: dict, rng: np.random.Generator) -> int:
    kind = law.get("kind", "constant")
    if kind == "constant":
        n = int(law["value"])
    elif kind == "poisson":
        n = 3 + int(rng.poisson(max(float(law["mean"]) - 3.0, 0.0)))
    else:
        raise ValueError(f"unknown doc length law {kind!r}")
    if n < 3:
        raise ValueError(f"document length {n} below minimum of 3")
    return n


def emit_documents(events: Sequence[tuple[float, int]], truth: GroundTruth,
                   rng: np.random.Generator,
                   ) -> tuple[list[Document], list[int], Vocabulary, list[str]]:
    """Dress labeled events with bags of words and channels.

    Returns (documents, true topic labels, vocabulary, channel names).
    Without an explicit topic->channel law, each topic maps to its own
    channel.
    """
    V = truth.vocab_size
    vocab = Vocabulary.from_words(f"word{v:05d}" for v in range(V))
    if truth.topic_channel_probs is not None:
        n_channels = truth.topic_channel_probs.shape[1]
    else:
        n_channels = truth.n_topics
    channels = [f"channel{c:02d}" for c in range(n_channels)]

    docs: list[Document] = []
    labels: list[int] = []
    for i, (t, topic) in enumerate(events):
        n = _draw_length(truth.doc_length, rng)
        words = rng.choice(V, size=n, p=truth.topic_word_probs[topic])
        counts: dict[int, int] = {}
        for w in words:
            counts[int(w)] = counts.get(int(w), 0) + 1
        if truth.topic_channel_probs is not None:
            channel = int(rng.choice(n_channels, p=truth.topic_channel_probs[topic]))
        else:
            channel = topic
        docs.append(Document(id=i, time=float(t), counts=counts,
                             channel=channel, token_total=n))
        labels.append(topic)
    return docs, labels, vocab, channels


# ---------------------------------------------------------------------------
# Scenario configuration

def scenario_from_config(cfg: dict) -> GroundTruth:
    """Build a :class:`GroundTruth` from a plain configuration dict.

    Topic vocabularies are consecutive word blocks of ``words_per_topic``
    words, shifted so that adjacent topics share ``vocab_overlap`` words
    (0 means disjoint). ``alpha`` may be given explicitly as a nested list,
    or assembled from ``self_alpha`` (diagonal, on ``self_alpha_entry``) and
    ``cross_alpha`` (off-diagonal, same entry).
    """
    K = int(cfg["topics"])
    kspec = cfg.get("kernel", "minute")
    if isinstance(kspec, str):
        kernel, _ = preset(kspec)
    else:
        kernel = kernel_from_dict(kspec)
    L = kernel.size

    if "alpha" in cfg:
        alpha = np.asarray(cfg["alpha"], dtype=float)
        if alpha.shape != (K, K, L):
            raise ValueError(f"alpha shape {alpha.shape} != {(K, K, L)}")
    else:
        alpha = np.zeros((K, K, L))
        entry = int(cfg.get("self_alpha_entry", 1))
        alpha[np.arange(K), np.arange(K), entry] = float(cfg.get("self_alpha", 0.0))
        cross = float(cfg.get("cross_alpha", 0.0))
        if cross:
            mask = ~np.eye(K, dtype=bool)
            sub = alpha[:, :, entry]
            sub[mask] = cross
            alpha[:, :, entry] = sub

    words_per_topic = int(cfg.get("words_per_topic", 50))
    overlap = int(cfg.get("vocab_overlap", 0))
    stride = words_per_topic - overlap
    if stride <= 0:
        raise ValueError("vocab_overlap must be smaller than words_per_topic")
    V = stride * (K - 1) + words_per_topic
    probs = np.zeros((K, V))
    for k in range(K):
        probs[k, k * stride:k * stride + words_per_topic] = 1.0 / words_per_topic

    return GroundTruth(
        alpha=alpha,
        kernel=kernel,
        background_rates=np.full(K, float(cfg.get("background_rate", 0.05))),
        topic_word_probs=probs,
        horizon=float(cfg["horizon"]),
        doc_length=dict(cfg.get("doc_length", {"kind": "constant", "value": 5})),
    )


def load_scenario(path: Path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_config(json.load(fh))


def write_labels(path: Path, labels: Sequence[int]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("doc_id,topic\n")
        for i, lab in enumerate(labels):
            fh.write(f"{i},{lab}\n")


def read_labels(path: Path) -> list[int]:
    labels = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            line = line.strip()
            if line:
                labels.append(int(line.split(",")[1]))
    return labels
