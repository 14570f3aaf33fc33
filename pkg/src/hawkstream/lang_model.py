"""Collapsed Dirichlet-Multinomial language model over cluster word counts.

Each cluster accumulates word counts; a new document is scored by the
posterior predictive of its bag of words given those counts and a symmetric
Dirichlet concentration. All Gamma arithmetic is done in log space
(counts can reach 1e5, so Gamma itself would overflow).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.special import gammaln

from .corpus import Document


@dataclass
class ThetaPrior:
    """Symmetric per-word Dirichlet concentration over a vocabulary of size V.

    The total concentration of the Dirichlet is V * theta0; the leading
    Gamma ratio of the marginal uses that summed value.
    """

    theta0: float
    vocab_size: int

    def __post_init__(self):
        if self.theta0 <= 0:
            raise ValueError(f"theta0 must be positive, got {self.theta0}")
        if self.vocab_size <= 0:
            raise ValueError(f"vocab_size must be positive, got {self.vocab_size}")


@dataclass
class ClusterWordCounts:
    """Accumulated word counts of one cluster (sparse)."""

    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0
    doc_count: int = 0
    channel_counts: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "ClusterWordCounts":
        return ClusterWordCounts(dict(self.counts), self.total,
                                 self.doc_count, dict(self.channel_counts))


def doc_log_likelihood(doc: Document, cluster: ClusterWordCounts,
                       prior: ThetaPrior) -> float:
    """Log posterior predictive of ``doc``'s bag of words under ``cluster``.

    Dirichlet-Multinomial marginal: only words present in the document
    contribute (all other factors cancel). Raises on out-of-vocabulary
    word indices.
    """
    theta0 = prior.theta0
    total_conc = prior.vocab_size * theta0
    logp = gammaln(cluster.total + total_conc) \
        - gammaln(cluster.total + doc.token_total + total_conc)
    for v, k in doc.counts.items():
        if v >= prior.vocab_size or v < 0:
            raise ValueError(f"word index {v} outside vocabulary of size {prior.vocab_size}")
        n_cv = cluster.counts.get(v, 0)
        # Rising factorial in log space; k is small (document word count).
        for j in range(k):
            logp += math.log(n_cv + theta0 + j)
    return float(logp)


def update(cluster: ClusterWordCounts, doc: Document) -> ClusterWordCounts:
    """Fold a document into a cluster's counts (in place); returns the cluster."""
    for v, k in doc.counts.items():
        cluster.counts[v] = cluster.counts.get(v, 0) + k
    cluster.total += doc.token_total
    cluster.doc_count += 1
    cluster.channel_counts[doc.channel] = cluster.channel_counts.get(doc.channel, 0) + 1
    return cluster
