"""Sequential inference engine.

Processes a curated document stream online. For each document, every
particle scores all temporally active clusters (Dirichlet-Multinomial text
likelihood times a powered self-exciting temporal prior), samples an
allocation, and reweights by the document marginal. Interaction weights
between cluster pairs are re-estimated lazily by self-normalized importance
sampling over the pairwise point-process likelihood.
"""
from __future__ import annotations

import json
import logging
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .corpus import Document
from .lang_model import ClusterWordCounts, ThetaPrior, doc_log_likelihood, update
from .temporal import RBFKernel, kernel_to_dict

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
RESULT_VERSION = 1


@dataclass
class InferenceConfig:
    kernel: RBFKernel
    lam0: float
    theta0: float
    r: float
    vocab_size: int
    particles: int = 8
    alpha_samples: int = 100_000
    seed: int = 0
    resample_every: int = 2
    alpha_refresh_every: int = 50
    max_estimate_events: int = 400
    checkpoint_every: int = 0
    kernel_name: str = "custom"

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be >= 1")
        if self.alpha_samples < 1:
            raise ValueError("alpha_samples must be >= 1")
        if self.lam0 <= 0:
            raise ValueError("lam0 must be positive")
        if self.r < 0:
            raise ValueError("r must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "kernel": kernel_to_dict(self.kernel),
            "kernel_name": self.kernel_name,
            "lam0": self.lam0,
            "theta0": self.theta0,
            "r": self.r,
            "vocab_size": self.vocab_size,
            "particles": self.particles,
            "alpha_samples": self.alpha_samples,
            "seed": self.seed,
            "resample_every": self.resample_every,
            "alpha_refresh_every": self.alpha_refresh_every,
            "max_estimate_events": self.max_estimate_events,
        }


@dataclass
class ClusterState:
    """One cluster inside one particle.

    ``ksums`` caches, per own event, the kernel sums against each source
    cluster at that event's time; these are the design rows of the pairwise
    likelihood used to re-estimate ``alpha``. ``alpha`` maps source cluster
    id -> interaction weight vector (L,). Rows stay empty (treated as zero)
    until the first refresh.
    """

    words: ClusterWordCounts = field(default_factory=ClusterWordCounts)
    times: list = field(default_factory=list)
    ksums: list = field(default_factory=list)
    alpha: dict = field(default_factory=dict)
    events_since_refresh: int = 0
    refreshed: bool = False

    def last_time(self) -> float:
        return self.times[-1] if self.times else float("-inf")

    def copy(self) -> "ClusterState":
        # Cached rows and alpha vectors are never mutated in place, so
        # sharing the arrays across clones is safe.
        return ClusterState(self.words.copy(), list(self.times), list(self.ksums),
                            dict(self.alpha), self.events_since_refresh, self.refreshed)


@dataclass
class Particle:
    clusters: dict = field(default_factory=dict)  # cluster id -> ClusterState
    weight: float = 1.0
    allocations: list = field(default_factory=list)  # (doc id, cluster id)
    next_cluster_id: int = 0

    def clone(self) -> "Particle":
        return Particle({cid: cs.copy() for cid, cs in self.clusters.items()},
                        self.weight, list(self.allocations), self.next_cluster_id)

    def last_time(self) -> float:
        return max((cs.last_time() for cs in self.clusters.values()),
                   default=float("-inf"))


@dataclass
class InferenceResult:
    cluster_ids: list
    clusters: dict
    allocations: list
    alpha: np.ndarray
    config: InferenceConfig
    runtime_seconds: float
    n_documents: int
    n_channels: int

    @property
    def k(self) -> int:
        return len(self.cluster_ids)

    def histories(self) -> dict:
        return {cid: list(self.clusters[cid].times) for cid in self.cluster_ids}


# ---------------------------------------------------------------------------
# Per-document scoring

def _kernel_sums(t: float, particle: Particle, kernel: RBFKernel) -> dict:
    """Kernel sum vector per source cluster over its events strictly before
    ``t`` and inside the numeric horizon."""
    horizon = kernel.numeric_horizon
    sums: dict[int, np.ndarray] = {}
    for cid, cs in particle.clusters.items():
        times = cs.times
        # times are nondecreasing; scan the recent tail only
        lags = []
        for ti in reversed(times):
            lag = t - ti
            if lag > horizon:
                break
            if lag > 0:
                lags.append(lag)
        if lags:
            sums[cid] = kernel.evaluate_many(np.asarray(lags)).sum(axis=0)
    return sums


def _active_ids(t: float, particle: Particle, kernel: RBFKernel) -> list:
    cutoff = t - kernel.support_horizon
    return [cid for cid in sorted(particle.clusters)
            if particle.clusters[cid].last_time() >= cutoff]


def _unnormalized_prior(t: float, particle: Particle, cfg: InferenceConfig,
                        ksums: dict) -> np.ndarray:
    """Entries follow the order of sorted cluster ids, plus the new-cluster
    slot last. Frozen clusters get 0; the new-cluster entry is lam0 and is
    deliberately not raised to the power r."""
    ids = sorted(particle.clusters)
    active = set(_active_ids(t, particle, cfg.kernel))
    prior = np.zeros(len(ids) + 1)
    for pos, cid in enumerate(ids):
        if cid not in active:
            continue
        if cfg.r == 0.0:
            prior[pos] = 1.0
            continue
        cs = particle.clusters[cid]
        lam = 0.0
        for src, vec in ksums.items():
            row = cs.alpha.get(src)
            if row is not None:
                lam += float(row @ vec)
        prior[pos] = lam ** cfg.r if lam > 0 else 0.0
    prior[-1] = cfg.lam0
    return prior


def temporal_prior(t: float, particle: Particle, cfg: InferenceConfig) -> np.ndarray:
    """Unnormalized temporal prior over existing clusters (sorted by id)
    plus the new-cluster slot; the shared denominator is omitted because it
    cancels in the normalization."""
    ksums = _kernel_sums(t, particle, cfg.kernel)
    return _unnormalized_prior(t, particle, cfg, ksums)


def _allocation_scores(doc: Document, particle: Particle, cfg: InferenceConfig,
                       ksums: Optional[dict] = None,
                       ) -> tuple[list, np.ndarray, float]:
    """Posterior allocation probabilities and log document marginal.

    Returns (sorted cluster ids, probability vector over ids + new slot,
    log of the document marginal likelihood under the particle).
    """
    if ksums is None:
        ksums = _kernel_sums(doc.time, particle, cfg.kernel)
    ids = sorted(particle.clusters)
    prior = _unnormalized_prior(doc.time, particle, cfg, ksums)
    theta = ThetaPrior(cfg.theta0, cfg.vocab_size)

    logpost = np.full(len(ids) + 1, -np.inf)
    log_text = np.full(len(ids) + 1, -np.inf)
    for pos, cid in enumerate(ids):
        if prior[pos] > 0:
            log_text[pos] = doc_log_likelihood(doc, particle.clusters[cid].words, theta)
            logpost[pos] = log_text[pos] + np.log(prior[pos])
    log_text[-1] = doc_log_likelihood(doc, ClusterWordCounts(), theta)
    logpost[-1] = log_text[-1] + np.log(prior[-1])

    shift = logpost.max()
    if not np.isfinite(shift):
        log.warning("posterior underflow at doc %d; allocating to a new cluster", doc.id)
        probs = np.zeros(len(ids) + 1)
        probs[-1] = 1.0
        return ids, probs, log_text[-1] + np.log(cfg.lam0) - np.log(prior.sum())

    w = np.exp(logpost - shift)
    probs = w / w.sum()
    # Marginal = sum_c text_c * normalized_prior_c.
    log_marg = shift + np.log(w.sum()) - np.log(prior.sum())
    return ids, probs, log_marg


def posterior_allocation(doc: Document, particle: Particle,
                         cfg: InferenceConfig) -> np.ndarray:
    """Normalized posterior over existing clusters (sorted by id) plus a
    new-cluster slot."""
    _, probs, _ = _allocation_scores(doc, particle, cfg)
    return probs


# ---------------------------------------------------------------------------
# Interaction weight estimation

def estimate_alpha(target_times: Sequence[float], source_times: Sequence[float],
                   kernel: RBFKernel, lam0: float, n_samples: int,
                   rng: np.random.Generator, t_end: Optional[float] = None,
                   max_events: Optional[int] = None,
                   chunk: int = 4096) -> np.ndarray:
    """Posterior-mean interaction weights of one (target, source) pair.

    Self-normalized importance sampling: candidate weight vectors are drawn
    uniformly from the unit cube and weighted by the pairwise point-process
    log likelihood of the target events (event term minus the closed-form
    Gaussian compensator; the constant background term cancels). Returns the
    weighted mean, a vector in [0, 1]^L. Deterministic given the generator
    state. With no target events, returns zeros.
    """
    if lam0 <= 0:
        raise ValueError("lam0 must be positive")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    L = kernel.size
    target_times = np.asarray(target_times, dtype=float)
    source_times = np.asarray(source_times, dtype=float)
    if target_times.size == 0:
        return np.zeros(L)

    if max_events is not None and target_times.size > max_events:
        target_times = target_times[-max_events:]
        window_start = float(target_times[0])
    else:
        window_start = 0.0
    if t_end is None:
        t_end = float(max(target_times.max(),
                          source_times.max() if source_times.size else 0.0))

    horizon = kernel.numeric_horizon
    rows = np.zeros((target_times.size, L))
    for i, t in enumerate(target_times):
        lo = np.searchsorted(source_times, t - horizon, side="left")
        hi = np.searchsorted(source_times, t, side="left")
        lags = t - source_times[lo:hi]
        lags = lags[lags > 0]  # strict precedence; drops exact ties (self pair)
        if lags.size:
            rows[i] = kernel.evaluate_many(lags).sum(axis=0)

    # Compensator of the excitation part over [window_start, t_end].
    mu = np.asarray(kernel.means)
    sig = np.asarray(kernel.sigmas)
    relevant = source_times[(source_times < t_end) & (source_times > window_start - horizon)]
    if relevant.size:
        lo = (np.maximum(window_start, relevant)[:, None] - relevant[:, None] - mu[None, :]) / sig
        hi = (t_end - relevant[:, None] - mu[None, :]) / sig
        comp = (norm.cdf(hi) - norm.cdf(lo)).sum(axis=0)
    else:
        comp = np.zeros(L)

    samples = rng.random((n_samples, L))
    logw = np.empty(n_samples)
    for start in range(0, n_samples, chunk):
        block = samples[start:start + chunk]
        lam = lam0 + block @ rows.T  # (chunk, n_events)
        logw[start:start + chunk] = np.log(lam).sum(axis=1) - block @ comp
    logw -= logw.max()
    w = np.exp(logw)
    return (w @ samples) / w.sum()


def _refresh_alpha(target: ClusterState, particle: Particle,
                   cfg: InferenceConfig, rng: np.random.Generator,
                   t_now: float) -> None:
    """Re-estimate the target cluster's interaction rows against every
    cluster that has events, reusing the cached kernel-sum rows."""
    n = len(target.times)
    take = min(n, cfg.max_estimate_events)
    window_times = target.times[n - take:]
    window_rows = target.ksums[n - take:]
    window_start = window_times[0] if take < n else 0.0

    mu = np.asarray(cfg.kernel.means)
    sig = np.asarray(cfg.kernel.sigmas)
    horizon = cfg.kernel.numeric_horizon
    L = cfg.kernel.size
    zero = np.zeros(L)

    new_alpha: dict[int, np.ndarray] = {}
    for src, src_state in particle.clusters.items():
        src_times = np.asarray(src_state.times)
        if src_times.size == 0:
            continue
        rows = np.asarray([r.get(src, zero) for r in window_rows])
        relevant = src_times[(src_times < t_now) & (src_times > window_start - horizon)]
        if relevant.size:
            lo = (np.maximum(window_start, relevant)[:, None] - relevant[:, None] - mu[None, :]) / sig
            hi = (t_now - relevant[:, None] - mu[None, :]) / sig
            comp = (norm.cdf(hi) - norm.cdf(lo)).sum(axis=0)
        else:
            comp = np.zeros(L)

        samples = rng.random((cfg.alpha_samples, L))
        logw = np.empty(cfg.alpha_samples)
        for start in range(0, cfg.alpha_samples, 4096):
            block = samples[start:start + 4096]
            lam = cfg.lam0 + block @ rows.T
            logw[start:start + 4096] = np.log(lam).sum(axis=1) - block @ comp
        logw -= logw.max()
        w = np.exp(logw)
        new_alpha[src] = (w @ samples) / w.sum()
    target.alpha = new_alpha
    target.events_since_refresh = 0
    target.refreshed = True


# ---------------------------------------------------------------------------
# SMC loop

def process_document(doc: Document, particles: list, cfg: InferenceConfig,
                     rng: np.random.Generator) -> list:
    """Advance every particle by one document and renormalize the weights."""
    log_weights = np.empty(len(particles))
    for pi, particle in enumerate(particles):
        if doc.time < particle.last_time():
            raise ValueError(f"out-of-order document {doc.id} at t={doc.time}")
        ksums = _kernel_sums(doc.time, particle, cfg.kernel)
        ids, probs, log_marg = _allocation_scores(doc, particle, cfg, ksums)
        choice = int(rng.choice(len(probs), p=probs))
        if choice == len(ids):
            cid = particle.next_cluster_id
            particle.next_cluster_id += 1
            particle.clusters[cid] = ClusterState()
        else:
            cid = ids[choice]
        state = particle.clusters[cid]
        update(state.words, doc)
        state.times.append(doc.time)
        state.ksums.append(ksums)
        state.events_since_refresh += 1
        particle.allocations.append((doc.id, cid))
        log_weights[pi] = np.log(particle.weight) + log_marg

        if not state.refreshed or state.events_since_refresh >= cfg.alpha_refresh_every:
            _refresh_alpha(state, particle, cfg, rng, doc.time)

    log_weights -= log_weights.max()
    w = np.exp(log_weights)
    w /= w.sum()
    for particle, wi in zip(particles, w):
        particle.weight = float(wi)
    return particles


def resample(particles: list, rng: np.random.Generator) -> list:
    """Multinomial resampling when the effective sample size drops below
    half the particle count; otherwise a no-op."""
    P = len(particles)
    if P == 1:
        return particles
    weights = np.asarray([p.weight for p in particles])
    ess = 1.0 / float((weights ** 2).sum())
    if ess >= P / 2:
        return particles
    counts = rng.multinomial(P, weights)
    out: list[Particle] = []
    for particle, n in zip(particles, counts):
        if n >= 1:
            particle.weight = 1.0 / P
            out.append(particle)
            for _ in range(n - 1):
                out.append(particle.clone())
    return out


def run(docs: Iterable[Document], cfg: InferenceConfig, n_channels: int = 0,
        checkpoint_dir: Optional[Path] = None) -> InferenceResult:
    """Run the full sequential pass and return the best particle's state."""
    start = _time.monotonic()
    rng = np.random.default_rng(cfg.seed)
    particles = [Particle(weight=1.0 / cfg.particles) for _ in range(cfg.particles)]
    n_docs = 0
    for i, doc in enumerate(docs):
        particles = process_document(doc, particles, cfg, rng)
        if (i + 1) % cfg.resample_every == 0:
            particles = resample(particles, rng)
        if cfg.checkpoint_every and checkpoint_dir and (i + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(Path(checkpoint_dir) / f"checkpoint_{i + 1:08d}.json",
                            i + 1, particles, cfg)
        n_docs += 1
        if n_docs % 1000 == 0:
            log.info("processed %d documents, best particle has %d clusters",
                     n_docs, max(len(p.clusters) for p in particles))

    best = max(particles, key=lambda p: p.weight)
    ids = sorted(cid for cid, cs in best.clusters.items() if cs.words.doc_count > 0)
    index = {cid: i for i, cid in enumerate(ids)}
    L = cfg.kernel.size
    alpha = np.zeros((len(ids), len(ids), L))
    for cid in ids:
        for src, vec in best.clusters[cid].alpha.items():
            if src in index:
                alpha[index[cid], index[src]] = vec
    return InferenceResult(
        cluster_ids=ids,
        clusters={cid: best.clusters[cid] for cid in ids},
        allocations=list(best.allocations),
        alpha=alpha,
        config=cfg,
        runtime_seconds=_time.monotonic() - start,
        n_documents=n_docs,
        n_channels=n_channels,
    )


# ---------------------------------------------------------------------------
# Serialization

def save_checkpoint(path: Path, doc_index: int, particles: list,
                    cfg: InferenceConfig) -> None:
    """Versioned snapshot of the particle set (counts, times, weights,
    interaction rows; kernel-sum caches are not persisted)."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "doc_index": doc_index,
        "config": cfg.to_dict(),
        "particles": [{
            "weight": p.weight,
            "next_cluster_id": p.next_cluster_id,
            "allocations": p.allocations,
            "clusters": {str(cid): {
                "counts": {str(k): v for k, v in cs.words.counts.items()},
                "total": cs.words.total,
                "doc_count": cs.words.doc_count,
                "channel_counts": {str(k): v for k, v in cs.words.channel_counts.items()},
                "times": cs.times,
                "alpha": {str(k): v.tolist() for k, v in cs.alpha.items()},
            } for cid, cs in p.clusters.items()},
        } for p in particles],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    return payload


def write_result(result: InferenceResult, out_dir: Path, vocab=None,
                 top_words: int = 20) -> None:
    """Write a run directory: result.json, allocations.csv, alpha.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    clusters_payload = []
    for cid in result.cluster_ids:
        cs = result.clusters[cid]
        top = sorted(cs.words.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_words]
        clusters_payload.append({
            "id": cid,
            "size": cs.words.doc_count,
            "total_tokens": cs.words.total,
            "top_words": [[vocab.index_to_word[v] if vocab else v, n] for v, n in top],
            "channel_counts": {str(k): v for k, v in sorted(cs.words.channel_counts.items())},
            "word_counts": {str(k): v for k, v in sorted(cs.words.counts.items())},
        })
    with open(out_dir / "result.json", "w", encoding="utf-8") as fh:
        json.dump({
            "version": RESULT_VERSION,
            "config": result.config.to_dict(),
            "k": result.k,
            "n_documents": result.n_documents,
            "n_channels": result.n_channels,
            "runtime_seconds": result.runtime_seconds,
            "clusters": clusters_payload,
        }, fh, indent=2)

    # allocations.csv needs times; recover them from cluster histories by
    # replaying allocation order per cluster.
    cursor = {cid: 0 for cid in result.cluster_ids}
    with open(out_dir / "allocations.csv", "w", encoding="utf-8") as fh:
        fh.write("doc_id,time,cluster\n")
        for doc_id, cid in result.allocations:
            t = result.clusters[cid].times[cursor[cid]]
            cursor[cid] += 1
            fh.write(f"{doc_id},{t!r},{cid}\n")

    with open(out_dir / "alpha.csv", "w", encoding="utf-8") as fh:
        fh.write("target,source,entry,value\n")
        for i, ci in enumerate(result.cluster_ids):
            for j, cj in enumerate(result.cluster_ids):
                for l in range(result.alpha.shape[2]):
                    v = float(result.alpha[i, j, l])
                    if v != 0.0:
                        fh.write(f"{ci},{cj},{l},{v!r}\n")


def config_from_dict(obj: dict) -> InferenceConfig:
    from .temporal import kernel_from_dict
    return InferenceConfig(
        kernel=kernel_from_dict(obj["kernel"]),
        lam0=float(obj["lam0"]),
        theta0=float(obj["theta0"]),
        r=float(obj["r"]),
        vocab_size=int(obj["vocab_size"]),
        particles=int(obj.get("particles", 8)),
        alpha_samples=int(obj.get("alpha_samples", 100_000)),
        seed=int(obj.get("seed", 0)),
        resample_every=int(obj.get("resample_every", 2)),
        alpha_refresh_every=int(obj.get("alpha_refresh_every", 50)),
        max_estimate_events=int(obj.get("max_estimate_events", 400)),
        kernel_name=str(obj.get("kernel_name", "custom")),
    )


def load_result(run_dir: Path) -> InferenceResult:
    """Reconstruct an :class:`InferenceResult` from a run directory
    written by :func:`write_result`."""
    run_dir = Path(run_dir)
    with open(run_dir / "result.json", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != RESULT_VERSION:
        raise ValueError(f"unsupported result version {payload.get('version')}")
    cfg = config_from_dict(payload["config"])

    clusters: dict[int, ClusterState] = {}
    for entry in payload["clusters"]:
        cs = ClusterState()
        cs.words = ClusterWordCounts(
            counts={int(k): int(v) for k, v in entry["word_counts"].items()},
            total=int(entry["total_tokens"]),
            doc_count=int(entry["size"]),
            channel_counts={int(k): int(v) for k, v in entry["channel_counts"].items()},
        )
        clusters[int(entry["id"])] = cs

    allocations = []
    with open(run_dir / "allocations.csv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc_id, t, cid = line.split(",")
            allocations.append((int(doc_id), int(cid)))
            clusters[int(cid)].times.append(float(t))

    cluster_ids = sorted(clusters)
    index = {cid: i for i, cid in enumerate(cluster_ids)}
    alpha = np.zeros((len(cluster_ids), len(cluster_ids), cfg.kernel.size))
    alpha_path = run_dir / "alpha.csv"
    if alpha_path.exists():
        with open(alpha_path, encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                ci, cj, l, v = line.split(",")
                alpha[index[int(ci)], index[int(cj)], int(l)] = float(v)

    return InferenceResult(
        cluster_ids=cluster_ids,
        clusters=clusters,
        allocations=allocations,
        alpha=alpha,
        config=cfg,
        runtime_seconds=float(payload.get("runtime_seconds", 0.0)),
        n_documents=int(payload.get("n_documents", len(allocations))),
        n_channels=int(payload.get("n_channels", 0)),
    )
