"""Ingestion and curation of raw timestamped headline records.

Raw records (one JSON object per line: created_utc, title, subreddit, score)
are tokenized, filtered against a fixed stopword list, and turned into a
vocabulary-indexed document stream. Times are converted to minutes relative
to the first retained record; everything downstream works in minutes.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

URL_RE = re.compile(r"^(https?://|www\.)", re.IGNORECASE)
SPLIT_RE = re.compile(r"[^a-z0-9]+")

DEFAULT_MIN_SCORE = 20
DEFAULT_MIN_TOKENS = 3
DEFAULT_MIN_WORD_LEN = 4
DEFAULT_MIN_WORD_FREQ = 3

STREAM_FORMAT_VERSION = 1


def _load_default_stopwords() -> frozenset[str]:
    text = resources.files("hawkstream.data").joinpath("stopwords_en.txt").read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


STOPWORDS = _load_default_stopwords()


@dataclass(frozen=True)
class RawRecord:
    """One raw headline: epoch seconds, title, channel name, score."""

    timestamp: int
    title: str
    channel: str
    score: int

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp: {self.timestamp}")


@dataclass
class Vocabulary:
    """Bijection between retained words and indices 0..V-1."""

    index_to_word: list[str] = field(default_factory=list)
    word_to_index: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.index_to_word)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_index

    def __getitem__(self, word: str) -> int:
        return self.word_to_index[word]

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        vocab = cls()
        for w in words:
            if w not in vocab.word_to_index:
                vocab.word_to_index[w] = len(vocab.index_to_word)
                vocab.index_to_word.append(w)
        return vocab


@dataclass
class Document:
    """A curated document: sparse word counts at a point in stream time.

    ``time`` is in minutes since the first retained record. ``counts`` maps
    vocabulary index -> occurrence count; ``token_total`` is their sum.
    ``score`` is carried along for the stats report only.
    """

    id: int
    time: float
    counts: dict[int, int]
    channel: int
    token_total: int
    score: int = 0

    def __post_init__(self):
        assert self.token_total == sum(self.counts.values())


@dataclass
class CurationReport:
    n_input: int = 0
    n_retained: int = 0
    n_dropped_score: int = 0
    n_dropped_tokens: int = 0


def tokenize(title: str, stopwords: frozenset[str] = STOPWORDS,
             min_word_len: int = DEFAULT_MIN_WORD_LEN) -> list[str]:
    """Lowercase and split a title into filtered word tokens.

    URL-shaped whitespace tokens are removed before splitting on
    non-alphanumeric characters; stopwords and tokens shorter than
    ``min_word_len`` characters are dropped.
    """
    pieces = [p for p in title.lower().split() if not URL_RE.match(p)]
    tokens = []
    for piece in pieces:
        for tok in SPLIT_RE.split(piece):
            if len(tok) >= min_word_len and tok not in stopwords:
                tokens.append(tok)
    return tokens


def build_vocabulary(records: Iterable[RawRecord],
                     min_word_len: int = DEFAULT_MIN_WORD_LEN,
                     min_word_freq: int = DEFAULT_MIN_WORD_FREQ,
                     stopwords: frozenset[str] = STOPWORDS) -> Vocabulary:
    """Build the vocabulary of tokens with corpus frequency >= min_word_freq.

    Index order is deterministic: first appearance in the record stream.
    """
    freq: Counter[str] = Counter()
    order: list[str] = []
    seen = set()
    for rec in records:
        for tok in tokenize(rec.title, stopwords, min_word_len):
            freq[tok] += 1
            if tok not in seen:
                seen.add(tok)
                order.append(tok)
    return Vocabulary.from_words(w for w in order if freq[w] >= min_word_freq)


def curate(records: Iterable[RawRecord], vocab: Vocabulary,
           min_score: int = DEFAULT_MIN_SCORE,
           min_tokens: int = DEFAULT_MIN_TOKENS,
           min_word_len: int = DEFAULT_MIN_WORD_LEN,
           stopwords: frozenset[str] = STOPWORDS,
           channels: Optional[list[str]] = None,
           ) -> tuple[list[Document], list[str], CurationReport]:
    """Filter raw records and emit the vocabulary-indexed document stream.

    Drops records with score < min_score (strict) or with fewer than
    min_tokens in-vocabulary tokens. Returns (documents, channel names,
    curation report); channel indices are assigned by first appearance
    among retained records unless an explicit channel list is given.
    """
    recs = sorted(enumerate(records), key=lambda p: (p[1].timestamp, p[0]))
    report = CurationReport(n_input=len(recs))
    channels = list(channels) if channels is not None else []
    channel_index = {name: i for i, name in enumerate(channels)}

    docs: list[Document] = []
    t0: Optional[int] = None
    for _, rec in recs:
        if rec.score < min_score:
            report.n_dropped_score += 1
            continue
        counts: dict[int, int] = {}
        total = 0
        for tok in tokenize(rec.title, stopwords, min_word_len):
            if tok in vocab:
                idx = vocab[tok]
                counts[idx] = counts.get(idx, 0) + 1
                total += 1
        if total < min_tokens:
            report.n_dropped_tokens += 1
            continue
        if t0 is None:
            t0 = rec.timestamp
        if rec.channel not in channel_index:
            channel_index[rec.channel] = len(channels)
            channels.append(rec.channel)
        docs.append(Document(
            id=len(docs),
            time=(rec.timestamp - t0) / 60.0,
            counts=counts,
            channel=channel_index[rec.channel],
            token_total=total,
            score=rec.score,
        ))
    report.n_retained = len(docs)
    return docs, channels, report


@dataclass
class StatsReport:
    token_counts: Counter
    scores: Counter
    channel_counts: Counter
    time_histogram: list[tuple[float, float, int]]


def dataset_stats(docs: Sequence[Document], time_bins: int = 50) -> StatsReport:
    """Summary distributions of a document stream (token totals, scores,
    per-channel counts, documents over time)."""
    token_counts = Counter(d.token_total for d in docs)
    scores = Counter(d.score for d in docs)
    channel_counts = Counter(d.channel for d in docs)
    hist: list[tuple[float, float, int]] = []
    if docs:
        lo = docs[0].time
        hi = max(d.time for d in docs)
        width = (hi - lo) / time_bins if hi > lo else 1.0
        buckets = [0] * time_bins
        for d in docs:
            b = min(int((d.time - lo) / width), time_bins - 1)
            buckets[b] += 1
        hist = [(lo + i * width, lo + (i + 1) * width, n) for i, n in enumerate(buckets)]
    return StatsReport(token_counts, scores, channel_counts, hist)


def write_stats_csv(stats: StatsReport, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def dump(name, header, rows):
        with open(out_dir / name, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(str(x) for x in row) + "\n")

    dump("token_counts.csv", "token_total,count", sorted(stats.token_counts.items()))
    dump("scores.csv", "score,count", sorted(stats.scores.items()))
    dump("channels.csv", "channel,count", sorted(stats.channel_counts.items()))
    dump("time_histogram.csv", "bin_low,bin_high,count",
         [(f"{a:.6f}", f"{b:.6f}", n) for a, b, n in stats.time_histogram])


# ---------------------------------------------------------------------------
# JSONL input / output

def read_raw_jsonl(path: Path) -> Iterator[RawRecord]:
    """Read raw records from a JSONL file (created_utc, title, subreddit, score)."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            yield RawRecord(
                timestamp=int(obj["created_utc"]),
                title=str(obj.get("title", "")),
                channel=str(obj.get("subreddit", "")),
                score=int(obj.get("score", 0)),
            )


def write_documents(path: Path, docs: Iterable[Document], vocab: Vocabulary,
                    channels: Sequence[str]) -> None:
    """Write a document stream as JSONL with an embedded vocabulary header."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "kind": "header",
            "version": STREAM_FORMAT_VERSION,
            "vocabulary": vocab.index_to_word,
            "channels": list(channels),
        }
        fh.write(json.dumps(header) + "\n")
        for d in docs:
            fh.write(json.dumps({
                "kind": "doc",
                "id": d.id,
                "t": d.time,
                "counts": {str(k): v for k, v in d.counts.items()},
                "channel": d.channel,
                "score": d.score,
            }) + "\n")


def read_documents(path: Path) -> tuple[list[Document], Vocabulary, list[str]]:
    """Read a document stream written by :func:`write_documents`."""
    with open(path, encoding="utf-8") as fh:
        first = json.loads(fh.readline())
        if first.get("kind") != "header":
            raise ValueError(f"{path}: missing stream header")
        if first.get("version") != STREAM_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported stream version {first.get('version')}")
        vocab = Vocabulary.from_words(first["vocabulary"])
        channels = list(first["channels"])
        docs = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            counts = {int(k): int(v) for k, v in obj["counts"].items()}
            docs.append(Document(
                id=int(obj["id"]),
                time=float(obj["t"]),
                counts=counts,
                channel=int(obj["channel"]),
                token_total=sum(counts.values()),
                score=int(obj.get("score", 0)),
            ))
    return docs, vocab, channels
