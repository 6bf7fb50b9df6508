"""Memory-trace ingestion and page/delta transformations.

Turns raw instrumentation logs (or synthetic workloads) into page-request
sequences, signed page-delta token streams, a quantized delta vocabulary,
and train/test splits.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DEFAULT_PAGE_SIZE = 4096

# Out-of-vocabulary delta token. Legal in encoded streams, never a legal
# forecaster output.
UNK = "UNK"


class Op(Enum):
    READ = "R"
    WRITE = "W"


class ParseError(ValueError):
    """A malformed trace line in strict mode."""


class RawTraceRecord(NamedTuple):
    pc: int
    op: Op
    mem: int
    n_bytes: int
    mem_pref: int | None = None


class MemoryAccess(NamedTuple):
    page: int
    op: Op
    index: int


@dataclass
class PinParseResult:
    records: list[RawTraceRecord]
    skipped: int = 0


def _parse_pin_line(tokens: list[str]) -> RawTraceRecord:
    if len(tokens) not in (4, 5):
        raise ValueError(f"expected 4 or 5 columns, got {len(tokens)}")
    pc = int(tokens[0], 16)
    try:
        op = Op(tokens[1])
    except ValueError:
        raise ValueError(f"unknown op code {tokens[1]!r}") from None
    mem = int(tokens[2], 16)
    n_bytes = int(tokens[3], 10)
    if n_bytes < 1:
        raise ValueError(f"n_bytes must be >= 1, got {n_bytes}")
    mem_pref = int(tokens[4], 16) if len(tokens) == 5 else None
    return RawTraceRecord(pc, op, mem, n_bytes, mem_pref)


def parse_pin_trace(lines: Iterable[str], strict: bool = False) -> PinParseResult:
    """Parse whitespace-separated `PC OP MEM N_BYTES [MEM_PREF]` lines.

    Addresses are hex; OP is R or W. In lenient mode (default) malformed
    lines, blank lines, and tool banners are skipped and counted; in strict
    mode the first bad line raises ParseError with its 1-based line number.
    """
    records: list[RawTraceRecord] = []
    skipped = 0
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            records.append(_parse_pin_line(tokens))
        except ValueError as exc:
            if strict:
                raise ParseError(f"line {lineno}: {exc}") from None
            skipped += 1
    return PinParseResult(records, skipped)


def to_page_accesses(
    records: Sequence[RawTraceRecord], page_size: int = DEFAULT_PAGE_SIZE
) -> list[MemoryAccess]:
    """Map each record's data address (MEM only, not PC) to a page id."""
    if page_size < 1 or page_size & (page_size - 1):
        raise ValueError(f"page_size must be a power of two, got {page_size}")
    return [
        MemoryAccess(rec.mem // page_size, rec.op, i) for i, rec in enumerate(records)
    ]


def reindex(accesses: Iterable[MemoryAccess]) -> list[MemoryAccess]:
    return [MemoryAccess(a.page, a.op, i) for i, a in enumerate(accesses)]


def strip_preamble(accesses: Sequence[MemoryAccess], n: int) -> list[MemoryAccess]:
    """Drop the first n accesses and renumber the rest."""
    if n < 0 or n >= len(accesses):
        raise ValueError(f"cannot strip {n} accesses from a trace of {len(accesses)}")
    return reindex(accesses[n:])


def common_prefix_length(traces: Sequence[Sequence[MemoryAccess]]) -> int:
    """Longest common prefix of the page-id sequences of two or more traces."""
    if len(traces) < 2:
        raise ValueError("auto preamble detection needs at least 2 traces")
    limit = min(len(t) for t in traces)
    first = traces[0]
    lcp = 0
    while lcp < limit and all(t[lcp].page == first[lcp].page for t in traces[1:]):
        lcp += 1
    return lcp


def strip_common_prefix(
    traces: Sequence[Sequence[MemoryAccess]],
) -> tuple[list[list[MemoryAccess]], int]:
    """Strip the shared leading page subsequence from every trace."""
    lcp = common_prefix_length(traces)
    return [reindex(t[lcp:]) for t in traces], lcp


def page_deltas(pages: Sequence[int], delta_mode: str = "consecutive") -> list[int]:
    """Signed deltas of a page sequence, length len(pages) - 1.

    consecutive: d[j] = pages[j+1] - pages[j] (default; invertible by
    cumulative addition). anchored: d[j] = pages[j+1] - pages[0].
    """
    if len(pages) < 2:
        raise ValueError("need at least 2 accesses to form deltas")
    arr = np.asarray(pages, dtype=np.int64)
    if delta_mode == "consecutive":
        return np.diff(arr).tolist()
    if delta_mode == "anchored":
        return (arr[1:] - arr[0]).tolist()
    raise ValueError(f"unknown delta_mode {delta_mode!r}")


def encode_deltas(
    accesses: Sequence[MemoryAccess],
    vocab: "DeltaVocabulary | None" = None,
    delta_mode: str = "consecutive",
) -> list:
    """Delta tokens for an access sequence; OOV values map to UNK."""
    deltas = page_deltas([a.page for a in accesses], delta_mode)
    if vocab is None:
        return deltas
    members = vocab.token_set
    return [d if d in members else UNK for d in deltas]


@dataclass(frozen=True)
class DeltaVocabulary:
    """Quantized delta alphabet: every kept token occurred >= min_count times."""

    tokens: tuple[int, ...]
    counts: dict[int, int]
    min_count: int

    def __post_init__(self):
        object.__setattr__(self, "token_set", frozenset(self.tokens))

    def __contains__(self, delta) -> bool:
        return delta in self.token_set

    def __len__(self) -> int:
        return len(self.tokens)

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["delta", "count"])
            for tok in self.tokens:
                writer.writerow([tok, self.counts[tok]])

    @classmethod
    def load(cls, path) -> "DeltaVocabulary":
        counts: dict[int, int] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["delta", "count"]:
                raise ParseError(f"bad vocabulary header: {header}")
            for row in reader:
                if not row:
                    continue
                counts[int(row[0])] = int(row[1])
        min_count = min(counts.values(), default=1)
        return cls(_canonical_token_order(counts), counts, min_count)


def _canonical_token_order(counts: dict[int, int]) -> tuple[int, ...]:
    # Descending count, ties broken by ascending delta: the file order.
    return tuple(sorted(counts, key=lambda d: (-counts[d], d)))


def build_vocabulary(train_deltas: Iterable[int], min_count: int = 2) -> DeltaVocabulary:
    """Keep every delta seen at least min_count times in the training stream."""
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    kept = {d: c for d, c in Counter(train_deltas).items() if c >= min_count}
    return DeltaVocabulary(_canonical_token_order(kept), kept, min_count)


@dataclass(frozen=True)
class TraceDataset:
    """An access sequence with a train/test boundary and a train-only vocabulary."""

    accesses: tuple[MemoryAccess, ...]
    train_end: int
    vocabulary: DeltaVocabulary

    @property
    def train(self) -> list[MemoryAccess]:
        return list(self.accesses[: self.train_end])

    @property
    def test(self) -> list[MemoryAccess]:
        return reindex(self.accesses[self.train_end :])


def split_train_test(
    accesses: Sequence[MemoryAccess],
    train_fraction: float,
    min_count: int = 2,
    delta_mode: str = "consecutive",
) -> TraceDataset:
    """Split at floor(train_fraction * n); vocabulary from the train side only."""
    n = len(accesses)
    if n < 10:
        raise ValueError(f"trace too short to split: {n} accesses")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    train_end = int(train_fraction * n)
    if train_end < 2 or train_end >= n:
        raise ValueError(f"degenerate split: train_end={train_end} of {n}")
    vocab = build_vocabulary(
        page_deltas([a.page for a in accesses[:train_end]], delta_mode), min_count
    )
    return TraceDataset(tuple(accesses), train_end, vocab)


# ---------------------------------------------------------------------------
# Synthetic workloads

def zipf_pmf(universe: int, s: float) -> np.ndarray:
    """Normalized Zipf mass over pages 0..universe-1 (page i has rank i+1)."""
    ranks = np.arange(1, universe + 1, dtype=np.float64)
    weights = ranks**-s
    return weights / weights.sum()


def _ops_from(rng: np.random.Generator, n: int, write_prob: float) -> list[Op]:
    if write_prob <= 0.0:
        return [Op.READ] * n
    flags = rng.random(n) < write_prob
    return [Op.WRITE if f else Op.READ for f in flags]


def synth_cyclic_scan(
    universe: int, length: int, write_prob: float = 0.0, seed: int | None = None
) -> list[MemoryAccess]:
    """Pages 0, 1, ..., universe-1, 0, 1, ... for `length` requests."""
    if universe < 1 or length < 0:
        raise ValueError("cyclic scan needs universe >= 1 and length >= 0")
    ops = _ops_from(np.random.default_rng(seed), length, write_prob)
    return [MemoryAccess(i % universe, ops[i], i) for i in range(length)]


def synth_zipfian(
    universe: int,
    length: int,
    s: float = 1.0,
    write_prob: float = 0.0,
    seed: int | None = None,
) -> list[MemoryAccess]:
    """Independent draws from a Zipf(s) law over `universe` pages."""
    if universe < 1 or length < 0:
        raise ValueError("zipfian needs universe >= 1 and length >= 0")
    rng = np.random.default_rng(seed)
    pages = rng.choice(universe, size=length, p=zipf_pmf(universe, s))
    ops = _ops_from(rng, length, write_prob)
    return [MemoryAccess(int(p), op, i) for i, (p, op) in enumerate(zip(pages, ops))]


def synth_looping_hotset(
    length: int,
    loop_size: int,
    hot_size: int,
    loop_prob: float = 0.5,
    s: float = 1.0,
    write_prob: float = 0.0,
    seed: int | None = None,
) -> list[MemoryAccess]:
    """A sequential loop over pages [0, loop_size) interleaved with skewed
    draws from a hot set [loop_size, loop_size + hot_size).

    Each step continues the loop with probability loop_prob, otherwise draws
    a hot-set page from a Zipf(s) law. The loop pointer survives
    interruptions, so loop bursts resume where they left off.
    """
    if loop_size < 1 or hot_size < 1 or length < 0:
        raise ValueError("looping-hotset needs loop_size, hot_size >= 1")
    rng = np.random.default_rng(seed)
    take_loop = rng.random(length) < loop_prob
    hot_draws = rng.choice(hot_size, size=length, p=zipf_pmf(hot_size, s))
    ops = _ops_from(rng, length, write_prob)
    out: list[MemoryAccess] = []
    cursor = 0
    for i in range(length):
        if take_loop[i]:
            page = cursor
            cursor = (cursor + 1) % loop_size
        else:
            page = loop_size + int(hot_draws[i])
        out.append(MemoryAccess(page, ops[i], i))
    return out


def synth_markov_delta(
    length: int,
    deltas: Sequence[int],
    weights: Sequence[float],
    universe: int,
    start_page: int = 0,
    write_prob: float = 0.0,
    seed: int | None = None,
) -> list[MemoryAccess]:
    """Random walk whose steps are drawn from a fixed delta distribution.

    Pages wrap modulo `universe` to stay in range.
    """
    if length < 0 or universe < 1 or len(deltas) != len(weights) or not deltas:
        raise ValueError("markov-delta needs matching non-empty deltas/weights")
    rng = np.random.default_rng(seed)
    probs = np.asarray(weights, dtype=np.float64)
    probs = probs / probs.sum()
    steps = rng.choice(len(deltas), size=length, p=probs)
    ops = _ops_from(rng, length, write_prob)
    out: list[MemoryAccess] = []
    page = start_page % universe
    for i in range(length):
        out.append(MemoryAccess(page, ops[i], i))
        page = (page + deltas[int(steps[i])]) % universe
    return out


SYNTH_KINDS = {
    "cyclic-scan": synth_cyclic_scan,
    "zipfian": synth_zipfian,
    "looping-with-hotset": synth_looping_hotset,
    "markov-delta": synth_markov_delta,
}


def generate_synthetic(kind: str, params: dict, seed: int | None = None) -> list[MemoryAccess]:
    """Dispatch to a named generator; deterministic for a fixed seed."""
    try:
        fn = SYNTH_KINDS[kind]
    except KeyError:
        raise ValueError(
            f"unknown workload kind {kind!r}; choose from {sorted(SYNTH_KINDS)}"
        ) from None
    return fn(seed=seed, **params)


# ---------------------------------------------------------------------------
# Page-access CSV (columns: index,page,op)

def save_accesses_csv(accesses: Iterable[MemoryAccess], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "page", "op"])
        for a in accesses:
            writer.writerow([a.index, a.page, a.op.value])


def load_accesses_csv(path) -> list[MemoryAccess]:
    out: list[MemoryAccess] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "page", "op"]:
            raise ParseError(f"bad page-access header: {header}")
        for pos, row in enumerate(reader):
            if not row:
                continue
            idx, page, op = int(row[0]), int(row[1]), Op(row[2])
            if idx != pos:
                raise ParseError(f"non-contiguous index {idx} at row {pos}")
            out.append(MemoryAccess(page, op, idx))
    return out
