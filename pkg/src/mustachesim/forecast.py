"""Multi-step-ahead page-delta forecasting.

A forecaster, queried at request index t, returns the next k delta tokens
and their reconstruction into predicted pages. Built-ins: a (optionally
noise-corrupted) ground-truth oracle, an order-m frequency model with
backoff, a file-backed replay of precomputed predictions, and a
never-predicts stub.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trace import UNK, DeltaVocabulary, MemoryAccess

DEFAULT_NUM_PAGES = (1 << 32) // 4096

PRED_FORMAT_NAME = "MUSTACHEPRED"
PRED_FORMAT_VERSION = "v1"


class ForecastContractError(RuntimeError):
    """A forecaster or caller broke the prediction contract."""


class PredictionFileError(ValueError):
    """A predictions file failed to load or validate."""


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def fnv1a64_hex(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"


@dataclass(frozen=True)
class ForecastRequest:
    """One query: predict the `horizon` deltas following request index `time`.

    `history_deltas`/`history_pages` carry at most the last w observations,
    oldest first; `aux` is an opaque slot for non-endogenous inputs that the
    built-in forecasters ignore.
    """

    time: int
    current_page: int
    horizon: int
    history_deltas: tuple = ()
    history_pages: tuple = ()
    aux: object = None


def deltas_to_pages(
    current_page: int, deltas: Sequence, num_pages: int = DEFAULT_NUM_PAGES
) -> list[int]:
    """Cumulative reconstruction anchored at current_page.

    Stops at the first value falling outside [0, num_pages), so the result
    may be shorter than the delta sequence. UNK is not reconstructible.
    """
    pages: list[int] = []
    page = current_page
    for d in deltas:
        if d == UNK:
            raise ForecastContractError("UNK token in a prediction stream")
        page += d
        if page < 0 or page >= num_pages:
            break
        pages.append(page)
    return pages


@dataclass(frozen=True)
class PredictionWindow:
    """The k predicted deltas and the page sequence they reconstruct to."""

    deltas: tuple
    pages: tuple[int, ...]
    page_set: frozenset[int]
    first_occurrence: dict[int, int]  # page -> earliest 1-based position

    @classmethod
    def from_deltas(
        cls, current_page: int, deltas: Sequence, num_pages: int = DEFAULT_NUM_PAGES
    ) -> "PredictionWindow":
        pages = deltas_to_pages(current_page, deltas, num_pages)
        first: dict[int, int] = {}
        for pos, page in enumerate(pages, start=1):
            if page not in first:
                first[page] = pos
        return cls(tuple(deltas), tuple(pages), frozenset(first), first)

    def contains(self, page: int) -> bool:
        return page in self.page_set

    def first_position(self, page: int) -> int | None:
        return self.first_occurrence.get(page)


class FullHorizonWindow:
    """Lazy window over the whole remaining trace, for the perfect oracle.

    Page membership and first-occurrence queries are answered from per-page
    occurrence indexes instead of materializing the (possibly huge) window.
    """

    __slots__ = ("_occurrences", "_time")

    def __init__(self, occurrences: dict[int, list[int]], time: int):
        self._occurrences = occurrences
        self._time = time

    def _next_index(self, page: int) -> int | None:
        occ = self._occurrences.get(page)
        if occ is None:
            return None
        i = bisect.bisect_right(occ, self._time)
        return occ[i] if i < len(occ) else None

    def contains(self, page: int) -> bool:
        return self._next_index(page) is not None

    def first_position(self, page: int) -> int | None:
        nxt = self._next_index(page)
        return None if nxt is None else nxt - self._time


class Forecaster:
    """Prediction interface. predict returns a window, or None when the
    forecaster has nothing for this index ("no prediction")."""

    needs_history = False

    def predict(self, request: ForecastRequest):
        raise NotImplementedError


class NullForecaster(Forecaster):
    """Always signals "no prediction"; downstream degrades to the fallback."""

    def predict(self, request):
        return None


class OracleForecaster(Forecaster):
    """Reads the true future deltas of a fixed trace.

    With corruption rate rho > 0, each stream position is independently
    replaced (once, at construction, under the given seed) by a uniformly
    random vocabulary token. full_horizon=True predicts the entire remaining
    trace and requires rho == 0.
    """

    def __init__(
        self,
        accesses: Sequence[MemoryAccess],
        rho: float = 0.0,
        seed: int | None = None,
        vocab: DeltaVocabulary | None = None,
        num_pages: int = DEFAULT_NUM_PAGES,
        full_horizon: bool = False,
    ):
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {rho}")
        pages = np.fromiter((a.page for a in accesses), dtype=np.int64, count=len(accesses))
        true_deltas = np.diff(pages)
        if rho > 0.0:
            if vocab is None or len(vocab) == 0:
                raise ValueError("corruption needs a non-empty vocabulary")
            rng = np.random.default_rng(seed)
            # Same seed yields the same draws at every rho, so raising rho
            # only grows the corrupted position set.
            u = rng.random(len(true_deltas))
            replacements = np.array(vocab.tokens, dtype=np.int64)[
                rng.integers(0, len(vocab), len(true_deltas))
            ]
            self._deltas = np.where(u < rho, replacements, true_deltas)
        else:
            self._deltas = true_deltas
        self.full_horizon = full_horizon
        self._num_pages = num_pages
        self._occurrences: dict[int, list[int]] | None = None
        if full_horizon:
            if rho > 0.0:
                raise ValueError("full-horizon oracle requires rho=0")
            occ: dict[int, list[int]] = {}
            for idx, page in enumerate(pages.tolist()):
                occ.setdefault(page, []).append(idx)
            self._occurrences = occ

    def predict(self, request):
        t = request.time
        if self.full_horizon:
            return FullHorizonWindow(self._occurrences, t)
        deltas = self._deltas[t : t + request.horizon].tolist()
        return PredictionWindow.from_deltas(request.current_page, deltas, self._num_pages)


class NGramForecaster(Forecaster):
    """Order-m frequency model over delta tokens with backoff.

    Next-token choice is the count argmax (add-alpha smoothed) over
    vocabulary tokens, ties broken by ascending token value; an unseen
    context backs off one order at a time down to the global unigram argmax.
    Multi-step prediction rolls forward, feeding each choice back in as
    context. UNK may appear in contexts but is never emitted.
    """

    needs_history = True

    def __init__(
        self,
        tables: dict[int, dict],
        global_argmax: int,
        vocab: DeltaVocabulary,
        order: int,
        alpha: float,
        num_pages: int = DEFAULT_NUM_PAGES,
    ):
        self._tables = tables
        self._global_argmax = global_argmax
        self._vocab = vocab
        self._smallest_token = min(vocab.tokens)
        self.order = order
        self.alpha = alpha
        self._num_pages = num_pages
        # Choices are deterministic functions of the context, so both the
        # per-context argmax and whole k-step rolls are safe to memoize.
        self._next_cache: dict[tuple, int] = {}
        self._roll_cache: dict[tuple, tuple] = {}

    @classmethod
    def train(
        cls,
        train_deltas: Sequence[int],
        vocab: DeltaVocabulary,
        order: int = 3,
        alpha: float = 1.0,
        num_pages: int = DEFAULT_NUM_PAGES,
    ) -> "NGramForecaster":
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if len(train_deltas) == 0:
            raise ValueError("empty training sequence")
        if len(vocab) == 0:
            raise ValueError("empty vocabulary")
        members = vocab.token_set
        tokens = [d if d in members else UNK for d in train_deltas]
        tables: dict[int, dict] = {}
        for m in range(1, order + 1):
            table: dict[tuple, Counter] = {}
            for i in range(len(tokens) - m):
                ctx = tuple(tokens[i : i + m])
                counter = table.get(ctx)
                if counter is None:
                    counter = table[ctx] = Counter()
                counter[tokens[i + m]] += 1
            tables[m] = table
        unigram = Counter(t for t in tokens if t != UNK)
        global_argmax = (
            min(unigram, key=lambda tok: (-unigram[tok], tok))
            if unigram
            else min(vocab.tokens)
        )
        return cls(tables, global_argmax, vocab, order, alpha, num_pages)

    def _argmax(self, counter: Counter) -> int:
        # Absent tokens count 0 < any present count, so scanning the counter
        # (minus UNK) is equivalent to an argmax over the whole vocabulary.
        best_tok = None
        best_count = -1
        for tok, count in counter.items():
            if tok == UNK:
                continue
            if count > best_count or (count == best_count and tok < best_tok):
                best_tok, best_count = tok, count
        return self._smallest_token if best_tok is None else best_tok

    def _next_token(self, context: tuple) -> int:
        cached = self._next_cache.get(context)
        if cached is not None:
            return cached
        token = self._global_argmax
        for m in range(min(self.order, len(context)), 0, -1):
            counter = self._tables[m].get(context[-m:])
            if counter is not None:
                token = self._argmax(counter)
                break
        self._next_cache[context] = token
        return token

    def _roll(self, context: tuple, horizon: int) -> tuple:
        key = (context, horizon)
        cached = self._roll_cache.get(key)
        if cached is not None:
            return cached
        ctx = list(context)
        out = []
        for _ in range(horizon):
            token = self._next_token(tuple(ctx))
            out.append(token)
            ctx.append(token)
            if len(ctx) > self.order:
                ctx.pop(0)
        rolled = tuple(out)
        self._roll_cache[key] = rolled
        return rolled

    def predict(self, request):
        members = self._vocab.token_set
        context = tuple(
            d if d in members else UNK
            for d in request.history_deltas[-self.order :]
        )
        deltas = self._roll(context, request.horizon)
        return PredictionWindow.from_deltas(request.current_page, deltas, self._num_pages)


class FileForecaster(Forecaster):
    """Replays predictions exported to a MUSTACHEPRED v1 file.

    A missing request index is a "no prediction" signal, not an error.
    """

    def __init__(
        self,
        table: dict[int, tuple[int, ...]],
        w: int,
        k: int,
        vocab_hash: str,
        num_pages: int = DEFAULT_NUM_PAGES,
    ):
        self._table = table
        self.w = w
        self.k = k
        self.vocab_hash = vocab_hash
        self._num_pages = num_pages

    @classmethod
    def load(
        cls,
        path,
        expected_k: int | None = None,
        vocab_bytes: bytes | None = None,
        num_pages: int = DEFAULT_NUM_PAGES,
    ) -> "FileForecaster":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if (
                len(header) != 5
                or header[0] != PRED_FORMAT_NAME
                or header[1] != PRED_FORMAT_VERSION
                or not header[2].startswith("w=")
                or not header[3].startswith("k=")
                or not header[4].startswith("vocab=")
            ):
                raise PredictionFileError(f"bad predictions header: {' '.join(header)!r}")
            try:
                w = int(header[2][2:])
                k = int(header[3][2:])
            except ValueError:
                raise PredictionFileError("non-integer w/k in header") from None
            vocab_hash = header[4][6:]
            if expected_k is not None and k != expected_k:
                raise PredictionFileError(f"file predicts k={k}, configured k={expected_k}")
            if vocab_bytes is not None and fnv1a64_hex(vocab_bytes) != vocab_hash:
                raise PredictionFileError("vocabulary hash mismatch")
            table: dict[int, tuple[int, ...]] = {}
            last_t = -1
            for lineno, line in enumerate(fh, start=2):
                fields = line.split()
                if not fields:
                    continue
                try:
                    values = [int(v) for v in fields]
                except ValueError:
                    raise PredictionFileError(f"line {lineno}: non-integer token") from None
                if len(values) != k + 1:
                    raise PredictionFileError(
                        f"line {lineno}: expected {k} tokens, got {len(values) - 1}"
                    )
                t = values[0]
                if t <= last_t:
                    raise PredictionFileError(f"line {lineno}: index {t} not increasing")
                last_t = t
                table[t] = tuple(values[1:])
        return cls(table, w, k, vocab_hash, num_pages)

    def predict(self, request):
        deltas = self._table.get(request.time)
        if deltas is None:
            return None
        return PredictionWindow.from_deltas(request.current_page, deltas, self._num_pages)


def write_predictions(path, w: int, k: int, vocab_hash: str, rows) -> None:
    """Write a MUSTACHEPRED v1 file; rows are (t, deltas) in increasing t."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{PRED_FORMAT_NAME} {PRED_FORMAT_VERSION} w={w} k={k} vocab={vocab_hash}\n")
        for t, deltas in rows:
            if len(deltas) != k:
                raise ValueError(f"row {t} has {len(deltas)} tokens, expected {k}")
            fh.write(f"{t} " + " ".join(str(d) for d in deltas) + "\n")


def accuracy_at_k(actual: Sequence, predicted: Sequence) -> float:
    """Positionwise match fraction of two equal-length token sequences."""
    if len(actual) != len(predicted) or not actual:
        raise ValueError(
            f"need equal non-empty sequences, got {len(actual)} vs {len(predicted)}"
        )
    hits = sum(1 for a, p in zip(actual, predicted) if a == p)
    return hits / len(actual)


def evaluate_forecaster(
    forecaster: Forecaster,
    accesses: Sequence[MemoryAccess],
    w: int,
    horizons: Sequence[int],
) -> dict[int, float]:
    """Mean accuracy over every index with w past deltas and k future ones.

    Indexes the forecaster skips ("no prediction") are excluded from the
    average.
    """
    pages = [a.page for a in accesses]
    deltas = [pages[i + 1] - pages[i] for i in range(len(pages) - 1)]
    results: dict[int, float] = {}
    for k in horizons:
        if len(accesses) <= w + k:
            raise ValueError(f"split of {len(accesses)} too short for w={w}, k={k}")
        total = 0.0
        count = 0
        for t in range(w, len(accesses) - k):
            if forecaster.needs_history:
                request = ForecastRequest(
                    time=t,
                    current_page=pages[t],
                    horizon=k,
                    history_deltas=tuple(deltas[t - w : t]),
                    history_pages=tuple(pages[t - w : t]),
                )
            else:
                request = ForecastRequest(time=t, current_page=pages[t], horizon=k)
            window = forecaster.predict(request)
            if window is None:
                continue
            total += accuracy_at_k(deltas[t : t + k], window.deltas)
            count += 1
        results[k] = total / count if count else float("nan")
    return results
