"""Simulation runner: metrics accounting, policy comparisons, horizon sweeps."""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Sequence

from .cache import (
    ArcPolicy,
    Cache,
    CacheConfig,
    ClockPolicy,
    EvictionContext,
    FifoPolicy,
    LruPolicy,
    OptPolicy,
    OutcomeKind,
    RandomPolicy,
    VictimPolicy,
    precompute_next_use,
)
from .forecast import (
    FileForecaster,
    Forecaster,
    NGramForecaster,
    NullForecaster,
    OracleForecaster,
)
from .mustache import MustachePolicy
from .trace import (
    DeltaVocabulary,
    MemoryAccess,
    build_vocabulary,
    load_accesses_csv,
    page_deltas,
)

POLICY_NAMES = ("random", "fifo", "lru", "clock", "arc", "opt", "mustache")
FORECASTER_NAMES = ("oracle", "ngram", "file", "none")
FALLBACK_NAMES = ("lru", "fifo", "random")


@dataclass(frozen=True)
class RunMetrics:
    total: int
    hits: int
    misses: int
    evictions: int
    disk_reads: int
    disk_writes: int

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.total if self.total else 0.0

    def validate(self) -> None:
        ok = (
            self.hits + self.misses == self.total
            and self.disk_reads == self.misses
            and self.disk_writes <= self.evictions <= self.misses
            and min(self.hits, self.misses, self.disk_writes) >= 0
        )
        if not ok:
            raise RuntimeError(f"metrics accounting broken: {self}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one simulation run depends on; fully determines its output."""

    policy: str
    cache: CacheConfig
    trace_path: str | None = None
    seed: int | None = None
    # Forecasting knobs, used only when policy == "mustache".
    forecaster: str = "oracle"
    k: int = 30
    w: int = 100
    rho: float = 0.0
    full_horizon: bool = False
    ngram_order: int = 3
    ngram_alpha: float = 1.0
    pred_file: str | None = None
    fallback: str = "lru"
    train_fraction: float = 0.9
    min_count: int = 2
    train_path: str | None = None
    vocab_path: str | None = None
    label: str | None = None

    def __post_init__(self):
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.policy == "mustache":
            if self.forecaster not in FORECASTER_NAMES:
                raise ValueError(f"unknown forecaster {self.forecaster!r}")
            if self.fallback not in FALLBACK_NAMES:
                raise ValueError(f"unknown fallback {self.fallback!r}")
            if self.k < 1 and not self.full_horizon:
                raise ValueError(f"horizon k must be >= 1, got {self.k}")
        if self.seed is None and self._stochastic():
            raise ValueError("a seed is required when any stochastic part is configured")

    def _stochastic(self) -> bool:
        if self.policy == "random":
            return True
        if self.policy == "mustache":
            if self.fallback == "random":
                return True
            if self.forecaster == "oracle" and self.rho > 0.0:
                return True
        return False

    @property
    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.policy == "mustache":
            return f"mustache[{self.forecaster}]"
        return self.policy


def _load_trace(config: ExperimentConfig) -> list[MemoryAccess]:
    if config.trace_path is None:
        raise ValueError("no trace given (neither in-memory nor a path)")
    return load_accesses_csv(config.trace_path)


def _training_accesses(config, accesses) -> Sequence[MemoryAccess]:
    if config.train_path is not None:
        return load_accesses_csv(config.train_path)
    train_end = int(config.train_fraction * len(accesses))
    if train_end < 2:
        raise ValueError("training portion too short to form deltas")
    return accesses[:train_end]


def _vocabulary(config, accesses) -> DeltaVocabulary:
    if config.vocab_path is not None:
        return DeltaVocabulary.load(config.vocab_path)
    train = _training_accesses(config, accesses)
    return build_vocabulary(page_deltas([a.page for a in train]), config.min_count)


def build_forecaster(config: ExperimentConfig, accesses) -> Forecaster:
    num_pages = config.cache.num_pages
    if config.forecaster == "none":
        return NullForecaster()
    if config.forecaster == "oracle":
        vocab = _vocabulary(config, accesses) if config.rho > 0.0 else None
        return OracleForecaster(
            accesses,
            rho=config.rho,
            seed=config.seed,
            vocab=vocab,
            num_pages=num_pages,
            full_horizon=config.full_horizon,
        )
    if config.forecaster == "ngram":
        vocab = _vocabulary(config, accesses)
        train = _training_accesses(config, accesses)
        return NGramForecaster.train(
            page_deltas([a.page for a in train]),
            vocab,
            order=config.ngram_order,
            alpha=config.ngram_alpha,
            num_pages=num_pages,
        )
    if config.forecaster == "file":
        if config.pred_file is None:
            raise ValueError("file forecaster needs a predictions file")
        vocab_bytes = None
        if config.vocab_path is not None:
            with open(config.vocab_path, "rb") as fh:
                vocab_bytes = fh.read()
        return FileForecaster.load(
            config.pred_file, expected_k=config.k, vocab_bytes=vocab_bytes, num_pages=num_pages
        )
    raise ValueError(f"unknown forecaster {config.forecaster!r}")


def build_policy(config: ExperimentConfig, accesses) -> VictimPolicy:
    name = config.policy
    if name == "random":
        return RandomPolicy(config.seed)
    if name == "fifo":
        return FifoPolicy()
    if name == "lru":
        return LruPolicy()
    if name == "clock":
        return ClockPolicy()
    if name == "arc":
        return ArcPolicy(config.cache.num_frames)
    if name == "opt":
        return OptPolicy(precompute_next_use(accesses))
    if name == "mustache":
        forecaster = build_forecaster(config, accesses)
        if config.fallback == "lru":
            fallback: VictimPolicy = LruPolicy()
        elif config.fallback == "fifo":
            fallback = FifoPolicy()
        else:
            fallback = RandomPolicy(config.seed)
        return MustachePolicy(forecaster, fallback, config.k)
    raise ValueError(f"unknown policy {name!r}")


def run_simulation(
    config: ExperimentConfig, accesses: Sequence[MemoryAccess] | None = None
) -> RunMetrics:
    """Feed every access through the cache and account hits, misses, and I/O.

    Every miss costs one disk read; evicting a dirty page costs one disk
    write. Deterministic for a fixed config and trace.
    """
    if accesses is None:
        accesses = _load_trace(config)
    policy = build_policy(config, accesses)
    cache = Cache(config.cache)
    capacity = config.cache.num_frames
    track_history = isinstance(policy, MustachePolicy) and policy.forecaster.needs_history
    history: deque[MemoryAccess] = deque(maxlen=config.w)
    ctx = EvictionContext(0, history, None)
    hits = misses = evictions = disk_writes = 0
    resident = cache.resident
    for i, access in enumerate(accesses):
        ctx.time = i
        ctx.current = access
        outcome = cache.access(access, policy, ctx)
        kind = outcome.kind
        if kind is OutcomeKind.HIT:
            hits += 1
        else:
            misses += 1
            if kind is OutcomeKind.EVICT_MISS:
                evictions += 1
                if outcome.victim_was_dirty:
                    disk_writes += 1
        if len(resident) > capacity:
            raise RuntimeError(f"capacity exceeded at request {i}")
        if track_history:
            history.append(access)
    metrics = RunMetrics(len(accesses), hits, misses, evictions, misses, disk_writes)
    metrics.validate()
    return metrics


def run_policy_comparison(
    configs: Sequence[ExperimentConfig], accesses: Sequence[MemoryAccess] | None = None
) -> list[tuple[ExperimentConfig, RunMetrics]]:
    """One run per config over one shared trace and cache geometry."""
    if not configs:
        raise ValueError("no policies to compare")
    first = configs[0]
    for cfg in configs[1:]:
        if cfg.cache != first.cache or cfg.trace_path != first.trace_path:
            raise ValueError("comparison rows must share trace and cache config")
    if accesses is None:
        accesses = _load_trace(first)
    return [(cfg, run_simulation(cfg, accesses)) for cfg in configs]


def run_horizon_sweep(
    config: ExperimentConfig,
    horizons: Sequence[int],
    accesses: Sequence[MemoryAccess] | None = None,
) -> list[tuple[int, RunMetrics]]:
    """Re-run one MUSTACHE config for each horizon, all else fixed."""
    if config.policy != "mustache":
        raise ValueError("horizon sweeps only apply to the mustache policy")
    if not horizons:
        raise ValueError("empty horizon list")
    if accesses is None:
        accesses = _load_trace(config)
    return [
        (k, run_simulation(dataclasses.replace(config, k=k), accesses)) for k in horizons
    ]


# ---------------------------------------------------------------------------
# Report emission

REPORT_COLUMNS = (
    "policy",
    "k",
    "total",
    "hits",
    "misses",
    "hit_ratio",
    "reads",
    "writes",
    "evictions",
)


def format_hit_ratio(value: float) -> str:
    # 4 decimals, half-even.
    return str(Decimal(repr(value)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_EVEN))


def comparison_rows(results) -> list[tuple[str, int | None, RunMetrics]]:
    return [
        (cfg.display_label, cfg.k if cfg.policy == "mustache" else None, m)
        for cfg, m in results
    ]


def sweep_rows(results, label: str = "mustache") -> list[tuple[str, int | None, RunMetrics]]:
    return [(label, k, m) for k, m in results]


def emit_report(rows: Sequence[tuple[str, int | None, RunMetrics]], fmt: str = "csv") -> str:
    if fmt == "csv":
        lines = [",".join(REPORT_COLUMNS)]
        for label, k, m in rows:
            lines.append(
                f"{label},{'' if k is None else k},{m.total},{m.hits},{m.misses},"
                f"{format_hit_ratio(m.hit_ratio)},{m.disk_reads},{m.disk_writes},{m.evictions}"
            )
        return "\n".join(lines) + "\n"
    if fmt == "human":
        widths = (18, 5, 10, 10, 10, 10, 10, 9, 10)
        header = "".join(name.ljust(w) for name, w in zip(REPORT_COLUMNS, widths))
        lines = [header, "-" * len(header)]
        for label, k, m in rows:
            cells = (
                label,
                "-" if k is None else str(k),
                str(m.total),
                str(m.hits),
                str(m.misses),
                format_hit_ratio(m.hit_ratio),
                str(m.disk_reads),
                str(m.disk_writes),
                str(m.evictions),
            )
            lines.append("".join(c.ljust(w) for c, w in zip(cells, widths)))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
