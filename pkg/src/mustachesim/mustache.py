"""Forecast-driven victim selection (the MUSTACHE policy).

On a full-cache miss the forecaster is queried for the pages expected within
the next k requests; resident pages outside that set form the eviction
candidate pool. When the pool is everything the forecast did not help and
the fallback policy decides alone; when it is empty every resident page is
predicted, and the one whose first predicted occurrence lies farthest ahead
is evicted.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .cache import Cache, EvictionContext, PolicyContractError, VictimPolicy
from .forecast import ForecastContractError, Forecaster, ForecastRequest


class Branch(Enum):
    NO_OVERLAP = "no_overlap"
    ALL_PREDICTED = "all_predicted"
    PARTIAL = "partial"


@dataclass(frozen=True)
class CandidateSet:
    candidates: frozenset[int]
    branch: Branch


def compute_candidates(resident: Iterable[int], window) -> CandidateSet:
    """Resident pages minus those the window predicts will be referenced."""
    resident = frozenset(resident)
    candidates = frozenset(p for p in resident if not window.contains(p))
    if candidates == resident:
        branch = Branch.NO_OVERLAP
    elif not candidates:
        branch = Branch.ALL_PREDICTED
    else:
        branch = Branch.PARTIAL
    return CandidateSet(candidates, branch)


def get_farthest(window, restrict_to: Iterable[int]) -> int:
    """The page of restrict_to whose first predicted occurrence is latest.

    First occurrences are distinct positions, so ties cannot arise among
    pages actually present in the window.
    """
    best_page = None
    best_pos = 0
    for page in sorted(restrict_to):
        pos = window.first_position(page)
        if pos is not None and pos > best_pos:
            best_page, best_pos = page, pos
    if best_page is None:
        raise ForecastContractError("no restricted page appears in the window")
    return best_page


class MustachePolicy(VictimPolicy):
    """Algorithmic shell around a forecaster and a fallback policy.

    All bookkeeping is delegated to the fallback, so when the forecaster
    never helps (always "no prediction") the eviction stream is exactly the
    fallback's.
    """

    name = "mustache"

    def __init__(self, forecaster: Forecaster, fallback: VictimPolicy, horizon: int):
        if not fallback.supports_restrict:
            raise ValueError(f"{fallback.name} cannot act as a restricted fallback")
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.forecaster = forecaster
        self.fallback = fallback
        self.horizon = horizon

    def on_hit(self, page, ctx):
        self.fallback.on_hit(page, ctx)

    def on_insert(self, page, ctx):
        self.fallback.on_insert(page, ctx)

    def on_evict(self, page, ctx):
        self.fallback.on_evict(page, ctx)

    def _build_request(self, ctx: EvictionContext) -> ForecastRequest:
        if self.forecaster.needs_history:
            pages = [a.page for a in ctx.history]
            pages.append(ctx.current.page)
            deltas = tuple(pages[i + 1] - pages[i] for i in range(len(pages) - 1))
            return ForecastRequest(
                time=ctx.time,
                current_page=ctx.current.page,
                horizon=self.horizon,
                history_deltas=deltas,
                history_pages=tuple(pages[:-1]),
            )
        return ForecastRequest(
            time=ctx.time, current_page=ctx.current.page, horizon=self.horizon
        )

    def choose_victim(self, cache: Cache, ctx: EvictionContext, among=None) -> int:
        if among is not None:
            raise PolicyContractError("mustache cannot act as a fallback")
        window = self.forecaster.predict(self._build_request(ctx))
        if window is None:
            return self.fallback.choose_victim(cache, ctx)
        cand = compute_candidates(cache.resident, window)
        if cand.branch is Branch.NO_OVERLAP:
            return self.fallback.choose_victim(cache, ctx)
        if cand.branch is Branch.ALL_PREDICTED:
            return get_farthest(window, cache.resident)
        return self.fallback.choose_victim(cache, ctx, among=cand.candidates)
