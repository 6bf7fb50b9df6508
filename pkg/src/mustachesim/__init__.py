"""Page-cache replacement simulation toolkit with forecast-driven eviction."""

from .cache import (
    AccessOutcome,
    ArcPolicy,
    Cache,
    CacheConfig,
    ClockPolicy,
    EvictionContext,
    FifoPolicy,
    LruPolicy,
    OptPolicy,
    OutcomeKind,
    PolicyContractError,
    RandomPolicy,
    VictimPolicy,
    precompute_next_use,
)
from .forecast import (
    FileForecaster,
    Forecaster,
    ForecastRequest,
    NGramForecaster,
    NullForecaster,
    OracleForecaster,
    PredictionWindow,
    accuracy_at_k,
    deltas_to_pages,
    evaluate_forecaster,
    fnv1a64_hex,
    write_predictions,
)
from .harness import (
    ExperimentConfig,
    RunMetrics,
    emit_report,
    run_horizon_sweep,
    run_policy_comparison,
    run_simulation,
)
from .mustache import Branch, CandidateSet, MustachePolicy, compute_candidates, get_farthest
from .trace import (
    UNK,
    DeltaVocabulary,
    MemoryAccess,
    Op,
    RawTraceRecord,
    TraceDataset,
    build_vocabulary,
    encode_deltas,
    generate_synthetic,
    load_accesses_csv,
    page_deltas,
    parse_pin_trace,
    save_accesses_csv,
    split_train_test,
    strip_common_prefix,
    strip_preamble,
    to_page_accesses,
)

__version__ = "0.1.0"
