import numpy as np
import pytest

from mustachesim.forecast import (
    FileForecaster,
    ForecastContractError,
    ForecastRequest,
    FullHorizonWindow,
    NGramForecaster,
    NullForecaster,
    OracleForecaster,
    PredictionFileError,
    PredictionWindow,
    accuracy_at_k,
    deltas_to_pages,
    evaluate_forecaster,
    fnv1a64_hex,
    write_predictions,
)
from mustachesim.trace import (
    UNK,
    MemoryAccess,
    Op,
    build_vocabulary,
    generate_synthetic,
    page_deltas,
)

from oracles import random_trace


def reads(pages):
    return [MemoryAccess(p, Op.READ, i) for i, p in enumerate(pages)]


def request_at(trace, t, k, w=0):
    pages = [a.page for a in trace]
    deltas = page_deltas(pages) if len(pages) > 1 else []
    return ForecastRequest(
        time=t,
        current_page=pages[t],
        horizon=k,
        history_deltas=tuple(deltas[max(0, t - w) : t]),
        history_pages=tuple(pages[max(0, t - w) : t]),
    )


# ---------------------------------------------------------------------------
# Hashing

def test_fnv1a64_known_vectors():
    assert fnv1a64_hex(b"") == "cbf29ce484222325"
    assert fnv1a64_hex(b"a") == "af63dc4c8601ec8c"
    assert fnv1a64_hex(b"foobar") == "85944171f73967e8"


# ---------------------------------------------------------------------------
# Reconstruction

def test_deltas_to_pages_inverse_of_encoding():
    assert deltas_to_pages(73, [8, -14, 0, 8]) == [81, 67, 67, 75]


def test_deltas_all_zero():
    assert deltas_to_pages(9, [0, 0, 0]) == [9, 9, 9]


def test_reconstruction_truncates_out_of_range():
    assert deltas_to_pages(2, [-5, 1], num_pages=100) == []
    assert deltas_to_pages(98, [1, 5, -3], num_pages=100) == [99]


def test_reconstruction_rejects_unk():
    with pytest.raises(ForecastContractError):
        deltas_to_pages(5, [1, UNK, 2])


def test_reconstruction_roundtrip_random():
    rng = np.random.default_rng(12)
    for _ in range(40):
        pages = rng.integers(0, 500, size=rng.integers(2, 40)).tolist()
        deltas = page_deltas(pages)
        assert deltas_to_pages(pages[0], deltas, num_pages=500) == pages[1:]


def test_prediction_window_fields():
    win = PredictionWindow.from_deltas(20, (5, -6, 0, 23, -17, 12, 5, -23))
    assert win.pages == (25, 19, 19, 42, 25, 37, 42, 19)
    assert win.page_set == frozenset({25, 19, 42, 37})
    assert win.first_occurrence == {25: 1, 19: 2, 42: 4, 37: 6}
    assert win.contains(37) and not win.contains(99)
    assert win.first_position(42) == 4 and win.first_position(99) is None


def test_prediction_window_chain_invariant():
    rng = np.random.default_rng(4)
    for _ in range(30):
        deltas = rng.integers(-10, 11, size=10).tolist()
        win = PredictionWindow.from_deltas(100, deltas, num_pages=10**6)
        chain = [100] + list(win.pages)
        for j, page in enumerate(win.pages):
            assert page == chain[j] + deltas[j]
        assert len(win.page_set) <= len(deltas)


# ---------------------------------------------------------------------------
# Oracle forecaster

def test_oracle_reads_true_future():
    trace = reads([70, 73, 81, 67, 67, 75])
    oracle = OracleForecaster(trace)
    win = oracle.predict(request_at(trace, 1, 2))
    assert win.deltas == (8, -14)
    assert win.pages == (81, 67)


def test_oracle_shape_is_horizon():
    trace = reads(range(50))
    oracle = OracleForecaster(trace)
    assert len(oracle.predict(request_at(trace, 0, 1)).deltas) == 1
    assert len(oracle.predict(request_at(trace, 10, 7)).deltas) == 7


def test_oracle_shortens_near_trace_end():
    trace = reads(range(10))
    oracle = OracleForecaster(trace)
    win = oracle.predict(request_at(trace, 7, 5))
    assert win.deltas == (1, 1)  # only two future requests remain


def test_oracle_consistency_with_trace():
    rng = np.random.default_rng(8)
    trace = random_trace(rng, 200, 30)
    pages = [a.page for a in trace]
    oracle = OracleForecaster(trace, num_pages=30)
    for t in (0, 17, 120, 190):
        win = oracle.predict(request_at(trace, t, 8))
        expect = pages[t + 1 : t + 9]
        assert list(win.pages) == expect


def test_oracle_perfect_accuracy():
    trace = reads((np.arange(3000) * 7) % 997)
    oracle = OracleForecaster(trace)
    acc = evaluate_forecaster(oracle, trace, w=10, horizons=[1, 10, 30])
    assert all(v == 1.0 for v in acc.values())


def test_oracle_same_seed_same_stream():
    trace = random_trace(np.random.default_rng(3), 500, 20)
    vocab = build_vocabulary(page_deltas([a.page for a in trace]), 1)
    a = OracleForecaster(trace, rho=0.7, seed=11, vocab=vocab)
    b = OracleForecaster(trace, rho=0.7, seed=11, vocab=vocab)
    assert np.array_equal(a._deltas, b._deltas)
    c = OracleForecaster(trace, rho=0.7, seed=12, vocab=vocab)
    assert not np.array_equal(a._deltas, c._deltas)


def test_fully_corrupted_oracle_matches_uniform_rate():
    # Every delta of this trace recurs, so the whole alphabet is in-vocab and
    # a uniform corruption token matches the actual with probability 1/|V|.
    trace = generate_synthetic("zipfian", {"universe": 6, "length": 10_130, "s": 0.0}, seed=5)
    vocab = build_vocabulary(page_deltas([a.page for a in trace]), 2)
    assert len(vocab) == 11
    oracle = OracleForecaster(trace, rho=1.0, seed=40, vocab=vocab)
    acc = evaluate_forecaster(oracle, trace, w=100, horizons=[10])[10]
    assert abs(acc - 1.0 / len(vocab)) < 0.01


def test_corruption_accuracy_monotone_in_rho():
    trace = generate_synthetic("zipfian", {"universe": 6, "length": 10_130, "s": 0.0}, seed=6)
    vocab = build_vocabulary(page_deltas([a.page for a in trace]), 2)
    accs = []
    for rho in (0.1, 0.3, 0.6, 0.9):
        oracle = OracleForecaster(trace, rho=rho, seed=77, vocab=vocab)
        accs.append(evaluate_forecaster(oracle, trace, w=100, horizons=[10])[10])
    for lo, hi in zip(accs, accs[1:]):
        assert lo >= hi - 0.01


def test_full_horizon_window_matches_eager_future():
    rng = np.random.default_rng(15)
    trace = random_trace(rng, 300, 25)
    pages = [a.page for a in trace]
    oracle = OracleForecaster(trace, full_horizon=True)
    for t in (0, 50, 150, 280, 299):
        win = oracle.predict(request_at(trace, t, 1))
        assert isinstance(win, FullHorizonWindow)
        future = pages[t + 1 :]
        for page in set(pages):
            assert win.contains(page) == (page in future)
            if page in future:
                assert win.first_position(page) == future.index(page) + 1


def test_full_horizon_requires_perfect_oracle():
    trace = reads(range(20))
    vocab = build_vocabulary([1, 1], 1)
    with pytest.raises(ValueError):
        OracleForecaster(trace, rho=0.5, seed=1, vocab=vocab, full_horizon=True)


# ---------------------------------------------------------------------------
# N-gram forecaster

def bigram_cycle_model(k_order=1):
    deltas = [1, 2, 1, 2, 1, 2]
    vocab = build_vocabulary(deltas, 1)
    return NGramForecaster.train(deltas, vocab, order=k_order)


def test_ngram_learns_alternating_cycle():
    model = bigram_cycle_model()
    req = ForecastRequest(time=0, current_page=50, horizon=2, history_deltas=(2, 1))
    win = model.predict(req)
    assert win.deltas == (2, 1)
    assert win.pages == (52, 53)


def test_ngram_single_token_vocab_always_predicts_it():
    deltas = [0] * 20
    vocab = build_vocabulary(deltas, 1)
    model = NGramForecaster.train(deltas, vocab, order=3)
    req = ForecastRequest(time=0, current_page=9, horizon=4, history_deltas=(0, 0))
    assert model.predict(req).deltas == (0, 0, 0, 0)


def test_ngram_backoff_equals_lower_order():
    stream = [1, 2, 3] * 30
    vocab = build_vocabulary(stream, 1)
    m2 = NGramForecaster.train(stream, vocab, order=2)
    m1 = NGramForecaster.train(stream, vocab, order=1)
    # 999 is out of vocabulary, so the length-2 context is unseen and the
    # order-2 model must fall back to the bigram row for context (2,).
    req = ForecastRequest(time=0, current_page=0, horizon=3, history_deltas=(999, 2))
    req1 = ForecastRequest(time=0, current_page=0, horizon=3, history_deltas=(2,))
    assert m2.predict(req).deltas == m1.predict(req1).deltas == (3, 1, 2)


def test_ngram_argmax_ties_break_ascending():
    stream = [1, 2, 1, 3, 1, 2, 1, 3]
    vocab = build_vocabulary(stream, 1)
    model = NGramForecaster.train(stream, vocab, order=1)
    req = ForecastRequest(time=0, current_page=0, horizon=1, history_deltas=(1,))
    assert model.predict(req).deltas == (2,)


def test_ngram_deterministic():
    rng = np.random.default_rng(9)
    stream = rng.integers(-3, 4, size=500).tolist()
    vocab = build_vocabulary(stream, 2)
    a = NGramForecaster.train(stream, vocab, order=3)
    b = NGramForecaster.train(stream, vocab, order=3)
    for _ in range(20):
        hist = tuple(rng.integers(-3, 4, size=5).tolist())
        req = ForecastRequest(time=0, current_page=100, horizon=6, history_deltas=hist)
        assert a.predict(req).deltas == b.predict(req).deltas


def test_ngram_rejects_empty_inputs():
    vocab = build_vocabulary([1, 1], 1)
    with pytest.raises(ValueError):
        NGramForecaster.train([], vocab)
    with pytest.raises(ValueError):
        NGramForecaster.train([1, 2], build_vocabulary([], 1))


def test_ngram_cyclic_workload_accuracy():
    trace = generate_synthetic("cyclic-scan", {"universe": 50, "length": 4000})
    deltas = page_deltas([a.page for a in trace[:3600]])
    vocab = build_vocabulary(deltas, 2)
    model = NGramForecaster.train(deltas, vocab, order=1, num_pages=50)
    acc = evaluate_forecaster(model, trace[3600:], w=10, horizons=[10, 30])
    assert acc[10] >= 0.95 and acc[30] >= 0.95


# ---------------------------------------------------------------------------
# File forecaster

def write_pred_file(path, w, k, rows, vocab_hash="0" * 16):
    write_predictions(path, w, k, vocab_hash, rows)


def test_file_roundtrip_and_lookup(tmp_path):
    path = tmp_path / "preds.txt"
    write_pred_file(path, w=100, k=3, rows=[(907, (8, -14, 0)), (910, (1, 1, 1))])
    fc = FileForecaster.load(path, expected_k=3)
    win = fc.predict(ForecastRequest(time=907, current_page=73, horizon=3))
    assert win.deltas == (8, -14, 0)
    assert fc.predict(ForecastRequest(time=908, current_page=73, horizon=3)) is None


def test_file_rejects_wrong_row_width(tmp_path):
    path = tmp_path / "preds.txt"
    path.write_text("MUSTACHEPRED v1 w=100 k=3 vocab=" + "0" * 16 + "\n907 8 -14\n")
    with pytest.raises(PredictionFileError):
        FileForecaster.load(path)


def test_file_rejects_k_mismatch(tmp_path):
    path = tmp_path / "preds.txt"
    write_pred_file(path, w=100, k=3, rows=[(5, (1, 2, 3))])
    with pytest.raises(PredictionFileError):
        FileForecaster.load(path, expected_k=4)


def test_file_rejects_duplicate_or_decreasing_t(tmp_path):
    path = tmp_path / "preds.txt"
    path.write_text(
        "MUSTACHEPRED v1 w=1 k=1 vocab=" + "0" * 16 + "\n5 1\n5 2\n"
    )
    with pytest.raises(PredictionFileError):
        FileForecaster.load(path)


def test_file_rejects_bad_header(tmp_path):
    path = tmp_path / "preds.txt"
    path.write_text("PREDICTIONS 1.0\n")
    with pytest.raises(PredictionFileError):
        FileForecaster.load(path)


def test_file_vocab_hash_verification(tmp_path):
    vocab_bytes = b"delta,count\n1,5\n"
    path = tmp_path / "preds.txt"
    write_pred_file(path, w=10, k=1, rows=[(3, (1,))], vocab_hash=fnv1a64_hex(vocab_bytes))
    FileForecaster.load(path, vocab_bytes=vocab_bytes)  # matches
    with pytest.raises(PredictionFileError):
        FileForecaster.load(path, vocab_bytes=b"delta,count\n2,5\n")


# ---------------------------------------------------------------------------
# Accuracy

def test_accuracy_examples():
    assert accuracy_at_k([8, -14, 0], [8, -14, 0]) == 1.0
    assert accuracy_at_k([8, -14, 0], [8, 7, 0]) == pytest.approx(2 / 3)
    assert accuracy_at_k([1, 2, 3], [4, 5, 6]) == 0.0


def test_accuracy_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        accuracy_at_k([1, 2], [1])
    with pytest.raises(ValueError):
        accuracy_at_k([], [])


def test_evaluate_rejects_short_split():
    trace = reads(range(20))
    with pytest.raises(ValueError):
        evaluate_forecaster(OracleForecaster(trace), trace, w=15, horizons=[10])


def test_null_forecaster_never_predicts():
    fc = NullForecaster()
    assert fc.predict(ForecastRequest(time=0, current_page=0, horizon=5)) is None
