import io

import numpy as np
import pytest

from mustachesim.trace import (
    UNK,
    DeltaVocabulary,
    MemoryAccess,
    Op,
    ParseError,
    build_vocabulary,
    common_prefix_length,
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
    zipf_pmf,
)


def reads(pages):
    return [MemoryAccess(p, Op.READ, i) for i, p in enumerate(pages)]


# ---------------------------------------------------------------------------
# Pin parsing

PIN_LINE = "0x7f89388a7f1d R 0x7f89388d9ea0 8 0x5"


def test_parse_single_record():
    result = parse_pin_trace(io.StringIO(PIN_LINE + "\n"))
    assert result.skipped == 0
    rec = result.records[0]
    assert rec.pc == 0x7F89388A7F1D
    assert rec.op is Op.READ
    assert rec.mem == 0x7F89388D9EA0
    assert rec.n_bytes == 8
    assert rec.mem_pref == 0x5


def test_parse_empty_input():
    assert parse_pin_trace(io.StringIO("")).records == []


def test_parse_without_prefetch_column():
    rec = parse_pin_trace(io.StringIO("0x10 W 0x2000 4\n")).records[0]
    assert rec.op is Op.WRITE and rec.mem_pref is None


def test_parse_bad_op_strict_reports_line():
    lines = io.StringIO(PIN_LINE + "\n0x1 X 0x2 8\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_pin_trace(lines, strict=True)


def test_parse_lenient_skips_and_counts():
    text = "banner from the tool\n" + PIN_LINE + "\n0x1 X 0x2 8\n\n"
    result = parse_pin_trace(io.StringIO(text))
    assert len(result.records) == 1
    assert result.skipped == 2


def test_parse_rejects_zero_bytes_strict():
    with pytest.raises(ParseError):
        parse_pin_trace(io.StringIO("0x1 R 0x2 0\n"), strict=True)


# ---------------------------------------------------------------------------
# Page mapping

def test_page_from_mem_division():
    recs = parse_pin_trace(io.StringIO(PIN_LINE)).records
    acc = to_page_accesses(recs, 4096)
    assert acc[0].page == 0x7F89388D9EA0 // 4096 == 0x7F89388D9
    assert acc[0].index == 0


def test_page_zero_and_boundary():
    recs = parse_pin_trace(io.StringIO("0x0 R 0x0 1\n0x0 R 0x1fff 1\n")).records
    pages = [a.page for a in to_page_accesses(recs, 4096)]
    assert pages == [0, 1]  # floor(8191/4096) == 1


def test_page_size_must_be_power_of_two():
    with pytest.raises(ValueError):
        to_page_accesses([], 3000)


def test_page_mapping_monotone_in_address():
    rng = np.random.default_rng(0)
    addrs = np.sort(rng.integers(0, 1 << 40, 500))
    pages = [a // 4096 for a in addrs]
    assert pages == sorted(pages)


# ---------------------------------------------------------------------------
# Preamble stripping

def test_strip_explicit():
    acc = reads([5, 5, 7, 9])
    out = strip_preamble(acc, 2)
    assert [a.page for a in out] == [7, 9]
    assert [a.index for a in out] == [0, 1]


def test_strip_too_many_errors():
    with pytest.raises(ValueError):
        strip_preamble(reads([1, 2]), 2)


def test_auto_lcp():
    t1, t2 = reads([1, 2, 3, 9]), reads([1, 2, 4, 9])
    assert common_prefix_length([t1, t2]) == 2
    stripped, lcp = strip_common_prefix([t1, t2])
    assert lcp == 2
    assert [a.page for a in stripped[0]] == [3, 9]
    assert [a.page for a in stripped[1]] == [4, 9]


def test_auto_lcp_single_trace_errors():
    with pytest.raises(ValueError):
        strip_common_prefix([reads([1, 2, 3])])


# ---------------------------------------------------------------------------
# Deltas and vocabulary

def test_consecutive_deltas():
    assert page_deltas([73, 81, 67, 67, 75]) == [8, -14, 0, 8]


def test_anchored_deltas():
    assert page_deltas([73, 81, 67, 67, 75], "anchored") == [8, -6, -6, 2]


def test_deltas_need_two_accesses():
    with pytest.raises(ValueError):
        page_deltas([5])


def test_identity_pair():
    assert page_deltas([5, 5]) == [0]


def test_encode_with_vocab_maps_oov_to_unk():
    vocab = DeltaVocabulary((0, 8), {0: 2, 8: 2}, 2)
    assert encode_deltas(reads([3, 10]), vocab) == [UNK]
    assert encode_deltas(reads([3, 11, 11]), vocab) == [8, 0]


def test_delta_roundtrip_random_sequences():
    rng = np.random.default_rng(7)
    for _ in range(50):
        pages = rng.integers(0, 1000, size=rng.integers(2, 60)).tolist()
        deltas = page_deltas(pages)
        rebuilt = [pages[0]]
        for d in deltas:
            rebuilt.append(rebuilt[-1] + d)
        assert rebuilt == pages


def test_build_vocabulary_counts():
    vocab = build_vocabulary([8, 8, -14, 0, 0, 3], min_count=2)
    assert set(vocab.tokens) == {8, 0}
    assert vocab.counts == {8: 2, 0: 2}
    # Ties in count break by ascending delta.
    assert vocab.tokens == (0, 8)


def test_min_count_one_keeps_everything():
    vocab = build_vocabulary([5, -3, 9], min_count=1)
    assert set(vocab.tokens) == {5, -3, 9}


def test_all_unique_min_count_two_is_empty():
    assert len(build_vocabulary([1, 2, 3], min_count=2)) == 0


def test_vocabulary_monotone_in_min_count():
    rng = np.random.default_rng(3)
    deltas = rng.integers(-5, 6, size=400).tolist()
    sizes = [len(build_vocabulary(deltas, mc)) for mc in range(1, 8)]
    assert sizes == sorted(sizes, reverse=True)
    for mc in range(1, 7):
        low = set(build_vocabulary(deltas, mc).tokens)
        high = set(build_vocabulary(deltas, mc + 1).tokens)
        assert high <= low


def test_vocab_csv_roundtrip(tmp_path):
    vocab = build_vocabulary([1, 1, 1, -2, -2, 7, 7, 9], min_count=2)
    path = tmp_path / "vocab.csv"
    vocab.save(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "delta,count"
    # Descending count, ties ascending delta.
    assert lines[1:] == ["1,3", "-2,2", "7,2"]
    loaded = DeltaVocabulary.load(path)
    assert loaded.tokens == vocab.tokens
    assert loaded.counts == vocab.counts


# ---------------------------------------------------------------------------
# Train/test split

def test_split_90_10():
    ds = split_train_test(reads(range(100)), 0.9)
    assert ds.train_end == 90
    assert len(ds.train) == 90 and len(ds.test) == 10
    assert [a.index for a in ds.test] == list(range(10))


def test_split_half_of_ten():
    assert split_train_test(reads(range(10)), 0.5).train_end == 5


def test_split_tiny_test_side_is_valid():
    assert split_train_test(reads(range(100)), 0.999).train_end == 99


def test_split_rejects_short_or_degenerate():
    with pytest.raises(ValueError):
        split_train_test(reads(range(9)), 0.9)
    with pytest.raises(ValueError):
        split_train_test(reads(range(100)), 1.0)


def test_split_vocabulary_from_train_only():
    # Page 999 only appears in the test side; its deltas must stay OOV.
    pages = list(range(20)) + [999, 0]
    ds = split_train_test(reads(pages), 0.9, min_count=1)
    assert 1 in ds.vocabulary
    assert (999 - 19) not in ds.vocabulary


def test_split_deterministic():
    acc = reads(np.random.default_rng(5).integers(0, 50, 200).tolist())
    a = split_train_test(acc, 0.8)
    b = split_train_test(acc, 0.8)
    assert a.train_end == b.train_end
    assert a.vocabulary.tokens == b.vocabulary.tokens
    assert a.accesses == b.accesses


# ---------------------------------------------------------------------------
# Synthetic workloads

def test_cyclic_scan_pages():
    acc = generate_synthetic("cyclic-scan", {"universe": 3, "length": 7})
    assert [a.page for a in acc] == [0, 1, 2, 0, 1, 2, 0]


def test_same_seed_same_sequence():
    params = {"universe": 50, "length": 500, "s": 1.0, "write_prob": 0.3}
    a = generate_synthetic("zipfian", params, seed=42)
    b = generate_synthetic("zipfian", params, seed=42)
    assert a == b
    c = generate_synthetic("zipfian", params, seed=43)
    assert a != c


def test_zipf_empirical_matches_analytic_pmf():
    acc = generate_synthetic("zipfian", {"universe": 50, "length": 10000, "s": 1.0}, seed=42)
    pages = np.array([a.page for a in acc])
    pmf = zipf_pmf(50, 1.0)
    for rank in range(5):  # head pages carry the mass worth checking
        freq = float(np.mean(pages == rank))
        assert abs(freq - pmf[rank]) < 0.02


def test_markov_delta_wraps_universe():
    acc = generate_synthetic(
        "markov-delta",
        {"length": 100, "deltas": [7], "weights": [1.0], "universe": 10},
        seed=1,
    )
    assert all(0 <= a.page < 10 for a in acc)


def test_looping_hotset_page_ranges():
    acc = generate_synthetic(
        "looping-with-hotset",
        {"length": 2000, "loop_size": 10, "hot_size": 30, "loop_prob": 0.5},
        seed=9,
    )
    assert all(0 <= a.page < 40 for a in acc)
    loop_pages = [a.page for a in acc if a.page < 10]
    assert loop_pages  # the loop actually runs


def test_generate_unknown_kind():
    with pytest.raises(ValueError):
        generate_synthetic("nope", {})


# ---------------------------------------------------------------------------
# Page-access CSV

def test_accesses_csv_roundtrip(tmp_path):
    acc = generate_synthetic("zipfian", {"universe": 20, "length": 50, "write_prob": 0.4}, seed=3)
    path = tmp_path / "trace.csv"
    save_accesses_csv(acc, path)
    assert path.read_text().splitlines()[0] == "index,page,op"
    assert load_accesses_csv(path) == acc


def test_accesses_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("page,op\n1,R\n")
    with pytest.raises(ParseError):
        load_accesses_csv(path)
