"""K-Select pipeline: histogram selection, candidate gather, refine, and
end-to-end agreement with the brute-force oracle."""

import numpy as np
import pytest

from xfbq import (
    DimensionMismatchError,
    DistanceHistogram,
    InvalidInputError,
    QuantParams,
    SearchRequest,
    batch_distances,
    brute_force_topk,
    build_index,
    distance_upper_bound,
    estimate_scale,
    gather_candidates,
    generate_synthetic,
    histogram_kth_distance,
    k_select,
    precision_at_k,
    quantize_vector,
    refine,
    suggest_extra_distance,
    unpack_matrix,
)


def test_histogram_kth_worked_examples():
    d = np.array([5, 3, 9, 3, 7])
    assert histogram_kth_distance(d, k=2, extra=0) == 3
    assert histogram_kth_distance(d, k=1, extra=0) == 3  # tie at the boundary
    assert histogram_kth_distance(d, k=2, extra=2) == 5


def test_histogram_kth_edge_cases():
    assert histogram_kth_distance(np.array([7]), k=1) == 7
    assert histogram_kth_distance(np.array([4, 4, 4]), k=3) == 4
    assert histogram_kth_distance(np.array([1, 2]), k=10) == 2  # k > n
    with pytest.raises(InvalidInputError):
        histogram_kth_distance(np.array([], dtype=np.int64), k=1)


def test_histogram_kth_matches_sort_oracle():
    rng = np.random.default_rng(40)
    for _ in range(500):
        n = int(rng.integers(1, 200))
        d = rng.integers(0, 50, size=n)
        k = int(rng.integers(1, n + 3))
        extra = int(rng.integers(0, 5))
        expected = int(np.sort(d)[min(k, n) - 1]) + extra
        assert histogram_kth_distance(d, k, extra) == expected


def test_distance_histogram_invariants():
    d = np.array([5, 3, 9, 3, 7])
    hist = DistanceHistogram.from_distances(d, upper_bound=10)
    assert hist.bins.shape == (11,)
    assert hist.total == 5
    assert hist.bins[3] == 2
    with pytest.raises(InvalidInputError):
        DistanceHistogram.from_distances(d, upper_bound=8)


def test_gather_candidates_examples():
    d = np.array([5, 3, 9, 3, 7])
    assert gather_candidates(d, 3).tolist() == [1, 3]
    assert gather_candidates(d, 9).tolist() == [0, 1, 2, 3, 4]
    assert gather_candidates(np.array([], dtype=np.uint64), 5).tolist() == []


def _index_for_refine():
    # four unit rows with known dot products against e0
    dim = 8
    sims = [0.9, 0.7, 0.5, 0.5]
    rows = np.zeros((4, dim), dtype=np.float32)
    for i, s in enumerate(sims):
        rows[i, 0] = s
        rows[i, i + 1] = np.sqrt(1.0 - s * s)
    params = QuantParams(dim=dim, scale=1.0)
    return build_index(rows, params), np.eye(dim)[0]


def test_refine_orders_by_exact_similarity():
    idx, query = _index_for_refine()
    hits, approximate = refine(idx, query, np.array([1, 0]), k=2)
    assert not approximate
    assert [h[0] for h in hits] == [0, 1]
    assert hits[0][1] == pytest.approx(0.9, abs=1e-7)


def test_refine_tie_breaks_by_id():
    idx, query = _index_for_refine()
    hits, _ = refine(idx, query, np.array([3, 2]), k=2)
    assert [h[0] for h in hits] == [2, 3]
    assert hits[0][1] == hits[1][1]


def test_refine_k_one():
    idx, query = _index_for_refine()
    hits, _ = refine(idx, query, np.array([0, 1, 2]), k=1)
    assert len(hits) == 1 and hits[0][0] == 0


def test_refine_without_originals_is_approximate():
    rows = generate_synthetic(20, 32, seed=41).data
    params = QuantParams(dim=32, scale=estimate_scale(rows))
    idx = build_index(rows, params, keep_originals=False)
    query = rows[0]
    hits, approximate = refine(idx, query, np.arange(20), k=5)
    assert approximate and len(hits) == 5
    # quantized self-similarity should still rank the query's own row first,
    # with a descaled value near the true cosine of 1.0
    assert hits[0][0] == 0
    assert hits[0][1] == pytest.approx(1.0, abs=0.2)


def test_suggest_extra_distance_values():
    rows = generate_synthetic(4, 200, seed=42).data
    idx = build_index(rows, QuantParams(dim=200, scale=2.0))
    assert suggest_extra_distance(idx, 0.05) == 1050
    assert suggest_extra_distance(idx, 0.0) == 0
    assert suggest_extra_distance(idx, 1.0) == distance_upper_bound(200, 4, 3)
    with pytest.raises(InvalidInputError):
        suggest_extra_distance(idx, 1.5)


def _worked_pipeline_index():
    """Five 1-d docs whose quantized distances to query 0.375 are
    [20, 17, 26, 17, 23] (codes 010, 001, 100, 001, 011 vs 010)."""
    values = np.array([[0.375], [0.625], [-0.125], [0.625], [0.125]], dtype=np.float32)
    params = QuantParams(dim=1, scale=1.0, doc_bits=3, query_bits=3)
    with pytest.warns(UserWarning):
        idx = build_index(values, params)
    assert np.array_equal(unpack_matrix(idx.packed).ravel(),
                          [0b010, 0b001, 0b100, 0b001, 0b011])
    return idx, np.array([0.375])


def test_k_select_worked_example():
    idx, query = _worked_pipeline_index()
    dists = batch_distances(idx.packed, quantize_vector(query, 3, 1.0))
    assert dists.tolist() == [20, 17, 26, 17, 23]

    result = k_select(idx, SearchRequest(query=query, k=2, extra_distance=0))
    assert result.threshold_distance == 17
    assert result.candidate_count == 2
    # both candidates share the exact similarity; ids break the tie
    assert [h[0] for h in result.hits] == [1, 3]

    widened = k_select(idx, SearchRequest(query=query, k=2, extra_distance=3))
    assert widened.threshold_distance == 20
    assert widened.candidate_count == 3
    assert [h[0] for h in widened.hits] == [1, 3]


def test_k_select_full_extra_equals_oracle():
    rng = np.random.default_rng(43)
    rows = generate_synthetic(500, 96, seed=44).data
    params = QuantParams(dim=96, scale=estimate_scale(rows))
    idx = build_index(rows, params)
    upper = distance_upper_bound(96, 3, 4)
    for _ in range(5):
        query = rows[int(rng.integers(0, 500))] + 0.0
        result = k_select(idx, SearchRequest(query=query, k=10, extra_distance=upper))
        assert result.candidate_count == 500
        assert result.hits == brute_force_topk(rows, query, 10)


def test_k_select_precision_monotone_in_extra():
    rows = generate_synthetic(2000, 64, seed=45).data
    queries = generate_synthetic(5, 64, seed=46).data
    params = QuantParams(dim=64, scale=estimate_scale(rows))
    idx = build_index(rows, params)
    k = 10
    exact = {i: [d for d, _ in brute_force_topk(rows, q, k)] for i, q in enumerate(queries)}
    previous = -1.0
    for fraction in (0.0, 0.02, 0.05, 0.10, 1.0):
        extra = suggest_extra_distance(idx, fraction)
        precisions = []
        for i, q in enumerate(queries):
            res = k_select(idx, SearchRequest(query=q, k=k, extra_distance=extra))
            precisions.append(precision_at_k([h[0] for h in res.hits], exact[i], k))
        mean = float(np.mean(precisions))
        assert mean >= previous
        previous = mean
    assert previous == 1.0  # full extra distance is exact


def test_k_select_candidates_contain_true_boundary():
    # every doc at quantized distance <= the true kth distance is a candidate
    rows = generate_synthetic(300, 32, seed=47).data
    idx = build_index(rows, QuantParams(dim=32, scale=estimate_scale(rows)))
    query = generate_synthetic(1, 32, seed=48).data[0]
    dists = batch_distances(idx.packed, quantize_vector(query.astype(np.float64), 4,
                                                        idx.params.scale))
    k = 7
    kth = int(np.sort(dists)[k - 1])
    result = k_select(idx, SearchRequest(query=query, k=k, extra_distance=0))
    assert result.threshold_distance == kth
    assert result.candidate_count == int((dists <= kth).sum())


def test_k_select_k_larger_than_n():
    rows = generate_synthetic(4, 16, seed=49).data
    idx = build_index(rows, QuantParams(dim=16, scale=2.0))
    res = k_select(idx, SearchRequest(query=rows[0], k=100))
    assert len(res.hits) == 4


def test_k_select_empty_index():
    idx = build_index(np.empty((0, 16), dtype=np.float32), QuantParams(dim=16, scale=2.0))
    res = k_select(idx, SearchRequest(query=np.zeros(16), k=3))
    assert res.hits == [] and res.candidate_count == 0


def test_k_select_dim_mismatch():
    rows = generate_synthetic(4, 16, seed=50).data
    idx = build_index(rows, QuantParams(dim=16, scale=2.0))
    with pytest.raises(DimensionMismatchError):
        k_select(idx, SearchRequest(query=np.zeros(8), k=1))


def test_k_select_determinism():
    rows = generate_synthetic(400, 48, seed=51).data
    idx = build_index(rows, QuantParams(dim=48, scale=estimate_scale(rows)))
    query = generate_synthetic(1, 48, seed=52).data[0]
    req = SearchRequest(query=query, k=9, extra_distance=30)
    first = k_select(idx, req)
    for _ in range(3):
        again = k_select(idx, req)
        assert again.hits == first.hits
        assert again.candidate_count == first.candidate_count


def test_k_select_respects_external_ids():
    rows = generate_synthetic(5, 16, seed=53).data
    ids = np.array([100, 200, 300, 400, 500])
    idx = build_index(rows, QuantParams(dim=16, scale=2.0), ids=ids)
    res = k_select(idx, SearchRequest(query=rows[2], k=1,
                                      extra_distance=distance_upper_bound(16, 3, 4)))
    assert res.hits[0][0] == 300


def test_k_select_timing_collection():
    rows = generate_synthetic(50, 32, seed=54).data
    idx = build_index(rows, QuantParams(dim=32, scale=2.0))
    res = k_select(idx, SearchRequest(query=rows[0], k=3), collect_timing=True)
    assert set(res.stage_seconds) == {"quantize_query", "distances",
                                      "histogram_gather", "refine"}


def test_k_select_concurrent_queries_deterministic():
    from concurrent.futures import ThreadPoolExecutor

    rows = generate_synthetic(3000, 64, seed=55).data
    idx = build_index(rows, QuantParams(dim=64, scale=estimate_scale(rows)))
    queries = generate_synthetic(16, 64, seed=56).data
    requests = [SearchRequest(query=q, k=5, extra_distance=40) for q in queries]
    sequential = [k_select(idx, r) for r in requests]
    with ThreadPoolExecutor(max_workers=4) as pool:
        concurrent = list(pool.map(lambda r: k_select(idx, r), requests))
    for a, b in zip(sequential, concurrent):
        assert a.hits == b.hits and a.candidate_count == b.candidate_count


def test_search_request_validation():
    with pytest.raises(InvalidInputError):
        SearchRequest(query=np.array([0.1]), k=0)
    with pytest.raises(InvalidInputError):
        SearchRequest(query=np.array([np.nan]), k=1)
    with pytest.raises(InvalidInputError):
        SearchRequest(query=np.array([0.1]), k=1, extra_distance=-1)
