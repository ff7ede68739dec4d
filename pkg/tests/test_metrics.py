import itertools
import json
from collections import Counter

import numpy as np
import pytest

from conciserl.metrics import (
    BenchResult,
    TraceRecord,
    accuracy,
    avg_delta,
    change_rate,
    difficulty_quintiles,
    ipt,
    length_cv,
    load_results_csv,
    load_traces_jsonl,
    majority_at_k,
    overthinking_counts,
    quintile_sizes,
    split_method_benchmark,
    summarize_results,
)

# Golden reference values: published per-benchmark (accuracy %, mean tokens)
# for an unmodified baseline and a length-compressed model, with the printed
# average IPT / delta columns they must reproduce.

MATH_VANILLA = [
    ("amc23", 62.0, 8273.9),
    ("aime24", 27.9, 12019.2),
    ("math500", 81.0, 4635.5),
    ("minerva", 26.8, 6347.1),
    ("olympiad", 41.5, 8915.1),
]
MATH_COMPRESSED = [
    ("amc23", 61.3, 4164.1),
    ("aime24", 25.2, 7359.4),
    ("math500", 78.6, 2257.1),
    ("minerva", 26.1, 2383.3),
    ("olympiad", 39.6, 4651.1),
]

OOD_VANILLA = [
    ("livecodebench", 12.80, 6218.0),
    ("gpqa", 16.0, 8514.3),
    ("mmlu", 38.8, 1680.3),
]
OOD_TRAINED = [
    ("livecodebench", 13.65, 4626.0),
    ("gpqa", 25.4, 3259.4),
    ("mmlu", 44.2, 622.1),
]


class TestAccuracy:
    def test_basic(self):
        assert accuracy([True, True, False, False]) == 50.0

    def test_all_correct(self):
        assert accuracy([True] * 7) == 100.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            accuracy([])


class TestIpt:
    def test_derived_example(self):
        # accuracy per kilotoken, checked against a published cell
        assert ipt(38.8, 1680.3) == pytest.approx(23.091, abs=5e-3)

    def test_unit_scale(self):
        assert ipt(50.0, 1000.0) == 50.0

    def test_zero_tokens_rejected(self):
        with pytest.raises(ValueError):
            ipt(50.0, 0.0)


class TestChangeRate:
    def test_derived_example(self):
        assert change_rate(4164.1, 8273.9) == pytest.approx(-49.67, abs=5e-3)

    def test_no_change(self):
        assert change_rate(3.0, 3.0) == 0.0

    def test_doubling(self):
        assert change_rate(4.0, 2.0) == 100.0

    def test_zero_baseline_rejected(self):
        with pytest.raises(ValueError):
            change_rate(1.0, 0.0)


class TestGoldenAverages:
    def test_math_token_delta(self):
        pairs = [(c[2], v[2]) for c, v in zip(MATH_COMPRESSED, MATH_VANILLA)]
        assert avg_delta(pairs) == pytest.approx(-50.01, abs=0.05)

    def test_math_accuracy_delta(self):
        pairs = [(c[1], v[1]) for c, v in zip(MATH_COMPRESSED, MATH_VANILLA)]
        assert avg_delta(pairs) == pytest.approx(-4.19, abs=0.05)

    def test_math_vanilla_avg_ipt(self):
        ipts = [ipt(a, t) for _, a, t in MATH_VANILLA]
        assert np.mean(ipts) == pytest.approx(7.23, abs=0.01)

    def test_ood_vanilla_avg_ipt(self):
        ipts = [ipt(a, t) for _, a, t in OOD_VANILLA]
        assert np.mean(ipts) == pytest.approx(9.01, abs=0.01)

    def test_ood_trained_token_delta(self):
        pairs = [(m[2], v[2]) for m, v in zip(OOD_TRAINED, OOD_VANILLA)]
        assert avg_delta(pairs) == pytest.approx(-50.10, abs=0.05)

    def test_ood_trained_avg_ipt(self):
        ipts = [ipt(a, t) for _, a, t in OOD_TRAINED]
        assert np.mean(ipts) == pytest.approx(27.26, abs=0.01)


class TestMajorityAtK:
    def test_unanimous(self):
        samples = {"p": [("A", 10), ("A", 12), ("A", 9)]}
        acc, tokens = majority_at_k(samples, {"p": "A"}, k=3, rng=np.random.default_rng(0))
        assert acc == 1.0
        assert tokens == 31

    def test_lexicographic_tie_break(self):
        samples = {"p": [("B", 1), ("A", 1)]}
        acc, _ = majority_at_k(samples, {"p": "A"}, k=2, rng=np.random.default_rng(0))
        assert acc == 1.0  # tie between A and B resolves to "A"

    def test_k_one_is_single_sample(self):
        samples = {"p": [("A", 5), ("B", 5)]}
        rng = np.random.default_rng(1)
        accs = {majority_at_k(samples, {"p": "A"}, 1, np.random.default_rng(s))[0] for s in range(20)}
        assert accs == {0.0, 1.0}

    def test_pool_too_small(self):
        with pytest.raises(ValueError):
            majority_at_k({"p": [("A", 1)]}, {"p": "A"}, 2, np.random.default_rng(0))

    def test_matches_subset_enumeration(self):
        # expected accuracy over many rng draws approximates the exact average
        # over all k-subsets (sampling is without replacement)
        pool = [("A", 1), ("A", 1), ("B", 1), ("B", 1), ("C", 1)]
        truth = {"p": "A"}
        k = 3
        wins = 0
        subsets = list(itertools.combinations(range(len(pool)), k))
        for idxs in subsets:
            counts = Counter(pool[i][0] for i in idxs)
            top = max(counts.values())
            winner = min(a for a, c in counts.items() if c == top)
            wins += winner == "A"
        exact = wins / len(subsets)
        draws = [
            majority_at_k({"p": pool}, truth, k, np.random.default_rng(s))[0]
            for s in range(2000)
        ]
        assert np.mean(draws) == pytest.approx(exact, abs=0.03)

    def test_token_budget_scales_with_k(self):
        samples = {"p": [("A", 7)] * 6}
        for k in (1, 3, 6):
            _, tokens = majority_at_k(samples, {"p": "A"}, k, np.random.default_rng(0))
            assert tokens == 7 * k


class TestLengthCv:
    def test_constant_lengths(self):
        assert length_cv({"p": [5.0, 5.0, 5.0]}) == 0.0

    def test_known_value(self):
        # std([2, 4]) = 1 (population), mean = 3
        assert length_cv({"p": [2.0, 4.0]}) == pytest.approx(1 / 3)

    def test_mean_over_problems(self):
        cv = length_cv({"a": [2.0, 4.0], "b": [5.0, 5.0]})
        assert cv == pytest.approx((1 / 3 + 0.0) / 2)

    def test_diverse_exceeds_uniform(self):
        rng = np.random.default_rng(2)
        tight = {"p": list(rng.normal(100, 1, size=50))}
        wide = {"p": list(rng.normal(100, 40, size=50).clip(min=1))}
        assert length_cv(wide) > length_cv(tight)

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError):
            length_cv({"p": [3.0]})


def trace(text, pid="p", correct=True, tokens=10):
    return TraceRecord(pid, text, "A", correct, tokens)


class TestOverthinkingCounts:
    def test_keyword_fixture(self):
        counts, _ = overthinking_counts([trace("Wait\n\nBut wait, hmm")])
        assert counts["Wait"] == 2
        assert counts["But"] == 1
        assert counts["Hmm"] == 1
        assert counts["However"] == 0

    def test_word_boundaries(self):
        counts, _ = overthinking_counts([trace("butter however, anotherness")])
        assert counts["But"] == 0
        assert counts["However"] == 1
        assert counts["Another"] == 0

    def test_multiword_phrase(self):
        counts, _ = overthinking_counts([trace("I'm not sure. Going back to it.")])
        assert counts["Not sure"] == 1
        assert counts["Going back"] == 1

    def test_mean_segments(self):
        traces = [trace("a\n\nb\n\nc"), trace("one segment")]
        _, mean_steps = overthinking_counts(traces)
        assert mean_steps == pytest.approx((3 + 1) / 2)

    def test_empty_segments_ignored(self):
        _, mean_steps = overthinking_counts([trace("a\n\n\n\nb")])
        assert mean_steps == 2.0

    def test_order_invariant(self):
        a = [trace("Wait"), trace("But but")]
        assert overthinking_counts(a)[0] == overthinking_counts(list(reversed(a)))[0]


class TestQuintiles:
    def test_sizes_for_small_n(self):
        assert quintile_sizes(5) == [1, 1, 1, 1, 1]
        assert quintile_sizes(7) == [2, 2, 1, 1, 1]
        assert quintile_sizes(10) == [2, 2, 2, 2, 2]
        assert quintile_sizes(13) == [3, 3, 3, 2, 2]

    def test_sizes_sum(self):
        for n in range(5, 14):
            assert sum(quintile_sizes(n)) == n

    def test_too_few(self):
        with pytest.raises(ValueError):
            quintile_sizes(4)

    def test_binned_by_vanilla_length(self):
        # 10 records with vanilla lengths 1..10 shuffled; hardest bin is 9,10
        records = [(float(v), v <= 9, float(v) / 2) for v in (3, 1, 7, 9, 5, 2, 10, 6, 4, 8)]
        stats = difficulty_quintiles(records)
        assert [s.count for s in stats] == [2, 2, 2, 2, 2]
        assert stats[0].accuracy == 100.0
        assert stats[4].accuracy == 50.0  # lengths 9, 10 -> one incorrect
        for s in stats:
            assert s.token_change == pytest.approx(-50.0)


class TestFileInterfaces:
    def test_results_csv_round_trip(self, tmp_path):
        path = tmp_path / "results.csv"
        path.write_text(
            "name,accuracy,mean_tokens\nvanilla/amc23,62.0,8273.9\nours/amc23,65.8,2921.2\n"
        )
        rows = load_results_csv(path)
        assert rows == [
            BenchResult("vanilla/amc23", 62.0, 8273.9),
            BenchResult("ours/amc23", 65.8, 2921.2),
        ]

    def test_results_csv_bad_header(self, tmp_path):
        path = tmp_path / "results.csv"
        path.write_text("method,acc\nx,1\n")
        with pytest.raises(ValueError, match="header"):
            load_results_csv(path)

    def test_traces_jsonl(self, tmp_path):
        path = tmp_path / "traces.jsonl"
        rec = {"problem_id": "p", "text": "Wait", "answer": "A", "correct": True, "token_count": 4}
        path.write_text(json.dumps(rec) + "\n\n")
        assert load_traces_jsonl(path) == [TraceRecord("p", "Wait", "A", True, 4)]

    def test_split_method_benchmark(self):
        assert split_method_benchmark("vanilla/amc23") == ("vanilla", "amc23")
        assert split_method_benchmark("vanilla") == ("vanilla", "")


class TestSummarizeResults:
    def make_results(self):
        rows = []
        for bench, acc, tok in MATH_VANILLA:
            rows.append(BenchResult(f"vanilla/{bench}", acc, tok))
        for bench, acc, tok in MATH_COMPRESSED:
            rows.append(BenchResult(f"compressed/{bench}", acc, tok))
        return rows

    def test_reproduces_printed_averages(self):
        summary = summarize_results(self.make_results(), "vanilla")
        assert summary["vanilla"]["avg_ipt"] == pytest.approx(7.23, abs=0.01)
        assert summary["compressed"]["d_token"] == pytest.approx(-50.01, abs=0.05)
        assert summary["compressed"]["d_acc"] == pytest.approx(-4.19, abs=0.05)

    def test_vanilla_deltas_are_zero(self):
        summary = summarize_results(self.make_results(), "vanilla")
        assert summary["vanilla"]["d_token"] == pytest.approx(0.0)
        assert summary["vanilla"]["d_acc"] == pytest.approx(0.0)

    def test_missing_vanilla(self):
        with pytest.raises(ValueError, match="vanilla"):
            summarize_results([BenchResult("x/a", 1.0, 2.0)], "vanilla")
