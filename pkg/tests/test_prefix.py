import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from prefixsched.gen import shuffled_prompts
from prefixsched.prefix import RadixIndex, overlap, scan_best

tokens = st.lists(st.integers(0, 3), min_size=1, max_size=8).map(tuple)


class TestOverlap:
    def test_identity(self):
        x = tuple(range(7))
        assert overlap(x, x) == 7

    def test_first_token_differs(self):
        assert overlap((1, 2, 3), (2, 2, 3)) == 0

    def test_toy_same_user(self):
        x1, _, x3, _ = shuffled_prompts(4, 2, 5, 5)
        assert overlap(x1, x3) == 5

    @given(tokens, tokens)
    def test_symmetric_and_bounded(self, x, y):
        assert overlap(x, y) == overlap(y, x) <= min(len(x), len(y))
        assert x[: overlap(x, y)] == y[: overlap(x, y)]


class TestIndexStructure:
    def test_insert_remove_is_empty(self):
        idx = RadixIndex()
        idx.insert(3, (1, 2, 3))
        idx.remove(3)
        assert idx == RadixIndex()
        assert len(idx) == 0

    def test_shared_prefix_compressed(self):
        idx = RadixIndex([(0, (9, 9, 9, 9, 9, 1)), (1, (9, 9, 9, 9, 9, 2))])
        (edge,) = idx.root.children.values()
        assert len(edge.edge) >= 5
        assert len(edge.children) == 2

    def test_distinct_first_tokens(self):
        idx = RadixIndex([(0, (1, 5)), (1, (2, 5)), (2, (3, 5))])
        assert len(idx.root.children) == 3

    def test_duplicate_insert(self):
        idx = RadixIndex([(0, (1,))])
        with pytest.raises(KeyError):
            idx.insert(0, (2,))

    def test_missing_remove(self):
        with pytest.raises(KeyError):
            RadixIndex().remove(4)

    def test_identical_prompts_share_a_node(self):
        idx = RadixIndex([(0, (1, 2)), (1, (1, 2))])
        (node,) = idx.root.children.values()
        assert set(node.terminal) == {0, 1}

    @given(st.lists(tokens, min_size=1, max_size=12), st.data())
    def test_removal_matches_fresh_build(self, prompts, data):
        items = list(enumerate(prompts))
        idx = RadixIndex(items)
        gone = data.draw(st.sets(st.sampled_from([i for i, _ in items])))
        for i in gone:
            idx.remove(i)
        assert idx == RadixIndex([(i, p) for i, p in items if i not in gone])
        assert idx.root.count == len(items) - len(gone)


class TestBestMatch:
    def test_empty(self):
        with pytest.raises(LookupError):
            RadixIndex().best_match((1,), random.Random(0))

    def test_exact_unique(self):
        idx = RadixIndex([(0, (1, 2, 3)), (1, (1, 2, 4)), (2, (5,))])
        assert idx.best_match((1, 2, 3), random.Random(0)) == (0, 3)

    def test_no_shared_prefix(self):
        idx = RadixIndex([(0, (1, 2)), (1, (3, 4))])
        qid, ov = idx.best_match((7,), random.Random(0))
        assert qid in (0, 1) and ov == 0

    def test_toy_pending(self):
        x1, x2, x3, x4 = shuffled_prompts(4, 2, 5, 5)
        idx = RadixIndex([(2, x3), (1, x2)])
        assert idx.best_match(x1, random.Random(0)) == (2, 5)

    @settings(max_examples=300)
    @given(st.lists(tokens, min_size=1, max_size=12), tokens, st.integers(0, 2**32))
    def test_agrees_with_scan(self, prompts, probe, seed):
        pending = dict(enumerate(prompts))
        idx = RadixIndex(pending.items())
        qid, ov = idx.best_match(probe, random.Random(seed))
        best, winners = scan_best(pending, probe)
        assert ov == best
        assert qid in winners

    def test_uniform_ties(self):
        idx = RadixIndex([(0, (1, 2, 3)), (1, (1, 2, 4)), (2, (1, 2, 5, 6)), (3, (9,))])
        rng = random.Random(1234)
        draws = 12000
        counts = Counter(idx.best_match((1, 2, 7), rng)[0] for _ in range(draws))
        assert set(counts) == {0, 1, 2}
        for qid in (0, 1, 2):
            assert abs(counts[qid] / draws - 1 / 3) <= 0.02

    def test_uniform_over_duplicates_and_prefix_holders(self):
        # a prompt ending at the branch point ties with the deeper ones
        idx = RadixIndex([(0, (1, 2)), (1, (1, 2, 3)), (2, (1, 2, 4))])
        rng = random.Random(5)
        counts = Counter(idx.best_match((1, 2, 9), rng)[0] for _ in range(9000))
        for qid in (0, 1, 2):
            assert abs(counts[qid] / 9000 - 1 / 3) <= 0.02
