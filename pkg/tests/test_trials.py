import numpy as np
import pytest

from detscore import (
    AlignmentError,
    EmptySelection,
    LabeledScores,
    OverlapError,
    QualityMeasures,
    ScoreMatrix,
    TrialIndex,
    TrialKey,
    TrialLabel,
    align_scores_to_key,
    filter_by_index,
    filter_by_name_lists,
    gather_scores_on_key,
    merge_scores,
)


def make_key(models=("a", "b"), segments=("x", "y", "z"), label=None):
    if label is None:
        label = [[1, 2, 0], [2, 1, 1]]
    return TrialKey(models, segments, np.array(label))


def make_scores(models=("a", "b"), segments=("x", "y", "z"), score=None, valid=None):
    if score is None:
        score = np.arange(6, dtype=float).reshape(2, 3)
    if valid is None:
        valid = np.ones((2, 3), dtype=bool)
    return ScoreMatrix(models, segments, np.asarray(valid, bool), np.asarray(score, float))


class TestTrialKey:
    def test_masks_and_counts(self):
        key = make_key()
        assert key.n_targets == 3
        assert key.n_nontargets == 2
        np.testing.assert_array_equal(
            key.target_mask, [[True, False, False], [False, True, True]]
        )
        np.testing.assert_array_equal(
            key.nontarget_mask, [[False, True, False], [True, False, False]]
        )

    def test_rejects_bad_label_values(self):
        with pytest.raises(ValueError):
            make_key(label=[[1, 2, 3], [0, 0, 0]])
        with pytest.raises(ValueError):
            make_key(label=[[1, 2, -1], [0, 0, 0]])

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError):
            make_key(models=("a", "a"))
        with pytest.raises(ValueError):
            make_key(segments=("x", "y", "x"))

    def test_names_are_case_sensitive(self):
        key = make_key(models=("a", "A"))
        assert key.model_names == ("a", "A")

    def test_to_index_drops_labels(self):
        key = make_key()
        idx = key.to_index()
        assert isinstance(idx, TrialIndex)
        np.testing.assert_array_equal(idx.valid, key.label != TrialLabel.IGNORED)

    def test_label_array_is_readonly(self):
        key = make_key()
        with pytest.raises(ValueError):
            key.label[0, 0] = 2


class TestScoreMatrix:
    def test_shape_must_match_names(self):
        with pytest.raises(ValueError):
            ScoreMatrix(("a",), ("x", "y"), np.ones((2, 2), bool), np.zeros((2, 2)))

    def test_nonfinite_at_valid_cell_rejected(self):
        score = np.array([[np.nan, 0.0, 0.0], [0.0, 0.0, 0.0]])
        with pytest.raises(ValueError):
            make_scores(score=score)

    def test_nonfinite_at_invalid_cell_allowed(self):
        valid = np.array([[False, True, True], [True, True, True]])
        score = np.array([[np.inf, 0.0, 0.0], [0.0, 0.0, 0.0]])
        m = make_scores(score=score, valid=valid)
        assert not m.valid[0, 0]

    def test_equality_ignores_invalid_cells(self):
        valid = np.array([[False, True, True], [True, True, True]])
        a = make_scores(valid=valid, score=np.arange(6, dtype=float).reshape(2, 3))
        other = np.arange(6, dtype=float).reshape(2, 3).copy()
        other[0, 0] = 99.0
        b = make_scores(valid=valid, score=other)
        assert a == b
        other[1, 1] = 99.0
        c = make_scores(valid=valid, score=other)
        assert a != c

    def test_scores_are_readonly(self):
        m = make_scores()
        with pytest.raises(ValueError):
            m.score[0, 0] = 5.0


class TestLabeledScores:
    def test_counts(self, d1):
        assert d1.n_tar == 2 and d1.n_non == 2

    def test_nan_rejected_infinities_allowed(self):
        with pytest.raises(ValueError):
            LabeledScores([np.nan], [0.0])
        ls = LabeledScores([np.inf], [-np.inf])
        assert np.isposinf(ls.tar[0]) and np.isneginf(ls.non[0])

    def test_must_be_one_dimensional(self):
        with pytest.raises(ValueError):
            LabeledScores(np.zeros((2, 2)), [0.0])


class TestAlign:
    def test_basic_alignment_is_model_major(self):
        key = make_key()
        scores = make_scores()
        labeled, n_missing = align_scores_to_key(scores, key)
        assert n_missing == 0
        # key labels walk the grid row-major: a/x tar, a/y non, b/x non, b/y tar, b/z tar
        np.testing.assert_array_equal(labeled.tar, [0.0, 4.0, 5.0])
        np.testing.assert_array_equal(labeled.non, [1.0, 3.0])

    def test_missing_scores_counted(self):
        key = make_key()
        valid = np.array([[True, False, True], [True, True, True]])
        labeled, n_missing = align_scores_to_key(make_scores(valid=valid), key)
        assert n_missing == 1  # the a/y non-target has no score
        np.testing.assert_array_equal(labeled.non, [3.0])

    def test_names_matched_not_positional(self):
        key = make_key()
        scores = make_scores(models=("b", "a"), score=[[9.0, 8.0, 7.0], [1.0, 2.0, 3.0]])
        labeled, _ = align_scores_to_key(scores, key)
        np.testing.assert_array_equal(labeled.tar, [1.0, 8.0, 7.0])

    def test_absent_names_are_missing(self):
        key = make_key()
        scores = make_scores(models=("a",), score=[[1.0, 2.0, 3.0]], valid=[[True] * 3])
        labeled, n_missing = align_scores_to_key(scores, key)
        assert n_missing == 3
        np.testing.assert_array_equal(labeled.tar, [1.0])
        np.testing.assert_array_equal(labeled.non, [2.0])

    def test_empty_score_matrix(self):
        key = make_key()
        empty = ScoreMatrix((), (), np.zeros((0, 0), bool), np.zeros((0, 0)))
        labeled, n_missing = align_scores_to_key(empty, key)
        assert labeled.n_tar == 0 and labeled.n_non == 0
        assert n_missing == 5

    def test_gather_matches_align(self, rng):
        key = make_key()
        valid = rng.random((2, 3)) < 0.7
        scores = make_scores(valid=valid)
        has, values = gather_scores_on_key(scores, key)
        np.testing.assert_array_equal(has, valid)
        np.testing.assert_array_equal(values[has], scores.score[valid])


class TestMerge:
    def test_disjoint_union(self):
        a = make_scores(models=("a",), segments=("x", "y"), score=[[1.0, 2.0]], valid=[[True, True]])
        b = make_scores(models=("b",), segments=("y", "z"), score=[[3.0, 4.0]], valid=[[True, True]])
        merged = merge_scores(a, b)
        assert merged.model_names == ("a", "b")
        assert merged.segment_names == ("x", "y", "z")
        np.testing.assert_array_equal(
            merged.valid, [[True, True, False], [False, True, True]]
        )
        assert merged.score[0, 1] == 2.0 and merged.score[1, 1] == 3.0

    def test_overlap_raises(self):
        a = make_scores(models=("a",), segments=("x",), score=[[1.0]], valid=[[True]])
        b = make_scores(models=("a",), segments=("x",), score=[[2.0]], valid=[[True]])
        with pytest.raises(OverlapError):
            merge_scores(a, b)

    def test_same_cell_invalid_on_one_side_ok(self):
        a = make_scores(models=("a",), segments=("x",), score=[[1.0]], valid=[[True]])
        b = make_scores(models=("a",), segments=("x",), score=[[0.0]], valid=[[False]])
        merged = merge_scores(a, b)
        assert merged.score[0, 0] == 1.0 and merged.valid[0, 0]


class TestFilter:
    def test_filter_by_index_intersects_validity(self):
        scores = make_scores()
        index = TrialIndex(("b", "c"), ("y", "x"), np.array([[True, False], [True, True]]))
        out = filter_by_index(scores, index)
        assert out.model_names == ("b",)
        assert out.segment_names == ("x", "y")
        # index allows b/y but not b/x
        np.testing.assert_array_equal(out.valid, [[False, True]])

    def test_filter_by_index_empty_raises(self):
        scores = make_scores()
        index = TrialIndex(("q",), ("x",), np.array([[True]]))
        with pytest.raises(EmptySelection):
            filter_by_index(scores, index)

    def test_filter_by_name_lists_on_scores(self):
        scores = make_scores()
        out = filter_by_name_lists(scores, ["b"], ["z", "x"])
        assert out.model_names == ("b",)
        assert out.segment_names == ("x", "z")
        np.testing.assert_array_equal(out.score, [[3.0, 5.0]])

    def test_filter_by_name_lists_on_key(self):
        key = make_key()
        out = filter_by_name_lists(key, ["a", "b"], ["y"])
        assert out.segment_names == ("y",)
        np.testing.assert_array_equal(out.label, [[2], [1]])

    def test_filter_by_name_lists_empty_raises(self):
        with pytest.raises(EmptySelection):
            filter_by_name_lists(make_key(), ["nope"], ["x"])


class TestQualityMeasures:
    def test_column_lookup(self):
        q = QualityMeasures(("u", "v"), np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(q.column("v"), [2.0, 4.0])
        with pytest.raises(KeyError):
            q.column("w")

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            QualityMeasures(("u",), np.array([[np.inf]]))
