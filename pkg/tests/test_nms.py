import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotdet.geometry import AxisAlignedBox, OrientedBox, iou_aabb, iou_obb
from rotdet.nms import KIND_AXIS, KIND_ORIENTED, Detection, nms
from rotdet.targets_losses import ClassLabel


def det(x, y, w, h, score, cls=ClassLabel.GUN):
    return Detection(cls=cls, score=score, box=AxisAlignedBox(x, y, x + w, y + h))


def odet(cx, cy, hl, hw, theta, score, cls=ClassLabel.GUN):
    return Detection(cls=cls, score=score, box=OrientedBox(cx, cy, hl, hw, theta))


def greedy_reference(dets, thresh, kind):
    iou = iou_aabb if kind == KIND_AXIS else iou_obb
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept = []
    for i in order:
        if all(iou(dets[i].box, dets[j].box) <= thresh for j in kept):
            kept.append(i)
    return [dets[i] for i in kept]


class TestDetectionType:
    def test_rejects_background_class(self):
        with pytest.raises(ValueError):
            det(0, 0, 1, 1, 0.5, cls=ClassLabel.BACKGROUND)

    def test_rejects_out_of_range_score(self):
        for bad in (-0.1, 1.1, float("nan")):
            with pytest.raises(ValueError):
                det(0, 0, 1, 1, bad)

    def test_score_endpoints_are_valid(self):
        assert det(0, 0, 1, 1, 0.0).score == 0.0
        assert det(0, 0, 1, 1, 1.0).score == 1.0

    def test_kind_follows_box_type(self):
        assert det(0, 0, 1, 1, 0.5).kind == KIND_AXIS
        assert odet(0, 0, 1, 1, 30.0, 0.5).kind == KIND_ORIENTED

    def test_rejects_other_box_types(self):
        with pytest.raises(TypeError):
            Detection(cls=ClassLabel.GUN, score=0.5, box=(0, 0, 1, 1))


class TestNmsValidation:
    def test_rejects_bad_threshold(self):
        for bad in (0.0, 1.0, -0.5, float("nan")):
            with pytest.raises(ValueError):
                nms([det(0, 0, 1, 1, 0.5)], bad, KIND_AXIS)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            nms([], 0.5, "rotated")

    def test_rejects_kind_mismatch(self):
        with pytest.raises(ValueError):
            nms([odet(0, 0, 1, 1, 30.0, 0.5)], 0.5, KIND_AXIS)
        with pytest.raises(ValueError):
            nms([det(0, 0, 1, 1, 0.5)], 0.5, KIND_ORIENTED)

    def test_rejects_mixed_kinds(self):
        mixed = [det(0, 0, 1, 1, 0.5), odet(0, 0, 1, 1, 30.0, 0.4)]
        with pytest.raises(ValueError):
            nms(mixed, 0.5, KIND_AXIS)

    def test_rejects_mixed_classes(self):
        mixed = [det(0, 0, 1, 1, 0.5), det(5, 5, 1, 1, 0.4, cls=ClassLabel.RIFLE)]
        with pytest.raises(ValueError):
            nms(mixed, 0.5, KIND_AXIS)

    def test_empty_input_is_fine(self):
        assert nms([], 0.5, KIND_AXIS) == []


class TestNmsBehavior:
    def test_duplicate_boxes_keep_best_score(self):
        a = det(0, 0, 10, 10, 0.9)
        b = det(0, 0, 10, 10, 0.8)
        assert nms([b, a], 0.5, KIND_AXIS) == [a]

    def test_disjoint_boxes_all_survive(self):
        dets = [det(0, 0, 5, 5, 0.9), det(20, 0, 5, 5, 0.8), det(40, 0, 5, 5, 0.7)]
        assert nms(dets, 0.5, KIND_AXIS) == dets

    def test_suppressed_detection_does_not_suppress_others(self):
        # b overlaps both a and c; a and c are disjoint. Greedy keeps a,
        # drops b, and must still keep c.
        a = det(0, 0, 10, 10, 0.9)
        b = det(5, 0, 10, 10, 0.8)
        c = det(10, 0, 10, 10, 0.7)
        assert iou_aabb(a.box, b.box) > 0.25
        assert iou_aabb(b.box, c.box) > 0.25
        assert iou_aabb(a.box, c.box) == 0.0
        assert nms([a, b, c], 0.25, KIND_AXIS) == [a, c]

    def test_iou_exactly_at_threshold_survives(self):
        # Overlap one third: suppression requires IoU strictly above.
        a = det(0, 0, 10, 10, 0.9)
        b = det(5, 0, 10, 10, 0.8)
        third = iou_aabb(a.box, b.box)
        assert nms([a, b], third, KIND_AXIS) == [a, b]
        assert nms([a, b], third - 1e-12, KIND_AXIS) == [a]

    def test_equal_scores_preserve_input_order(self):
        a = det(0, 0, 10, 10, 0.8)
        b = det(0, 0, 10, 10, 0.8)
        kept = nms([a, b], 0.5, KIND_AXIS)
        assert kept == [a]

    def test_output_sorted_by_score(self):
        dets = [det(40, 0, 5, 5, 0.2), det(0, 0, 5, 5, 0.9), det(20, 0, 5, 5, 0.5)]
        kept = nms(dets, 0.5, KIND_AXIS)
        assert [d.score for d in kept] == [0.9, 0.5, 0.2]

    def test_oriented_suppression_uses_rotated_overlap(self):
        # Same center, one rotated 90 degrees: IoU well below 0.5 for a long
        # thin bar, so both survive a 0.5 threshold but not a low one.
        a = odet(0, 0, 10, 1, 0.0, 0.9)
        b = odet(0, 0, 10, 1, 90.0, 0.8)
        cross = iou_obb(a.box, b.box)
        assert cross < 0.2
        assert nms([a, b], 0.5, KIND_ORIENTED) == [a, b]
        assert nms([a, b], cross / 2, KIND_ORIENTED) == [a]


@st.composite
def axis_batches(draw):
    n = draw(st.integers(0, 12))
    dets = []
    for i in range(n):
        x = draw(st.floats(0, 40))
        y = draw(st.floats(0, 40))
        w = draw(st.floats(1, 20))
        h = draw(st.floats(1, 20))
        score = draw(st.sampled_from([0.1, 0.25, 0.5, 0.5, 0.75, 0.9]))
        dets.append(det(x, y, w, h, score))
    return dets


class TestNmsProperties:
    @given(axis_batches(), st.floats(0.05, 0.95))
    def test_matches_reference_and_invariants(self, dets, thresh):
        kept = nms(dets, thresh, KIND_AXIS)
        assert kept == greedy_reference(dets, thresh, KIND_AXIS)
        for d in kept:
            assert d in dets
        for i, a in enumerate(kept):
            for b in kept[i + 1 :]:
                assert iou_aabb(a.box, b.box) <= thresh
        assert nms(kept, thresh, KIND_AXIS) == kept

    @given(axis_batches(), st.floats(0.05, 0.95))
    def test_deterministic(self, dets, thresh):
        assert nms(dets, thresh, KIND_AXIS) == nms(list(dets), thresh, KIND_AXIS)

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1))
    def test_oriented_matches_reference(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(0, 10))
        dets = [
            odet(
                rng.uniform(0, 30), rng.uniform(0, 30),
                rng.uniform(1, 10), rng.uniform(1, 10),
                rng.uniform(0, 180), float(rng.integers(1, 10)) / 10,
            )
            for _ in range(n)
        ]
        thresh = float(rng.uniform(0.1, 0.9))
        assert nms(dets, thresh, KIND_ORIENTED) == greedy_reference(dets, thresh, KIND_ORIENTED)
