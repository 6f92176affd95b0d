import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palps.detector import (
    Detection,
    RegionProposal,
    SyntheticDetector,
    SyntheticDetectorParams,
    SyntheticModelState,
    nms,
    skill_from_count,
)
from palps.geometry import BoundingBox, iou

from conftest import make_image, proposals


def noiseless_params(**overrides):
    base = dict(
        proposals_per_object=1,
        center_jitter_frac=0.0,
        size_jitter_frac=0.0,
        false_positive_rate=0.0,
        noise_scale=0.0,
        skill_tau=10.0,
    )
    base.update(overrides)
    return SyntheticDetectorParams(**base)


class TestSkill:
    def test_boundary_and_limit(self):
        assert skill_from_count(0, 100) == 0.0
        assert skill_from_count(10**9, 100) == pytest.approx(1.0)

    def test_direct_evaluation(self):
        assert skill_from_count(100, 100) == pytest.approx(1 - math.exp(-1))

    def test_monotone_in_pool_size(self):
        values = [skill_from_count(n, 150) for n in range(0, 400, 10)]
        assert values == sorted(values)

    def test_train_rejects_empty(self):
        with pytest.raises(ValueError):
            SyntheticDetector(noiseless_params()).train([])


class TestNms:
    def test_single_proposal_survives(self):
        p = RegionProposal(box=BoundingBox(0, 0, 10, 10), score=0.7)
        assert nms([p], 0.5) == [Detection(box=p.box, score=0.7)]

    def test_duplicate_boxes_keep_highest_score(self):
        box = BoundingBox(0, 0, 10, 10)
        a = RegionProposal(box=box, score=0.9)
        b = RegionProposal(box=box, score=0.8)
        assert nms([b, a], 0.5) == [Detection(box=box, score=0.9)]

    def test_low_overlap_pair_both_survive(self):
        a = RegionProposal(box=BoundingBox(0, 0, 10, 10), score=0.9)
        b = RegionProposal(box=BoundingBox(8, 0, 18, 10), score=0.8)
        assert iou(a.box, b.box) == pytest.approx(1 / 9)
        assert len(nms([a, b], 0.5)) == 2

    def test_threshold_domain(self):
        with pytest.raises(ValueError):
            nms([], 0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(proposals(max_coord=100), max_size=15), st.floats(0.05, 0.95))
    def test_output_subset_no_high_overlap_order_invariant(self, props, thr):
        kept = nms(props, thr)
        input_boxes = {(p.box, p.score) for p in props}
        assert all((d.box, d.score) in input_boxes for d in kept)
        for i, a in enumerate(kept):
            for b in kept[i + 1:]:
                assert iou(a.box, b.box) <= thr
        assert nms(list(reversed(props)), thr) == kept


class TestSyntheticDetect:
    def test_noiseless_perfect_skill_reproduces_ground_truth(self):
        det = SyntheticDetector(noiseless_params(), seed=0)
        image = make_image("a", [BoundingBox(100, 100, 150, 160)])
        state = SyntheticModelState(n_labeled=10**9, skill=1.0, difficulty_exposure=0.0)
        out = det.detect(state, image)
        assert len(out.proposals) == 1
        assert out.proposals[0].box == BoundingBox(100, 100, 150, 160)
        assert out.proposals[0].score >= det.params.detection_floor
        assert len(out.detections) == 1

    def test_deterministic_per_state_and_seed(self):
        det = SyntheticDetector(SyntheticDetectorParams(), seed=9)
        image = make_image("a", [BoundingBox(10, 10, 60, 60), BoundingBox(200, 200, 280, 260)], difficulty=0.5)
        state = det.train([(image, image.objects)] * 7)
        assert det.detect(state, image) == det.detect(state, image)
        other = SyntheticDetector(SyntheticDetectorParams(), seed=10)
        assert other.detect(state, image) != det.detect(state, image)

    def test_proposal_count_without_false_positives(self):
        det = SyntheticDetector(noiseless_params(proposals_per_object=5), seed=1)
        objs = [BoundingBox(20 + 120 * i, 20, 80 + 120 * i, 80) for i in range(3)]
        out = det.detect(SyntheticModelState.initial(), make_image("a", objs))
        assert len(out.proposals) == 15

    def test_expected_count_matches_poisson_rate(self):
        # mean count over seeded draws ~ k * objects + fp_rate, within 3 sigma.
        k, fp_rate, n_draws = 3, 2.0, 1000
        params = SyntheticDetectorParams(proposals_per_object=k, false_positive_rate=fp_rate)
        image = make_image("a", [BoundingBox(50, 50, 120, 120), BoundingBox(300, 300, 380, 390)])
        state = SyntheticModelState(n_labeled=5, skill=0.2, difficulty_exposure=0.0)
        counts = [
            len(SyntheticDetector(params, seed=s).detect(state, image).proposals)
            for s in range(n_draws)
        ]
        expected = k * len(image.objects) + fp_rate
        sigma_mean = math.sqrt(fp_rate / n_draws)
        assert abs(np.mean(counts) - expected) <= 3 * sigma_mean

    def test_mean_score_monotone_in_skill(self):
        params = SyntheticDetectorParams(false_positive_rate=0.0)
        image = make_image("a", [BoundingBox(100, 100, 180, 180)], difficulty=0.4)
        train_img = make_image("t", difficulty=0.4)
        means = []
        for n in (1, 5, 20, 80, 320):
            det = SyntheticDetector(params, seed=3)
            state = det.train([(train_img, ())] * n)
            scores = [
                p.score
                for s in range(1000)
                for p in SyntheticDetector(params, seed=s).detect(state, image).proposals
            ]
            means.append(np.mean(scores))
        assert all(b >= a - 1e-3 for a, b in zip(means, means[1:]))

    def test_exposure_to_hard_images_lifts_hard_scores(self):
        params = noiseless_params(skill_tau=50.0)
        det = SyntheticDetector(params, seed=0)
        hard = make_image("h", [BoundingBox(50, 50, 100, 100)], difficulty=1.0)
        easy_train = make_image("e", difficulty=0.0)
        hard_train = make_image("t", difficulty=1.0)
        state_easy = det.train([(easy_train, ())] * 50)
        state_hard = det.train([(hard_train, ())] * 50)
        score_easy_training = det.detect(state_easy, hard).proposals[0].score
        score_hard_training = det.detect(state_hard, hard).proposals[0].score
        assert score_hard_training > score_easy_training

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(1, 4),
        st.floats(0, 0.5),
        st.floats(0, 0.5),
        st.floats(0, 3),
        st.floats(0, 1),
        st.floats(0, 1),
        st.integers(0, 2**31 - 1),
    )
    def test_scores_always_in_unit_interval(self, k, jitter, noise, fp_rate, skill, difficulty, seed):
        params = SyntheticDetectorParams(
            proposals_per_object=k,
            center_jitter_frac=jitter,
            size_jitter_frac=jitter,
            false_positive_rate=fp_rate,
            noise_scale=noise,
        )
        det = SyntheticDetector(params, seed=seed)
        image = make_image("a", [BoundingBox(100, 100, 200, 220)], difficulty=difficulty)
        state = SyntheticModelState(n_labeled=1, skill=skill, difficulty_exposure=difficulty)
        out = det.detect(state, image)
        for p in out.proposals:
            assert 0.0 <= p.score <= 1.0
            assert 0 <= p.box.x_min < p.box.x_max <= image.width
            assert 0 <= p.box.y_min < p.box.y_max <= image.height
