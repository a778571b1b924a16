import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from aosivision import csm as C
from aosivision.errors import DegenerateCloud, EmptyMask, EmptyPart, JointOutsidePart, MissingPart
from aosivision.synthetic import DEFAULT_STICKMAN, render_labeled

from _oracles import chebyshev_dilate, chebyshev_erode


@pytest.fixture(scope="module")
def labeled():
    return render_labeled()


@pytest.fixture(scope="module")
def model(labeled):
    return C.build_csm(labeled, DEFAULT_STICKMAN, 3)


def _identity():
    return {p: C.IDENTITY for p in C.PARTS}


def _square(size=10, shape=(40, 40), at=(15, 15)):
    m = np.zeros(shape, dtype=np.uint8)
    m[at[0]:at[0] + size, at[1]:at[1] + size] = 1
    return m


class TestBuildCloud:
    def test_no_band(self):
        cloud = C.build_cloud(_square(), 1, 0)
        assert cloud.object.sum() == 100
        assert not cloud.uncertainty.any()

    def test_band(self):
        cloud = C.build_cloud(_square(), 1, 2)
        rows, cols = np.nonzero(cloud.object)
        assert (rows.min(), rows.max(), cols.min(), cols.max()) == (17, 22, 17, 22)
        outer = cloud.grid != C.BACKGROUND
        rows, cols = np.nonzero(outer)
        assert (rows.max() - rows.min() + 1, cols.max() - cols.min() + 1) == (14, 14)
        assert cloud.uncertainty.sum() == 14 * 14 - 36

    def test_degenerate(self):
        with pytest.raises(DegenerateCloud):
            C.build_cloud(_square(3), 1, 2)

    def test_empty(self):
        with pytest.raises(EmptyPart):
            C.build_cloud(_square(), 2, 1)

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.bool_, (14, 14)), st.integers(1, 3))
    def test_morphology_matches_brute_force(self, mask, rho):
        assert np.array_equal(C._erode(mask, rho), chebyshev_erode(mask, rho))
        assert np.array_equal(C._dilate(mask, rho), chebyshev_dilate(mask, rho))

    def test_band_separates(self):
        # every object pixel's 4-neighbours are object or uncertainty
        cloud = C.build_cloud(_square(12), 1, 3)
        obj = np.pad(cloud.object, 1)
        bg = np.pad(cloud.background, 1, constant_values=True)
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            assert not (obj & np.roll(bg, (dr, dc), axis=(0, 1))).any()


class TestBuildModel:
    def test_synthetic(self, model):
        assert set(model.clouds) == set(C.PARTS)
        assert model.parent == C.PARENT
        assert C.SEARCH_ORDER[0] == "torso"

    def test_missing_part(self, labeled):
        broken = labeled.copy()
        broken[broken == C.PART_LABELS["l_forearm"]] = C.PART_LABELS["l_upper_arm"]
        with pytest.raises(MissingPart):
            C.build_csm(broken, DEFAULT_STICKMAN, 3)

    def test_joint_outside(self, labeled):
        joints = dict(DEFAULT_STICKMAN, l_wrist=(5.0, 5.0))
        with pytest.raises(JointOutsidePart):
            C.build_csm(labeled, joints, 3)


class TestScore:
    def test_identity_is_one(self, model, labeled):
        mask = labeled > 0
        for part in C.PARTS:
            assert C.delineation_score(model.clouds[part], C.IDENTITY, mask) == 1.0

    def test_on_background(self, model, labeled):
        mask = np.zeros(labeled.shape, bool)
        mask[:10, :10] = True
        assert C.delineation_score(model.clouds["head"], C.IDENTITY, mask) == 0.0

    def test_shift_inside_band(self):
        lab = _square(20, (64, 64), (22, 22))
        cloud = C.build_cloud(lab, 1, 4, anchor=(31.5, 31.5))
        observed = lab > 0
        shifted = np.zeros_like(observed)
        shifted[22:42, 24:44] = True
        # brute-force counts: region E is the shifted square, O the shifted outer ring
        outer = np.zeros_like(observed)
        outer[18:46, 20:48] = True
        ring = outer & ~shifted
        want = (shifted & observed).sum() / (shifted.sum() + (ring & observed).sum())
        got = C.delineation_score(cloud, C.PartTransform(0, 1, (2, 0)), observed)
        assert got == pytest.approx(want)
        assert 0 < got < 1

    @settings(max_examples=25, deadline=None)
    @given(st.integers(-8, 8), st.integers(-8, 8), st.integers(-8, 8), st.integers(-8, 8))
    def test_translation_invariance(self, dx, dy, sx, sy):
        lab = _square(16, (64, 64), (24, 24))
        obs = np.roll(lab > 0, (1, 2), axis=(0, 1))
        score = C.delineation_score(C.build_cloud(lab, 1, 3, (31.5, 31.5)),
                                    C.PartTransform(0, 1, (dx, dy)), obs)
        lab2 = np.roll(lab, (sy, sx), axis=(0, 1))
        obs2 = np.roll(obs, (sy, sx), axis=(0, 1))
        moved = C.delineation_score(C.build_cloud(lab2, 1, 3, (31.5 + sx, 31.5 + sy)),
                                    C.PartTransform(0, 1, (dx, dy)), obs2)
        assert moved == pytest.approx(score)
        assert 0 <= score <= 1


class TestSearch:
    def test_identity(self, model, labeled):
        res = C.search_pose(model, labeled > 0)
        assert res.transforms == _identity()
        assert res.score == 1.0

    def test_translation(self, model):
        pose = dict(_identity(), torso=C.PartTransform(0, 1, (5, 0)))
        res = C.search_pose(model, C.posed_mask(model, pose))
        assert res.transforms["torso"] == C.PartTransform(0, 1, (5.0, 0.0))
        assert all(res.transforms[p].rotation == 0 for p in C.PARTS)
        assert res.score == 1.0

    def test_forearm_rotation(self, model):
        pose = dict(_identity(), l_forearm=C.PartTransform(30, 1))
        res = C.search_pose(model, C.posed_mask(model, pose))
        assert abs(res.transforms["l_forearm"].rotation - 30) <= 5

    def test_skeleton_follows_transforms(self, model):
        pose = dict(_identity(), torso=C.PartTransform(0, 1, (3, -2)))
        sk = C.search_pose(model, C.posed_mask(model, pose)).skeleton
        for j, (x, y) in DEFAULT_STICKMAN.items():
            assert sk[j] == pytest.approx((x + 3, y - 2))

    def test_consistent_and_on_grid(self, model):
        grid = C.PoseGrid()
        pose = dict(_identity(), torso=C.PartTransform(-5, 1.1, (2, 3)),
                    r_forearm=C.PartTransform(-20, 0.9))
        mask = C.posed_mask(model, pose)
        res = C.search_pose(model, mask)
        worlds = C.world_transforms(model, res.transforms)
        for part in C.SEARCH_ORDER:
            t = res.transforms[part]
            assert t.rotation in grid.rotation_offsets() and t.scale in grid.scales
            parent = C.PARENT.get(part)
            again = C.delineation_score(
                model.clouds[part], t, mask, None if parent is None else worlds[parent],
                C.explained_before(model, res.transforms, part))
            assert again == res.part_scores[part]
        assert C.search_pose(model, mask) == res

    def test_empty(self, model, labeled):
        with pytest.raises(EmptyMask):
            C.search_pose(model, np.zeros(labeled.shape, bool))


class TestTrack:
    def test_constant(self, model, labeled):
        out = C.track_sequence(model, [labeled > 0] * 3)
        assert out[0].skeleton == out[1].skeleton == out[2].skeleton

    def test_translating(self, model):
        masks = [C.posed_mask(model, dict(_identity(), torso=C.PartTransform(0, 1, (3 * t, 0))))
                 for t in range(6)]
        out = C.track_sequence(model, masks, C.PoseGrid(t_max=4))
        for t, r in enumerate(out):
            tx, ty = r.transforms["torso"].translation
            assert abs(tx - 3 * t) <= 1 and abs(ty) <= 1

    def test_empty_frame_held(self, model, labeled):
        masks = [labeled > 0, np.zeros(labeled.shape, bool), labeled > 0]
        out = C.track_sequence(model, masks)
        assert [r.held for r in out] == [False, True, False]
        assert out[1].skeleton == out[0].skeleton

    def test_correction_rebuilds_model(self, model, labeled):
        shifted = np.roll(labeled, 4, axis=1)
        joints = {j: (x + 4, y) for j, (x, y) in DEFAULT_STICKMAN.items()}
        out = C.track_sequence(model, [labeled > 0, shifted > 0], corrections={1: (shifted, joints)})
        assert out[1].transforms["torso"] == C.IDENTITY
        assert out[1].skeleton["neck"] == pytest.approx(joints["neck"])
