import math

import numpy as np
import pytest

from scmcdesign.design import (
    CandidateSet,
    DesignError,
    WeightedEuclidean,
    ard_criterion,
    ard_increment,
    ard_normalizer,
    ard_pair_sum,
    cmm_design,
    coordinate_subsets,
    design_mindist,
    fff_design,
    greedy_design,
    maxpro_criterion,
    maxpro_increment,
    mindist,
    ward_labels,
    weighted_distance,
)
from scmcdesign.regions import crescent_region
from scmcdesign.scmc import ScmcConfig, run_scmc

import oracles


@pytest.fixture(scope="module")
def crescent_sample():
    cloud, _ = run_scmc(crescent_region(), ScmcConfig(n_particles=10_000, seed=1))
    return cloud.points


class TestDistance:
    def test_values(self):
        assert weighted_distance([0, 0], [3, 4]) == 5.0
        assert weighted_distance([0, 0], [3, 4], [1, 0]) == 3.0
        assert weighted_distance([1.5, 2], [1.5, 2], [2, 3]) == 0.0

    def test_bad_weights(self):
        with pytest.raises(DesignError):
            weighted_distance([0, 0], [1, 1], [0, 0])
        with pytest.raises(DesignError):
            WeightedEuclidean([1, -1])

    def test_pairwise_matches_scalar(self, rng):
        a = rng.normal(size=(4, 3))
        w = np.array([0.5, 0.0, 2.0])
        d = WeightedEuclidean(w).pairwise(a, a)
        for i in range(4):
            for j in range(4):
                assert d[i, j] == pytest.approx(weighted_distance(a[i], a[j], w), rel=1e-14, abs=1e-15)


class TestCmm:
    def test_one_dimensional(self):
        cands = np.linspace(0.0, 1.0, 11)[:, None]
        d = cmm_design(cands, 3, first=0)
        assert d.points(cands).ravel().tolist() == [0.0, 1.0, 0.5]
        assert [t["criterion_value"] for t in d.trace] == [None, 1.0, 0.5]

    def test_single_point(self, rng):
        cands = rng.uniform(size=(20, 2))
        d = cmm_design(cands, 1, first=4)
        assert d.indices == [4]
        np.testing.assert_array_equal(d.psi_cache, np.linalg.norm(cands - cands[4], axis=1))

    def test_full_size_is_permutation(self, rng):
        cands = rng.uniform(size=(15, 2))
        d = cmm_design(cands, 15, seed=0)
        assert sorted(d.indices) == list(range(15))

    def test_mindist_is_last_psi(self, crescent_sample):
        cs = CandidateSet.from_points(crescent_sample)
        d = cmm_design(cs, 20, seed=3)
        last = d.trace[-1]["criterion_value"]
        assert abs(mindist(d.points(cs)) - last) <= 1e-12
        assert abs(design_mindist(d, cs) - last) <= 1e-12

    def test_seeded_first_point(self, rng):
        cands = rng.uniform(size=(30, 2))
        assert cmm_design(cands, 5, seed=11).indices == cmm_design(cands, 5, seed=11).indices

    def test_subspace_weights(self, rng):
        cands = rng.uniform(size=(40, 2))
        proj = CandidateSet(cands, WeightedEuclidean([1.0, 0.0]))
        d = greedy_design(proj, 6, "cmm", first=0)
        assert d.indices == oracles.greedy(cands, 6, "cmm", 0, weights=[1.0, 0.0])
        one_d = greedy_design(cands[:, :1], 6, "cmm", first=0)
        assert d.indices == one_d.indices

    def test_scale_equivariance(self, rng):
        cands = rng.uniform(size=(40, 2))
        a = cmm_design(cands, 8, first=2)
        b = cmm_design(cands * 7.5 + 3.0, 8, first=2)
        assert a.indices == b.indices

    def test_errors(self, rng):
        cands = rng.uniform(size=(5, 2))
        with pytest.raises(DesignError):
            cmm_design(cands, 6)
        with pytest.raises(DesignError):
            cmm_design(cands, 0)
        with pytest.raises(DesignError):
            greedy_design(cands, 2, "dopt")
        with pytest.raises(DesignError):
            cmm_design(cands, 2, first=9)


class TestArd:
    def test_hand_example(self):
        cands = np.array([[0.0, 0.0], [1.0, 1.0]])
        d = greedy_design(cands, 1, "ard", first=0)
        inc = ard_increment(cands, d, 1, k=1.0)
        assert inc / ard_normalizer(2) == pytest.approx(3.0, rel=1e-15)
        assert ard_normalizer(2) == pytest.approx(1 / 3)

    def test_subsets(self):
        assert coordinate_subsets(3) == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]
        with pytest.raises(DesignError):
            coordinate_subsets(11)

    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("k", [1.0, 2.0])
    def test_cached_total(self, rng, dim, k):
        cands = rng.uniform(size=(60, dim))
        d = greedy_design(cands, 5, "ard", k=k, first=0)
        pts = d.points(cands)
        assert d.total == pytest.approx(oracles.ard_sum(pts, k), rel=1e-9)
        assert d.total == pytest.approx(ard_pair_sum(pts, k), rel=1e-12)
        assert ard_criterion(pts, k) == pytest.approx(d.total ** (-1 / k), rel=1e-9)

    def test_penalty_on_shared_coordinate(self):
        cands = np.array([[0.0, 0.0], [0.0, 1.0], [0.7, 0.4]])
        d = greedy_design(cands, 1, "ard", first=0)
        assert ard_increment(cands, d, 1) >= 1e12 / 3
        assert greedy_design(cands, 2, "ard", first=0).indices == [0, 2]


class TestMaxPro:
    def test_hand_examples(self):
        cands = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 1.0], [0.0, 3.0]])
        d = greedy_design(cands, 1, "maxpro", first=0)
        assert maxpro_increment(cands, d, 1) == pytest.approx(1.0, rel=1e-15)
        assert maxpro_increment(cands, d, 2) == pytest.approx(0.5, rel=1e-15)
        assert maxpro_increment(cands, d, 3) == pytest.approx(math.sqrt(1e12), rel=1e-15)

    def test_oracle(self, rng):
        cands = rng.uniform(size=(20, 2))
        d = greedy_design(cands, 4, "maxpro", first=0)
        assert d.indices == oracles.greedy(cands, 4, "maxpro", 0)

    def test_whole_design_value(self, rng):
        cands = rng.uniform(size=(30, 3))
        d = greedy_design(cands, 6, "maxpro", first=1)
        pts = d.points(cands)
        assert d.total == pytest.approx(oracles.maxpro_sum(pts), rel=1e-9)
        assert maxpro_criterion(pts) == pytest.approx((d.total / 15) ** (1 / 3), rel=1e-9)


class TestGreedyOracle:
    @pytest.mark.parametrize("seed", range(10))
    def test_all_criteria(self, seed):
        rng = np.random.default_rng(seed)
        n, dim, size = int(rng.integers(5, 30)), int(rng.integers(1, 4)), int(rng.integers(2, 6))
        cands = rng.uniform(size=(n, dim))
        for crit in ("cmm", "ard", "maxpro"):
            assert greedy_design(cands, size, crit, first=0).indices == oracles.greedy(cands, size, crit, 0)

    def test_tie_break_lowest_index(self):
        cands = np.array([[0.0], [-1.0], [1.0]])
        assert cmm_design(cands, 2, first=0).indices == [0, 1]


class TestCandidates:
    def test_dedup_keeps_first(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [2.0, 0.5], [1.0, 1.0]])
        cs = CandidateSet.from_points(pts)
        assert cs.source_index.tolist() == [0, 1, 3]
        d = cmm_design(cs, 3, first=0)
        assert mindist(d.points(cs)) > 0

    def test_mindist_examples(self):
        assert mindist(np.array([[0.0], [0.5], [1.0]])) == 0.5
        assert mindist(np.array([[1.0, 1.0], [1.0, 1.0]])) == 0.0


class TestFff:
    def test_two_blobs(self, rng):
        a = rng.normal([0, 0], 0.1, size=(200, 2))
        b = rng.normal([5, 5], 0.1, size=(300, 2))
        pts = np.vstack([a, b])
        f = fff_design(pts, 2, "centroid")
        np.testing.assert_allclose(f.points[0], a.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(f.points[1], b.mean(axis=0), atol=1e-12)
        assert f.members == [None, None]

    @pytest.mark.parametrize("summary", ["centroid", "medoid_maxpro"])
    def test_every_point_its_own_cluster(self, rng, summary):
        pts = rng.uniform(size=(12, 2))
        f = fff_design(pts, 12, summary)
        np.testing.assert_array_equal(f.points, pts)

    def test_pathology(self, rng):
        left = rng.uniform([0, 0], [1, 1], size=(100, 2))
        right = rng.uniform([3, 0], [4, 1], size=(100, 2))
        pts = np.vstack([left, right])
        cen = fff_design(pts, 1, "centroid").points[0]
        assert 1.0 < cen[0] < 3.0
        med = fff_design(pts, 1, "medoid_maxpro")
        assert med.members[0] is not None
        np.testing.assert_array_equal(med.points[0], pts[med.members[0]])

    def test_medoid_members_distinct_clusters(self, rng):
        pts = rng.uniform(size=(300, 2))
        f = fff_design(pts, 10, "medoid_maxpro")
        assert sorted(f.labels[f.members].tolist()) == list(range(10))

    def test_ward_matches_scipy(self, rng):
        from scipy.cluster.hierarchy import fcluster, linkage

        pts = rng.normal(size=(400, 2))
        ours = ward_labels(pts, 7)
        ref = fcluster(linkage(pts, "ward"), 7, "maxclust")
        pairs_ours = ours[:, None] == ours[None, :]
        pairs_ref = ref[:, None] == ref[None, :]
        assert np.array_equal(pairs_ours, pairs_ref)
        assert ours[0] == 0 and len(np.unique(ours)) == 7

    def test_errors(self, rng):
        pts = rng.uniform(size=(5, 2))
        with pytest.raises(DesignError):
            fff_design(pts, 6)
        with pytest.raises(DesignError):
            fff_design(pts, 2, "median")
