import numpy as np
import pytest

from oracles import brute_inter_label, brute_intra_label
from patchex.clustering import ClusterMap
from patchex.exchange import (
    GridSpec,
    IntraPlan,
    LabelDomainError,
    ScaleSchedule,
    apply_intra_swaps,
    inter_exchange,
    intra_exchange,
    make_inter_plan,
    make_intra_plan,
)
from patchex.rng import rng_from_seed
from patchex.tiles import Tile


def _random_tile(rng, h=32, w=32, tid="t"):
    return Tile(tile_id=tid, image=rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def _random_cmap(rng, h=32, w=32, n_clusters=4, domain=1):
    labels = rng.integers(0, n_clusters, size=(h, w)).astype(np.int32)
    return ClusterMap(labels=labels, n_clusters=n_clusters, domain=domain)


class TestGridSpec:
    def test_for_shape(self):
        g = GridSpec.for_shape(64, 96, 16)
        assert (g.patches_per_col, g.patches_per_row) == (4, 6)
        assert g.n_patches == 24

    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            GridSpec.for_shape(64, 96, 13)

    def test_row_major_slices(self):
        g = GridSpec.for_shape(32, 48, 16)  # 2 rows x 3 cols
        assert g.patch_slices(0) == (slice(0, 16), slice(0, 16))
        assert g.patch_slices(2) == (slice(0, 16), slice(32, 48))
        assert g.patch_slices(3) == (slice(16, 32), slice(0, 16))

    def test_slices_cover_raster_once(self):
        g = GridSpec.for_shape(32, 32, 8)
        hits = np.zeros((32, 32), dtype=int)
        for p in range(g.n_patches):
            rs, cs = g.patch_slices(p)
            hits[rs, cs] += 1
        assert (hits == 1).all()

    def test_out_of_range_index(self):
        g = GridSpec.for_shape(32, 32, 16)
        with pytest.raises(IndexError):
            g.patch_slices(4)


class TestScaleSchedule:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ScaleSchedule(scales=())

    def test_filtered_keeps_dividers(self):
        s = ScaleSchedule(scales=(16, 32, 48, 64))
        assert s.filtered(64, 64).scales == (16, 32, 64)

    def test_filtered_none_left(self):
        with pytest.raises(ValueError):
            ScaleSchedule(scales=(48,)).filtered(64, 64)


class TestPlans:
    def test_intra_tuple_count(self):
        g = GridSpec.for_shape(64, 64, 16)  # 16 patches
        for r, want in ((0.0, 0), (0.25, 2), (0.5, 4), (0.75, 6), (1.0, 8)):
            plan = make_intra_plan(g, r, rng_from_seed(0))
            assert len(plan.tuples) == want, r

    def test_intra_indices_disjoint(self):
        g = GridSpec.for_shape(64, 64, 8)
        plan = make_intra_plan(g, 1.0, rng_from_seed(4))
        flat = [i for pair in plan.tuples for i in pair]
        assert len(flat) == len(set(flat))

    def test_inter_index_count(self):
        g = GridSpec.for_shape(64, 64, 16)
        for r, want in ((0.0, 0), (0.25, 4), (0.5, 8), (0.75, 12), (1.0, 16)):
            plan = make_inter_plan(g, r, rng_from_seed(0))
            assert len(plan.indices) == want, r

    def test_inter_indices_distinct(self):
        g = GridSpec.for_shape(64, 64, 8)
        plan = make_inter_plan(g, 0.9, rng_from_seed(4))
        assert len(set(plan.indices)) == len(plan.indices)

    def test_ratio_bounds(self):
        g = GridSpec.for_shape(32, 32, 16)
        with pytest.raises(ValueError):
            make_intra_plan(g, 1.5, rng_from_seed(0))
        with pytest.raises(ValueError):
            make_inter_plan(g, -0.1, rng_from_seed(0))

    def test_plans_deterministic(self):
        g = GridSpec.for_shape(64, 64, 16)
        a = make_intra_plan(g, 0.75, rng_from_seed(9))
        b = make_intra_plan(g, 0.75, rng_from_seed(9))
        assert a.tuples == b.tuples

    def test_nested_prefix_property(self):
        # same rng seed, growing ratio: smaller plans are prefixes of
        # larger ones because both read the same permutation
        g = GridSpec.for_shape(64, 64, 16)
        small = make_intra_plan(g, 0.5, rng_from_seed(2)).tuples
        large = make_intra_plan(g, 1.0, rng_from_seed(2)).tuples
        assert large[: len(small)] == small


class TestApplySwaps:
    def test_involution(self):
        rng = np.random.default_rng(0)
        g = GridSpec.for_shape(32, 32, 8)
        plan = make_intra_plan(g, 0.75, rng_from_seed(1))
        img = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        assert np.array_equal(apply_intra_swaps(apply_intra_swaps(img, plan), plan), img)

    def test_manual_swap(self):
        g = GridSpec.for_shape(4, 4, 2)
        img = np.arange(16, dtype=np.uint8).reshape(4, 4)
        plan = IntraPlan(grid=g, tuples=((0, 3),))
        out = apply_intra_swaps(img, plan)
        assert np.array_equal(out[0:2, 0:2], img[2:4, 2:4])
        assert np.array_equal(out[2:4, 2:4], img[0:2, 0:2])
        assert np.array_equal(out[0:2, 2:4], img[0:2, 2:4])

    def test_input_untouched(self):
        g = GridSpec.for_shape(16, 16, 8)
        img = np.zeros((16, 16), dtype=np.uint8)
        img[:8, :8] = 7
        before = img.copy()
        apply_intra_swaps(img, make_intra_plan(g, 1.0, rng_from_seed(0)))
        assert np.array_equal(img, before)


class TestIntraExchange:
    def test_label_matches_pixel_oracle(self):
        for seed in range(6):
            rng = np.random.default_rng(seed)
            tile = _random_tile(rng)
            cmap = _random_cmap(rng)
            plan = make_intra_plan(GridSpec.for_shape(32, 32, 8), 0.75, rng_from_seed(seed))
            sample = intra_exchange(tile, cmap, plan)
            ref = brute_intra_label(cmap.labels, 8, list(plan.tuples))
            assert np.array_equal(sample.label, ref), seed

    def test_t1_is_source_tile(self):
        rng = np.random.default_rng(1)
        tile = _random_tile(rng)
        sample = intra_exchange(tile, _random_cmap(rng),
                                make_intra_plan(GridSpec.for_shape(32, 32, 16), 0.5, rng_from_seed(0)))
        assert sample.t1 is tile
        assert sample.t2.tile_id.endswith("+intra")

    def test_zero_ratio_means_no_change(self):
        rng = np.random.default_rng(2)
        tile = _random_tile(rng)
        sample = intra_exchange(tile, _random_cmap(rng),
                                make_intra_plan(GridSpec.for_shape(32, 32, 8), 0.0, rng_from_seed(0)))
        assert np.array_equal(sample.t2.image, tile.image)
        assert sample.label.sum() == 0

    def test_uniform_clusters_give_empty_label(self):
        # swapping patches with identical cluster content is not a change
        rng = np.random.default_rng(3)
        tile = _random_tile(rng)
        cmap = ClusterMap(labels=np.zeros((32, 32), dtype=np.int32), n_clusters=1, domain=1)
        plan = make_intra_plan(GridSpec.for_shape(32, 32, 8), 1.0, rng_from_seed(5))
        sample = intra_exchange(tile, cmap, plan)
        assert sample.label.sum() == 0

    def test_temporal_symmetry(self):
        # the label is direction-free: building the sample from t2's
        # swapped cluster map gives the same changed set
        rng = np.random.default_rng(4)
        cmap = _random_cmap(rng)
        plan = make_intra_plan(GridSpec.for_shape(32, 32, 8), 0.75, rng_from_seed(6))
        tile = _random_tile(rng)
        fwd = intra_exchange(tile, cmap, plan)
        swapped = ClusterMap(labels=apply_intra_swaps(cmap.labels, plan),
                             n_clusters=cmap.n_clusters, domain=cmap.domain)
        back = intra_exchange(fwd.t2, swapped, plan)
        assert np.array_equal(fwd.label, back.label)
        assert np.array_equal(back.t2.image, tile.image)

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(5)
        tile = _random_tile(rng, h=32, w=32)
        cmap = _random_cmap(rng, h=16, w=16)
        plan = make_intra_plan(GridSpec.for_shape(32, 32, 8), 0.5, rng_from_seed(0))
        with pytest.raises(Exception):
            intra_exchange(tile, cmap, plan)


class TestInterExchange:
    def test_label_matches_pixel_oracle(self):
        for seed in range(6):
            rng = np.random.default_rng(100 + seed)
            ta, tb = _random_tile(rng, tid="a"), _random_tile(rng, tid="b")
            ca = _random_cmap(rng, domain=7)
            cb = _random_cmap(rng, domain=7)
            plan = make_inter_plan(GridSpec.for_shape(32, 32, 8), 0.75, rng_from_seed(seed))
            sample = inter_exchange(ta, tb, ca, cb, plan)
            ref = brute_inter_label(ca.labels, cb.labels, 8, list(plan.indices))
            assert np.array_equal(sample.label, ref), seed

    def test_domain_mismatch_raises(self):
        rng = np.random.default_rng(6)
        ta, tb = _random_tile(rng, tid="a"), _random_tile(rng, tid="b")
        ca = _random_cmap(rng, domain=1)
        cb = _random_cmap(rng, domain=2)
        plan = make_inter_plan(GridSpec.for_shape(32, 32, 8), 0.5, rng_from_seed(0))
        with pytest.raises(LabelDomainError):
            inter_exchange(ta, tb, ca, cb, plan)

    def test_full_ratio_copies_whole_tile(self):
        rng = np.random.default_rng(7)
        ta, tb = _random_tile(rng, tid="a"), _random_tile(rng, tid="b")
        ca = _random_cmap(rng, domain=3)
        cb = _random_cmap(rng, domain=3)
        plan = make_inter_plan(GridSpec.for_shape(32, 32, 8), 1.0, rng_from_seed(1))
        sample = inter_exchange(ta, tb, ca, cb, plan)
        assert np.array_equal(sample.t2.image, tb.image)
        assert np.array_equal(sample.label, (ca.labels != cb.labels).astype(np.uint8))

    def test_untouched_patches_keep_tile_a(self):
        rng = np.random.default_rng(8)
        ta, tb = _random_tile(rng, tid="a"), _random_tile(rng, tid="b")
        ca = _random_cmap(rng, domain=4)
        cb = _random_cmap(rng, domain=4)
        g = GridSpec.for_shape(32, 32, 16)
        plan = make_inter_plan(g, 0.25, rng_from_seed(2))
        sample = inter_exchange(ta, tb, ca, cb, plan)
        chosen = set(plan.indices)
        for p in range(g.n_patches):
            rs, cs = g.patch_slices(p)
            src = tb if p in chosen else ta
            assert np.array_equal(sample.t2.image[rs, cs], src.image[rs, cs])


def test_changed_fraction_grows_with_ratio():
    # reusing one cluster map, the mean changed fraction must grow
    # strictly with the exchange ratio
    rng = np.random.default_rng(9)
    cmap = _random_cmap(rng, n_clusters=3)
    tile = _random_tile(rng)
    g = GridSpec.for_shape(32, 32, 8)
    means = []
    for r in (0.25, 0.5, 0.75):
        fracs = [
            intra_exchange(tile, cmap, make_intra_plan(g, r, rng_from_seed(s))).label.mean()
            for s in range(10)
        ]
        means.append(float(np.mean(fracs)))
    assert means[0] < means[1] < means[2], means
