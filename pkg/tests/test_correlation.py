from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mannerist import (
    FEATURE_ORDER_HASH,
    CorrelationVector,
    InsufficientDataError,
    OrderingError,
    clip_features,
    family_dims,
    pair_index,
    pearson,
    read_vector_csv,
    write_vector_csv,
)
from mannerist.correlation import N_PAIRS, PAIR_I, PAIR_J, pair_channels, pair_name
from mannerist.errors import ParseError
from mannerist.preprocess import Clip

from .conftest import make_stream
from .oracles import pearson_oracle

def make_clip(features: np.ndarray) -> Clip:
    return Clip(
        source_id="test",
        start_time=0.0,
        fps=30.0,
        features=features,
        tracked_fraction=1.0,
        normalized=True,
    )


class TestPairIndex:
    def test_first_pair(self):
        assert pair_index(0, 1) == 0

    def test_last_pair(self):
        assert pair_index(30, 31) == 495

    def test_row_end(self):
        assert pair_index(0, 31) == 30

    def test_bijection(self):
        seen = {pair_index(i, j) for i in range(32) for j in range(i + 1, 32)}
        assert seen == set(range(N_PAIRS))

    def test_matches_triangle_tables(self):
        for idx in range(N_PAIRS):
            i, j = pair_channels(idx)
            assert (i, j) == (int(PAIR_I[idx]), int(PAIR_J[idx]))
            assert pair_index(i, j) == idx

    def test_ordering_error(self):
        with pytest.raises(OrderingError):
            pair_index(5, 5)
        with pytest.raises(OrderingError):
            pair_index(7, 2)

    def test_range_checked(self):
        with pytest.raises(ValueError):
            pair_index(-1, 3)
        with pytest.raises(ValueError):
            pair_index(0, 32)

    def test_pair_name(self):
        assert pair_name(0) == "au01~au02"
        assert pair_name(495) == "relb_y~rwri_x" or "~" in pair_name(495)


class TestPearson:
    def test_perfect_positive(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_perfect_negative(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_zero_variance_convention(self):
        assert pearson([1, 1, 1], [1, 2, 3]) == 0.0
        assert pearson([1, 2, 3], [5, 5, 5]) == 0.0
        # constants that are not exactly representable still count as constant
        assert pearson([0.1, 0.1, 0.1], [1, 2, 3]) == 0.0

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            pearson([1.0], [2.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([1, 2, 3], [1, 2])

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 200))
    def test_symmetry_and_bounds(self, seed, n):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=(2, n))
        r = pearson(x, y)
        assert r == pearson(y, x)
        assert -1.0 <= r <= 1.0

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=(2, 50)) * rng.uniform(0.1, 100)
        assert pearson(x, y) == pytest.approx(pearson_oracle(x, y), abs=1e-12)


class TestClipFeatures:
    def test_identical_ramps_all_one(self):
        ramp = np.linspace(0.0, 1.0, 300)
        clip = make_clip(np.tile(ramp[:, None], (1, 32)))
        vec = clip_features(clip)
        np.testing.assert_allclose(vec.values, 1.0, atol=1e-12)

    def test_iid_noise_stays_near_zero(self):
        rng = np.random.default_rng(42)
        clip = make_clip(rng.normal(size=(300, 32)))
        vec = clip_features(clip)
        assert np.max(np.abs(vec.values)) < 0.35

    def test_matches_per_pair_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            x = rng.normal(size=(300, 32)) * rng.uniform(0.1, 50) + rng.uniform(-100, 100)
            vec = clip_features(make_clip(x))
            for idx in rng.integers(0, N_PAIRS, size=40):
                i, j = pair_channels(int(idx))
                assert vec.values[idx] == pytest.approx(
                    pearson_oracle(x[:, i], x[:, j]), abs=1e-9
                )

    def test_too_short_clip(self):
        with pytest.raises(InsufficientDataError):
            clip_features(make_clip(np.zeros((1, 32))))

    def test_constant_channel_zeroed(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(100, 32))
        x[:, 4] = 2.5
        vec = clip_features(make_clip(x))
        involved = [pair_index(min(4, k), max(4, k)) for k in range(32) if k != 4]
        np.testing.assert_array_equal(vec.values[involved], 0.0)

    def test_affine_invariance(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(300, 32))
        base = clip_features(make_clip(x)).values
        scales = rng.uniform(0.1, 10.0, size=32)
        offsets = rng.uniform(-50, 50, size=32)
        moved = clip_features(make_clip(x * scales + offsets)).values
        np.testing.assert_allclose(moved, base, atol=1e-9)

    def test_negative_scale_flips_31_entries(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(300, 32))
        base = clip_features(make_clip(x)).values
        x2 = x.copy()
        x2[:, 9] *= -1.0
        flipped = clip_features(make_clip(x2)).values
        changed = np.flatnonzero(~np.isclose(flipped, base, atol=1e-12))
        involved = sorted(pair_index(min(9, k), max(9, k)) for k in range(32) if k != 9)
        assert sorted(changed.tolist()) == involved
        np.testing.assert_allclose(flipped[involved], -base[involved], atol=1e-9)

    def test_normalization_transparent_when_parameters_constant(self):
        # constant shoulders and head height: the action-plane map is one
        # fixed positive affine transform per channel, so correlations of
        # raw-pixel clips and normalized clips agree
        rng = np.random.default_rng(5)
        n = 300
        feats = np.abs(rng.normal(size=(n, 32)))
        feats[:, 20:22] = [920.0, 540.0]
        feats[:, 26:28] = [1000.0, 540.0]
        for k in (22, 24, 28, 30):
            feats[:, k] = 960.0 + rng.normal(size=n) * 40
            feats[:, k + 1] = 540.0 + rng.normal(size=n) * 30
        stream = make_stream(feats)

        raw_clip = make_clip(stream.features[:300])
        from mannerist import normalize_gestures

        norm = normalize_gestures(stream)
        norm_clip = make_clip(norm.features[:300])
        np.testing.assert_allclose(
            clip_features(raw_clip).values, clip_features(norm_clip).values, atol=1e-9
        )


class TestFamilies:
    def test_dimensions(self):
        assert len(family_dims("facial")) == 190
        assert len(family_dims("gestural")) == 66
        assert len(family_dims("combined")) == 496

    def test_memberships(self):
        for d in family_dims("facial"):
            i, j = pair_channels(int(d))
            assert i < 20 and j < 20
        for d in family_dims("gestural"):
            i, j = pair_channels(int(d))
            assert i >= 20 and j >= 20

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            family_dims("acoustic")


class TestVectorFiles:
    def test_roundtrip(self):
        rng = np.random.default_rng(2)
        vecs = [CorrelationVector(rng.uniform(-1, 1, N_PAIRS)) for _ in range(3)]
        data = write_vector_csv(vecs, ["a", "a", "b"], [0.0, 5.0, 0.0])
        back = read_vector_csv(data)
        assert back.feature_order_hash == FEATURE_ORDER_HASH
        assert back.source_ids == ("a", "a", "b")
        np.testing.assert_array_equal(back.start_times, [0.0, 5.0, 0.0])
        np.testing.assert_array_equal(back.matrix, np.array([v.values for v in vecs]))

    def test_missing_order_line(self):
        row = b"a,0.0," + b",".join(b"0" for _ in range(496)) + b"\n"
        with pytest.raises(ParseError, match="order"):
            read_vector_csv(row)

    def test_wrong_arity(self):
        with pytest.raises(ParseError):
            read_vector_csv(b"# order=x\na,0.0,1.0,2.0\n")
