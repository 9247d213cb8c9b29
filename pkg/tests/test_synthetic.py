from __future__ import annotations

import numpy as np
import pytest

from mannerist import make_persona_pair, nearest_correlation, sample_stream, validate_stream
from mannerist.correlation import correlation_matrix
from mannerist.features import AU_SLICE
from mannerist.synthetic import (
    PersonaSpec,
    default_means,
    default_scales,
    persona_from_json,
    persona_to_json,
    with_seed,
)


class TestNearestCorrelation:
    def test_fixed_point(self):
        c = np.eye(3)
        c[0, 1] = c[1, 0] = 0.4
        c[1, 2] = c[2, 1] = -0.2
        out = nearest_correlation(c)
        np.testing.assert_allclose(out, c, atol=1e-9)

    def test_identity_fixed(self):
        np.testing.assert_allclose(nearest_correlation(np.eye(5)), np.eye(5), atol=1e-12)

    def test_overshooting_offdiagonal_clipped(self):
        c = np.array([[1.0, 1.2], [1.2, 1.0]])
        out = nearest_correlation(c)
        np.testing.assert_allclose(np.diag(out), 1.0, atol=1e-12)
        assert 0.0 < out[0, 1] < 1.0
        assert np.linalg.eigvalsh(out).min() > 0

    def test_output_always_valid(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            g = rng.normal(size=(16, 16))
            out = nearest_correlation((g + g.T) / 2.0)
            np.testing.assert_allclose(np.diag(out), 1.0, atol=1e-12)
            np.testing.assert_allclose(out, out.T, atol=1e-12)
            assert np.linalg.eigvalsh(out).min() > 0
            assert np.max(np.abs(out)) <= 1.0 + 1e-12

    def test_non_symmetric_rejected(self):
        bad = np.eye(3)
        bad[0, 1] = 0.5
        with pytest.raises(ValueError):
            nearest_correlation(bad)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            nearest_correlation(np.zeros((2, 3)))


def small_spec(seed=0, ar=0.0, corr=None):
    return PersonaSpec(
        seed=seed,
        target_corr=np.eye(32) if corr is None else corr,
        means=default_means(),
        scales=default_scales(),
        ar_coeff=ar,
    )


class TestSampleStream:
    def test_deterministic(self):
        spec = small_spec(seed=9, ar=0.5)
        a = sample_stream(spec, 10.0, 30.0)
        b = sample_stream(spec, 10.0, 30.0)
        np.testing.assert_array_equal(a.features, b.features)

    def test_stream_invariants(self):
        spec = small_spec(seed=3, ar=0.9)
        stream = sample_stream(spec, 30.0, 30.0)
        assert len(stream) == 900
        report = validate_stream(stream)
        assert report.accepted, report.violations
        assert np.all(np.diff(stream.timestamp) > 0)
        assert np.all(stream.head_height > 0)

    def test_identity_target_iid_near_zero(self):
        # unclamped channels only: AU clamping cannot create cross
        # correlation under an identity target, but keep the check sharp
        spec = small_spec(seed=1, ar=0.0)
        stream = sample_stream(spec, 100_000 / 30.0, 30.0)
        corr = correlation_matrix(stream.features)
        off = corr[~np.eye(32, dtype=bool)]
        assert np.max(np.abs(off)) < 0.02

    def test_empirical_matches_target(self):
        # tolerance derived by simulation: at ar 0.7 and 1e5 frames the
        # clamped-AU distortion plus sampling noise stays well inside 0.5
        a, _ = make_persona_pair(3.0, seed=5)
        stream = sample_stream(a, 100_000 / 30.0, 30.0)
        corr = correlation_matrix(stream.features)
        assert np.linalg.norm(corr - a.target_corr, ord="fro") < 0.5

    def test_convergence_rate(self):
        a, _ = make_persona_pair(2.0, seed=11)
        errors = {n: [] for n in (1_000, 10_000, 100_000)}
        for s in range(10):
            spec = with_seed(a, 1000 + s)
            for n in errors:
                stream = sample_stream(spec, n / 30.0, 30.0)
                sub = correlation_matrix(stream.features)[16:, 16:]
                errors[n].append(np.linalg.norm(sub - np.asarray(a.target_corr)[16:, 16:], ord="fro"))
        medians = [np.median(errors[n]) for n in sorted(errors)]
        assert medians[0] > medians[1] > medians[2]

    def test_au_channels_clamped(self):
        spec = small_spec(seed=2, ar=0.0)
        stream = sample_stream(spec, 60.0, 30.0)
        assert np.min(stream.features[:, AU_SLICE]) >= 0.0

    def test_bad_duration(self):
        with pytest.raises(ValueError):
            sample_stream(small_spec(), 0.0)

    def test_non_spd_target_rejected(self):
        with pytest.raises(ValueError):
            PersonaSpec(
                seed=0,
                target_corr=np.ones((32, 32)),
                means=default_means(),
                scales=default_scales(),
            )


class TestMakePersonaPair:
    def test_zero_separation_identical_targets(self):
        a, b = make_persona_pair(0.0, seed=4)
        np.testing.assert_array_equal(a.target_corr, b.target_corr)
        assert a.seed != b.seed

    def test_separation_three_moves_target(self):
        a, b = make_persona_pair(3.0, seed=4)
        assert np.linalg.norm(np.asarray(a.target_corr) - b.target_corr, ord="fro") >= 1.0

    def test_different_seeds_different_personas(self):
        a1, _ = make_persona_pair(3.0, seed=1)
        a2, _ = make_persona_pair(3.0, seed=2)
        assert not np.allclose(a1.target_corr, a2.target_corr)

    def test_shared_means_and_scales(self):
        a, b = make_persona_pair(3.0, seed=4)
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.scales, b.scales)

    def test_targets_are_valid_correlations(self):
        for seed in (1, 2, 3):
            a, b = make_persona_pair(3.0, seed=seed)
            for t in (a.target_corr, b.target_corr):
                t = np.asarray(t)
                np.testing.assert_allclose(np.diag(t), 1.0, atol=1e-10)
                assert np.linalg.eigvalsh(t).min() > 0

    def test_negative_separation_rejected(self):
        with pytest.raises(ValueError):
            make_persona_pair(-1.0, seed=0)


class TestPersonaJson:
    def test_roundtrip(self):
        a, _ = make_persona_pair(3.0, seed=8)
        spec, label = persona_from_json(persona_to_json(a, "subject-a"))
        assert label == "subject-a"
        assert spec.seed == a.seed
        assert spec.ar_coeff == a.ar_coeff
        np.testing.assert_array_equal(spec.target_corr, a.target_corr)
        np.testing.assert_array_equal(spec.means, a.means)

    def test_version_checked(self):
        with pytest.raises(ValueError):
            persona_from_json('{"version": "other/9"}')
