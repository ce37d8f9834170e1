import json
import logging

import numpy as np
import pytest

from gmmaug import (
    EmConfig,
    InsufficientDataError,
    InvalidStatsError,
    PhantomSpec,
    PopulationStats,
    Volume,
    clip_normalize,
    estimate_population,
    fit_em,
    foreground_mask,
    generate_phantom,
    load_stats,
    save_stats,
)

CFG = EmConfig(subsample_cap=None)

# Magnitudes reported for a large multi-scanner T1w corpus; used as the
# canonical hand-written stats fixture.
REFERENCE_STATS = {
    "k": 3,
    "components": [
        {"mu_mean": 0.1, "mu_std": 0.03, "var_mean": 2e-3, "var_std": 1e-3},
        {"mu_mean": 0.2, "mu_std": 0.06, "var_mean": 1e-3, "var_std": 1e-3},
        {"mu_mean": 0.3, "mu_std": 0.08, "var_mean": 1e-3, "var_std": 3e-3},
    ],
    "n_images": 421,
    "preprocessing": {"clip_lo_pct": 1.0, "clip_hi_pct": 99.0, "normalize": "minmax01"},
}


def small_phantom(seed, means=(0.2, 0.5, 0.8)):
    spec = PhantomSpec(dims=(20, 20, 20), means=means, variances=(1e-3, 1e-3, 1e-3), seed=seed)
    return generate_phantom(spec)[0]


class TestEstimatePopulation:
    def test_identical_volumes_zero_spread(self):
        vol = small_phantom(0)
        stats = estimate_population([vol, vol], cfg=CFG)
        assert np.all(stats.mu_std == 0.0)
        assert np.all(stats.var_std == 0.0)
        assert stats.n_images == 2

    def test_permutation_invariance_bit_exact(self):
        volumes = [small_phantom(seed) for seed in range(4)]
        forward = estimate_population(volumes, cfg=CFG)
        backward = estimate_population(volumes[::-1], cfg=CFG)
        for field in ("mu_mean", "mu_std", "var_mean", "var_std"):
            assert np.array_equal(getattr(forward, field), getattr(backward, field))

    def test_matches_direct_recomputation_with_duplicate(self):
        volumes = [small_phantom(seed) for seed in range(3)]
        volumes_dup = volumes + [volumes[0]]
        stats = estimate_population(volumes_dup, cfg=CFG)
        fitted = []
        for vol in volumes_dup:
            mask = foreground_mask(vol)
            normalized, _ = clip_normalize(vol, mask, 1.0, 99.0)
            fitted.append(fit_em(normalized.data[mask], 3, CFG).means)
        table = np.sort(np.vstack(fitted), axis=0)
        assert np.allclose(stats.mu_mean, table.mean(axis=0), rtol=0, atol=0)
        assert np.allclose(stats.mu_std, table.std(axis=0, ddof=1), rtol=0, atol=0)

    def test_failed_fits_skipped_with_warning(self, caplog):
        constant = Volume((10, 10, 10), (1, 1, 1), np.full(1000, 0.5))
        volumes = [small_phantom(0), constant, small_phantom(1)]
        with caplog.at_level(logging.WARNING, logger="gmmaug.population"):
            stats = estimate_population(volumes, cfg=CFG)
        assert stats.n_images == 2
        assert any("skipping volume 1" in rec.getMessage() for rec in caplog.records)

    def test_too_few_successes(self):
        constant = Volume((10, 10, 10), (1, 1, 1), np.full(1000, 0.5))
        with pytest.raises(InsufficientDataError):
            estimate_population([small_phantom(0), constant], cfg=CFG)

    def test_preprocessing_recorded(self):
        volumes = [small_phantom(seed) for seed in range(2)]
        stats = estimate_population(volumes, cfg=CFG, lo_pct=0.0, hi_pct=100.0)
        assert stats.clip_lo_pct == 0.0
        assert stats.clip_hi_pct == 100.0
        assert stats.normalize == "minmax01"

    def test_jitter_recovery_small_corpus(self):
        # per-image tissue means shifted by a known offset table; the
        # between-image spread of fitted means must track the injected
        # spread (fuller Monte Carlo lives in the acceptance suite)
        rng = np.random.Generator(np.random.Philox(99))
        offsets = rng.normal(0.0, 0.03, size=(12, 3))
        volumes = []
        for i, off in enumerate(offsets):
            means = tuple(np.array((0.12, 0.5, 0.88)) + off)
            spec = PhantomSpec(
                dims=(20, 20, 20),
                means=means,
                variances=(4.9e-3, 1.6e-3, 4.9e-3),
                seed=1000 + i,
            )
            volumes.append(generate_phantom(spec)[0])
        stats = estimate_population(volumes, cfg=CFG, lo_pct=0.0, hi_pct=100.0)
        injected = offsets.std(axis=0, ddof=1)
        assert np.all(stats.mu_std > 0.5 * injected)
        assert np.all(stats.mu_std < 1.5 * injected)


class TestStatsIO:
    def make_stats(self):
        return PopulationStats(
            k=3,
            mu_mean=(0.1, 0.2, 0.3),
            mu_std=(0.03, 0.06, 0.08),
            var_mean=(2e-3, 1e-3, 1e-3),
            var_std=(1e-3, 1e-3, 3e-3),
            n_images=421,
        )

    def test_round_trip_exact(self, tmp_path):
        stats = self.make_stats()
        path = tmp_path / "stats.json"
        save_stats(stats, path)
        again = load_stats(path)
        for field in ("mu_mean", "mu_std", "var_mean", "var_std"):
            assert np.array_equal(getattr(again, field), getattr(stats, field))
        assert again.n_images == stats.n_images
        assert again.clip_lo_pct == stats.clip_lo_pct

    def test_reference_values_parse(self, tmp_path):
        path = tmp_path / "ref.json"
        path.write_text(json.dumps(REFERENCE_STATS))
        stats = load_stats(path)
        assert np.array_equal(stats.mu_mean, [0.1, 0.2, 0.3])
        assert np.array_equal(stats.mu_std, [0.03, 0.06, 0.08])
        assert np.array_equal(stats.var_mean, [2e-3, 1e-3, 1e-3])
        assert np.array_equal(stats.var_std, [1e-3, 1e-3, 3e-3])
        assert stats.n_images == 421

    def test_missing_k_rejected(self, tmp_path):
        broken = {key: val for key, val in REFERENCE_STATS.items() if key != "k"}
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(broken))
        with pytest.raises(InvalidStatsError):
            load_stats(path)

    def test_component_count_mismatch(self, tmp_path):
        broken = dict(REFERENCE_STATS, components=REFERENCE_STATS["components"][:2])
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(broken))
        with pytest.raises(InvalidStatsError):
            load_stats(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("not json at all")
        with pytest.raises(InvalidStatsError):
            load_stats(path)
        path.write_text("[1, 2, 3]")
        with pytest.raises(InvalidStatsError):
            load_stats(path)

    def test_validation(self):
        with pytest.raises(InvalidStatsError):
            PopulationStats(
                k=2, mu_mean=(0.2, 0.1), mu_std=(0, 0), var_mean=(1e-3, 1e-3),
                var_std=(0, 0), n_images=2,
            )
        with pytest.raises(InvalidStatsError):
            PopulationStats(
                k=2, mu_mean=(0.1, 0.2), mu_std=(-0.1, 0), var_mean=(1e-3, 1e-3),
                var_std=(0, 0), n_images=2,
            )
        with pytest.raises(InvalidStatsError):
            PopulationStats(
                k=2, mu_mean=(0.1, 0.2), mu_std=(0, 0), var_mean=(1e-3, 1e-3),
                var_std=(0, 0), n_images=1,
            )
