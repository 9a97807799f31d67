import numpy as np
import pytest

from inaad import (
    AnomalySpec,
    InaadConfig,
    PhantomParams,
    anomaly_heatmap,
    forward_diffuse,
    generate_anomalous,
    generate_normal,
    inaad_score,
    inpaint_reverse_step,
    make_rng,
    planted_denoiser,
    reconstruct_batch,
    reconstruct_from_level,
    reverse_step,
    sample_gaussian,
    score_images,
    ssim,
    zero_denoiser,
)


def _noise(shape, seed):
    return make_rng(seed).standard_normal(shape)


# ------------------------------------------------- inpaint_reverse_step --

def test_mask_all_ones_follows_forward_branch(schedule500):
    x0 = generate_normal(1)[0]
    xbar = _noise(x0.shape, 2)
    eps_fwd = _noise(x0.shape, 3)
    t = 90
    out = inpaint_reverse_step(x0, xbar, t, np.ones_like(x0), zero_denoiser(),
                               schedule500, eps_fwd, np.zeros_like(x0))
    assert np.array_equal(out, forward_diffuse(x0, t - 1, schedule500, eps_fwd))


def test_mask_all_zeros_follows_reverse_branch(schedule500):
    x0 = generate_normal(1)[0]
    xbar = _noise(x0.shape, 2)
    eps_rev = _noise(x0.shape, 4)
    t = 90
    out = inpaint_reverse_step(x0, xbar, t, np.zeros_like(x0), zero_denoiser(),
                               schedule500, np.zeros_like(x0), eps_rev)
    assert np.array_equal(out, reverse_step(xbar, t, zero_denoiser(),
                                            schedule500, eps_rev))


def test_checkerboard_mask_mixes_pixelwise(schedule500):
    x0 = generate_normal(1)[0]
    xbar = _noise(x0.shape, 2)
    eps_fwd = _noise(x0.shape, 3)
    eps_rev = _noise(x0.shape, 4)
    mask = np.indices(x0.shape).sum(axis=0) % 2
    mask = mask.astype(float)
    t = 33
    out = inpaint_reverse_step(x0, xbar, t, mask, zero_denoiser(), schedule500,
                               eps_fwd, eps_rev)
    fwd = forward_diffuse(x0, t - 1, schedule500, eps_fwd)
    rev = reverse_step(xbar, t, zero_denoiser(), schedule500, eps_rev)
    assert np.array_equal(out[mask == 1.0], fwd[mask == 1.0])
    assert np.array_equal(out[mask == 0.0], rev[mask == 0.0])


def test_inpaint_rejects_non_binary_mask(schedule500):
    x = np.zeros((8, 8))
    with pytest.raises(ValueError):
        inpaint_reverse_step(x, x, 5, np.full((8, 8), 0.5), zero_denoiser(),
                             schedule500, x, x)
    with pytest.raises(ValueError):
        inpaint_reverse_step(x, x, 5, np.zeros((8, 9)), zero_denoiser(),
                             schedule500, x, x)


# --------------------------------------------------------- reconstruct --

def test_planted_round_trip_with_any_mask(schedule500):
    x0, mask = generate_normal(11)
    den = planted_denoiser(x0, schedule500)
    cfg = InaadConfig(noise_levels=(150,), reverse_noise_scale=0.0)
    for m in (mask, np.zeros_like(mask), np.ones_like(mask)):
        rec = reconstruct_from_level(x0, m, 150, den, schedule500, cfg, seed=5)
        assert ssim(x0, rec) > 0.99


def test_single_step_all_noise_zero_returns_original(schedule500):
    # With every noise source silenced the corruption jump and the reverse
    # step cancel exactly: sqrt(abar_1) x0 / sqrt(a_1) = x0.
    x0 = generate_normal(12)[0] * 0.5
    cfg = InaadConfig(noise_levels=(1,), inpainting=False,
                      reverse_noise_scale=0.0, corruption_noise_scale=0.0)
    rec = reconstruct_from_level(x0, np.zeros_like(x0), 1, zero_denoiser(),
                                 schedule500, cfg, seed=1)
    assert np.abs(rec - x0).max() < 1e-12


def test_reconstruct_is_deterministic(schedule500):
    x0, mask = generate_normal(13)
    cfg = InaadConfig(noise_levels=(20,))
    a = reconstruct_from_level(x0, mask, 20, zero_denoiser(), schedule500,
                               cfg, seed=7)
    b = reconstruct_from_level(x0, mask, 20, zero_denoiser(), schedule500,
                               cfg, seed=7)
    c = reconstruct_from_level(x0, mask, 20, zero_denoiser(), schedule500,
                               cfg, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.min() >= -1.0 and a.max() <= 1.0


def test_reconstruct_validation(schedule500):
    x0, mask = generate_normal(14)
    cfg = InaadConfig()
    with pytest.raises(ValueError):
        reconstruct_from_level(x0, mask, 0, zero_denoiser(), schedule500,
                               cfg, seed=1)
    with pytest.raises(ValueError):
        reconstruct_from_level(x0, mask, 501, zero_denoiser(), schedule500,
                               cfg, seed=1)
    with pytest.raises(ValueError):
        reconstruct_batch(x0[None], mask[None], 5, zero_denoiser(),
                          schedule500, cfg, seeds=[1, 2])


def test_batching_does_not_change_results(schedule500):
    images = np.stack([generate_normal(i)[0] for i in range(3)])
    masks = np.stack([generate_normal(i)[1] for i in range(3)])
    cfg = InaadConfig(noise_levels=(10, 20))
    seeds = [41, 42, 43]
    batched = score_images(images, masks, seeds, zero_denoiser(), schedule500,
                           cfg, batch_size=3)
    single = [inaad_score(images[i], masks[i], zero_denoiser(), schedule500,
                          cfg, seeds[i]) for i in range(3)]
    for b, s in zip(batched, single):
        assert np.array_equal(b.reconstruction, s.reconstruction)
        assert b.similarity == s.similarity


# --------------------------------------------------------- inaad_score --

def test_single_level_average_is_that_reconstruction(schedule500):
    x0, mask = generate_normal(15)
    cfg = InaadConfig(noise_levels=(40,))
    report = inaad_score(x0, mask, zero_denoiser(), schedule500, cfg, seed=3)
    rec = reconstruct_from_level(x0, mask, 40, zero_denoiser(), schedule500,
                                 cfg, seed=3)
    assert np.array_equal(report.reconstruction, rec)
    assert report.anomaly_score == 1.0 - report.similarity


def test_identical_reconstructions_average_to_themselves(schedule500):
    # A planted oracle with zero noise reproduces x0 from every level, so
    # the average equals each reconstruction and similarity is perfect.
    x0, mask = generate_normal(16)
    den = planted_denoiser(x0, schedule500)
    cfg = InaadConfig(noise_levels=(30, 60, 90), reverse_noise_scale=0.0,
                      corruption_noise_scale=0.0)
    report = inaad_score(x0, mask, den, schedule500, cfg, seed=4)
    single = reconstruct_from_level(x0, mask, 30, den, schedule500, cfg, 4)
    assert np.allclose(report.reconstruction, single, atol=1e-12)
    assert report.similarity == pytest.approx(1.0, abs=1e-9)


def test_empty_level_set_rejected():
    with pytest.raises(ValueError):
        InaadConfig(noise_levels=())


def test_region_scoped_similarity(schedule500):
    x0, mask = generate_normal(17)
    den = planted_denoiser(x0, schedule500)
    cfg = InaadConfig(noise_levels=(25,), ssim_scope="region",
                      reverse_noise_scale=0.0)
    report = inaad_score(x0, mask, den, schedule500, cfg, seed=2)
    assert report.similarity > 0.99


def test_collect_levels(schedule500):
    x0, mask = generate_normal(18)
    cfg = InaadConfig(noise_levels=(10, 20))
    [report] = score_images(x0[None], mask[None], [9], zero_denoiser(),
                            schedule500, cfg, collect_levels=True)
    assert set(report.level_similarities) == {10, 20}
    for v in report.level_similarities.values():
        assert -1.0 <= v <= 1.0


# ------------------------------------------------------------- heatmap --

def test_heatmap_zero_for_identical_images():
    x0, mask = generate_normal(19)
    assert np.array_equal(anomaly_heatmap(x0, x0, mask), np.zeros_like(x0))


def test_heatmap_single_pixel_peak():
    x0, mask = generate_normal(20)
    inside = np.argwhere(mask == 0.0)
    i, j = inside[len(inside) // 2]
    xbar = x0.copy()
    xbar[i, j] += 0.25
    raw = anomaly_heatmap(x0, xbar, mask)
    assert raw[i, j] == pytest.approx(0.25, abs=1e-12)
    assert np.count_nonzero(raw) == 1
    smoothed = anomaly_heatmap(x0, xbar, mask, smooth=True)
    # The box blur flattens the spike into a 3x3 plateau that contains (i, j).
    assert smoothed[i, j] == smoothed.max() > 0.0
    assert np.count_nonzero(smoothed) <= 9


def test_heatmap_masked_region_stays_zero():
    x0, mask = generate_normal(21)
    outside = np.argwhere(mask == 1.0)
    i, j = outside[0]
    xbar = x0.copy()
    xbar[i, j] += 0.5
    for smooth in (False, True):
        heat = anomaly_heatmap(x0, xbar, mask, smooth=smooth)
        assert np.array_equal(heat[mask == 1.0],
                              np.zeros(int(mask.sum())))


def test_heatmap_shape_mismatch():
    with pytest.raises(ValueError):
        anomaly_heatmap(np.zeros((8, 8)), np.zeros((8, 9)), np.zeros((8, 8)))


# ------------------------------------------------------------ invariants --

def test_aggregation_reduces_variance(schedule50):
    # Variance of the multi-level average over seeds stays below the
    # variance of single-level reconstructions at the median level.
    x0, mask = generate_normal(22)
    x0 = x0[:32, :32]
    mask = mask[:32, :32]
    levels = (5, 10, 15, 20, 25)
    cfg = InaadConfig(noise_levels=levels)
    cfg_mid = InaadConfig(noise_levels=(15,))
    den = zero_denoiser()
    agg, mid = [], []
    for seed in range(50):
        agg.append(inaad_score(x0, mask, den, schedule50, cfg,
                               seed).reconstruction)
        mid.append(reconstruct_from_level(x0, mask, 15, den, schedule50,
                                          cfg_mid, seed))
    var_agg = np.var(np.stack(agg), axis=0).mean()
    var_mid = np.var(np.stack(mid), axis=0).mean()
    assert var_agg <= var_mid


def test_larger_blobs_never_score_lower(schedule500):
    # A denoiser that projects onto the clean normal makes the anomaly
    # score track how far the input deviates from it.
    params = PhantomParams()
    clean, mask = generate_normal(23)
    den = planted_denoiser(clean, schedule500)
    cfg = InaadConfig(noise_levels=(50,), reverse_noise_scale=0.0)
    medians = []
    for amp in (0.2, 0.5, 1.0):
        scores = []
        for seed in range(5):
            spec = AnomalySpec(kind="cyst_blob", severity=amp,
                               location=(30.0, 32.0))
            img, m, _ = generate_anomalous(23, params, spec)
            scores.append(inaad_score(img, m, den, schedule500, cfg,
                                      seed).anomaly_score)
        medians.append(np.median(scores))
    assert medians[0] <= medians[1] <= medians[2]


def test_paired_blob_trials_score_higher(schedule500):
    params = PhantomParams()
    cfg = InaadConfig(noise_levels=(50,))
    wins = 0
    trials = 20
    for k in range(trials):
        clean, mask = generate_normal(100 + k)
        den = planted_denoiser(clean, schedule500)
        blob, bmask, _ = generate_anomalous(
            100 + k, params, AnomalySpec(kind="cyst_blob", severity=0.7))
        clean_score = inaad_score(clean, mask, den, schedule500, cfg,
                                  seed=k).anomaly_score
        blob_score = inaad_score(blob, bmask, den, schedule500, cfg,
                                 seed=k).anomaly_score
        wins += blob_score > clean_score
    assert wins >= 0.9 * trials
