import numpy as np
import pytest

from matpal.errors import InvalidInputError, ShapeError, UndefinedRatioError
from matpal.metrics import (
    EvalReport,
    delta_percent,
    fid,
    FID_JITTER,
    format_table,
    kid,
    material_eval,
    mse,
    patch_stats_extractor,
    perceptual_distance,
    rerender_compare,
    resemblance_protocol,
    ssim,
    _gaussian_kernel,
)
from tests.conftest import random_material


def test_mse_ssim_identity(rng):
    img = rng.uniform(0, 1, (32, 32, 3))
    assert mse(img, img) == 0.0
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)


def test_mse_constant_half():
    img = np.full((8, 8), 0.5)
    assert mse(img, 1.0 - img) == 0.0


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        mse(np.zeros((4, 4)), np.zeros((5, 4)))
    with pytest.raises(ShapeError):
        ssim(np.zeros((16, 16)), np.zeros((17, 16)))


def test_ssim_matches_windowed_oracle(rng):
    a = rng.uniform(0, 1, (32, 32))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    kernel = _gaussian_kernel()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    vals = []
    for y in range(32 - 10):
        for x in range(32 - 10):
            wa = a[y:y + 11, x:x + 11]
            wb = b[y:y + 11, x:x + 11]
            mu_a = (wa * kernel).sum()
            mu_b = (wb * kernel).sum()
            var_a = (wa * wa * kernel).sum() - mu_a ** 2
            var_b = (wb * wb * kernel).sum() - mu_b ** 2
            cov = (wa * wb * kernel).sum() - mu_a * mu_b
            vals.append(
                (2 * mu_a * mu_b + c1) * (2 * cov + c2)
                / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
            )
    assert abs(ssim(a, b) - np.mean(vals)) < 1e-6


def test_ssim_symmetry(rng):
    a = rng.uniform(0, 1, (24, 24, 3))
    b = rng.uniform(0, 1, (24, 24, 3))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def _report(mse_vals, ssim_vals):
    keys = ("albedo", "normals", "roughness")
    return EvalReport(dict(zip(keys, mse_vals)), dict(zip(keys, ssim_vals)))


def test_delta_percent():
    base = _report((0.2, 0.4, 0.1), (0.5, 0.6, 0.7))
    assert delta_percent(base, base) == 0.0
    halved = _report((0.1, 0.2, 0.05), (0.5, 0.6, 0.7))
    assert delta_percent(halved, base) == pytest.approx(25.0)
    # an improving method yields positive delta
    better = _report((0.15, 0.3, 0.08), (0.55, 0.65, 0.75))
    assert delta_percent(better, base) > 0
    with pytest.raises(UndefinedRatioError):
        delta_percent(base, _report((0.0, 0.4, 0.1), (0.5, 0.6, 0.7)))


def test_perceptual_identity_symmetry(rng):
    x = rng.uniform(0, 1, (32, 32, 3))
    y = rng.uniform(0, 1, (32, 32, 3))
    assert perceptual_distance(x, x) == 0.0
    assert perceptual_distance(x, y) == pytest.approx(perceptual_distance(y, x), abs=1e-12)


def test_perceptual_noise_monotonicity(rng):
    for _ in range(20):
        x = rng.uniform(0.2, 0.8, (32, 32, 3))
        noise = rng.normal(0, 1, x.shape)
        ds = [perceptual_distance(x, np.clip(x + s * noise, 0, 1))
              for s in (0.02, 0.05, 0.1)]
        assert ds[0] < ds[1] < ds[2]


def test_fid_identical_sets(rng):
    ext = patch_stats_extractor(dimension=16)
    imgs = [rng.uniform(0, 1, (16, 16, 3)) for _ in range(50)]
    value = fid(imgs, list(imgs), ext)
    # jitter floor: the sqrt of the jittered product overshoots each trace
    assert value <= 1e-6 + 2 * 16 * FID_JITTER
    # the unbiased estimator's self-pair bias is O(1/m)
    assert abs(kid(imgs, list(imgs), ext)) < 5e-3


def test_fid_disjoint_constant_sets(rng):
    ext = patch_stats_extractor(dimension=16)
    a = [np.full((16, 16, 3), 0.2) for _ in range(20)]
    b = [np.full((16, 16, 3), 0.8) for _ in range(20)]
    ea, eb = ext(a[0]), ext(b[0])
    # zero covariances: FID reduces to the mean-distance term minus the
    # jitter contribution of the matrix square root
    want = float(((ea - eb) ** 2).sum()) - 2 * 16 * FID_JITTER
    assert fid(a, b, ext) == pytest.approx(want, abs=1e-6)


def test_fid_insufficient_samples(rng):
    ext = patch_stats_extractor(dimension=16)
    imgs = [rng.uniform(0, 1, (8, 8, 3)) for _ in range(5)]
    with pytest.raises(InvalidInputError):
        fid(imgs, imgs, ext)


def test_fid_kid_order_invariance(rng):
    ext = patch_stats_extractor(dimension=8)
    a = [rng.uniform(0, 1, (16, 16, 3)) for _ in range(12)]
    b = [rng.uniform(0, 1, (16, 16, 3)) for _ in range(12)]
    assert fid(a, b, ext) == pytest.approx(fid(a[::-1], b[::-1], ext), abs=1e-9)
    assert kid(a, b, ext) == pytest.approx(kid(a[::-1], b[::-1], ext), abs=1e-9)


def test_material_eval_identity(rng):
    m = random_material(rng, 16, 16)
    mses, ssims = material_eval(m, m)
    assert all(v == 0 for v in mses.values())
    assert all(v == pytest.approx(1.0, abs=1e-9) for v in ssims.values())


def _class_material(rng, hue, freq, h=32):
    from matpal.materials import MaterialMaps, flat_normals

    xx = np.arange(h)[None, :, None]
    stripes = 0.5 + 0.45 * np.sin(2 * np.pi * freq * xx / h)
    albedo = np.repeat(stripes, h, axis=0) * np.asarray(hue)[None, None, :]
    albedo = np.clip(albedo + rng.normal(0, 0.02, (h, h, 3)), 0, 1).astype(np.float32)
    rough = np.full((h, h, 1), 0.5, dtype=np.float32)
    return MaterialMaps(albedo, flat_normals(h, h), rough)


def test_resemblance_protocol_separates_classes(rng):
    classes = {
        "stripes": [(1.0, 0.2, 0.2), 2],
        "bands": [(0.2, 0.3, 1.0), 7],
        "waves": [(0.2, 1.0, 0.3), 12],
    }
    lib = {
        c: [_class_material(rng, hue, f) for _ in range(4)]
        for c, (hue, f) in classes.items()
    }
    ext = {
        c: [_class_material(rng, hue, f) for _ in range(3)]
        for c, (hue, f) in classes.items()
    }
    out = resemblance_protocol(ext, lib, pairs_per_class=10, seed=1)
    assert out["ours"]["albedo"] < out["upper_bound"]["albedo"]


def test_resemblance_single_class_errors(rng):
    m = [random_material(rng, 16, 16)]
    with pytest.raises(InvalidInputError):
        resemblance_protocol({"a": m}, {"a": m}, pairs_per_class=2)


def test_rerender_compare(rng):
    truth = random_material(rng, 16, 16)
    near = random_material(rng, 16, 16)
    rows = rerender_compare({
        "exact": [(truth, truth)],
        "random": [(truth, near)],
    })
    assert len(rows) == 2
    assert rows[0]["condition"] == "exact"
    assert rows[0]["albedo"] == 0.0
    assert format_table(rows)


def test_extractor_determinism(rng):
    ext = patch_stats_extractor()
    img = rng.uniform(0, 1, (48, 48, 3))
    assert np.array_equal(ext(img), ext(img))
    assert ext.dimension == 64
