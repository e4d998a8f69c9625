import numpy as np
import pytest

from deba.colorspace import ImageTensor, quantize, rgb_to_yuv
from deba.embed import (
    PoisonConfig,
    default_k,
    embed,
    embed_rgb,
    embed_uv,
    prepare_trigger,
    residual,
    splice_planes,
)
from deba.errors import InvalidInput, KTooLarge
from deba.svd_core import decompose, low_rank_head, low_rank_tail

RGB16 = PoisonConfig(variant="RGB", k=16)
UV26 = PoisonConfig(variant="UV", k=26)


def levels(img):
    return img.to_uint8().astype(int)


def test_prepare_trigger_identity(make_image):
    t = make_image(32, 32)
    assert prepare_trigger(t, 32, 32) == t


def test_prepare_trigger_checkerboard():
    board = np.array([[0.0, 1.0], [1.0, 0.0]])
    t = ImageTensor(np.stack([board] * 3))
    out = prepare_trigger(t, 3, 3).planes[0]
    # pixel-centre mapping 3 -> 2: source coords -1/6 (clamped), 1/2, 7/6 (clamped)
    expected = np.array([[0.0, 0.5, 1.0], [0.5, 0.5, 0.5], [1.0, 0.5, 0.0]])
    np.testing.assert_allclose(out, expected, atol=1e-15)
    assert out[1, 1] == 0.5


def test_prepare_trigger_downscale_averages():
    # alternating 0/1 columns halved in width: interior weights .25 .75 .75 .25
    stripes = np.tile([0.0, 1.0], 32)[None, :].repeat(4, axis=0)
    t = ImageTensor(np.stack([stripes] * 3))
    out = prepare_trigger(t, 4, 32).planes[0]
    np.testing.assert_allclose(out[:, 1:-1], 0.5, atol=1e-15)
    # borders lose the out-of-range tap and renormalize
    np.testing.assert_allclose(out[:, 0], 0.75 / 1.75, atol=1e-15)
    np.testing.assert_allclose(out[:, -1], 1.0 / 1.75, atol=1e-15)


@pytest.mark.parametrize("size", [(1, 1), (5, 9), (64, 17)])
def test_prepare_trigger_constant(size):
    t = ImageTensor(np.stack([np.full((7, 11), v) for v in (0.1, 0.5, 0.9)]))
    out = prepare_trigger(t, *size)
    for c, v in enumerate((0.1, 0.5, 0.9)):
        np.testing.assert_allclose(out.planes[c], v, atol=1e-15)


def test_prepare_trigger_errors(make_image):
    with pytest.raises(InvalidInput):
        prepare_trigger(make_image(), 0, 5)
    with pytest.raises(InvalidInput):
        prepare_trigger(make_image(space="GRAY"), 8, 8)


def test_rgb_limits(make_image):
    clean = quantize(make_image())
    trig = make_image(48, 40)
    out0 = embed_rgb(clean, trig, PoisonConfig(variant="RGB", k=0))
    np.testing.assert_array_equal(levels(out0), levels(clean))
    full = embed_rgb(clean, trig, PoisonConfig(variant="RGB", k=32))
    diff = np.abs(levels(full) - levels(prepare_trigger(trig, 32, 32)))
    assert diff.max() <= 1


def test_rgb_non_square(make_image):
    clean = quantize(make_image(20, 32))
    trig = make_image(32, 32)
    out = embed_rgb(clean, trig, PoisonConfig(variant="RGB", k=20))
    np.testing.assert_array_less(
        np.abs(levels(out) - levels(prepare_trigger(trig, 20, 32))), 2
    )
    with pytest.raises(KTooLarge):
        embed_rgb(clean, trig, PoisonConfig(variant="RGB", k=21))


def test_uv_limits(make_image):
    clean = quantize(make_image())
    trig = make_image()
    out0 = embed_uv(clean, trig, PoisonConfig(variant="UV", k=0))
    assert np.abs(levels(out0) - levels(clean)).max() <= 1
    same = embed_uv(clean, clean, UV26)
    assert np.abs(levels(same) - levels(clean)).max() <= 1


def test_uv_full_splice_takes_trigger_chroma(make_image):
    clean, trig = make_image(), make_image()
    out = embed_uv(clean, trig, PoisonConfig(variant="UV", k=32), quantize_output=False)
    yuv_out = rgb_to_yuv(out).planes
    np.testing.assert_allclose(yuv_out[0], rgb_to_yuv(clean).planes[0], atol=1e-12)
    np.testing.assert_allclose(yuv_out[1:], rgb_to_yuv(trig).planes[1:], atol=1e-12)


def test_uv_preserves_luma(make_image):
    clean, trig = quantize(make_image()), make_image()
    out = embed_uv(clean, trig, UV26)
    y_clean = rgb_to_yuv(clean).planes[0] * 255
    y_out = rgb_to_yuv(out).planes[0] * 255
    # one level per RGB channel of rounding moves Y by at most 0.299+0.587+0.114 = 1
    assert np.abs(y_clean - y_out).max() <= 1.0 + 1e-9


def test_uv_rejects_gray(make_image):
    with pytest.raises(InvalidInput):
        embed_uv(make_image(space="GRAY"), make_image(), UV26)


def test_gray_rgb_variant(make_image):
    clean = quantize(make_image(space="GRAY"))
    out = embed_rgb(clean, make_image(), RGB16)
    assert out.space == "GRAY" and out.shape == (1, 32, 32)
    out0 = embed_rgb(clean, make_image(), PoisonConfig(variant="RGB", k=0))
    assert out0 == clean


def test_variant_mismatch(make_image):
    with pytest.raises(InvalidInput):
        embed_rgb(make_image(), make_image(), UV26)
    with pytest.raises(InvalidInput):
        embed_uv(make_image(), make_image(), RGB16)


def test_quantized_output_in_range_and_deterministic(make_image):
    clean, trig = make_image(), ImageTensor(np.random.default_rng(3).random((3, 32, 32)))
    for cfg in (RGB16, UV26, PoisonConfig(variant="RGB", k=32)):
        a = embed(clean, trig, cfg)
        b = embed(clean, trig, cfg)
        assert a == b
        assert np.array_equal(a.planes * 255, np.round(a.planes * 255))
        assert a.planes.min() >= 0 and a.planes.max() <= 1


def test_trigger_constant_component(make_image):
    trig = make_image()
    k = 16
    tail = None
    for _ in range(5):
        x = make_image()
        out = embed_rgb(x, trig, RGB16, quantize_output=False).planes
        head = np.stack([low_rank_head(decompose(p), k) for p in x.planes])
        added = out - head
        if tail is None:
            tail = added
            oracle = np.stack([low_rank_tail(decompose(p), k) for p in trig.planes])
            np.testing.assert_allclose(tail, oracle, atol=1e-12)
        np.testing.assert_allclose(added, tail, atol=1e-9, rtol=0)


def test_monotone_fidelity(rng):
    from conftest import smooth_image

    ks = [0, 4, 8, 16, 32]
    errs = np.zeros(len(ks))
    for _ in range(20):
        x = smooth_image(rng)
        t = smooth_image(rng)
        for j, k in enumerate(ks):
            out = splice_planes(x.planes, t.planes, k)
            errs[j] += np.mean((out - x.planes) ** 2)
    assert np.all(np.diff(errs) >= 0)


def test_residual():
    a = ImageTensor(np.full((3, 4, 4), 0.5))
    assert residual(a, a).planes.max() == 0
    p = a.planes.copy()
    p[1, 2, 3] = 0.7
    b = ImageTensor(p)
    r = residual(a, b).planes
    assert r[1, 2, 3] == 1.0
    assert np.count_nonzero(r) == 1
    assert residual(b, a) == residual(a, b)
    with pytest.raises(InvalidInput):
        residual(a, ImageTensor(np.zeros((3, 4, 5))))


def test_default_k():
    assert default_k("RGB", 32, 32) == 16
    assert default_k("UV", 32, 32) == 26
    assert default_k("RGB", 64, 64) == 33
    assert default_k("UV", 64, 64, dataset="gtsrb") == 41
    assert default_k("UV", 64, 64, dataset="tiny-imagenet") == 52
    assert default_k("UV", 224, 224) == 207
    assert default_k("RGB", 224, 224) == 163
    with pytest.raises(InvalidInput):
        default_k("UV", 64, 64)


def test_config_validation_and_hash():
    a = PoisonConfig(variant="UV", k=26, target_label=3, poison_rate=0.1, seed=7, trigger_source="cat.ppm")
    b = PoisonConfig.from_dict(
        {"trigger_source": "cat.ppm", "seed": 7, "poison_rate": 0.1, "target_label": 3, "k": 26, "variant": "UV"}
    )
    assert a.canonical_bytes() == b.canonical_bytes()
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != PoisonConfig(variant="UV", k=25).config_hash()
    assert a.canonical_bytes() == (
        b'{"k":26,"poison_rate":0.1,"seed":7,"target_label":3,'
        b'"trigger_source":"cat.ppm","variant":"UV"}'
    )
    for bad in ({"poison_rate": 1.5}, {"k": -1}, {"variant": "YUV"}, {"seed": -1}):
        with pytest.raises(InvalidInput):
            PoisonConfig(**bad)
    with pytest.raises(InvalidInput):
        PoisonConfig.from_dict({"colour": "red"})
