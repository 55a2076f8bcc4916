import numpy as np
import pytest

import pyferns as pf


def test_image_numpy_and_pgm_round_trip():
    arr = np.arange(12 * 7, dtype=np.uint8).reshape(7, 12)
    img = pf.GrayImage(arr)
    assert (img.width, img.height) == (12, 7)
    assert img.at(3, 2) == arr[2, 3]
    np.testing.assert_array_equal(img.to_numpy(), arr)
    data = pf.write_pgm(img)
    assert data.startswith(b"P5\n12 7\n255\n")
    assert pf.read_pgm(data) == img


def test_bad_pgm_raises():
    with pytest.raises(pf.UnsupportedFormat):
        pf.read_pgm(b"P2\n1 1\n255\n0")
    with pytest.raises(pf.FernsError):
        pf.read_pgm(b"nope")


def test_identity_warp_and_noise():
    img = pf.make_textured_image(64, 48, 3)
    assert pf.warp_image(img, pf.AffineDeform(), 64, 48) == img
    assert pf.add_noise(img, 0.0, 1) == img
    noisy = pf.add_noise(img, 10.0, 1)
    assert noisy == pf.add_noise(img, 10.0, 1)
    assert not noisy == img
    (a, b), (c, d) = pf.AffineDeform(lambda1=2.0, lambda2=0.5).matrix()
    assert a * d - b * c == pytest.approx(1.0)


def test_train_classify_save_load():
    img = pf.make_textured_image(160, 120, 5)
    classes = pf.select_stable_classes(img, 10, seed=1, patch_size=31, num_views=10)
    assert len(classes) == 10
    spec = pf.DatasetSpec(views_per_degree=1, rotation_degrees=60, test_views=20)
    train = pf.collect_set(img, classes, spec, pf.Stream.Training, 1)
    test = pf.collect_set(img, classes, spec, pf.Stream.Test, 1)
    model = pf.FernModel(classes, num_ferns=10, fern_size=8, seed=1)
    model.train(train)
    rate = pf.recognition_rate(model, test)
    assert 0.3 < rate <= 1.0

    patch = test[0].patch
    post = model.posterior(patch)
    assert len(post) == 10
    assert sum(post) == pytest.approx(1.0, abs=1e-12)
    assert model.classify(patch).class_id == int(np.argmax(post))

    loaded = pf.FernModel.load(model.save())
    assert loaded.save() == model.save()
    for sample in test[:50]:
        a, b = model.classify(sample.patch), loaded.classify(sample.patch)
        assert (a.class_id, a.log_score) == (b.class_id, b.log_score)
    with pytest.raises(pf.FormatError):
        pf.FernModel.load(model.save()[:-3])


def test_compare_and_sweep():
    img = pf.make_textured_image(160, 120, 6)
    classes = pf.select_stable_classes(img, 8, seed=2, num_views=10)
    spec = pf.DatasetSpec(views_per_degree=1, rotation_degrees=30, test_views=10)
    records = pf.compare_methods(img, classes, spec, units=5, seed=2, fern_size=6)
    assert [r.method for r in records] == ["FernNB", "FernAvg", "TreeNB", "TreeAvg"]
    sweep = pf.sweep_units(img, classes, spec, pf.Method.FernNB, [1, 3, 5], seed=2, fern_size=6)
    assert [r.units for r in sweep] == [1, 3, 5]
    assert sweep[-1].recognition_rate == records[0].recognition_rate


def test_insufficient_keypoints():
    blank = pf.GrayImage(80, 80, 100)
    with pytest.raises(pf.InsufficientKeypoints):
        pf.select_stable_classes(blank, 5, seed=1, num_views=3)
