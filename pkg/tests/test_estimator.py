"""Scikit-learn conventions on the estimator facade: parameter plumbing,
fitted-state checks, batch validation and hint coercion."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hintcolor.colorspace import RgbImage, rgb_array_to_lab
from hintcolor.estimator import PointColorizer
from hintcolor.hints import Hint
from hintcolor.model import Colorizer
from hintcolor.validation import (
    coerce_hint_lists,
    validate_gray_batch,
    validate_rgb_batch,
)


def rgb_batch(n, size, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(n, size, size, 3), dtype=np.uint8)


@pytest.fixture(scope="module")
def fitted():
    est = PointColorizer(preset="toy", steps=6, batch=2, seed=3)
    est.fit(rgb_batch(4, 64))
    return est


class TestParameterPlumbing:
    def test_get_params_defaults(self):
        params = PointColorizer().get_params()
        assert params == {
            "preset": "toy", "ls_kind": "convolution", "steps": 200,
            "batch": 4, "lr": 5e-4, "weight_decay": 0.05, "hint_max": 128,
            "hint_size": 2, "seed": 0, "min_lr": 0.0,
        }

    def test_set_params_round_trip(self):
        est = PointColorizer().set_params(steps=7, ls_kind="linear")
        assert est.steps == 7
        assert est.ls_kind == "linear"
        with pytest.raises(ValueError):
            est.set_params(window="hann")

    def test_clone_drops_fitted_state(self, fitted):
        fresh = clone(fitted)
        assert fresh.get_params() == fitted.get_params()
        assert not hasattr(fresh, "params_")

    def test_repr_mentions_changed_params(self):
        assert "steps=7" in repr(PointColorizer(steps=7))


class TestNotFitted:
    @pytest.mark.parametrize("call", [
        lambda e: e.predict(np.zeros((1, 64, 64))),
        lambda e: e.transform(np.zeros((1, 64, 64))),
        lambda e: e.score(np.zeros((1, 64, 64)), rgb_batch(1, 64)),
        lambda e: e.colorizer_(),
    ])
    def test_raises_before_fit(self, call):
        with pytest.raises(NotFittedError):
            call(PointColorizer())


class TestFit:
    def test_sets_fitted_attributes(self, fitted):
        assert fitted.config_.image_size == 64
        assert fitted.n_images_ == 4
        assert len(fitted.loss_history_) == 6
        assert all(np.isfinite(v) for v in fitted.loss_history_)

    def test_returns_self(self):
        est = PointColorizer(steps=1, batch=1)
        assert est.fit(rgb_batch(1, 64)) is est

    def test_deterministic_for_seed(self):
        runs = []
        for _ in range(2):
            est = PointColorizer(steps=2, batch=1, seed=9)
            est.fit(rgb_batch(2, 64))
            runs.append(est.params_["ls.bias"].data.copy())
        assert np.array_equal(runs[0], runs[1])

    def test_rejects_wrong_image_size(self):
        with pytest.raises(ValueError, match="'toy'"):
            PointColorizer(steps=1).fit(rgb_batch(1, 32))

    def test_accepts_rgb_image_list(self):
        imgs = [RgbImage.from_array(a) for a in rgb_batch(2, 64)]
        est = PointColorizer(steps=1, batch=1).fit(imgs)
        assert est.n_images_ == 2


class TestPredict:
    def test_output_shape_and_dtype(self, fitted):
        out = fitted.predict(np.full((3, 64, 64), 50.0))
        assert out.shape == (3, 64, 64, 3)
        assert out.dtype == np.uint8

    def test_accepts_rgb_batch_via_luminance(self, fitted):
        batch = rgb_batch(2, 64, seed=5)
        from_rgb = fitted.predict(batch)
        planes = rgb_array_to_lab(batch)[..., 0]
        from_planes = fitted.predict(planes)
        assert np.array_equal(from_rgb, from_planes)

    def test_deterministic(self, fitted):
        planes = np.full((1, 64, 64), 40.0)
        assert np.array_equal(fitted.predict(planes), fitted.predict(planes))

    def test_dict_hints_match_hint_objects(self, fitted):
        planes = np.full((1, 64, 64), 60.0)
        as_obj = fitted.predict(planes, hints=[[Hint(x=8, y=8, a=40.0, b=5.0)]])
        as_dict = fitted.predict(
            planes, hints=[[{"x": 8, "y": 8, "a": 40.0, "b": 5.0}]]
        )
        assert np.array_equal(as_obj, as_dict)

    def test_hints_change_output(self, fitted):
        planes = np.full((1, 64, 64), 60.0)
        plain = fitted.predict(planes)
        hinted = fitted.predict(planes, hints=[[Hint(x=8, y=8, a=60.0, b=0.0)]])
        assert not np.array_equal(plain, hinted)

    def test_wrong_hint_list_count(self, fitted):
        with pytest.raises(ValueError, match="2 hint lists for 1 images"):
            fitted.predict(np.full((1, 64, 64), 50.0), hints=[[], []])

    def test_transform_is_unconditional_predict(self, fitted):
        planes = np.full((2, 64, 64), 30.0)
        assert np.array_equal(fitted.transform(planes), fitted.predict(planes))


class TestScore:
    def test_returns_finite_mean_psnr(self, fitted):
        batch = rgb_batch(2, 64, seed=7)
        value = fitted.score(batch, batch)
        assert isinstance(value, float)
        assert 0.0 < value < 60.0

    def test_shape_mismatch(self, fitted):
        with pytest.raises(ValueError, match="does not match"):
            fitted.score(np.full((2, 64, 64), 50.0), rgb_batch(3, 64))


class TestColorizerHandle:
    def test_shares_fitted_params(self, fitted):
        bundle = fitted.colorizer_()
        assert isinstance(bundle, Colorizer)
        assert bundle.params is fitted.params_
        assert bundle.config == fitted.config_


class TestRgbBatchValidation:
    def test_array_passthrough(self):
        batch = rgb_batch(2, 8)
        assert validate_rgb_batch(batch) is batch

    def test_rejects_bad_array(self):
        with pytest.raises(ValueError, match="got shape"):
            validate_rgb_batch(np.zeros((2, 8, 8)))
        with pytest.raises(ValueError, match="uint8"):
            validate_rgb_batch(np.zeros((2, 8, 8, 3)))

    def test_rejects_empty_and_mixed(self):
        with pytest.raises(ValueError, match="empty"):
            validate_rgb_batch([])
        a = np.zeros((8, 8, 3), dtype=np.uint8)
        b = np.zeros((4, 4, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="mixes image shapes"):
            validate_rgb_batch([a, b])

    def test_item_error_names_index(self):
        good = np.zeros((8, 8, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="batch item 1"):
            validate_rgb_batch([good, np.zeros((8, 8))])


class TestGrayBatchValidation:
    def test_rgb_batch_converts_to_l(self):
        batch = rgb_batch(2, 8)
        planes = validate_gray_batch(batch, 8)
        assert np.allclose(planes, rgb_array_to_lab(batch)[..., 0])

    def test_single_image_guidance(self):
        with pytest.raises(ValueError, match="length-1 batch"):
            validate_gray_batch(np.zeros((8, 8, 3), dtype=np.uint8), 8)

    def test_size_and_range_checks(self):
        with pytest.raises(ValueError, match="model expects"):
            validate_gray_batch(np.zeros((1, 4, 4)), 8)
        with pytest.raises(ValueError, match=r"\[0, 100\]"):
            validate_gray_batch(np.full((1, 8, 8), 120.0), 8)


class TestHintCoercion:
    def test_none_means_empty_everywhere(self):
        assert coerce_hint_lists(None, 3) == [[], [], []]

    def test_dict_defaults_size_2(self):
        out = coerce_hint_lists([[{"x": 1, "y": 2, "a": 3.0, "b": 4.0}]], 1)
        assert out == [[Hint(x=1, y=2, a=3.0, b=4.0, size=2)]]

    def test_missing_field_and_bad_type(self):
        with pytest.raises(ValueError, match="missing field"):
            coerce_hint_lists([[{"x": 1, "y": 2, "a": 3.0}]], 1)
        with pytest.raises(ValueError, match="must be a Hint or a dict"):
            coerce_hint_lists([[(1, 2)]], 1)
