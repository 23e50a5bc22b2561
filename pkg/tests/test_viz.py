import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsviz.errors import ParameterError
from tsviz.network import NetworkConfig, TeacherStudentModel, forward
from tsviz.viz import (Heatmap, bilinear_resize, explain, gradcam, gradcam_map, gradient_saliency,
                       heatmap_from_reconstruction, normalize, proposed_heatmap, read_heatmap_csv,
                       threshold_mask, write_heatmap_csv, write_heatmap_pgm)
from tsviz.imageio import read_pgm

unit_maps = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                   elements=st.floats(0, 1, allow_nan=False))


class TestReconstructionHeatmap:
    def test_black(self):
        assert heatmap_from_reconstruction(np.zeros((1, 1, 3))).values[0, 0] == 0.0

    def test_three_four_five(self):
        assert heatmap_from_reconstruction(np.array([[[0.3, 0.4, 0.0]]])).values[0, 0] == 0.5

    def test_white(self):
        v = heatmap_from_reconstruction(np.ones((2, 2, 3))).values
        np.testing.assert_allclose(v, math.sqrt(3), rtol=0, atol=1e-15)

    def test_zero_exactly_where_black(self, rng):
        V = rng.random((6, 6, 3))
        V[2:4, 1:5] = 0.0
        h = heatmap_from_reconstruction(V).values
        assert np.array_equal(h == 0, np.all(V == 0, axis=2))
        assert h.max() <= math.sqrt(3)


class TestNormalize:
    def test_ramp(self):
        np.testing.assert_allclose(normalize(np.array([[0.0, 1.0, 2.0, 3.0]])).values,
                                   [[0.0, 1 / 3, 2 / 3, 1.0]], rtol=0, atol=1e-15)

    def test_constant_is_zero(self):
        h = normalize(np.full((3, 3), 0.7))
        assert h.normalized and not h.values.any()

    @settings(max_examples=100, deadline=None)
    @given(unit_maps)
    def test_idempotent_and_order_preserving(self, m):
        once = normalize(m).values
        twice = normalize(once).values
        np.testing.assert_allclose(twice, once, rtol=0, atol=1e-12)
        flat, nflat = m.ravel(), once.ravel()
        if flat.max() > flat.min():
            assert once.min() == 0.0 and once.max() == 1.0
            i, j = np.triu_indices(flat.size, 1)
            assert np.all(np.sign(flat[i] - flat[j]) == np.sign(nflat[i] - nflat[j]))


class TestThreshold:
    def test_zero_map(self):
        assert not threshold_mask(np.zeros((4, 4))).any()

    def test_boundary_is_strict(self):
        assert not threshold_mask(np.array([[0.9]]), 0.9).any()

    def test_single_hot_pixel(self):
        m = np.zeros((3, 3))
        m[1, 2] = 0.95
        assert threshold_mask(m).sum() == 1

    def test_range(self):
        with pytest.raises(ParameterError):
            threshold_mask(np.zeros((2, 2)), 1.5)

    @settings(max_examples=100, deadline=None)
    @given(unit_maps, st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_t(self, m, a, b):
        t1, t2 = min(a, b), max(a, b)
        assert not np.any(threshold_mask(m, t2) & ~threshold_mask(m, t1))


def _linear_clf(w):
    """logits = [sum(w * x), 0]; ``features`` is the input itself."""
    def run(g, x):
        z = g.reshape(g.sum(g.mul(x, g.const(w))), (1, 1, 1))
        logits = g.flatten(g.concat_channels(z, g.const(np.zeros((1, 1, 1)))))
        return {"logits": logits, "features": x}
    return run


class TestGradientSaliency:
    def test_zero_model(self, rng):
        m = TeacherStudentModel(NetworkConfig(image_size=8, channels=[2], fc_width=4), seed=0)
        for p in m.params.values():
            p.value[...] = 0.0
        h = gradient_saliency(m, rng.random((8, 8, 3)), 1)
        assert not h.values.any() and h.method == "gradient"

    def test_linear_model_is_weight_norm(self, rng):
        w = rng.normal(size=(4, 5, 3))
        h = gradient_saliency(_linear_clf(w), rng.random((4, 5, 3)), 0)
        ref = np.linalg.norm(w, axis=2)
        np.testing.assert_allclose(h.values, (ref - ref.min()) / (ref.max() - ref.min()),
                                   rtol=0, atol=1e-12)

    def test_max_pixel_is_more_sensitive_than_min(self, rng):
        m = TeacherStudentModel(seed=2, init="he")
        img = rng.random((32, 32, 3))
        logits = forward(m, img).teacher_logits
        cls = int(np.argmax(logits))
        h = gradient_saliency(m, img, cls).values
        hi, lo = np.unravel_index(h.argmax(), h.shape), np.unravel_index(h.argmin(), h.shape)

        def bump(yx, eps=1e-4):
            x = img.copy()
            x[yx] += eps
            return abs(forward(m, x).teacher_logits[cls] - logits[cls])
        assert bump(hi) > bump(lo)


class TestGradcam:
    def test_zero_gradients(self):
        assert not gradcam_map(np.ones((2, 2, 3)), np.zeros((2, 2, 3))).any()

    def test_one_by_one_feature_map(self, rng):
        # 1x1 feature map from the mean of the input, logit = 2 * A
        def run(g, x):
            a = g.reshape(g.scale(g.sum(x), 1.0 / x.value.size), (1, 1, 1))
            logits = g.flatten(g.concat_channels(g.scale(a, 2.0), g.const(np.zeros((1, 1, 1)))))
            return {"logits": logits, "features": a}
        img = rng.random((6, 6, 3))
        A = img.mean()
        assert gradcam_map(np.full((1, 1, 1), A), np.full((1, 1, 1), 2.0))[0, 0] == 2.0 * A
        h = gradcam(run, img, 0)
        # a constant upsampled map normalizes to zeros
        assert h.shape == (6, 6) and not h.values.any()

    def test_bilinear_half_pixel_grid(self):
        out = bilinear_resize(np.array([[0.0, 1.0], [2.0, 3.0]]), (4, 4))
        np.testing.assert_allclose(out[0], [0.0, 0.25, 0.75, 1.0], atol=1e-12)
        np.testing.assert_allclose(out[:, 0], [0.0, 0.5, 1.5, 2.0], atol=1e-12)

    def test_shape_matches_image(self, rng):
        m = TeacherStudentModel(seed=3, init="he")
        h = gradcam(m, rng.random((32, 32, 3)), 2)
        assert h.shape == (32, 32) and h.normalized
        assert h.values.min() >= 0.0 and h.values.max() <= 1.0


class TestProposed:
    def test_uses_the_students_input(self, rng):
        m = TeacherStudentModel(seed=4, init="he")
        img = rng.random((32, 32, 3))
        h, out = proposed_heatmap(m, img)
        student_input = out.graph.nodes[out.nodes["V"].id].value
        np.testing.assert_array_equal(normalize(heatmap_from_reconstruction(student_input)).values,
                                      h.values)

    def test_explain_dispatch(self, rng):
        m = TeacherStudentModel(seed=5)
        img = rng.random((32, 32, 3))
        for method in ("proposed", "gradient", "gradcam"):
            h = explain(m, img, method)
            assert h.method == method and h.shape == (32, 32)
        with pytest.raises(ParameterError):
            explain(m, img, "lrp")


def test_pgm_and_csv_export(tmp_path, rng):
    h = normalize(Heatmap(rng.random((5, 4))))
    write_heatmap_pgm(h, tmp_path / "h.pgm")
    assert np.abs(read_pgm(tmp_path / "h.pgm") - h.values).max() <= 1 / 255
    write_heatmap_csv(h, tmp_path / "h.csv")
    np.testing.assert_array_equal(read_heatmap_csv(tmp_path / "h.csv").values, h.values)
