import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from probewatch.cnn import (
    CnnModel,
    CnnSpec,
    ConvLayerSpec,
    ImageEncoding,
    Network,
    class_score,
    cross_entropy,
    fit_encoding,
    read_pgm,
    saliency,
    to_pgm,
    train_cnn,
    train_images,
    write_pgm,
)
from probewatch.cnn.network import (
    conv_backward,
    conv_forward,
    pool_backward,
    pool_forward,
)
from probewatch.errors import (
    DivergenceError,
    FeatureCountTooLargeError,
    InvalidInputError,
    ShapeMismatchError,
)
from probewatch.utils import dump_json


def small_spec(**overrides):
    layers = [ConvLayerSpec(2, 3, "sigmoid"), ConvLayerSpec(2, 3, "sigmoid")]
    fields = {"conv_layers": layers, "dense_units": 4, "side": 8, "seed": 1}
    return CnnSpec(**{**fields, **overrides})


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def threshold_data(seed, n=64, d=4):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    return X, (X[:, 0] > 0.5).astype(np.int64)


class TestImageEncoding(unittest.TestCase):
    def test_repeats_and_padding(self):
        encoding = fit_encoding(np.random.default_rng(0).random((10, 139)), side=32)
        self.assertEqual(encoding.repeats, 7)
        self.assertEqual(encoding.pad, 51)

    def test_pixel_layout(self):
        rng = np.random.default_rng(1)
        X = rng.random((20, 139))
        encoding = fit_encoding(X, side=32)
        row = rng.random(139)
        flat = encoding.encode(row).reshape(-1)
        scaled = encoding.scale(row)[0]
        for p in range(7 * 139):
            self.assertEqual(flat[p], scaled[p % 139])
        self.assertTrue(np.all(flat[7 * 139 :] == 0.0))
        np.testing.assert_array_equal(encoding.decode(encoding.encode(row)), scaled)

    def test_batch_shape(self):
        encoding = fit_encoding(np.arange(12.0).reshape(4, 3), side=4)
        self.assertEqual(encoding.encode(np.zeros((5, 3))).shape, (5, 4, 4))
        self.assertEqual(encoding.encode(np.zeros(3)).shape, (4, 4))

    def test_scaling(self):
        encoding = fit_encoding([[0.0, 5.0, 1.0], [10.0, 5.0, 3.0]], side=2)
        np.testing.assert_allclose(encoding.scale([5.0, 5.0, 7.0]), [[0.5, 0.0, 1.0]])
        np.testing.assert_allclose(encoding.scale([-5.0, 9.0, 2.0]), [[0.0, 0.0, 0.5]])

    def test_too_many_features(self):
        with self.assertRaises(FeatureCountTooLargeError):
            fit_encoding(np.zeros((2, 5)), side=2)

    def test_width_mismatch(self):
        encoding = fit_encoding(np.zeros((2, 3)), side=2)
        with self.assertRaises(ShapeMismatchError):
            encoding.encode(np.zeros(4))

    def test_dict_round_trip(self):
        encoding = fit_encoding(np.random.default_rng(2).random((6, 5)), side=4)
        restored = ImageEncoding.from_dict(json.loads(dump_json(encoding)))
        np.testing.assert_array_equal(restored.mins, encoding.mins)
        self.assertEqual(restored.side, 4)


class TestLayers(unittest.TestCase):
    def test_conv_matches_direct_sum(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 2, 5, 5))
        W = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        out, _ = conv_forward(x, W, b)
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.empty((2, 3, 5, 5))
        for n in range(2):
            for f in range(3):
                for i in range(5):
                    for j in range(5):
                        window = padded[n, :, i : i + 3, j : j + 3]
                        expected[n, f, i, j] = np.sum(window * W[f]) + b[f]
        np.testing.assert_allclose(out, expected)

    def test_conv_backward_is_adjoint(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1, 2, 4, 4))
        W = rng.standard_normal((3, 2, 3, 3))
        b = np.zeros(3)
        out, windows = conv_forward(x, W, b)
        dout = rng.standard_normal(out.shape)
        dx, dW, db = conv_backward(dout, windows, W)
        # <conv(x), dout> is linear in x and in W
        self.assertAlmostEqual(float(np.sum(out * dout)), float(np.sum(dx * x)))
        self.assertAlmostEqual(float(np.sum(out * dout)), float(np.sum(dW * W)))
        np.testing.assert_allclose(db, dout.sum(axis=(0, 2, 3)))

    def test_pooling(self):
        x = np.arange(25.0).reshape(1, 1, 5, 5)
        out, arg = pool_forward(x)
        np.testing.assert_array_equal(out[0, 0], [[6.0, 8.0], [16.0, 18.0]])
        dx = pool_backward(np.ones((1, 1, 2, 2)), arg, x.shape)
        self.assertEqual(dx.sum(), 4.0)
        self.assertEqual(dx[0, 0, 1, 1], 1.0)
        self.assertEqual(dx[0, 0, 4, 4], 0.0)


class TestNetwork(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(5)
        self.images = rng.random((3, 8, 8))
        self.labels = np.array([0, 1, 1])

    def test_parameter_gradients(self):
        network = Network(small_spec())
        _, cache = network.forward(self.images)
        grads = network.backward(cache, self.labels)
        eps = 1e-6
        for name, param in network.params.items():
            numeric = np.zeros_like(param)
            for idx in np.ndindex(param.shape):
                saved = param[idx]
                param[idx] = saved + eps
                up = cross_entropy(network.forward(self.images)[1], self.labels)
                param[idx] = saved - eps
                down = cross_entropy(network.forward(self.images)[1], self.labels)
                param[idx] = saved
                numeric[idx] = (up - down) / (2 * eps)
            with self.subTest(param=name):
                self.assertLess(relative_error(grads[name], numeric), 1e-4)

    def test_saliency_matches_finite_differences(self):
        network = Network(small_spec())
        image = self.images[0].copy()
        eps = 1e-6
        numeric = np.zeros_like(image)
        for idx in np.ndindex(image.shape):
            saved = image[idx]
            image[idx] = saved + eps
            up = class_score(network, image, 1)
            image[idx] = saved - eps
            down = class_score(network, image, 1)
            image[idx] = saved
            numeric[idx] = (up - down) / (2 * eps)
        error = relative_error(saliency(network, image, 1), np.abs(numeric))
        self.assertLess(error, 1e-4)

    def test_guided_saliency(self):
        spec = small_spec(conv_layers=[ConvLayerSpec(2, 3, "relu")])
        network = Network(spec)
        plain = saliency(network, self.images[0], 0)
        guided = saliency(network, self.images[0], 0, guided=True)
        self.assertEqual(guided.shape, (8, 8))
        self.assertTrue(np.all(guided >= 0.0))
        self.assertTrue(np.all(plain >= 0.0))
        with self.assertRaises(ValueError):
            saliency(network, self.images[0], 2)

    def test_probabilities(self):
        probs = Network(small_spec()).predict_proba(self.images)
        self.assertEqual(probs.shape, (3, 2))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)

    def test_training_forward_needs_generator(self):
        with self.assertRaises(ValueError):
            Network(small_spec()).forward(self.images, train=True)

    def test_shape_checks(self):
        network = Network(small_spec())
        with self.assertRaises(ShapeMismatchError):
            network.predict_proba(np.zeros((2, 4, 4)))
        params = dict(network.params)
        del params["out.b"]
        with self.assertRaises(ShapeMismatchError):
            Network(small_spec(), params)


class TestCnnSpec(unittest.TestCase):
    def test_presets(self):
        institutional = CnnSpec.institutional()
        self.assertEqual(
            [c.activation for c in institutional.conv_layers],
            ["sigmoid", "relu", "sigmoid"],
        )
        self.assertEqual(institutional.optimizer, "adam")
        unsw = CnnSpec.unsw(epochs=2)
        self.assertEqual([c.filters for c in unsw.conv_layers], [64, 64, 32, 64])
        self.assertEqual((unsw.optimizer, unsw.epochs), ("rmsprop", 2))

    def test_dict_round_trip(self):
        spec = CnnSpec.unsw()
        self.assertEqual(CnnSpec.from_dict(json.loads(dump_json(spec))), spec)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            ConvLayerSpec(kernel=4)
        with self.assertRaises(ValueError):
            CnnSpec(conv_layers=[ConvLayerSpec()] * 3, side=4)
        with self.assertRaises(ValueError):
            CnnSpec(optimizer="sgd")


class TestTraining(unittest.TestCase):
    def setUp(self):
        self.X, self.y = threshold_data(6)
        self.spec = CnnSpec(
            conv_layers=[ConvLayerSpec(4, 3, "relu", 0.1)],
            dense_units=8,
            dense_dropout=0.1,
            side=4,
            batch_size=16,
            epochs=25,
            learning_rate=0.01,
            seed=2,
        )

    def test_loss_decreases_and_validation_recorded(self):
        Xv, yv = threshold_data(7, n=32)
        model = train_cnn(self.X, self.y, self.spec, Xv, yv, feature_names=list("abcd"))
        self.assertEqual(len(model.history), 25)
        self.assertLess(model.history[-1].loss, model.history[0].loss)
        self.assertIsNotNone(model.history[-1].val_f1)
        self.assertEqual(model.predict_proba(Xv).shape, (32, 2))

    def test_deterministic(self):
        spec = CnnSpec(**{**self.spec.__dict__, "epochs": 3})
        first = train_cnn(self.X, self.y, spec)
        second = train_cnn(self.X, self.y, spec)
        for name in first.network.params:
            np.testing.assert_array_equal(
                first.network.params[name], second.network.params[name]
            )

    def test_rmsprop(self):
        spec = CnnSpec(**{**self.spec.__dict__, "epochs": 2, "optimizer": "rmsprop"})
        model = train_cnn(self.X, self.y, spec)
        self.assertTrue(all(np.isfinite(r.loss) for r in model.history))

    def test_json_round_trip(self):
        spec = CnnSpec(**{**self.spec.__dict__, "epochs": 2})
        model = train_cnn(self.X, self.y, spec, feature_names=list("abcd"))
        restored = CnnModel.from_dict(json.loads(dump_json(model)))
        self.assertEqual(restored.feature_names, list("abcd"))
        self.assertEqual(len(restored.history), 2)
        np.testing.assert_allclose(
            restored.predict_proba(self.X), model.predict_proba(self.X)
        )

    def test_non_finite_input_diverges(self):
        images = np.full((4, 4, 4), np.nan)
        with self.assertRaises(DivergenceError) as ctx:
            train_images(images, [0, 1, 0, 1], self.spec)
        self.assertEqual(ctx.exception.history, [])

    def test_image_only_model(self):
        spec = CnnSpec(**{**self.spec.__dict__, "epochs": 1})
        model = train_images(np.zeros((4, 4, 4)), [0, 1, 0, 1], spec)
        self.assertEqual(model.predict_proba_images(np.zeros((2, 4, 4))).shape, (2, 2))
        with self.assertRaises(RuntimeError):
            model.predict_proba(self.X)


class TestPgm(unittest.TestCase):
    def test_text(self):
        text = to_pgm([[0.0, 1.0], [2.0, 3.0]], maxval=3)
        self.assertEqual(text, "P2\n2 2\n3\n0 1\n2 3\n")
        self.assertEqual(to_pgm(np.ones((1, 2))), "P2\n2 1\n255\n0 0\n")

    def test_file_round_trip(self):
        image = np.random.default_rng(8).random((4, 6))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_pgm(image, Path(tmp) / "map.pgm")
            levels = read_pgm(path)
        self.assertEqual(levels.shape, (4, 6))
        self.assertEqual(levels.min(), 0)
        self.assertEqual(levels.max(), 255)

    def test_malformed(self):
        with self.assertRaises(InvalidInputError):
            read_pgm("P2\n2 2\n3\n0 1 2\n")
        with self.assertRaises(InvalidInputError):
            read_pgm("P2\n1 1\n3\n9\n")


if __name__ == "__main__":
    unittest.main()
