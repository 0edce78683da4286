import numpy as np
from django.test import SimpleTestCase

from sentiment.exceptions import ShapeError
from sentiment.tensor import (
    Rng, concat, elementwise, glorot_uniform, matmul, numeric_gradient, rand_uniform,
    relative_error, softmax,
)


class MatmulTests(SimpleTestCase):
    def test_identity(self):
        out = matmul(np.eye(2), np.array([[3.0, 4.0], [5.0, 6.0]]))
        np.testing.assert_array_equal(out, [[3, 4], [5, 6]])

    def test_row_by_column(self):
        self.assertEqual(matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))[0, 0], 11.0)

    def test_mismatch_names_both_shapes(self):
        with self.assertRaisesMessage(ShapeError, '(2, 3) by (4, 2)'):
            matmul(np.ones((2, 3)), np.ones((4, 2)))

    def test_associativity(self):
        rng = Rng(7)
        for _ in range(20):
            a, b, c = rng.random((3, 4)), rng.random((4, 5)), rng.random((5, 2))
            self.assertLess(relative_error(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-9)


class ElementwiseTests(SimpleTestCase):
    def test_activations_at_symmetry_points(self):
        self.assertEqual(elementwise('sigmoid', np.array(0.0)), 0.5)
        self.assertEqual(elementwise('tanh', np.array(0.0)), 0.0)
        np.testing.assert_array_equal(elementwise('relu', np.array([-1.0, 2.0])), [0.0, 2.0])

    def test_sigmoid_matches_logistic_form(self):
        x = np.linspace(-30, 30, 61)
        np.testing.assert_allclose(elementwise('sigmoid', x), 1.0 / (1.0 + np.exp(-x)), rtol=1e-9, atol=1e-15)

    def test_binary_and_scale(self):
        a, b = np.array([1.0, 2.0]), np.array([3.0, 5.0])
        np.testing.assert_array_equal(elementwise('add', a, b), [4, 7])
        np.testing.assert_array_equal(elementwise('sub', a, b), [-2, -3])
        np.testing.assert_array_equal(elementwise('hadamard', a, b), [3, 10])
        np.testing.assert_array_equal(elementwise('scale', a, factor=0.5), [0.5, 1.0])

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            elementwise('add', np.ones(2), np.ones(3))


class SoftmaxTests(SimpleTestCase):
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_large_logits_do_not_overflow(self):
        out = softmax(np.array([1000.0, 0.0]))
        self.assertTrue(np.all(np.isfinite(out)))
        self.assertAlmostEqual(out[0], 1.0)

    def test_exp_ratio(self):
        np.testing.assert_allclose(softmax(np.log(np.array([1.0, 3.0]))), [0.25, 0.75], rtol=1e-12)

    def test_rows_sum_to_one(self):
        logits = Rng(3).uniform((50, 2), -1000, 1000)
        np.testing.assert_allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-9)


class ConcatTests(SimpleTestCase):
    def test_pooled_branches(self):
        self.assertEqual(concat([np.ones(100)] * 3).shape, (300,))

    def test_single_input_is_an_equal_copy(self):
        x = np.arange(4.0)
        out = concat([x])
        np.testing.assert_array_equal(out, x)
        self.assertIsNot(out, x)

    def test_rows(self):
        self.assertEqual(concat([np.ones((2, 3)), np.zeros((4, 3))], axis=0).shape, (6, 3))

    def test_incompatible(self):
        with self.assertRaises(ShapeError):
            concat([np.ones((2, 3)), np.ones((2, 4))], axis=0)


class RandomTests(SimpleTestCase):
    def test_same_seed_same_draws(self):
        a = rand_uniform(Rng(42), (4,), -0.25, 0.25)
        b = rand_uniform(Rng(42), (4,), -0.25, 0.25)
        np.testing.assert_array_equal(a, b)
        self.assertTrue(np.all((a >= -0.25) & (a < 0.25)))

    def test_empty_range(self):
        with self.assertRaises(ValueError):
            rand_uniform(Rng(0), (2,), 1.0, 1.0)

    def test_sample_mean(self):
        self.assertAlmostEqual(float(rand_uniform(Rng(1), (100000,), 0.0, 1.0).mean()), 0.5, delta=0.01)

    def test_child_streams_are_independent_and_reproducible(self):
        parent = Rng(5)
        np.testing.assert_array_equal(parent.child(1).random(3), Rng(5).child(1).random(3))
        self.assertFalse(np.array_equal(parent.child(1).random(3), parent.child(2).random(3)))

    def test_glorot_limit(self):
        w = glorot_uniform(Rng(0), (10, 20))
        self.assertLessEqual(np.abs(w).max(), np.sqrt(6.0 / 30))


class NumericGradientTests(SimpleTestCase):
    def test_square(self):
        grad = numeric_gradient(lambda x: float(np.sum(x * x)), np.array([1.0, 2.0]))
        np.testing.assert_allclose(grad, [2.0, 4.0], rtol=1e-7)

    def test_constant(self):
        np.testing.assert_array_equal(numeric_gradient(lambda x: 3.0, np.array([1.0, 2.0])), [0.0, 0.0])

    def test_product(self):
        grad = numeric_gradient(lambda x: float(x[0] * x[1]), np.array([3.0, 5.0]))
        np.testing.assert_allclose(grad, [5.0, 3.0], rtol=1e-7)

    def test_input_restored(self):
        x = np.array([1.5, -2.0])
        numeric_gradient(lambda v: float(np.sum(v ** 3)), x)
        np.testing.assert_array_equal(x, [1.5, -2.0])
