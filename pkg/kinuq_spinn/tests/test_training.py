"""Optimizer arithmetic, window slicing of data, determinism of the
training loop, and the divergence guard."""

import numpy as np
import pytest
import torch

from kinuq_spinn import Lion, SpinnModel, TrainWindow, train_windowed
from kinuq_spinn.nets import DTYPE
from kinuq_spinn.train import _window_data

XB = (0.0, 4.0 * np.pi)


def tiny_hom(seed=0):
    return SpinnModel(dx_dims=0, rank=3, z_dims=0, t_bound=1.0,
                      v_bound=6.0, n_quad=32, width=8, seed=seed)


class TestLion:
    def test_two_steps_match_hand_arithmetic(self):
        p = torch.tensor([1.0, -2.0], dtype=DTYPE, requires_grad=True)
        opt = Lion([p], lr=0.1, betas=(0.9, 0.99))
        g1 = torch.tensor([0.5, -3.0], dtype=DTYPE)
        p.grad = g1.clone()
        opt.step()
        # first step: momentum starts at zero, update = sign(0.1 g1)
        want = np.array([1.0, -2.0]) - 0.1 * np.sign([0.5, -3.0])
        np.testing.assert_allclose(p.detach().numpy(), want, rtol=1e-15)
        m = 0.01 * g1.numpy()
        g2 = torch.tensor([-0.2, 0.1], dtype=DTYPE)
        p.grad = g2.clone()
        opt.step()
        want -= 0.1 * np.sign(0.9 * m + 0.1 * g2.numpy())
        np.testing.assert_allclose(p.detach().numpy(), want, rtol=1e-15)

    def test_weight_decay_shrinks_parameters(self):
        p = torch.tensor([10.0], dtype=DTYPE, requires_grad=True)
        opt = Lion([p], lr=0.01, weight_decay=0.5)
        p.grad = torch.tensor([0.0], dtype=DTYPE)
        opt.step()
        # zero gradient: only the decay acts (sign(0) = 0)
        np.testing.assert_allclose(p.detach().numpy(), [10.0 * 0.995],
                                   rtol=1e-15)


class TestWindowData:
    def base_data(self):
        return {
            "z": np.array([0.2, 0.8]),
            "t": np.array([0.0, 1.0, 2.0, 3.0]),
            "x": np.linspace(0.0, 1.0, 5),
            "U": np.arange(4 * 2 * 4 * 5, dtype=float).reshape(4, 2, 4, 5),
            "f": np.arange(2 * 4 * 5 * 3 * 3, dtype=float).reshape(
                2, 4, 5, 3, 3),
            "v": np.linspace(-1, 1, 3),
        }

    def test_slices_the_time_axis_everywhere(self):
        data = self.base_data()
        out = _window_data(data, 0.5, 2.5)
        np.testing.assert_array_equal(out["t"], [1.0, 2.0])
        np.testing.assert_array_equal(out["U"], data["U"][:, :, 1:3])
        np.testing.assert_array_equal(out["f"], data["f"][:, 1:3])
        np.testing.assert_array_equal(out["z"], data["z"])

    def test_boundary_times_are_kept(self):
        out = _window_data(self.base_data(), 1.0, 2.0)
        np.testing.assert_array_equal(out["t"], [1.0, 2.0])

    def test_empty_window_returns_none(self):
        assert _window_data(self.base_data(), 5.0, 6.0) is None

    def test_full_window_passes_through(self):
        data = self.base_data()
        assert _window_data(data, -1.0, 10.0) is data

    def test_no_z_axis(self):
        data = {"t": np.array([0.0, 1.0]),
                "U": np.arange(8, dtype=float).reshape(4, 2)}
        out = _window_data(data, 0.5, 1.5)
        np.testing.assert_array_equal(out["U"], data["U"][:, 1:])


class TestTrainWindowed:
    def test_history_shape_and_finiteness(self):
        model = tiny_hom(seed=1)
        windows = [TrainWindow(0.0, 0.5, epochs=4, n_col=4, lr=1e-4, seed=2),
                   TrainWindow(0.5, 1.0, epochs=3, n_col=4, lr=1e-4, seed=2)]
        history = train_windowed(model, windows, epsilon=1.0)
        assert [len(h) for h in history] == [4, 3]
        for records in history:
            for rec in records:
                assert set(rec) == {"kinetic", "moment", "total"}
                assert np.isfinite(rec["total"])

    def test_reruns_are_bit_identical(self):
        results = []
        for _ in range(2):
            model = tiny_hom(seed=4)
            windows = [TrainWindow(0.0, 1.0, epochs=5, n_col=4,
                                   lr=1e-4, seed=9)]
            history = train_windowed(model, windows, epsilon=0.5)
            state = torch.cat([p.detach().reshape(-1)
                               for p in model.parameters()])
            results.append((state.numpy().copy(), history[0][-1]["total"]))
        np.testing.assert_array_equal(results[0][0], results[1][0])
        assert results[0][1] == results[1][1]

    def test_divergence_aborts_with_the_window_id(self):
        model = tiny_hom(seed=6)
        with torch.no_grad():
            model.wnet.head[0, 0] = float("nan")
        windows = [TrainWindow(0.0, 1.0, epochs=2, n_col=4, lr=1e-4, seed=1)]
        with pytest.raises(RuntimeError, match="window 0"):
            train_windowed(model, windows, epsilon=1.0)

    def test_data_inside_the_window_is_used(self):
        model = tiny_hom(seed=8)
        v = np.linspace(-4.0, 4.0, 5)
        data = {"t": np.array([0.0]), "v": v,
                "f": np.ones((1, 5, 5)) * 0.01}
        windows = [TrainWindow(0.0, 1.0, epochs=2, n_col=4, lr=1e-4, seed=3)]
        history = train_windowed(model, windows, epsilon=1.0, data=data)
        assert "data" in history[0][0]
        # a window past the data's time carries no data term
        windows = [TrainWindow(0.5, 1.0, epochs=2, n_col=4, lr=1e-4, seed=3)]
        history = train_windowed(tiny_hom(seed=8), windows, epsilon=1.0,
                                 data=data)
        assert "data" not in history[0][0]

    def test_short_run_reduces_the_objective(self):
        model = tiny_hom(seed=10)
        windows = [TrainWindow(0.0, 1.0, epochs=60, n_col=8,
                               lr=3e-4, seed=5)]
        history = train_windowed(model, windows, epsilon=1.0)
        first = np.mean([r["total"] for r in history[0][:5]])
        last = np.mean([r["total"] for r in history[0][-5:]])
        assert last < first
