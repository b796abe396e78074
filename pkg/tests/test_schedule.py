import numpy as np
import pytest

from latentqc.rng import standard_normal
from latentqc.schedule import build_schedule, default_schedule, diffuse

from oracles import sequential_alpha_bars


def test_single_step():
    s = build_schedule(1, 0.5, 0.5)
    assert s.alpha_bars[0] == 0.5


def test_first_step_of_standard_schedule():
    s = build_schedule(1000, 1e-4, 2e-2)
    assert s.alpha_bar(1) == pytest.approx(0.9999, rel=1e-15)


def test_terminal_value_against_extended_precision():
    s = build_schedule(1000, 1e-4, 2e-2)
    ref = sequential_alpha_bars(s.betas)[-1]
    assert abs(s.alpha_bars[-1] - float(ref)) / float(ref) < 1e-6
    assert s.alpha_bars[-1] == pytest.approx(4.04e-5, rel=2e-3)


@pytest.mark.parametrize("T,b0,b1", [(1000, 1e-4, 2e-2), (100, 1e-3, 0.2), (7, 0.01, 0.5)])
def test_invariants(T, b0, b1):
    s = build_schedule(T, b0, b1)
    assert np.all((s.betas > 0) & (s.betas < 1))
    assert np.all(np.diff(s.alpha_bars) < 0)
    ref = np.array([float(v) for v in sequential_alpha_bars(s.betas)])
    assert np.max(np.abs(s.alpha_bars - ref) / ref) < 1e-12
    assert s.betas[0] == b0 and s.betas[-1] == pytest.approx(b1, rel=1e-15)


def test_default_schedule_terminal_noise():
    s = default_schedule()
    assert s.T == 100
    assert s.alpha_bars[-1] < 1e-4
    assert s.default_t_star() == 80


@pytest.mark.parametrize("args", [(0, 1e-4, 2e-2), (10, 0.0, 0.1), (10, 0.1, 1.0),
                                  (10, 0.2, 0.1), (2.5, 0.1, 0.2)])
def test_build_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        build_schedule(*args)


def test_diffuse_noise_free_and_signal_free(rng):
    s = build_schedule(10, 0.01, 0.2)
    z0 = rng.standard_normal((4, 4, 3))
    eps = rng.standard_normal((4, 4, 3))
    ab = s.alpha_bar(6)
    np.testing.assert_array_equal(diffuse(z0, 6, np.zeros_like(z0), s), np.sqrt(ab) * z0)
    np.testing.assert_array_equal(diffuse(np.zeros_like(eps), 6, eps, s), np.sqrt(1 - ab) * eps)


def test_diffuse_scalar_case():
    # abar = 0.64 exactly for a single step with beta = 0.36
    s = build_schedule(1, 0.36, 0.36)
    out = diffuse(np.array([1.0]), 1, np.array([0.5]), s)
    assert out[0] == pytest.approx(1.1, abs=1e-15)


def test_diffuse_batched_timesteps(rng):
    s = default_schedule()
    z0 = rng.standard_normal((3, 2, 2, 4))
    eps = rng.standard_normal(z0.shape)
    t = np.array([1, 50, 100])
    out = diffuse(z0, t, eps, s)
    for i in range(3):
        np.testing.assert_array_equal(out[i], diffuse(z0[i], t[i], eps[i], s))


def test_diffuse_errors():
    s = default_schedule()
    with pytest.raises(ValueError):
        diffuse(np.zeros((2, 2)), 1, np.zeros((2, 3)), s)
    for t in (0, 101):
        with pytest.raises(ValueError):
            diffuse(np.zeros(3), t, np.zeros(3), s)


def test_diffuse_deterministic_given_seed():
    s = default_schedule()
    z0 = np.linspace(-1, 1, 32).reshape(2, 4, 4)
    a = diffuse(z0, 40, standard_normal(99, z0.shape), s)
    b = diffuse(z0, 40, standard_normal(99, z0.shape), s)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("T", [1, 5, 10, 50, 100, 1000, 4000])
def test_scaled_default_valid_for_any_length(T):
    s = default_schedule(T)
    assert np.all((s.betas > 0) & (s.betas < 1))
    assert np.all(np.diff(s.alpha_bars) < 0)
