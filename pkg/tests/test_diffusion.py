import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sinoforge.diffusion import (BlurDenoiser, CountingDenoiser, OracleDenoiser, ScheduleError, condition_on_known,
                                 ddim_infer, ddim_step, make_schedule, trajectory)


@pytest.fixture(scope="module")
def sched():
    return make_schedule()


def test_schedule_shape(sched):
    assert sched.N == 50
    assert sched.ddim_steps[0] == 980 and sched.ddim_steps[-1] == 0
    assert all(a > b for a, b in zip(sched.ddim_steps, sched.ddim_steps[1:]))


def test_schedule_alpha_bar(sched):
    ab = sched.alpha_bar
    assert ab[0] == 1.0 and ab[-1] > 0
    assert np.all(np.diff(ab) < 0)
    # direct product of the linear betas
    betas = [1e-4 + (0.02 - 1e-4) * i / 999 for i in range(1000)]
    assert ab[1000] == pytest.approx(math.prod(1 - b for b in betas), rel=1e-9)


def test_schedule_full_length():
    s = make_schedule(20, 20)
    assert s.ddim_steps == tuple(range(19, -1, -1))


@given(st.integers(1, 200), st.data())
def test_schedule_invariants(T, data):
    N = data.draw(st.integers(1, T))
    s = make_schedule(T, N)
    assert s.N == N and s.ddim_steps[-1] == 0
    assert all(0 <= t <= T for t in s.ddim_steps)
    assert len(set(s.ddim_steps)) == N


def test_schedule_errors():
    with pytest.raises(ScheduleError):
        make_schedule(10, 11)
    with pytest.raises(ScheduleError):
        make_schedule(10, 5, beta_min=0.1, beta_max=0.01)


def test_ddim_step_fixed_point_and_algebra():
    rng = np.random.default_rng(0)
    x, eps = rng.random((4, 4)), rng.random((4, 4))
    assert np.array_equal(ddim_step(x, eps, 0.5, 0.5), x)
    assert np.allclose(ddim_step(x, np.zeros_like(x), 0.25, 1.0), x / 0.5)


def test_oracle_recovers_x0_each_step():
    rng = np.random.default_rng(1)
    target = rng.random((8, 8))
    den = OracleDenoiser(target)
    for a in (0.01, 0.3, 0.9):
        x_t = math.sqrt(a) * target + math.sqrt(1 - a) * rng.standard_normal((8, 8)) + 0.1
        eps = den.predict_noise(x_t, a)
        x0 = (x_t - math.sqrt(1 - a) * eps) / math.sqrt(a)
        assert np.abs(x0 - target).max() <= 1e-6


def test_condition_examples():
    rng = np.random.default_rng(2)
    x, known, noise = rng.random((6, 6)), rng.random((6, 6)), rng.standard_normal((6, 6))
    assert np.array_equal(condition_on_known(x, known, np.ones((6, 6), np.uint8), 1.0, noise), known)
    assert np.array_equal(condition_on_known(x, known, np.zeros((6, 6), np.uint8), 0.3, noise), x)


def test_condition_half_mask_per_pixel():
    rng = np.random.default_rng(3)
    x, known, noise = rng.random((6, 6)), rng.random((6, 6)), rng.standard_normal((6, 6))
    mask = np.zeros((6, 6), np.uint8)
    mask[:, :3] = 1
    a = 0.37
    out = condition_on_known(x, known, mask, a, noise)
    for r in range(6):
        for c in range(6):
            want = math.sqrt(a) * known[r, c] + math.sqrt(1 - a) * noise[r, c] if mask[r, c] else x[r, c]
            assert out[r, c] == pytest.approx(want, abs=1e-15)


def test_trajectory_modes(sched):
    assert trajectory(sched, 10) == list(sched.ddim_steps[40:])
    thin = trajectory(sched, 10, "thinned")
    assert len(thin) == 10 and thin[0] == sched.ddim_steps[0] and thin[-1] == 0
    with pytest.raises(ScheduleError):
        trajectory(sched, 0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(10, 50), st.sampled_from(["late_entry", "thinned"]))
def test_oracle_convergence(seed, steps, mode):
    sched = make_schedule()
    rng = np.random.default_rng(seed)
    target = rng.random((16, 16))
    mask = (rng.random((16, 16)) < 0.3).astype(np.uint8)
    out = ddim_infer(target * mask, mask, OracleDenoiser(target), sched, steps, seed, step_mode=mode)
    assert np.abs(out - target).max() <= 1e-4
    assert np.array_equal(out[mask == 1], target[mask == 1])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 50))
def test_call_count_and_fidelity(seed, steps):
    sched = make_schedule()
    rng = np.random.default_rng(seed)
    known = rng.random((8, 8))
    mask = (rng.random((8, 8)) < 0.5).astype(np.uint8)
    den = CountingDenoiser(BlurDenoiser())
    out = ddim_infer(known, mask, den, sched, steps, seed)
    assert den.calls == steps
    assert np.array_equal(out[mask == 1], known[mask == 1])


def test_all_known_returns_known(sched):
    known = np.random.default_rng(4).random((8, 8))
    out = ddim_infer(known, np.ones((8, 8), np.uint8), BlurDenoiser(), sched)
    assert np.array_equal(out, known)


def test_determinism(sched):
    rng = np.random.default_rng(5)
    known = rng.random((12, 12))
    mask = (rng.random((12, 12)) < 0.4).astype(np.uint8)
    a = ddim_infer(known, mask, BlurDenoiser(), sched, 20, seed=11)
    b = ddim_infer(known, mask, BlurDenoiser(), sched, 20, seed=11)
    c = ddim_infer(known, mask, BlurDenoiser(), sched, 20, seed=12)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_counting_shares_counter_across_views():
    den = CountingDenoiser(OracleDenoiser(np.zeros((8, 8))))
    den.localize(0.5).predict_noise(np.zeros((4, 4)), 0.5)
    den.localize(1.0, (0, 4, 0, 4)).predict_noise(np.zeros((4, 4)), 0.5)
    den.background().predict_noise(np.zeros((3, 3)), 0.5)
    assert den.calls == 3
    den.reset()
    assert den.calls == 0


def test_oracle_localize_and_pad():
    target = np.arange(16.0).reshape(4, 4) / 16
    den = OracleDenoiser(target)
    assert np.array_equal(den.localize(0.5).target, [[2.5 / 16, 4.5 / 16], [10.5 / 16, 12.5 / 16]])
    assert np.array_equal(den.localize(1.0, (1, 3, 2, 4)).target, target[1:3, 2:4])
    assert den.padded((1, 2)).target.shape == (5, 6)
