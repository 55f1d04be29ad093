import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clicknav.odom import OdomNoise, OdomPose, add_noise, integrate, integrate_delta, wrap_angle


def euler_oracle(pose, v, w, dt, steps):
    """Fine-step forward Euler; independent route to the same arc."""
    x, y, th = pose.x, pose.y, pose.theta
    h = dt / steps
    for _ in range(steps):
        x += v * np.cos(th) * h
        y += v * np.sin(th) * h
        th += w * h
    return x, y, th


class TestIntegrate:
    def test_straight_line(self):
        p = integrate(OdomPose(), v=1.0, w=0.0, dt=1.0)
        assert (p.x, p.y, p.theta) == pytest.approx((1.0, 0.0, 0.0))

    def test_pure_rotation(self):
        p = integrate(OdomPose(), v=0.0, w=np.pi, dt=1.0)
        assert (p.x, p.y) == pytest.approx((0.0, 0.0))
        assert p.theta == pytest.approx(np.pi)

    def test_quarter_circle(self):
        # v = w = 1 for pi/2 seconds traces a quarter of the unit circle
        p = integrate(OdomPose(), v=1.0, w=1.0, dt=np.pi / 2)
        assert (p.x, p.y, p.theta) == pytest.approx((1.0, 1.0, np.pi / 2))

    def test_matches_fine_euler_over_two_meter_arc(self):
        # forward Euler converges at O(h); at h = 1e-5 its own error for this
        # curvature is ~3e-6, which bounds how close the comparison can be
        v, w = 0.5, 0.3
        dt = 4.0  # 2 m of travel
        exact = integrate(OdomPose(0.2, -0.1, 0.4), v, w, dt)
        ex, ey, eth = euler_oracle(OdomPose(0.2, -0.1, 0.4), v, w, dt, steps=400_000)
        assert (exact.x, exact.y) == pytest.approx((ex, ey), abs=5e-6)
        assert exact.theta == pytest.approx(wrap_angle(eth), abs=1e-6)

    def test_euler_error_shrinks_with_step(self):
        # convergence toward the exact arc confirms the closed form is the limit
        v, w, dt = 0.5, 0.3, 4.0
        start = OdomPose(0.2, -0.1, 0.4)
        exact = integrate(start, v, w, dt)
        errs = []
        for steps in (2_000, 20_000, 200_000):
            ex, ey, _ = euler_oracle(start, v, w, dt, steps)
            errs.append(np.hypot(exact.x - ex, exact.y - ey))
        assert errs[0] > 5 * errs[1] > 25 * errs[2]

    def test_rejects_non_positive_dt(self):
        with pytest.raises(ValueError):
            integrate(OdomPose(), 1.0, 0.0, 0.0)

    @given(v=st.floats(-1, 1), w=st.floats(-2, 2), dt=st.floats(0.01, 2.0),
           x=st.floats(-5, 5), y=st.floats(-5, 5), th=st.floats(-np.pi, np.pi))
    @settings(max_examples=300, deadline=None)
    def test_step_size_invariance(self, v, w, dt, x, y, th):
        start = OdomPose(x, y, th)
        whole = integrate(start, v, w, dt)
        halves = integrate(integrate(start, v, w, dt / 2), v, w, dt / 2)
        assert (whole.x, whole.y) == pytest.approx((halves.x, halves.y), abs=1e-12)
        assert whole.theta == pytest.approx(halves.theta, abs=1e-12)

    @given(th=st.floats(-50, 50), w=st.floats(-10, 10), dt=st.floats(0.01, 5.0))
    @settings(max_examples=300, deadline=None)
    def test_theta_always_wrapped(self, th, w, dt):
        p = integrate(OdomPose(0, 0, th), 0.3, w, dt)
        assert -np.pi < p.theta <= np.pi


class TestAddNoise:
    def test_zero_model_is_identity(self):
        rng = np.random.default_rng(0)
        assert add_noise(2.0, 0.5, OdomNoise(), rng) == (2.0, 0.5)

    def test_reproducible_under_fixed_seed(self):
        noise = OdomNoise(trans_std_per_m=0.01, rot_std_per_rad=0.02)
        a = add_noise(2.0, 0.3, noise, np.random.default_rng(99))
        b = add_noise(2.0, 0.3, noise, np.random.default_rng(99))
        assert a == b

    def test_sample_std_matches_model(self):
        noise = OdomNoise(trans_std_per_m=0.01)
        rng = np.random.default_rng(1234)
        samples = np.array([add_noise(1.0, 0.0, noise, rng)[0] for _ in range(10_000)])
        assert np.std(samples - 1.0) == pytest.approx(0.01, rel=0.05)

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError):
            OdomNoise(trans_std_per_m=-0.1)


def test_delta_form_equals_velocity_form():
    p1 = integrate(OdomPose(), v=0.4, w=0.2, dt=2.5)
    p2 = integrate_delta(OdomPose(), dist=1.0, turn=0.5)
    assert (p1.x, p1.y, p1.theta) == pytest.approx((p2.x, p2.y, p2.theta))
