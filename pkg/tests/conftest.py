import numpy as np
import pytest

from cplass.model import ChangepointVector, ScoreConfig, Trajectory


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_traj_n8():
    """Small 2-d trajectory with one genuine velocity change, used by the
    exhaustive sampler checks."""
    rng = np.random.default_rng(7)
    dt = 0.5
    t = dt * np.arange(1, 9)
    anchor_x = np.where(t <= 2.0, 0.1 * t, 0.2 + 0.5 * (t - 2.0))
    anchor_y = np.where(t <= 2.0, -0.2 * t, -0.4 + 0.3 * (t - 2.0))
    positions = np.column_stack([anchor_x, anchor_y]) + 0.05 * rng.standard_normal((8, 2))
    return Trajectory(dt=dt, positions=positions)


def random_instance(rng, n_max=20, d_max=3, k_max=3):
    """Random small trajectory + changepoint vector on exact binary values.

    Positions are multiples of 1/256 and dt a power of two so that float
    arithmetic in the exact-oracle comparison is lossless.
    """
    n = int(rng.integers(6, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    n_cp = int(rng.integers(0, min(k_max, n - 3) + 1))
    dt = float(2.0 ** rng.integers(-4, 2))
    indices = sorted(rng.choice(np.arange(1, n), size=n_cp, replace=False).tolist()) if n_cp else []
    positions = rng.integers(-2048, 2048, size=(n, d)).astype(float) / 256.0
    traj = Trajectory(dt=dt, positions=positions)
    r = ChangepointVector.from_indices(indices, n)
    return traj, r


@pytest.fixture
def default_cfg():
    return ScoreConfig()
