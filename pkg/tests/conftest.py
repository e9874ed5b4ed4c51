import numpy as np
import pytest

from cfstab import data, nn


@pytest.fixture(scope="session")
def blobs():
    return data.synth_2d("blobs", 300, 0.3, seed=5)


@pytest.fixture(scope="session")
def blobs_split(blobs):
    return data.split(blobs, 0.7, seed=3)


@pytest.fixture(scope="session")
def trained_net(blobs_split):
    train_ds, _ = blobs_split
    spec = nn.NetworkSpec((2, 16, 1))
    cfg = nn.TrainConfig(seed=11, epochs=60, batch_size=32)
    return nn.train(nn.init_network(spec, 11), train_ds, cfg)


def linear_net(w, b=0.0):
    """Single affine layer f(x) = w.x + b (no hidden units)."""
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    from cfstab import kernels
    spec = nn.NetworkSpec((w.shape[1], w.shape[0]))
    return nn.Network(spec, kernels.pack_params([(w, b)]))
