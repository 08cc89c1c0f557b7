import numpy as np
import pytest

from redlab.dataio import mini_digits, split
from redlab.nn import Activation, Dataset, LayerSpec, MlpModel, TrainConfig, mlp_arch, mlp_init, train
from redlab.utils import set_log_level

set_log_level('WARNING')


@pytest.fixture(scope='session')
def mini_split():
    """Small train/test split of the synthetic digits."""
    return split(mini_digits(300, seed=0), 200, 100, seed=0)


@pytest.fixture(scope='session')
def trained_model(mini_split):
    train_set, test_set = mini_split
    model = mlp_init(mlp_arch(train_set.dim, 32, train_set.num_classes), seed=0)
    model, _ = train(model, train_set, TrainConfig(learning_rate=0.1, batch_size=16, max_epochs=40, seed=0))
    return model


@pytest.fixture
def linear_model():
    """Two-class softmax on two inputs with logits (x1 - x2, x2 - x1)."""
    layer = LayerSpec(2, 2, Activation.SOFTMAX)
    # W is (input_dim, output_dim) row major, then bias
    params = np.array([1.0, -1.0, -1.0, 1.0, 0.0, 0.0])
    return MlpModel(layers=(layer,), params=params, seed=0)


@pytest.fixture
def two_points():
    """(1, 0) is class 0 and (0, 1) is class 1."""
    return Dataset(inputs=[[1.0, 0.0], [0.0, 1.0]], labels=[0, 1], num_classes=2, name='two-points')


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / 'out'
    path.mkdir()
    return path
