import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def small_world():
    from rangeloc.geometry import synthesize_world

    return synthesize_world(seed=11, extent=60, n_primitives=20, n_poses=80)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
    np.random.seed(0)
