import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from slapx import dac, rlrs  # noqa: E402
from slapx.protocol import Deployment, DeviceProfile  # noqa: E402
from slapx.rng import SeededRng  # noqa: E402


@pytest.fixture(scope="session")
def deployment():
    # small puzzle modulus keeps module tests quick; acceptance uses full size
    return Deployment.create(seed=3, psd_modulus_bits=512)


@pytest.fixture(scope="session")
def client(deployment):
    return deployment.new_client(DeviceProfile(b"DEV-0001", 30.0, 0), seed=1001)


@pytest.fixture(scope="session")
def dac_env():
    rng = SeededRng(11)
    params, root = dac.dac_setup(128, t=8, eta=2, rng=rng)
    return params, root, rng


@pytest.fixture(scope="session")
def rlrs_env():
    rng = SeededRng(12)
    msk, params = rlrs.rlrs_setup(128, 16, rng)
    ring = [f"AP-{i}" for i in range(5)]
    keys = {i: rlrs.rlrs_extract(msk, i, params) for i in ring}
    return msk, params, ring, keys, rng
