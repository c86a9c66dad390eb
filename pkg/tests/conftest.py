import numpy as np
import pytest

from orthoplane.schemas.camera import Intrinsics, StereoRig
from orthoplane.schemas.planes import PlaneBankParams
from orthoplane.services.plane_bank import build_bank

BASELINE = 0.54


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rig():
    return StereoRig(baseline=BASELINE)


@pytest.fixture
def kitti_intr():
    """640×192 camera with the principal point at the image centre"""
    return Intrinsics(fx=720.0, fy=720.0, cx=319.5, cy=95.5, width=640, height=192)


@pytest.fixture
def small_intr():
    return Intrinsics(fx=120.0, fy=120.0, cx=47.5, cy=31.5, width=96, height=64)


@pytest.fixture
def wide_intr():
    """1241×361 camera used by the resize-crop examples"""
    return Intrinsics(fx=720.0, fy=720.0, cx=620.0, cy=180.0, width=1241, height=361)


@pytest.fixture
def kitti_bank(kitti_intr, rig):
    return build_bank(PlaneBankParams(), rig, kitti_intr)


@pytest.fixture
def small_bank(small_intr, rig):
    params = PlaneBankParams(n_vertical=16, n_ground=4, d_min=1.0, d_max=40.0)
    return build_bank(params, rig, small_intr)


@pytest.fixture
def small_config_data():
    return {
        "fx": 120.0,
        "fy": 120.0,
        "cx": 47.5,
        "cy": 31.5,
        "width": 96,
        "height": 64,
        "baseline_m": BASELINE,
        "planes": {"n_vertical": 16, "n_ground": 4, "d_min": 1.0, "d_max": 40.0},
    }


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
