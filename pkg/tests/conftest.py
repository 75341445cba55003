import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `oracles`

from sdoplan.phantom import SdoInstance, Structure, generate_phantom
from sdoplan.presets import preset_spec


@pytest.fixture(scope="session")
def small_instance():
    return generate_phantom(preset_spec("small", seed=1))


@pytest.fixture(scope="session")
def micro_instance():
    """Handmade 3-voxel instance: one voxel per structure, one isocenter."""
    return make_instance(tumor_vox=[[0, 0, 0]], ring_vox=[[1, 0, 0]],
                         oar_vox=[[2, 0, 0]])


def make_instance(tumor_vox, ring_vox, oar_vox=None, n_isocenters=1,
                  dose_rate=None, prescription=12.5, tumor_max=25.0,
                  ring_max=12.0, oar_max=10.0, voxel_size=1.0):
    """Small hand-specified instances for exact-arithmetic tests."""
    structures = [
        Structure("tumor", "tumor", np.asarray(tumor_vox, dtype=int),
                  tumor_max, voxel_size),
        Structure("ring", "ring", np.asarray(ring_vox, dtype=int),
                  ring_max, voxel_size),
    ]
    if oar_vox is not None:
        structures.append(Structure("oar1", "oar",
                                    np.asarray(oar_vox, dtype=int),
                                    oar_max, voxel_size))
    total = sum(s.n_voxels for s in structures)
    if dose_rate is None:
        rng = np.random.default_rng(12345)
        dose_rate = rng.uniform(0.01, 0.5, size=(total, n_isocenters, 8, 3))
    return SdoInstance(
        name="handmade", voxel_size_mm=voxel_size, grid_shape=(64, 64, 64),
        structures=tuple(structures),
        isocenters_mm=np.zeros((n_isocenters, 3)),
        dose_rate=np.asarray(dose_rate, dtype=float),
        prescriptions={"tumor": prescription}).validate()
