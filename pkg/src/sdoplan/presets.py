"""Named phantom presets sized for desk-scale runs.

``small`` finishes a full two-phase run in seconds and an unfiltered scan
in a couple of minutes; ``medium`` is big enough that the filter and
phase-focusing percentages resemble clinical-case behavior while one run
stays within minutes.  The ring tolerates slightly more than the
prescription, so conformity (spill of prescription-level dose into the
ring) is a real trade-off rather than a constant.
"""

from .phantom import PhantomSpec

PRESETS = ("small", "medium")


def preset_spec(name: str, seed: int = 0) -> PhantomSpec:
    if name == "small":
        return PhantomSpec(
            grid_shape=(15, 15, 15),
            voxel_size_mm=2.0,
            tumor_center_mm=(15.0, 15.0, 15.0),
            tumor_radius_mm=3.5,
            ring_thickness_mm=2.5,
            oar_specs=(((15.0, 15.0, 23.5), 2.5, 10.0),),
            prescribed_dose_Gy=12.5,
            tumor_max_dose_Gy=50.0,
            ring_max_dose_Gy=11.0,
            n_isocenters=3,
            seed=seed,
            name=f"small-{seed}")
    if name == "medium":
        # kernel width 0.6 smooths hot spots enough that the tumor-overdose
        # axis collapses in the payoff table across seeds, keeping the
        # Phase-I grid at 10^3 cells
        return PhantomSpec(
            grid_shape=(19, 19, 19),
            voxel_size_mm=1.5,
            tumor_center_mm=(14.25, 14.25, 14.25),
            tumor_radius_mm=4.25,
            ring_thickness_mm=2.5,
            oar_specs=(((14.25, 14.25, 22.0), 2.5, 10.0),
                       ((14.25, 21.5, 14.25), 2.0, 8.0)),
            prescribed_dose_Gy=12.5,
            tumor_max_dose_Gy=60.0,
            ring_max_dose_Gy=11.0,
            n_isocenters=5,
            kernel_width_factor=0.6,
            seed=seed,
            name=f"medium-{seed}")
    raise ValueError(f"unknown preset {name!r}; have {PRESETS}")
