"""Synthetic voxel phantoms: deterministic instance generation and file IO.

A phantom is a cubic voxel grid holding one spherical tumor, a shell of
healthy tissue around it (the ring), and optional organs-at-risk.  Dose
rates follow isotropic Gaussian kernels, one per (isocenter, sector,
collimator): the kernel width scales with the collimator diameter and each
sector's kernel center is nudged one voxel along a fixed direction so the
eight sectors stay distinguishable.  Everything is a pure function of the
spec, including the random isocenter placement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyStructure, FormatError, SpecOverlap, UnknownStructure

FORMAT_TAG = "sdo-instance/1"
N_SECTORS = 8
COLLIMATORS_MM = (4.0, 8.0, 16.0)

# fixed unit directions for the per-sector kernel offsets (cube corners)
SECTOR_DIRECTIONS = np.array(
    [[sx, sy, sz] for sx in (1.0, -1.0) for sy in (1.0, -1.0)
     for sz in (1.0, -1.0)]) / np.sqrt(3.0)

KERNEL_WIDTH_FACTOR = 0.5   # sigma = factor * collimator diameter
CALIBRATION_BOT_MIN = 30.0  # uniform plan of this total BOT hits prescription


@dataclass(frozen=True)
class PhantomSpec:
    grid_shape: tuple[int, int, int]
    voxel_size_mm: float
    tumor_center_mm: tuple[float, float, float]
    tumor_radius_mm: float
    ring_thickness_mm: float
    oar_specs: tuple = ()   # ((center_mm, radius_mm, max_dose_Gy), ...)
    prescribed_dose_Gy: float = 12.5
    tumor_max_dose_Gy: float = 25.0
    ring_max_dose_Gy: float = 12.0
    n_isocenters: int = 3
    seed: int = 0
    name: str = "phantom"
    kernel_width_factor: float = KERNEL_WIDTH_FACTOR
    calibration_bot_min: float = CALIBRATION_BOT_MIN

    def validate(self):
        if any(g <= 0 for g in self.grid_shape) or len(self.grid_shape) != 3:
            raise ValueError("grid_shape must be three positive integers")
        for label, value in (("voxel_size_mm", self.voxel_size_mm),
                             ("tumor_radius_mm", self.tumor_radius_mm),
                             ("ring_thickness_mm", self.ring_thickness_mm),
                             ("prescribed_dose_Gy", self.prescribed_dose_Gy),
                             ("ring_max_dose_Gy", self.ring_max_dose_Gy)):
            if value <= 0:
                raise ValueError(f"{label} must be positive")
        if self.tumor_max_dose_Gy < self.prescribed_dose_Gy:
            raise ValueError("tumor_max_dose_Gy below prescribed dose")
        if self.n_isocenters < 1:
            raise ValueError("n_isocenters must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.kernel_width_factor <= 0:
            raise ValueError("kernel_width_factor must be positive")
        if self.calibration_bot_min <= 0:
            raise ValueError("calibration_bot_min must be positive")


@dataclass(frozen=True)
class Structure:
    name: str
    kind: str                      # "tumor" | "ring" | "oar"
    voxels: np.ndarray             # (n, 3) grid indices
    max_dose_Gy: float
    voxel_size_mm: float

    @property
    def n_voxels(self):
        return self.voxels.shape[0]

    @property
    def volume_cm3(self):
        return self.n_voxels * self.voxel_size_mm ** 3 / 1000.0

    def centers_mm(self):
        return (self.voxels + 0.5) * self.voxel_size_mm


@dataclass(frozen=True)
class SdoInstance:
    """One sector-duration optimization problem datum.

    ``dose_rate`` has shape (total voxels, isocenters, sectors, collimators)
    in Gy/min; voxels are ordered by structure, in ``structures`` order.
    """

    name: str
    voxel_size_mm: float
    grid_shape: tuple[int, int, int]
    structures: tuple[Structure, ...]
    isocenters_mm: np.ndarray      # (I, 3)
    dose_rate: np.ndarray          # (V, I, S, K)
    prescriptions: dict            # tumor name -> D_t
    collimators_mm: tuple = COLLIMATORS_MM
    meta: dict = field(default_factory=dict)

    # --- bookkeeping ---------------------------------------------------

    @property
    def n_isocenters(self):
        return self.isocenters_mm.shape[0]

    @property
    def n_sectors(self):
        return self.dose_rate.shape[2]

    @property
    def n_collimators(self):
        return self.dose_rate.shape[3]

    @property
    def total_voxels(self):
        return self.dose_rate.shape[0]

    def slice_of(self, name):
        start = 0
        for s in self.structures:
            if s.name == name:
                return slice(start, start + s.n_voxels)
            start += s.n_voxels
        raise UnknownStructure(name)

    def structure(self, name):
        for s in self.structures:
            if s.name == name:
                return s
        raise UnknownStructure(name)

    def by_kind(self, kind):
        return [s for s in self.structures if s.kind == kind]

    @property
    def tumors(self):
        return self.by_kind("tumor")

    @property
    def rings(self):
        return self.by_kind("ring")

    @property
    def oars(self):
        return self.by_kind("oar")

    def durations_shape(self):
        return (self.n_isocenters, self.n_sectors, self.n_collimators)

    def max_dose_rate(self):
        return float(self.dose_rate.max())

    # --- invariants ------------------------------------------------------

    def validate(self):
        if self.n_sectors != N_SECTORS:
            raise FormatError(f"sectors: expected {N_SECTORS}, "
                              f"got {self.n_sectors}")
        if self.n_collimators != len(self.collimators_mm) or \
                self.n_collimators != 3:
            raise FormatError("collimators_mm: expected 3 diameters")
        if not np.all(np.isfinite(self.dose_rate)):
            raise FormatError("dose_rate: non-finite entry")
        if np.any(self.dose_rate < 0):
            raise FormatError("dose_rate: negative entry")
        counted = sum(s.n_voxels for s in self.structures)
        if counted != self.total_voxels:
            raise FormatError(
                f"dose_rate: {self.total_voxels} voxel rows for "
                f"{counted} structure voxels")
        seen = set()
        for s in self.structures:
            if s.n_voxels == 0:
                raise FormatError(f"structures.{s.name}: empty voxel set")
            keys = {tuple(v) for v in s.voxels.tolist()}
            if keys & seen:
                raise FormatError(f"structures.{s.name}: overlaps an "
                                  "earlier structure")
            seen |= keys
        for t in self.tumors:
            if t.name not in self.prescriptions:
                raise FormatError(f"prescriptions.{t.name}: missing")
        return self


# --- generation ----------------------------------------------------------


def _sphere_voxels(grid_shape, voxel_size, center, r_lo, r_hi):
    """Grid indices whose voxel centers have r_lo < distance <= r_hi."""
    nx, ny, nz = grid_shape
    idx = np.stack(np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                               indexing="ij"), axis=-1).reshape(-1, 3)
    pos = (idx + 0.5) * voxel_size
    d = np.linalg.norm(pos - np.asarray(center), axis=1)
    return idx[(d > r_lo) & (d <= r_hi)]


def generate_phantom(spec: PhantomSpec) -> SdoInstance:
    """Build the instance for a spec; bit-identical across calls."""
    spec.validate()
    vs = spec.voxel_size_mm
    center = np.asarray(spec.tumor_center_mm, dtype=float)

    tumor_vox = _sphere_voxels(spec.grid_shape, vs, center, -1.0,
                               spec.tumor_radius_mm)
    if tumor_vox.shape[0] == 0:
        raise EmptyStructure("tumor: radius encloses no voxel center")
    ring_vox = _sphere_voxels(spec.grid_shape, vs, center,
                              spec.tumor_radius_mm,
                              spec.tumor_radius_mm + spec.ring_thickness_mm)
    if ring_vox.shape[0] == 0:
        raise EmptyStructure("ring: thickness encloses no voxel center")

    tumor_keys = {tuple(v) for v in tumor_vox.tolist()}
    claimed = set()
    oars = []
    for i, (oc, orad, omax) in enumerate(spec.oar_specs):
        vox = _sphere_voxels(spec.grid_shape, vs, np.asarray(oc, float),
                             -1.0, orad)
        keys = {tuple(v) for v in vox.tolist()}
        if keys & tumor_keys:
            raise SpecOverlap(f"oar{i + 1} overlaps the tumor")
        keys -= claimed  # earlier OAR wins a contested voxel
        if not keys:
            raise EmptyStructure(f"oar{i + 1}: no voxels left")
        claimed |= keys
        vox = np.array(sorted(keys), dtype=int)
        oars.append(Structure(name=f"oar{i + 1}", kind="oar", voxels=vox,
                              max_dose_Gy=float(omax), voxel_size_mm=vs))
    # the ring is the shell minus whatever the OARs claimed
    ring_keys = {tuple(v) for v in ring_vox.tolist()} - claimed
    if not ring_keys:
        raise EmptyStructure("ring: fully claimed by OARs")
    ring_vox = np.array(sorted(ring_keys), dtype=int)

    structures = (
        Structure("tumor", "tumor", np.array(sorted(tumor_keys), dtype=int),
                  float(spec.tumor_max_dose_Gy), vs),
        Structure("ring", "ring", ring_vox,
                  float(spec.ring_max_dose_Gy), vs),
        *oars,
    )

    rng = np.random.default_rng(spec.seed)
    isocenters = []
    while len(isocenters) < spec.n_isocenters:
        cand = center + rng.uniform(-spec.tumor_radius_mm,
                                    spec.tumor_radius_mm, size=3)
        if np.linalg.norm(cand - center) <= 0.9 * spec.tumor_radius_mm:
            isocenters.append(cand)
    isocenters = np.array(isocenters)

    coords = np.concatenate([s.centers_mm() for s in structures], axis=0)
    sigmas = spec.kernel_width_factor * np.asarray(COLLIMATORS_MM)
    rate = np.empty((coords.shape[0], spec.n_isocenters, N_SECTORS, 3))
    for t in range(spec.n_isocenters):
        for s in range(N_SECTORS):
            kcenter = isocenters[t] + SECTOR_DIRECTIONS[s] * vs
            d2 = np.sum((coords - kcenter) ** 2, axis=1)
            for k, sigma in enumerate(sigmas):
                rate[:, t, s, k] = np.exp(-d2 / (2.0 * sigma * sigma))

    # amplitude calibration: a uniform widest-collimator plan with
    # calibration_bot_min total beam-on time reaches the prescription at
    # the voxel nearest the tumor center
    center_row = int(np.argmin(np.linalg.norm(
        coords[:tumor_vox.shape[0]] - center, axis=1)))
    per_minute = rate[center_row, :, :, 2].sum()
    amplitude = (spec.prescribed_dose_Gy * spec.n_isocenters
                 / (spec.calibration_bot_min * per_minute))
    rate *= amplitude

    return SdoInstance(
        name=spec.name,
        voxel_size_mm=vs,
        grid_shape=tuple(spec.grid_shape),
        structures=structures,
        isocenters_mm=isocenters,
        dose_rate=rate,
        prescriptions={"tumor": float(spec.prescribed_dose_Gy)},
        meta={"seed": spec.seed, "amplitude": amplitude},
    ).validate()


# --- serialization ---------------------------------------------------------


def _instance_document(instance: SdoInstance) -> dict:
    return {
        "format": FORMAT_TAG,
        "meta": {"name": instance.name,
                 "voxel_size_mm": instance.voxel_size_mm,
                 "grid_shape": list(instance.grid_shape),
                 **instance.meta},
        "sectors": N_SECTORS,
        "collimators_mm": list(instance.collimators_mm),
        "structures": [
            {"name": s.name, "kind": s.kind,
             "max_dose_Gy": s.max_dose_Gy,
             "voxels": s.voxels.tolist()}
            for s in instance.structures],
        "isocenters": instance.isocenters_mm.tolist(),
        "prescriptions": dict(instance.prescriptions),
        "max_doses": {s.name: s.max_dose_Gy for s in instance.structures},
        "dose_rate": {"shape": list(instance.dose_rate.shape),
                      "data": instance.dose_rate.ravel().tolist()},
    }


def write_instance(instance: SdoInstance, path) -> None:
    doc = _instance_document(instance)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _need(doc, key, context="document"):
    if key not in doc:
        raise FormatError(f"{context}.{key}: missing")
    return doc[key]


def read_instance(path) -> SdoInstance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}: {exc.msg}") from None
    if _need(doc, "format") != FORMAT_TAG:
        raise FormatError(f"format: expected {FORMAT_TAG!r}, "
                          f"got {doc['format']!r}")
    if _need(doc, "sectors") != N_SECTORS:
        raise FormatError(f"sectors: expected {N_SECTORS}, "
                          f"got {doc['sectors']}")
    colls = tuple(float(x) for x in _need(doc, "collimators_mm"))
    if len(colls) != 3:
        raise FormatError("collimators_mm: expected 3 diameters")
    meta = dict(_need(doc, "meta"))
    vs = float(_need(meta, "voxel_size_mm", "meta"))
    max_doses = _need(doc, "max_doses")
    structures = []
    for i, sdoc in enumerate(_need(doc, "structures")):
        ctx = f"structures[{i}]"
        name = _need(sdoc, "name", ctx)
        vox = np.asarray(_need(sdoc, "voxels", ctx), dtype=int)
        if vox.ndim != 2 or vox.shape[1] != 3:
            raise FormatError(f"{ctx}.voxels: expected (n, 3) indices")
        structures.append(Structure(
            name=name, kind=_need(sdoc, "kind", ctx), voxels=vox,
            max_dose_Gy=float(max_doses.get(name, sdoc["max_dose_Gy"])),
            voxel_size_mm=vs))
    rate_doc = _need(doc, "dose_rate")
    shape = tuple(_need(rate_doc, "shape", "dose_rate"))
    data = np.asarray(_need(rate_doc, "data", "dose_rate"), dtype=float)
    if data.size != int(np.prod(shape)):
        raise FormatError("dose_rate.data: length does not match shape")
    if len(shape) != 4:
        raise FormatError("dose_rate.shape: expected 4 axes")
    instance = SdoInstance(
        name=str(meta.pop("name", "instance")),
        voxel_size_mm=vs,
        grid_shape=tuple(meta.pop("grid_shape", (0, 0, 0))),
        structures=tuple(structures),
        isocenters_mm=np.asarray(_need(doc, "isocenters"), dtype=float),
        dose_rate=data.reshape(shape),
        prescriptions={k: float(v)
                       for k, v in _need(doc, "prescriptions").items()},
        collimators_mm=colls,
        meta={k: meta[k] for k in meta if k != "voxel_size_mm"},
    )
    return instance.validate()
