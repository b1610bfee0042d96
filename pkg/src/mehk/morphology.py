"""Decode CPPN genomes into voxel robot designs on an 11x11x11 grid.

Decoding queries the genome once per voxel (coordinates scaled to [-1,1],
radius to [0,1]), squashes the five outputs to [0,1], thresholds, then
applies physical cleanup: chassis connectivity to the fixed head voxel,
component-to-chassis adjacency, placement validity (wheels need a
horizontal surface normal, castors a downward one) and a hard cap of 8
components kept by activation strength.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import cppn

GRID = 11
CENTER = (GRID - 1) / 2.0            # 5.0
HEAD = (5, 5, 0)
MAX_COMPONENTS = 8
CONTENT_THRESHOLD = 0.3

EMPTY, CHASSIS, WHEEL, LIMB, SENSOR, CASTOR = range(6)
CONTENT_NAMES = ("empty", "chassis", "wheel", "limb", "sensor", "castor")
COMPONENT_KINDS = ("wheel", "limb", "sensor", "castor")
# descriptor encoding: empty/chassis -> 0, components -> 1..4
DESCRIPTOR_CODE = {WHEEL: 1, LIMB: 2, SENSOR: 3, CASTOR: 4}

DIRS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


@dataclass
class Component:
    kind: int                        # WHEEL | LIMB | SENSOR | CASTOR
    pos: tuple[int, int, int]
    normal: tuple[int, int, int]     # outward unit axis direction

    @property
    def kind_name(self) -> str:
        return CONTENT_NAMES[self.kind]


@dataclass
class RobotDesign:
    grid: np.ndarray                 # (11,11,11) uint8 content codes
    components: list[Component]
    id: str
    head: tuple[int, int, int] = HEAD

    def count(self, kind: int) -> int:
        return sum(1 for c in self.components if c.kind == kind)

    def chassis_voxels(self) -> int:
        return int(np.count_nonzero(self.grid == CHASSIS))

    def extents(self) -> tuple[int, int, int]:
        """Occupied bounding-box size along x, y, z."""
        occ = np.argwhere(self.grid != EMPTY)
        span = occ.max(axis=0) - occ.min(axis=0) + 1
        return int(span[0]), int(span[1]), int(span[2])


def voxel_coordinates() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """CPPN input arrays for all 1331 voxels in x-major flat order."""
    idx = np.indices((GRID, GRID, GRID)).reshape(3, -1).astype(np.float64)
    xyz = (idx - CENTER) / CENTER
    r = np.sqrt(np.sum((idx - CENTER) ** 2, axis=0)) / (CENTER * math.sqrt(3.0))
    return xyz[0], xyz[1], xyz[2], r


def squash(v: np.ndarray) -> np.ndarray:
    """Monotone map of raw CPPN output onto [0,1]."""
    return 0.5 * (1.0 + np.tanh(v))


def _grid_hash(grid: np.ndarray) -> str:
    return hashlib.sha256(grid.astype(np.uint8).tobytes()).hexdigest()[:16]


def _in_grid(p: tuple[int, int, int]) -> bool:
    return all(0 <= v < GRID for v in p)


def _classify(genome: cppn.CppnGenome) -> tuple[np.ndarray, np.ndarray]:
    """Raw per-voxel content and winning activation before cleanup."""
    x, y, z, r = voxel_coordinates()
    out = squash(cppn.evaluate(genome, x, y, z, r))        # (5, 1331)
    best = np.argmax(out, axis=0)
    act = out[best, np.arange(out.shape[1])]
    content = np.where(act < CONTENT_THRESHOLD, EMPTY, best + 1)
    return (content.reshape(GRID, GRID, GRID).astype(np.uint8),
            act.reshape(GRID, GRID, GRID))


def _connected_chassis(grid: np.ndarray) -> np.ndarray:
    """Boolean mask of chassis voxels 6-connected to the head."""
    mask = np.zeros(grid.shape, dtype=bool)
    if grid[HEAD] != CHASSIS:
        return mask
    stack = [HEAD]
    mask[HEAD] = True
    while stack:
        cx, cy, cz = stack.pop()
        for dx, dy, dz in DIRS:
            p = (cx + dx, cy + dy, cz + dz)
            if _in_grid(p) and not mask[p] and grid[p] == CHASSIS:
                mask[p] = True
                stack.append(p)
    return mask


def _open_directions(grid: np.ndarray, pos: tuple[int, int, int]) -> list[tuple[int, int, int]]:
    out = []
    for d in DIRS:
        p = (pos[0] + d[0], pos[1] + d[1], pos[2] + d[2])
        if not _in_grid(p) or grid[p] == EMPTY:
            out.append(d)
    return out


def _farthest(pos: tuple[int, int, int], dirs) -> tuple[int, int, int] | None:
    """Direction whose neighbour lies farthest from the grid center;
    ties resolved by the fixed DIRS ordering."""
    best_dir = None
    best_dist = -1.0
    for d in dirs:
        p = (pos[0] + d[0], pos[1] + d[1], pos[2] + d[2])
        dist = math.dist(p, (CENTER, CENTER, CENTER))
        if dist > best_dist + 1e-12:
            best_dist = dist
            best_dir = d
    return best_dir


def _surface_normal(grid: np.ndarray, pos: tuple[int, int, int],
                    kind: int) -> tuple[int, int, int] | None:
    """Mounting direction for a component, or None when no valid open
    face exists. Wheels mount on a side face, castors underneath; limbs
    and sensors prefer a side face but accept any open one."""
    open_dirs = _open_directions(grid, pos)
    if kind == CASTOR:
        return (0, 0, -1) if (0, 0, -1) in open_dirs else None
    horizontal = [d for d in open_dirs if d[2] == 0]
    if kind == WHEEL:
        return _farthest(pos, horizontal)
    return _farthest(pos, horizontal) or _farthest(pos, open_dirs)


def _finalize(raw: np.ndarray, activation: np.ndarray) -> RobotDesign:
    """Shared cleanup pipeline for decoded and hand-built grids."""
    grid = raw.copy()
    grid[HEAD] = CHASSIS
    keep = _connected_chassis(grid)
    grid[(grid == CHASSIS) & ~keep] = EMPTY

    # components must touch surviving chassis
    comp_pos = [(int(p[0]), int(p[1]), int(p[2]))
                for p in np.argwhere((grid != EMPTY) & (grid != CHASSIS))]
    for pos in comp_pos:
        if not any(_in_grid((pos[0] + d[0], pos[1] + d[1], pos[2] + d[2]))
                   and grid[pos[0] + d[0], pos[1] + d[1], pos[2] + d[2]] == CHASSIS
                   for d in DIRS):
            grid[pos] = EMPTY

    # placement validity against the pruned occupancy
    comps: list[Component] = []
    for pos in sorted((int(p[0]), int(p[1]), int(p[2]))
                      for p in np.argwhere((grid != EMPTY) & (grid != CHASSIS))):
        kind = int(grid[pos])
        normal = _surface_normal(grid, pos, kind)
        if normal is not None:
            comps.append(Component(kind=kind, pos=pos, normal=normal))
        else:
            grid[pos] = EMPTY

    if len(comps) > MAX_COMPONENTS:
        comps.sort(key=lambda c: (-activation[c.pos], c.pos))
        for c in comps[MAX_COMPONENTS:]:
            grid[c.pos] = EMPTY
        comps = comps[:MAX_COMPONENTS]

    comps.sort(key=lambda c: c.pos)
    return RobotDesign(grid=grid, components=comps, id=_grid_hash(grid))


def decode(genome: cppn.CppnGenome) -> RobotDesign:
    """Deterministic genotype -> phenotype map; never fails on a valid
    genome (worst case: head-only design with no components)."""
    raw, activation = _classify(genome)
    return _finalize(raw, activation)


def design_from_grid(raw: np.ndarray) -> RobotDesign:
    """Run the cleanup pipeline on a hand-built content grid (fixtures,
    file loading). Activation ties resolved by voxel order."""
    return _finalize(np.asarray(raw, dtype=np.uint8), np.ones((GRID, GRID, GRID)))


def validate_design(design: RobotDesign) -> None:
    """Raise ValueError unless every structural invariant holds."""
    if design.grid.shape != (GRID, GRID, GRID):
        raise ValueError(f"grid shape {design.grid.shape} != {(GRID, GRID, GRID)}")
    if design.grid[HEAD] != CHASSIS:
        raise ValueError("head voxel is not chassis")
    keep = _connected_chassis(design.grid)
    if np.any((design.grid == CHASSIS) & ~keep):
        raise ValueError("disconnected chassis voxels")
    if len(design.components) > MAX_COMPONENTS:
        raise ValueError(f"{len(design.components)} components > {MAX_COMPONENTS}")
    comp_voxels = {(int(p[0]), int(p[1]), int(p[2]))
                   for p in np.argwhere((design.grid != EMPTY) & (design.grid != CHASSIS))}
    if comp_voxels != {c.pos for c in design.components}:
        raise ValueError("component list does not match grid content")
    for c in design.components:
        if int(design.grid[c.pos]) != c.kind:
            raise ValueError("component kind mismatch at voxel")
        if not any(_in_grid((c.pos[0] + d[0], c.pos[1] + d[1], c.pos[2] + d[2]))
                   and design.grid[c.pos[0] + d[0], c.pos[1] + d[1], c.pos[2] + d[2]] == CHASSIS
                   for d in DIRS):
            raise ValueError("component not attached to chassis")
        if c.normal not in DIRS:
            raise ValueError("component normal is not a unit axis direction")
        if c.kind == WHEEL and c.normal[2] != 0:
            raise ValueError("wheel normal must be horizontal")
        if c.kind == CASTOR and c.normal != (0, 0, -1):
            raise ValueError("castor normal must point down")


# -- morphological descriptor and sparsity ------------------------------

@dataclass
class MorphDescriptor:
    """Sparse component-type matrix; chassis is never stored."""

    entries: dict[tuple[int, int, int], int]

    def __len__(self) -> int:
        return len(self.entries)


def descriptor(design: RobotDesign) -> MorphDescriptor:
    return MorphDescriptor(entries={c.pos: DESCRIPTOR_CODE[c.kind] for c in design.components})


def descriptor_distance(a: MorphDescriptor, b: MorphDescriptor) -> float:
    """Euclidean distance between the two 1331-dim integer vectors,
    computed on the sparse union of entries."""
    total = 0
    for pos in a.entries.keys() | b.entries.keys():
        d = a.entries.get(pos, 0) - b.entries.get(pos, 0)
        total += d * d
    return math.sqrt(total)


def sparsity_score(target: MorphDescriptor, pool: list[MorphDescriptor], k: int = 15) -> float:
    """Mean distance to the k nearest pool members. The caller passes the
    pool without the target itself; duplicates of the target count."""
    if len(pool) < k:
        raise ValueError(f"sparsity pool has {len(pool)} members, k={k} required")
    dists = sorted(descriptor_distance(target, other) for other in pool)
    return float(sum(dists[:k]) / k)


# -- file formats --------------------------------------------------------

def _rle_encode(flat: np.ndarray) -> list[list[int]]:
    runs: list[list[int]] = []
    for v in flat:
        v = int(v)
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    return runs


def _rle_decode(runs: list[list[int]]) -> np.ndarray:
    return np.concatenate([np.full(int(n), int(v), dtype=np.uint8) for v, n in runs])


def design_to_dict(design: RobotDesign) -> dict:
    return {
        "grid": _rle_encode(design.grid.reshape(-1)),
        "components": [{"kind": c.kind_name, "pos": list(c.pos), "normal": list(c.normal)}
                       for c in design.components],
        "id": design.id,
    }


def design_from_dict(d: dict) -> RobotDesign:
    grid = _rle_decode(d["grid"]).reshape(GRID, GRID, GRID)
    comps = [Component(kind=CONTENT_NAMES.index(c["kind"]), pos=tuple(c["pos"]),
                       normal=tuple(c["normal"]))
             for c in d["components"]]
    design = RobotDesign(grid=grid, components=comps, id=d["id"])
    validate_design(design)
    if design.id != _grid_hash(grid):
        raise ValueError("design id does not match grid hash")
    return design


def save_design(design: RobotDesign, path) -> None:
    with open(path, "w") as f:
        json.dump(design_to_dict(design), f)


def load_design(path) -> RobotDesign:
    with open(path) as f:
        return design_from_dict(json.load(f))


def export_descriptor_csv(desc: MorphDescriptor, path) -> None:
    with open(path, "w") as f:
        f.write("x,y,z,kind\n")
        for (x, y, z), kind in sorted(desc.entries.items()):
            f.write(f"{x},{y},{z},{kind}\n")
