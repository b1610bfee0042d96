"""Deterministic fixed-timestep planar simulator.

A RobotDesign compiles into a BodyModel: wheels drive the body through a
multi-wheel kinematic fit (commanded rim velocities -> least-squares
body twist, precomputed as a pseudo-inverse), limbs add ground thrust
proportional to joint sweep, proximity sensors raycast against walls,
obstacles and the cube. Control runs at 10 Hz over 100 Hz physics
substeps. Five arenas: the walled exploration square scored on an 8x8
coverage grid, a radial hill, flat and rough 12 m locomotion strips, and
cube pushing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import controllers, kernels, morphology
from .controllers import ActParams, ElmanController, FixedController, HkController, HkParams

EXPLORE, HILL, LOCO_FLAT, LOCO_ROUGH, MANIP = range(5)
TASK_NAMES = ("exploration", "hill_climb", "loco_flat", "loco_rough", "manipulation")
TASK_DURATION = {EXPLORE: 1200.0, HILL: 120.0, LOCO_FLAT: 240.0,
                 LOCO_ROUGH: 240.0, MANIP: 240.0}
COVERAGE_GRID = 8
LOCO_SCALE = 12.0

FAMILIES = ("hk", "fixed", "elman", "zero")

# four interior obstacles of the exploration arena, versioned with the spec
EXPLORE_WALLS = ((1.0, 0.8, 1.2, 2.0),
                 (2.8, 2.0, 3.0, 3.2),
                 (1.6, 2.6, 2.8, 2.8),
                 (1.4, 1.2, 2.6, 1.4))


@dataclass
class SimParams:
    voxel_size: float = 0.02    # m per voxel
    wheel_radius: float = 0.05  # m
    k_thrust: float = 0.02      # m of travel per rad of joint sweep
    joint_slew: float = math.pi  # rad/s goal tracking speed (HK joints)
    body_v_max: float = 0.12    # m/s cap on body linear speed (the wheel
    body_omega_max: float = 4.0  # rad/s cap on turning; together they keep
                                # ill-conditioned wheel layouts physical
    sensor_range: float = 1.0
    ir_range: float = 1.0
    ir_cos: float = 0.5         # IR detection half-cone of 60 degrees
    dt: float = 0.01            # physics substep
    ctl_dt: float = 0.1         # control period


@dataclass
class ArenaSpec:
    task: int
    extent: np.ndarray                     # (2,) metres
    start: np.ndarray                      # (3,) x, y, heading
    rects: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    rough: np.ndarray = field(default_factory=lambda: np.ones((1, 1)))
    rough_cell: float = 0.25
    cube0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    cube_size: float = 0.10
    hill_peak: tuple[float, float] = (0.0, 0.0)
    hill_sigma: float = 2.0
    hill_height: float = 0.5
    version: str = "arena-v1"

    def scal(self, sim: SimParams) -> np.ndarray:
        return np.array([float(self.task), self.rough_cell, self.cube_size,
                         sim.sensor_range, sim.ir_range, sim.ir_cos])


def exploration_arena(size: float = 4.0, walls=EXPLORE_WALLS) -> ArenaSpec:
    return ArenaSpec(task=EXPLORE,
                     extent=np.array([size, size]),
                     start=np.array([size / 2.0, size / 2.0, 0.0]),
                     rects=np.array(walls, dtype=np.float64).reshape(-1, 4))


def hill_arena(size: float = 4.0, h_max: float = 0.5, sigma: float = 2.0) -> ArenaSpec:
    return ArenaSpec(task=HILL,
                     extent=np.array([size, size]),
                     start=np.array([0.5, 0.5, math.pi / 4.0]),
                     hill_peak=(size - 0.5, size - 0.5),
                     hill_sigma=sigma, hill_height=h_max)


def loco_flat_arena(length: float = 12.0, width: float = 4.0) -> ArenaSpec:
    return ArenaSpec(task=LOCO_FLAT,
                     extent=np.array([length, width]),
                     start=np.array([0.5, width / 2.0, 0.0]))


def loco_rough_arena(length: float = 12.0, width: float = 4.0, seed: int = 0) -> ArenaSpec:
    """Fixed pseudo-random bump pattern per arena seed, on 0.25 m cells."""
    cell = 0.25
    rng = np.random.default_rng(seed)
    grid = rng.uniform(0.7, 1.0, size=(int(length / cell), int(width / cell)))
    return ArenaSpec(task=LOCO_ROUGH,
                     extent=np.array([length, width]),
                     start=np.array([0.5, width / 2.0, 0.0]),
                     rough=grid, rough_cell=cell)


def manipulation_arena(length: float = 12.0, width: float = 4.0,
                       cube_ahead: float = 0.5, cube_size: float = 0.10) -> ArenaSpec:
    return ArenaSpec(task=MANIP,
                     extent=np.array([length, width]),
                     start=np.array([0.5, width / 2.0, 0.0]),
                     cube0=np.array([0.5 + cube_ahead, width / 2.0]),
                     cube_size=cube_size)


def make_arena(task: int, seed: int = 0) -> ArenaSpec:
    if task == EXPLORE:
        return exploration_arena()
    if task == HILL:
        return hill_arena()
    if task == LOCO_FLAT:
        return loco_flat_arena()
    if task == LOCO_ROUGH:
        return loco_rough_arena(seed=seed)
    if task == MANIP:
        return manipulation_arena()
    raise ValueError(f"unknown task {task}")


def altitude(arena: ArenaSpec, x: float, y: float) -> float:
    """Smooth radial mound height at (x, y)."""
    d2 = (x - arena.hill_peak[0]) ** 2 + (y - arena.hill_peak[1]) ** 2
    return arena.hill_height * math.exp(-d2 / arena.hill_sigma ** 2)


# -- body compilation -------------------------------------------------------

@dataclass
class BodyModel:
    layout: controllers.IoLayout
    wheel_pinv: np.ndarray      # (3, nw) rim velocities -> body twist
    ray_origin: np.ndarray      # (ns, 2) body frame
    ray_dir: np.ndarray         # (ns, 2) unit body frame
    limb_dir: np.ndarray        # (nj, 2) thrust direction per joint
    footprint: float
    mass: float                 # voxel-count proxy
    n_wheels: int
    n_joints: int
    n_rays: int

    def scal(self, sim: SimParams) -> np.ndarray:
        return np.array([self.footprint, sim.wheel_radius, sim.k_thrust,
                         sim.joint_slew, sim.body_v_max, sim.body_omega_max])


def _rolling_direction(normal) -> tuple[float, float]:
    """In-plane rolling direction for a wheel with the given axle normal,
    canonicalized so mirrored wheels roll the same way for the same
    command sign (toward +x, else +y)."""
    ux, uy = -float(normal[1]), float(normal[0])
    if ux < 0 or (ux == 0 and uy < 0):
        ux, uy = -ux, -uy
    return ux, uy


def build_body(design: morphology.RobotDesign, sim: SimParams | None = None) -> BodyModel:
    sim = sim or SimParams()
    vox = sim.voxel_size
    cx, cy = design.head[0], design.head[1]

    occupied = np.argwhere(design.grid != morphology.EMPTY)
    radial = np.hypot((occupied[:, 0] - cx) * vox, (occupied[:, 1] - cy) * vox)
    footprint = float(max(radial.max() + 0.5 * vox, vox))

    rows = []
    ray_origin = []
    ray_dir = []
    limb_dir = []
    for comp in design.components:
        px = (comp.pos[0] - cx) * vox
        py = (comp.pos[1] - cy) * vox
        nx, ny = float(comp.normal[0]), float(comp.normal[1])
        norm = math.hypot(nx, ny)
        if comp.kind == morphology.WHEEL:
            ux, uy = _rolling_direction(comp.normal)
            rows.append([ux, uy, ux * (-py) + uy * px])
        elif comp.kind == morphology.LIMB:
            if norm > 0:
                d = (-nx / norm, -ny / norm)
            else:
                d = (0.0, 0.0)      # vertical limb: no ground engagement
            limb_dir.extend([d, d])
        elif comp.kind == morphology.SENSOR:
            ray_origin.append([px, py])
            if norm > 0:
                ray_dir.append([nx / norm, ny / norm])
            else:
                ray_dir.append([1.0, 0.0])

    if rows:
        wheel_pinv = np.linalg.pinv(np.array(rows))
    else:
        wheel_pinv = np.zeros((3, 0))
    return BodyModel(
        layout=controllers.layout_for(design),
        wheel_pinv=wheel_pinv,
        ray_origin=np.array(ray_origin, dtype=np.float64).reshape(-1, 2),
        ray_dir=np.array(ray_dir, dtype=np.float64).reshape(-1, 2),
        limb_dir=np.array(limb_dir, dtype=np.float64).reshape(-1, 2),
        footprint=footprint,
        mass=float(np.count_nonzero(design.grid != morphology.EMPTY)),
        n_wheels=len(rows),
        n_joints=len(limb_dir),
        n_rays=len(ray_origin),
    )


# -- single-step interface ---------------------------------------------------

@dataclass
class SimState:
    pose: np.ndarray
    wheel_angle: np.ndarray
    joint_pos: np.ndarray
    cube: np.ndarray
    clock: float = 0.0

    @classmethod
    def initial(cls, body: BodyModel, arena: ArenaSpec) -> "SimState":
        return cls(pose=arena.start.copy(),
                   wheel_angle=np.zeros(body.n_wheels),
                   joint_pos=np.zeros(body.n_joints),
                   cube=arena.cube0.copy())


def step(state: SimState, body: BodyModel, cmd: controllers.ActuatorCommands,
         arena: ArenaSpec, sim: SimParams | None = None, n_sub: int = 1) -> SimState:
    """Advance n_sub physics substeps of sim.dt; returns a new state."""
    sim = sim or SimParams()
    if not (np.all(np.isfinite(cmd.wheel_omega)) and np.all(np.isfinite(cmd.joint_p1))):
        raise ValueError("non-finite actuator command")
    nxt = SimState(pose=state.pose.copy(), wheel_angle=state.wheel_angle.copy(),
                   joint_pos=state.joint_pos.copy(), cube=state.cube.copy(),
                   clock=state.clock + n_sub * sim.dt)
    kernels.advance(nxt.pose, nxt.wheel_angle, nxt.joint_pos, nxt.cube,
                    cmd.wheel_omega, cmd.joint_mode, cmd.joint_p1, cmd.joint_p2,
                    body.wheel_pinv, body.limb_dir, body.scal(sim),
                    arena.extent, arena.rects, arena.rough, arena.scal(sim),
                    state.clock, sim.dt, n_sub)
    return nxt


# -- episodes ------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray           # (T+1,)
    poses: np.ndarray           # (T+1, 3)
    cubes: np.ndarray           # (T+1, 2)
    tle: np.ndarray             # (T,) zero except HK episodes
    e_norm: np.ndarray
    contacts: int
    fault: bool

    def to_csv(self, path, arena: ArenaSpec) -> None:
        scores = running_scores(self, arena)
        with open(path, "w") as f:
            f.write("t,x,y,heading,score\n")
            for i in range(self.times.shape[0]):
                f.write(f"{self.times[i]!r},{self.poses[i, 0]!r},{self.poses[i, 1]!r},"
                        f"{self.poses[i, 2]!r},{scores[i]!r}\n")


@dataclass
class EpisodeResult:
    score: float
    behavior: np.ndarray        # final robot (x, y); cube position for MANIP
    trajectory: Trajectory
    fault: bool
    hk_resets: int

    @property
    def mean_tle(self) -> float:
        return float(np.mean(self.trajectory.tle)) if self.trajectory.tle.size else 0.0


def coverage_cells(poses: np.ndarray, arena: ArenaSpec) -> np.ndarray:
    """Distinct coverage-grid cell ids containing any sampled pose."""
    cell = arena.extent[0] / COVERAGE_GRID
    gx = np.clip((poses[:, 0] / cell).astype(np.int64), 0, COVERAGE_GRID - 1)
    gy = np.clip((poses[:, 1] / cell).astype(np.int64), 0, COVERAGE_GRID - 1)
    return np.unique(gx * COVERAGE_GRID + gy)


def coverage_score(poses: np.ndarray, arena: ArenaSpec) -> float:
    return coverage_cells(poses, arena).size / float(COVERAGE_GRID ** 2)


def running_scores(traj: Trajectory, arena: ArenaSpec) -> np.ndarray:
    """Score-so-far at every sample (monotone for explore and hill)."""
    T = traj.times.shape[0]
    out = np.zeros(T)
    if arena.task == EXPLORE:
        cell = arena.extent[0] / COVERAGE_GRID
        seen: set[tuple[int, int]] = set()
        for i in range(T):
            gx = min(COVERAGE_GRID - 1, max(0, int(traj.poses[i, 0] / cell)))
            gy = min(COVERAGE_GRID - 1, max(0, int(traj.poses[i, 1] / cell)))
            seen.add((gx, gy))
            out[i] = len(seen) / float(COVERAGE_GRID ** 2)
    elif arena.task == HILL:
        best = 0.0
        for i in range(T):
            best = max(best, altitude(arena, traj.poses[i, 0], traj.poses[i, 1]))
            out[i] = best / arena.hill_height
    elif arena.task == MANIP:
        out = np.hypot(traj.cubes[:, 0] - traj.cubes[0, 0],
                       traj.cubes[:, 1] - traj.cubes[0, 1]) / LOCO_SCALE
    else:
        out = np.hypot(traj.poses[:, 0] - traj.poses[0, 0],
                       traj.poses[:, 1] - traj.poses[0, 1]) / LOCO_SCALE
    return out


def score_trajectory(traj: Trajectory, arena: ArenaSpec) -> float:
    if traj.fault:
        return 0.0
    if arena.task == EXPLORE:
        return coverage_score(traj.poses, arena)
    if arena.task == HILL:
        top = max(altitude(arena, p[0], p[1]) for p in traj.poses)
        return top / arena.hill_height
    if arena.task == MANIP:
        return float(np.hypot(traj.cubes[-1, 0] - traj.cubes[0, 0],
                              traj.cubes[-1, 1] - traj.cubes[0, 1])) / LOCO_SCALE
    return float(np.hypot(traj.poses[-1, 0] - traj.poses[0, 0],
                          traj.poses[-1, 1] - traj.poses[0, 1])) / LOCO_SCALE


_EMPTY_M = np.zeros((0, 0))
_EMPTY_V = np.zeros(0)


def run_episode(design: morphology.RobotDesign, family: str, arena: ArenaSpec,
                seed: int = 0, duration: float | None = None,
                params: np.ndarray | None = None,
                sim: SimParams | None = None, act: ActParams | None = None,
                hk: HkParams | None = None) -> EpisodeResult:
    """Run one episode; deterministic given (design, family, params, seed).

    Controller parameters: "hk" and "fixed" draw fresh parameters from
    the seed when params is None; "elman" requires a flat parameter
    vector; "zero" commands nothing.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown controller family {family!r}")
    sim = sim or SimParams()
    act = act or ActParams()
    hk = hk or HkParams()
    if duration is None:
        duration = TASK_DURATION[arena.task]
    n_ctl = int(round(duration / sim.ctl_dt))
    n_sub = int(round(sim.ctl_dt / sim.dt))

    body = build_body(design, sim)
    lay = body.layout
    n, m = lay.n, lay.m
    rng = np.random.default_rng(seed)

    dither_w = np.zeros(n)
    dither_phi = np.zeros(n)
    if family == "hk" and hk.dither_amp > 0 and n > 0:
        dither_w = 2.0 * math.pi * rng.uniform(hk.dither_fmin, hk.dither_fmax, size=n)
        dither_phi = rng.uniform(0.0, 2.0 * math.pi, size=n)

    C = c = A = b = C0 = c0 = A0 = b0 = None
    w1, b1, w2, b2 = _EMPTY_M, _EMPTY_V, _EMPTY_M, _EMPTY_V
    w_in, w_rec, b_h, w_out, b_out = _EMPTY_M, _EMPTY_M, _EMPTY_V, _EMPTY_M, _EMPTY_V
    if family == "hk":
        ctrl = HkController.for_layout(lay, rng, hk)
        C, c, A, b = ctrl.C, ctrl.c, ctrl.A, ctrl.b
        C0, c0, A0, b0 = ctrl.init
    elif family == "fixed":
        if params is None:
            fc = FixedController.draw(n, m, rng)
        else:
            fc = _fixed_from_flat(n, m, params)
        w1, b1, w2, b2 = fc.w1, fc.b1, fc.w2, fc.b2
    elif family == "elman":
        if params is None:
            raise ValueError("elman family requires a parameter vector")
        ec = ElmanController.from_flat(n, m, params)
        w_in, w_rec, b_h, w_out, b_out = ec.w_in, ec.w_rec, ec.b_h, ec.w_out, ec.b_out
    if C is None:
        C, c, A, b = _EMPTY_M, _EMPTY_V, _EMPTY_M, _EMPTY_V
        C0, c0, A0, b0 = _EMPTY_M, _EMPTY_V, _EMPTY_M, _EMPTY_V

    fam = {"hk": kernels.FAMILY_HK, "fixed": kernels.FAMILY_FIXED,
           "elman": kernels.FAMILY_ELMAN, "zero": kernels.FAMILY_ZERO}[family]
    poses, cubes, tle, e_norm, contacts, fault, hk_resets = kernels.run_episode_core(
        fam, C, c, A, b, C0, c0, A0, b0, hk.scal(), dither_w, dither_phi,
        w1, b1, w2, b2, w_in, w_rec, b_h, w_out, b_out,
        lay.s_kind, lay.s_idx, lay.a_kind, lay.a_idx,
        body.ray_origin, body.ray_dir, body.wheel_pinv, body.limb_dir, body.scal(sim),
        arena.extent, arena.rects, arena.rough, arena.scal(sim),
        arena.start, arena.cube0, n_ctl, sim.ctl_dt, n_sub, sim.dt, act.scal())

    traj = Trajectory(times=np.arange(n_ctl + 1) * sim.ctl_dt, poses=poses,
                      cubes=cubes, tle=tle, e_norm=e_norm,
                      contacts=int(contacts), fault=bool(fault))
    behavior = cubes[-1].copy() if arena.task == MANIP else poses[-1, :2].copy()
    return EpisodeResult(score=score_trajectory(traj, arena), behavior=behavior,
                         trajectory=traj, fault=bool(fault), hk_resets=int(hk_resets))


def _fixed_from_flat(n: int, m: int, vec: np.ndarray) -> FixedController:
    H = controllers.HIDDEN
    parts = np.split(np.asarray(vec, dtype=np.float64),
                     np.cumsum([H * n, H, m * H])[:3])
    return FixedController(w1=parts[0].reshape(H, n).copy(), b1=parts[1].copy(),
                           w2=parts[2].reshape(m, H).copy(), b2=parts[3].copy())
