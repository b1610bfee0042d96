"""Controller families and the shared sensor/actuator convention.

Sensor vector layout is fixed by the design's component enumeration
order (lexicographic voxel order): each wheel contributes its wrapped
angular position, each limb two joint angles, each proximity sensor a
distance in [0,1] plus a binary IR channel; castors are passive. Action
vector: one velocity command per wheel, one command per limb joint, all
in [-1,1].

The homeokinetic controller is pseudo-linear, a = tanh(C s + c), with an
action-space forward model s~ = A a + b. Each step adapts C, c down the
gradient of the ridge-regularized time-loop error and A, b down the
prediction-error gradient (one SGD step each).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, morphology

HIDDEN = 6          # hidden units of the fixed and Elman networks


class ConfigurationError(ValueError):
    """Controller/design shape mismatch."""


@dataclass
class HkParams:
    eps_c: float = 0.1          # controller learning rate (per 0.1 s step)
    eps_a: float = 0.05         # model learning rate
    ridge: float = 1e-4         # lambda in (L^T L + lambda I)^-1
    clip: float = 10.0          # hard bound on every parameter
    init_random: float = 0.1    # uniform init half-width for C
    init_feedback: float = 0.5  # added on proprioceptive channels of C
    init_bias: float = 0.05     # uniform half-width for c; breaks the
                                # all-zero fixed point in a noiseless sim
    dither_amp: float = 0.02    # sensor excitation dither; keeps the model
    dither_fmin: float = 0.05   # error from vanishing so adaptation never
    dither_fmax: float = 0.5    # dies out (frequencies in Hz, seeded)

    def scal(self) -> np.ndarray:
        return np.array([self.eps_c, self.eps_a, self.ridge, self.clip, self.dither_amp])


@dataclass
class ActParams:
    """Action-to-actuator mapping constants."""
    wheel_v_max: float = 2.0            # rad/s at command 1
    joint_f_max: float = 1.0            # Hz at command 1 (sinusoid families)
    joint_amplitude: float = math.pi / 4
    joint_range: float = math.pi / 2    # HK goal-position scale

    def scal(self) -> np.ndarray:
        return np.array([self.wheel_v_max, self.joint_f_max, self.joint_amplitude])


@dataclass
class IoLayout:
    """Slot tables mapping a design's components to sensor/action indices."""

    s_kind: np.ndarray          # (n,) 0 wheel, 1 joint, 2 proximity, 3 IR
    s_idx: np.ndarray           # (n,) index into wheel/joint/ray arrays
    a_kind: np.ndarray          # (m,) 0 wheel, 1 joint
    a_idx: np.ndarray           # (m,)
    propri: np.ndarray          # (m,) sensor slot holding the actuator's own angle

    @property
    def n(self) -> int:
        return int(self.s_kind.shape[0])

    @property
    def m(self) -> int:
        return int(self.a_kind.shape[0])


def layout_for(design: morphology.RobotDesign) -> IoLayout:
    s_kind: list[int] = []
    s_idx: list[int] = []
    a_kind: list[int] = []
    a_idx: list[int] = []
    propri: list[int] = []
    wheels = joints = rays = 0
    for comp in design.components:
        if comp.kind == morphology.WHEEL:
            propri.append(len(s_kind))
            s_kind.append(0)
            s_idx.append(wheels)
            a_kind.append(0)
            a_idx.append(wheels)
            wheels += 1
        elif comp.kind == morphology.LIMB:
            for _ in range(2):
                propri.append(len(s_kind))
                s_kind.append(1)
                s_idx.append(joints)
                a_kind.append(1)
                a_idx.append(joints)
                joints += 1
        elif comp.kind == morphology.SENSOR:
            s_kind.extend([2, 3])
            s_idx.extend([rays, rays])
            rays += 1
    return IoLayout(
        s_kind=np.array(s_kind, dtype=np.int64),
        s_idx=np.array(s_idx, dtype=np.int64),
        a_kind=np.array(a_kind, dtype=np.int64),
        a_idx=np.array(a_idx, dtype=np.int64),
        propri=np.array(propri, dtype=np.int64),
    )


# -- homeokinetic controller ---------------------------------------------

def time_loop_error(C, c, A, b, s, a_prev, ridge) -> float:
    """Straight-line TLE evaluation (no updates); the reference the
    per-step gradients are tested against."""
    z = C @ s + c
    gp = 1.0 - np.tanh(z) ** 2
    E = s - (A @ a_prev + b)
    L = (A * gp) @ C
    M = L.T @ L + ridge * np.eye(s.shape[0])
    xi = np.linalg.solve(M, L.T @ E)
    return float(xi @ xi)


@dataclass
class HkController:
    C: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    params: HkParams
    init: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] = field(repr=False, default=None)
    a_prev: np.ndarray | None = None
    fault_count: int = 0

    def __post_init__(self):
        n, m = self.A.shape
        if self.C.shape != (m, n) or self.c.shape != (m,) or self.b.shape != (n,):
            raise ConfigurationError(
                f"inconsistent HK shapes: C{self.C.shape} c{self.c.shape} "
                f"A{self.A.shape} b{self.b.shape}")
        if self.init is None:
            self.init = (self.C.copy(), self.c.copy(), self.A.copy(), self.b.copy())

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @classmethod
    def for_layout(cls, layout: IoLayout, rng: np.random.Generator,
                   params: HkParams | None = None) -> "HkController":
        """Bootstrap init: small random C plus feedback gain on each
        actuator's own proprioceptive channel; A maps actions onto those
        channels (pseudo-identity); zero biases."""
        params = params or HkParams()
        n, m = layout.n, layout.m
        C = rng.uniform(-params.init_random, params.init_random, size=(m, n))
        cvec = rng.uniform(-params.init_bias, params.init_bias, size=m)
        A = np.zeros((n, m))
        for j in range(m):
            sl = layout.propri[j]
            C[j, sl] += params.init_feedback
            A[sl, j] = 1.0
        return cls(C=C, c=cvec, A=A, b=np.zeros(n), params=params)

    @classmethod
    def for_design(cls, design: morphology.RobotDesign, rng: np.random.Generator,
                   params: HkParams | None = None) -> "HkController":
        return cls.for_layout(layout_for(design), rng, params)

    def reset_episode(self) -> None:
        self.a_prev = None

    def step(self, s: np.ndarray) -> tuple[np.ndarray, dict]:
        """One control step: action plus {E_norm, TLE} diagnostics.
        The first step of an episode performs no update."""
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.n,):
            raise ConfigurationError(f"sensor vector shape {s.shape}, expected ({self.n},)")
        have_prev = self.a_prev is not None
        a_prev = self.a_prev if have_prev else np.zeros(self.m)
        a, e_norm, tle, ok = kernels.hk_step(
            self.C, self.c, self.A, self.b, a_prev, s, have_prev, self.params.scal())
        if ok == 0:
            self.C[:], self.c[:], self.A[:], self.b[:] = self.init
            self.fault_count += 1
        self.a_prev = a
        return a, {"E_norm": e_norm, "TLE": tle}


# -- fixed feed-forward controller ---------------------------------------

@dataclass
class FixedController:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def draw(cls, n: int, m: int, rng: np.random.Generator) -> "FixedController":
        """All weights and biases from U[-0.5, 0.5], drawn once."""
        return cls(w1=rng.uniform(-0.5, 0.5, size=(HIDDEN, n)),
                   b1=rng.uniform(-0.5, 0.5, size=HIDDEN),
                   w2=rng.uniform(-0.5, 0.5, size=(m, HIDDEN)),
                   b2=rng.uniform(-0.5, 0.5, size=m))

    def forward(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.w1.shape[1],):
            raise ConfigurationError(f"sensor vector shape {s.shape}, expected ({self.w1.shape[1]},)")
        return kernels.mlp_forward(self.w1, self.b1, self.w2, self.b2, s)


# -- Elman recurrent controller -------------------------------------------

def elman_param_count(n: int, m: int) -> int:
    return HIDDEN * n + HIDDEN * HIDDEN + HIDDEN + m * HIDDEN + m


@dataclass
class ElmanController:
    w_in: np.ndarray
    w_rec: np.ndarray
    b_h: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    h: np.ndarray = None

    def __post_init__(self):
        if self.h is None:
            self.h = np.zeros(HIDDEN)

    @classmethod
    def from_flat(cls, n: int, m: int, vec: np.ndarray) -> "ElmanController":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (elman_param_count(n, m),):
            raise ConfigurationError(
                f"parameter vector length {vec.size}, expected {elman_param_count(n, m)}")
        parts = np.split(vec, np.cumsum([HIDDEN * n, HIDDEN * HIDDEN, HIDDEN, m * HIDDEN])[:4])
        return cls(w_in=parts[0].reshape(HIDDEN, n).copy(),
                   w_rec=parts[1].reshape(HIDDEN, HIDDEN).copy(),
                   b_h=parts[2].copy(),
                   w_out=parts[3].reshape(m, HIDDEN).copy(),
                   b_out=parts[4].copy())

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.w_in.ravel(), self.w_rec.ravel(), self.b_h,
                               self.w_out.ravel(), self.b_out])

    def reset(self) -> None:
        self.h[:] = 0.0

    def forward(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.w_in.shape[1],):
            raise ConfigurationError(f"sensor vector shape {s.shape}, expected ({self.w_in.shape[1]},)")
        return kernels.elman_step(self.w_in, self.w_rec, self.b_h,
                                  self.w_out, self.b_out, self.h, s)


# -- action mapping --------------------------------------------------------

@dataclass
class ActuatorCommands:
    wheel_omega: np.ndarray     # rad/s per wheel
    joint_mode: int             # 0 goal-position (HK), 1 sinusoid
    joint_p1: np.ndarray        # goal (rad) or angular frequency (rad/s)
    joint_p2: np.ndarray        # unused or amplitude (rad)


def map_actions(layout: IoLayout, a: np.ndarray, family: str, t: float,
                act: ActParams | None = None) -> ActuatorCommands:
    """Translate normalized actions into actuator commands at time t.

    Wheels: angular velocity a * v_max. Limb joints: HK commands a goal
    position a * pi/2; the sinusoid families command a frequency
    f = f_max * (a + 1) / 2 with fixed amplitude, so the joint position
    is amplitude * sin(2 pi f t).
    """
    act = act or ActParams()
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (layout.m,):
        raise ConfigurationError(f"action vector shape {a.shape}, expected ({layout.m},)")
    n_wheels = int(np.sum(layout.a_kind == 0))
    n_joints = layout.m - n_wheels
    cmd = ActuatorCommands(wheel_omega=np.zeros(n_wheels),
                           joint_mode=0 if family == "hk" else 1,
                           joint_p1=np.zeros(n_joints), joint_p2=np.zeros(n_joints))
    for j in range(layout.m):
        if layout.a_kind[j] == 0:
            cmd.wheel_omega[layout.a_idx[j]] = a[j] * act.wheel_v_max
        elif cmd.joint_mode == 0:
            cmd.joint_p1[layout.a_idx[j]] = a[j] * act.joint_range
        else:
            cmd.joint_p1[layout.a_idx[j]] = 2.0 * math.pi * act.joint_f_max * (a[j] + 1.0) / 2.0
            cmd.joint_p2[layout.a_idx[j]] = act.joint_amplitude
    return cmd


def joint_position(cmd: ActuatorCommands, j: int, t: float) -> float:
    """Sinusoid joint trajectory value at absolute time t (mode 1)."""
    return cmd.joint_p2[j] * math.sin(cmd.joint_p1[j] * t)


# -- parameter files and diagnostics ---------------------------------------

def save_params(path, family: str, n: int, m: int, vec: np.ndarray) -> None:
    with open(path, "w") as f:
        json.dump({"family": family, "n": n, "m": m, "params": [float(v) for v in vec]}, f)


def load_params(path) -> tuple[str, int, int, np.ndarray]:
    with open(path) as f:
        d = json.load(f)
    return d["family"], int(d["n"]), int(d["m"]), np.asarray(d["params"], dtype=np.float64)


def write_diagnostics(path, times, tle, e_norm) -> None:
    with open(path, "w") as f:
        f.write("t,TLE,E_norm\n")
        for t, tl, en in zip(times, tle, e_norm):
            f.write(f"{t},{tl!r},{en!r}\n")
