"""Vectorized numpy reference implementations of the hot kernels.

Array contracts (shared with the numba backend):

  sensor slots   s_kind[i]: 0 wheel angle, 1 joint angle, 2 proximity, 3 IR
                 s_idx[i]:  index into wheel / joint / ray arrays
  action slots   a_kind[j]: 0 wheel, 1 joint;  a_idx[j] likewise
  body_scal      [footprint_r, wheel_radius, k_thrust, joint_slew,
                  body_v_max, body_omega_max]
  hk_scal        [eps_c, eps_a, ridge_lambda, param_clip, dither_amp]
  act_scal       [wheel_v_max, joint_f_max, joint_amplitude]
  arena_scal     [task, rough_cell, cube_size, sensor_range, ir_range, ir_cos]
  task ids       0 explore, 1 hill, 2 loco-flat, 3 loco-rough, 4 manipulation

Poses are (x, y, heading); all physics is planar. Every function is a
pure function of its arguments apart from documented in-place updates.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


def hk_step(C, c, A, b, a_prev, s, have_prev, hk_scal):
    """One homeokinetic control step.

    Computes the action a = tanh(C s + c), then (when a previous action
    is cached) the action-space model error E = s - (A a_prev + b), the
    sensorimotor Jacobian L = A diag(g') C and the ridge-regularized
    time-loop error ||xi||^2 with xi = (L^T L + lam I)^-1 L^T E.
    Updates C, c in place down the TLE gradient and A, b down the
    squared-error gradient, then clips all parameters.

    Returns (a, ||E||, TLE, ok); ok = 0 signals non-finite parameters
    after the update (caller resets them).
    """
    eps_c, eps_a, lam, clip = hk_scal[0], hk_scal[1], hk_scal[2], hk_scal[3]
    n = s.shape[0]
    m = c.shape[0]
    if n == 0 or m == 0:
        return np.zeros(m), 0.0, 0.0, 1

    z = C @ s + c
    a = np.tanh(z)
    if not have_prev:
        return a, 0.0, 0.0, 1

    E = s - (A @ a_prev + b)
    gp = 1.0 - a * a
    L = (A * gp) @ C                       # A diag(g') C, (n, n)
    M = L.T @ L + lam * np.eye(n)
    xi = np.linalg.solve(M, L.T @ E)
    tle = float(xi @ xi)
    w = np.linalg.solve(M, xi)

    G = 2.0 * (np.outer(E - L @ xi, w) - np.outer(L @ w, xi))
    h = np.sum((C @ G.T) * A.T, axis=1)    # diag(C G^T A)
    g2 = -2.0 * a * gp
    gC = gp[:, None] * (A.T @ G) + (h * g2)[:, None] * s[None, :]
    gc = h * g2
    gA = -2.0 * np.outer(E, a_prev)
    gb = -2.0 * E

    C -= eps_c * gC
    c -= eps_c * gc
    A -= eps_a * gA
    b -= eps_a * gb
    np.clip(C, -clip, clip, out=C)
    np.clip(c, -clip, clip, out=c)
    np.clip(A, -clip, clip, out=A)
    np.clip(b, -clip, clip, out=b)

    ok = 1
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(c))
            and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        ok = 0
    if not math.isfinite(tle):
        tle = 0.0
        ok = 0
    return a, float(np.sqrt(E @ E)), tle, ok


def mlp_forward(w1, b1, w2, b2, x):
    """Feed-forward n -> 6 -> m network, tanh at both layers."""
    if b2.shape[0] == 0:
        return np.zeros(0)
    return np.tanh(w2 @ np.tanh(w1 @ x + b1) + b2)


def elman_step(w_in, w_rec, b_h, w_out, b_out, h, x):
    """Recurrent step: updates hidden state h in place, returns output."""
    if b_out.shape[0] == 0:
        return np.zeros(0)
    h[:] = np.tanh(w_in @ x + w_rec @ h + b_h)
    return np.tanh(w_out @ h + b_out)


def _wrap_angle(a):
    return a - TWO_PI * np.floor((a + math.pi) / TWO_PI)


def _ray_distance(ox, oy, dx, dy, extent, rects, cube_active, cube, cube_size, rng_max):
    """Nearest hit along the ray: arena boundary exit, interior
    rectangles, and the cube AABB when active."""
    best = rng_max
    # boundary exit distance (origin assumed inside)
    for comp_o, comp_d, lim in ((ox, dx, extent[0]), (oy, dy, extent[1])):
        if comp_d > 1e-12:
            best = min(best, (lim - comp_o) / comp_d)
        elif comp_d < -1e-12:
            best = min(best, -comp_o / comp_d)
    boxes = [rects[i] for i in range(rects.shape[0])]
    if cube_active:
        half = cube_size / 2.0
        boxes.append((cube[0] - half, cube[1] - half, cube[0] + half, cube[1] + half))
    for x0, y0, x1, y1 in boxes:
        tmin, tmax = 0.0, np.inf
        ok = True
        for o, d, lo, hi in ((ox, dx, x0, x1), (oy, dy, y0, y1)):
            if abs(d) < 1e-12:
                if o < lo or o > hi:
                    ok = False
                    break
            else:
                t1 = (lo - o) / d
                t2 = (hi - o) / d
                if t1 > t2:
                    t1, t2 = t2, t1
                tmin = max(tmin, t1)
                tmax = min(tmax, t2)
        if ok and tmin <= tmax:
            best = min(best, tmin)
    return best


def read_sensors(pose, wheel_angle, joint_pos, s_kind, s_idx, ray_origin, ray_dir,
                 extent, rects, cube, arena_scal):
    """Assemble the sensor vector for the current state."""
    task, _, cube_size, rng_max, ir_range, ir_cos = arena_scal
    cube_active = int(task) == 4
    n = s_kind.shape[0]
    s = np.zeros(n)
    ch, sh = math.cos(pose[2]), math.sin(pose[2])
    for i in range(n):
        kind = s_kind[i]
        idx = s_idx[i]
        if kind == 0:
            s[i] = _wrap_angle(wheel_angle[idx]) / math.pi
        elif kind == 1:
            s[i] = max(-1.0, min(1.0, joint_pos[idx] / HALF_PI))
        else:
            ox = pose[0] + ch * ray_origin[idx, 0] - sh * ray_origin[idx, 1]
            oy = pose[1] + sh * ray_origin[idx, 0] + ch * ray_origin[idx, 1]
            dx = ch * ray_dir[idx, 0] - sh * ray_dir[idx, 1]
            dy = sh * ray_dir[idx, 0] + ch * ray_dir[idx, 1]
            if kind == 2:
                d = _ray_distance(ox, oy, dx, dy, extent, rects,
                                  cube_active, cube, cube_size, rng_max)
                s[i] = min(d, rng_max) / rng_max
            else:
                hit = 0.0
                if cube_active:
                    vx, vy = cube[0] - ox, cube[1] - oy
                    dist = math.hypot(vx, vy)
                    if dist <= ir_range and (dist < 1e-9
                                             or (vx * dx + vy * dy) / dist >= ir_cos):
                        hit = 1.0
                s[i] = hit
    return s


def advance(pose, wheel_angle, joint_pos, cube, wheel_cmd, joint_mode,
            joint_p1, joint_p2, wheel_pinv, limb_dir, body_scal,
            extent, rects, rough, arena_scal, t0, dt, n_sub):
    """Integrate n_sub physics substeps of length dt starting at t0.

    Mutates pose, wheel_angle, joint_pos and cube in place. Commands are
    held constant: wheel_cmd gives wheel angular velocity; joints either
    slew toward a goal (mode 0, p1 = goal) or track a sinusoid
    (mode 1, position = p2 * sin(p1 * t)). The body twist is capped at
    physical limits before integration. Semi-implicit Euler: heading
    first, then position in the new frame. Returns cube contact count.
    """
    footprint, wheel_radius, k_thrust, joint_slew, v_cap, om_cap = body_scal
    task, rough_cell, cube_size, _, _, _ = arena_scal
    task = int(task)
    contacts = 0
    nj = joint_pos.shape[0]

    rim = wheel_cmd * wheel_radius
    base = wheel_pinv @ rim if wheel_pinv.shape[1] > 0 else np.zeros(3)

    for k in range(n_sub):
        t1 = t0 + (k + 1) * dt
        vx, vy, om = base[0], base[1], base[2]
        for j in range(nj):
            old = joint_pos[j]
            if joint_mode == 0:
                step = joint_p1[j] - old
                step = max(-joint_slew * dt, min(joint_slew * dt, step))
                joint_pos[j] = old + step
            else:
                joint_pos[j] = joint_p2[j] * math.sin(joint_p1[j] * t1)
            sweep = abs(joint_pos[j] - old) / dt
            vx += k_thrust * sweep * limb_dir[j, 0]
            vy += k_thrust * sweep * limb_dir[j, 1]
        wheel_angle += wheel_cmd * dt

        speed = math.hypot(vx, vy)
        if speed > v_cap:
            vx *= v_cap / speed
            vy *= v_cap / speed
        om = max(-om_cap, min(om_cap, om))

        pose[2] += om * dt
        ch, sh = math.cos(pose[2]), math.sin(pose[2])
        wx = ch * vx - sh * vy
        wy = sh * vx + ch * vy
        if task == 3:
            lin = 1.0 - 0.7 * min(1.0, max(0.0, pose[0] / extent[0]))
            gx = min(rough.shape[0] - 1, max(0, int(pose[0] / rough_cell)))
            gy = min(rough.shape[1] - 1, max(0, int(pose[1] / rough_cell)))
            factor = lin * rough[gx, gy]
            wx *= factor
            wy *= factor
        pose[0] += wx * dt
        pose[1] += wy * dt

        # arena boundary, then interior obstacles (push out of the
        # rectangle inflated by the footprint radius)
        pose[0] = max(footprint, min(extent[0] - footprint, pose[0]))
        pose[1] = max(footprint, min(extent[1] - footprint, pose[1]))
        for i in range(rects.shape[0]):
            x0, y0, x1, y1 = (rects[i, 0] - footprint, rects[i, 1] - footprint,
                              rects[i, 2] + footprint, rects[i, 3] + footprint)
            if x0 < pose[0] < x1 and y0 < pose[1] < y1:
                moves = (pose[0] - x0, x1 - pose[0], pose[1] - y0, y1 - pose[1])
                mi = int(np.argmin(moves))
                if mi == 0:
                    pose[0] = x0
                elif mi == 1:
                    pose[0] = x1
                elif mi == 2:
                    pose[1] = y0
                else:
                    pose[1] = y1

        if task == 4:
            half = cube_size / 2.0
            ddx, ddy = cube[0] - pose[0], cube[1] - pose[1]
            dist = math.hypot(ddx, ddy)
            overlap = footprint + half - dist
            if overlap > 0.0:
                contacts += 1
                if dist < 1e-9:
                    ddx, ddy, dist = 1.0, 0.0, 1.0
                cube[0] += ddx / dist * overlap
                cube[1] += ddy / dist * overlap
                cube[0] = max(half, min(extent[0] - half, cube[0]))
                cube[1] = max(half, min(extent[1] - half, cube[1]))
    return contacts


def run_episode_core(family,
                     C, c, A, b, C0, c0, A0, b0, hk_scal, dither_w, dither_phi,
                     w1, b1, w2, b2,
                     w_in, w_rec, b_h, w_out, b_out,
                     s_kind, s_idx, a_kind, a_idx,
                     ray_origin, ray_dir, wheel_pinv, limb_dir, body_scal,
                     extent, rects, rough, arena_scal, start, cube0,
                     n_ctl, ctl_dt, n_sub, dt, act_scal):
    """Full episode control loop: sense, act, integrate, sample.

    Returns (poses, cubes, tle, e_norm, contacts, fault, hk_resets)
    where poses is the (n_ctl+1, 3) sampled trajectory and cubes the
    sampled cube positions. fault = 1 aborts on a non-finite action;
    hk_resets counts parameter re-initializations.
    """
    v_max, f_max, amplitude = act_scal
    m = a_kind.shape[0]
    nw = wheel_pinv.shape[1]
    nj = limb_dir.shape[0]

    pose = start.copy()
    wheel_angle = np.zeros(nw)
    joint_pos = np.zeros(nj)
    cube = cube0.copy()
    poses = np.zeros((n_ctl + 1, 3))
    poses[0] = pose
    cubes = np.zeros((n_ctl + 1, 2))
    cubes[0] = cube
    tle = np.zeros(n_ctl)
    e_norm = np.zeros(n_ctl)
    wheel_cmd = np.zeros(nw)
    joint_p1 = np.zeros(nj)
    joint_p2 = np.zeros(nj)
    a_prev = np.zeros(m)
    have_prev = False
    h = np.zeros(b_h.shape[0])
    contacts = 0
    fault = 0
    hk_resets = 0
    joint_mode = 0 if family == 0 else 1

    dither_amp = hk_scal[4]
    for step in range(n_ctl):
        s = read_sensors(pose, wheel_angle, joint_pos, s_kind, s_idx,
                         ray_origin, ray_dir, extent, rects, cube, arena_scal)
        if family == 0:
            if dither_amp > 0.0:
                s = s + dither_amp * np.sin(dither_w * (step * ctl_dt) + dither_phi)
            a, en, tl, ok = hk_step(C, c, A, b, a_prev, s, have_prev, hk_scal)
            if ok == 0:
                C[:] = C0
                c[:] = c0
                A[:] = A0
                b[:] = b0
                hk_resets += 1
            tle[step] = tl
            e_norm[step] = en
            a_prev = a
            have_prev = True
        elif family == 1:
            a = mlp_forward(w1, b1, w2, b2, s)
        elif family == 2:
            a = elman_step(w_in, w_rec, b_h, w_out, b_out, h, s)
        else:
            a = np.zeros(m)
        if not np.all(np.isfinite(a)):
            fault = 1
            poses[step + 1:] = pose
            cubes[step + 1:] = cube
            break

        for j in range(m):
            if a_kind[j] == 0:
                wheel_cmd[a_idx[j]] = a[j] * v_max
            elif joint_mode == 0:
                joint_p1[a_idx[j]] = a[j] * HALF_PI
            else:
                joint_p1[a_idx[j]] = TWO_PI * f_max * (a[j] + 1.0) / 2.0
                joint_p2[a_idx[j]] = amplitude

        contacts += advance(pose, wheel_angle, joint_pos, cube, wheel_cmd,
                            joint_mode, joint_p1, joint_p2, wheel_pinv, limb_dir,
                            body_scal, extent, rects, rough, arena_scal,
                            step * ctl_dt, dt, n_sub)
        poses[step + 1] = pose
        cubes[step + 1] = cube

    return poses, cubes, tle, e_norm, contacts, fault, hk_resets
