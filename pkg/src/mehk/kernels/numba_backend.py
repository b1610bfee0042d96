"""Numba-JIT twins of the numpy reference kernels.

Same signatures and semantics as numpy_backend; scalar loops replace
vectorized expressions where that is what numba compiles best. fastmath
stays off so both backends agree to float rounding.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


@njit(cache=True)
def hk_step(C, c, A, b, a_prev, s, have_prev, hk_scal):
    eps_c = hk_scal[0]
    eps_a = hk_scal[1]
    lam = hk_scal[2]
    clip = hk_scal[3]
    n = s.shape[0]
    m = c.shape[0]
    if n == 0 or m == 0:
        return np.zeros(m), 0.0, 0.0, 1

    z = np.dot(C, s) + c
    a = np.tanh(z)
    if not have_prev:
        return a, 0.0, 0.0, 1

    E = s - (np.dot(A, a_prev) + b)
    gp = 1.0 - a * a
    L = np.dot(A * gp, C)
    LT = np.ascontiguousarray(L.T)
    M = np.dot(LT, L)
    for i in range(n):
        M[i, i] += lam
    xi = np.linalg.solve(M, np.dot(LT, E))
    tle = float(np.dot(xi, xi))
    w = np.linalg.solve(M, xi)

    G = 2.0 * (np.outer(E - np.dot(L, xi), w) - np.outer(np.dot(L, w), xi))
    GT = np.ascontiguousarray(G.T)
    CG = np.dot(C, GT)                     # (m, n)
    h = np.zeros(m)
    for k in range(m):
        acc = 0.0
        for i in range(n):
            acc += CG[k, i] * A[i, k]
        h[k] = acc
    g2 = -2.0 * a * gp
    AtG = np.dot(np.ascontiguousarray(A.T), G)
    for j in range(m):
        hg = h[j] * g2[j]
        for i in range(n):
            C[j, i] -= eps_c * (gp[j] * AtG[j, i] + hg * s[i])
        c[j] -= eps_c * hg
    for i in range(n):
        for j in range(m):
            A[i, j] -= eps_a * (-2.0 * E[i] * a_prev[j])
        b[i] -= eps_a * (-2.0 * E[i])

    ok = 1
    for j in range(m):
        for i in range(n):
            v = C[j, i]
            if not math.isfinite(v):
                ok = 0
            C[j, i] = max(-clip, min(clip, v))
        v = c[j]
        if not math.isfinite(v):
            ok = 0
        c[j] = max(-clip, min(clip, v))
    for i in range(n):
        for j in range(m):
            v = A[i, j]
            if not math.isfinite(v):
                ok = 0
            A[i, j] = max(-clip, min(clip, v))
        v = b[i]
        if not math.isfinite(v):
            ok = 0
        b[i] = max(-clip, min(clip, v))
    if not math.isfinite(tle):
        tle = 0.0
        ok = 0
    return a, float(np.sqrt(np.dot(E, E))), tle, ok


@njit(cache=True)
def mlp_forward(w1, b1, w2, b2, x):
    if b2.shape[0] == 0:
        return np.zeros(0)
    return np.tanh(np.dot(w2, np.tanh(np.dot(w1, x) + b1)) + b2)


@njit(cache=True)
def elman_step(w_in, w_rec, b_h, w_out, b_out, h, x):
    if b_out.shape[0] == 0:
        return np.zeros(0)
    h[:] = np.tanh(np.dot(w_in, x) + np.dot(w_rec, h) + b_h)
    return np.tanh(np.dot(w_out, h) + b_out)


@njit(cache=True)
def _wrap_angle(a):
    return a - TWO_PI * math.floor((a + math.pi) / TWO_PI)


@njit(cache=True)
def _ray_distance(ox, oy, dx, dy, extent, rects, cube_active, cube, cube_size, rng_max):
    best = rng_max
    if dx > 1e-12:
        best = min(best, (extent[0] - ox) / dx)
    elif dx < -1e-12:
        best = min(best, -ox / dx)
    if dy > 1e-12:
        best = min(best, (extent[1] - oy) / dy)
    elif dy < -1e-12:
        best = min(best, -oy / dy)
    nb = rects.shape[0] + (1 if cube_active else 0)
    half = cube_size / 2.0
    for i in range(nb):
        if i < rects.shape[0]:
            x0, y0, x1, y1 = rects[i, 0], rects[i, 1], rects[i, 2], rects[i, 3]
        else:
            x0, y0, x1, y1 = cube[0] - half, cube[1] - half, cube[0] + half, cube[1] + half
        tmin = 0.0
        tmax = np.inf
        ok = True
        if abs(dx) < 1e-12:
            if ox < x0 or ox > x1:
                ok = False
        else:
            t1 = (x0 - ox) / dx
            t2 = (x1 - ox) / dx
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
        if ok and abs(dy) < 1e-12:
            if oy < y0 or oy > y1:
                ok = False
        elif ok:
            t1 = (y0 - oy) / dy
            t2 = (y1 - oy) / dy
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
        if ok and tmin <= tmax:
            best = min(best, tmin)
    return best


@njit(cache=True)
def read_sensors(pose, wheel_angle, joint_pos, s_kind, s_idx, ray_origin, ray_dir,
                 extent, rects, cube, arena_scal):
    cube_active = int(arena_scal[0]) == 4
    cube_size = arena_scal[2]
    rng_max = arena_scal[3]
    ir_range = arena_scal[4]
    ir_cos = arena_scal[5]
    n = s_kind.shape[0]
    s = np.zeros(n)
    ch = math.cos(pose[2])
    sh = math.sin(pose[2])
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
                    vx = cube[0] - ox
                    vy = cube[1] - oy
                    dist = math.hypot(vx, vy)
                    if dist <= ir_range and (dist < 1e-9
                                             or (vx * dx + vy * dy) / dist >= ir_cos):
                        hit = 1.0
                s[i] = hit
    return s


@njit(cache=True)
def advance(pose, wheel_angle, joint_pos, cube, wheel_cmd, joint_mode,
            joint_p1, joint_p2, wheel_pinv, limb_dir, body_scal,
            extent, rects, rough, arena_scal, t0, dt, n_sub):
    footprint = body_scal[0]
    wheel_radius = body_scal[1]
    k_thrust = body_scal[2]
    joint_slew = body_scal[3]
    v_cap = body_scal[4]
    om_cap = body_scal[5]
    task = int(arena_scal[0])
    rough_cell = arena_scal[1]
    cube_size = arena_scal[2]
    contacts = 0
    nj = joint_pos.shape[0]
    nw = wheel_cmd.shape[0]

    bx = 0.0
    by = 0.0
    bo = 0.0
    for i in range(nw):
        rim = wheel_cmd[i] * wheel_radius
        bx += wheel_pinv[0, i] * rim
        by += wheel_pinv[1, i] * rim
        bo += wheel_pinv[2, i] * rim

    for k in range(n_sub):
        t1 = t0 + (k + 1) * dt
        vx = bx
        vy = by
        om = bo
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
        for i in range(nw):
            wheel_angle[i] += wheel_cmd[i] * dt

        speed = math.hypot(vx, vy)
        if speed > v_cap:
            vx *= v_cap / speed
            vy *= v_cap / speed
        om = max(-om_cap, min(om_cap, om))

        pose[2] += om * dt
        ch = math.cos(pose[2])
        sh = math.sin(pose[2])
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

        pose[0] = max(footprint, min(extent[0] - footprint, pose[0]))
        pose[1] = max(footprint, min(extent[1] - footprint, pose[1]))
        for i in range(rects.shape[0]):
            x0 = rects[i, 0] - footprint
            y0 = rects[i, 1] - footprint
            x1 = rects[i, 2] + footprint
            y1 = rects[i, 3] + footprint
            if x0 < pose[0] < x1 and y0 < pose[1] < y1:
                m0 = pose[0] - x0
                m1 = x1 - pose[0]
                m2 = pose[1] - y0
                m3 = y1 - pose[1]
                if m0 <= m1 and m0 <= m2 and m0 <= m3:
                    pose[0] = x0
                elif m1 <= m2 and m1 <= m3:
                    pose[0] = x1
                elif m2 <= m3:
                    pose[1] = y0
                else:
                    pose[1] = y1

        if task == 4:
            half = cube_size / 2.0
            ddx = cube[0] - pose[0]
            ddy = cube[1] - pose[1]
            dist = math.hypot(ddx, ddy)
            overlap = footprint + half - dist
            if overlap > 0.0:
                contacts += 1
                if dist < 1e-9:
                    ddx = 1.0
                    ddy = 0.0
                    dist = 1.0
                cube[0] += ddx / dist * overlap
                cube[1] += ddy / dist * overlap
                cube[0] = max(half, min(extent[0] - half, cube[0]))
                cube[1] = max(half, min(extent[1] - half, cube[1]))
    return contacts


@njit(cache=True)
def run_episode_core(family,
                     C, c, A, b, C0, c0, A0, b0, hk_scal, dither_w, dither_phi,
                     w1, b1, w2, b2,
                     w_in, w_rec, b_h, w_out, b_out,
                     s_kind, s_idx, a_kind, a_idx,
                     ray_origin, ray_dir, wheel_pinv, limb_dir, body_scal,
                     extent, rects, rough, arena_scal, start, cube0,
                     n_ctl, ctl_dt, n_sub, dt, act_scal):
    v_max = act_scal[0]
    f_max = act_scal[1]
    amplitude = act_scal[2]
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
                for i in range(s.shape[0]):
                    s[i] += dither_amp * math.sin(dither_w[i] * (step * ctl_dt) + dither_phi[i])
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
        finite = True
        for j in range(m):
            if not math.isfinite(a[j]):
                finite = False
        if not finite:
            fault = 1
            for rest in range(step + 1, n_ctl + 1):
                poses[rest, 0] = pose[0]
                poses[rest, 1] = pose[1]
                poses[rest, 2] = pose[2]
                cubes[rest, 0] = cube[0]
                cubes[rest, 1] = cube[1]
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
