"""Jitted numerical kernels for the planar chain dynamics and rollout loop.

Everything here operates on plain float64 arrays so it can be compiled by
numba. The public API in `plant`, `control` and `rollout` wraps these with
the model/trajectory containers; both the single-step helpers and the full
rollout loop call the same kernels, so the two paths agree bit for bit.

Coordinates: joint angles are relative (each measured against the previous
link), zero along +x, gravity along -y. Links are uniform rods, so link i
has its centre of mass at l_i/2 and rotational inertia m_i*l_i^2/12 about
it. The mass matrix is assembled from the constant coupling coefficients

    b[j, k] = sum_{i >= max(j,k)} m_i * r_ij * r_ik,   r_ij = l_j (j < i),
                                                       r_ii = l_i / 2,

via M(q) = L^T H(theta) L with H[j,k] = b[j,k]*cos(theta_j - theta_k)
(+ rod inertia on the diagonal) and L the lower-triangular ones matrix
mapping relative to cumulative angles. The Coriolis matrix uses Christoffel
symbols of M, which makes dM/dt - 2C skew-symmetric.
"""

import numpy as np
from numba import njit

# Rollout divergence guard: a joint angle beyond this is treated as blowup.
BLOWUP_ANGLE = 1.0e3


@njit(cache=True)
def cum_angles(q):
    n = q.shape[0]
    theta = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc += q[i]
        theta[i] = acc
    return theta


@njit(cache=True)
def mass_matrix(b, inertia, q):
    n = q.shape[0]
    theta = cum_angles(q)
    h = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            h[j, k] = b[j, k] * np.cos(theta[j] - theta[k])
        h[j, j] += inertia[j]
    m = np.empty((n, n))
    for a in range(n):
        for c in range(n):
            s = 0.0
            for j in range(a, n):
                for k in range(c, n):
                    s += h[j, k]
            m[a, c] = s
    return m


@njit(cache=True)
def mass_matrix_partials(b, q):
    """dM/dq as a tensor dm[m, a, c] = d M[a, c] / d q[m]."""
    n = q.shape[0]
    theta = cum_angles(q)
    dm = np.zeros((n, n, n))
    for m in range(n):
        for a in range(n):
            for c in range(n):
                s = 0.0
                for j in range(a, n):
                    for k in range(c, n):
                        # d theta_j / d q_m = 1 for m <= j
                        dj = 1.0 if m <= j else 0.0
                        dk = 1.0 if m <= k else 0.0
                        if dj != dk:
                            s -= b[j, k] * np.sin(theta[j] - theta[k]) * (dj - dk)
                dm[m, a, c] = s
    return dm


@njit(cache=True)
def coriolis_matrix(b, q, qd):
    """Christoffel-symbol C(q, qd) such that u = M qdd + C qd + g + D qd."""
    n = q.shape[0]
    dm = mass_matrix_partials(b, q)
    c = np.zeros((n, n))
    for k in range(n):
        for j in range(n):
            s = 0.0
            for i in range(n):
                s += 0.5 * (dm[i, k, j] + dm[j, k, i] - dm[k, i, j]) * qd[i]
            c[k, j] = s
    return c


@njit(cache=True)
def gravity_vector(gamma, gravity, q):
    n = q.shape[0]
    theta = cum_angles(q)
    g = np.zeros(n)
    for a in range(n):
        s = 0.0
        for j in range(a, n):
            s += gamma[j] * np.cos(theta[j])
        g[a] = gravity * s
    return g


@njit(cache=True)
def solve_spd(m, rhs):
    """Cholesky solve; the chain's mass matrix is symmetric positive definite."""
    n = m.shape[0]
    low = np.zeros((n, n))
    for j in range(n):
        s = m[j, j]
        for k in range(j):
            s -= low[j, k] * low[j, k]
        low[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            t = m[i, j]
            for k in range(j):
                t -= low[i, k] * low[j, k]
            low[i, j] = t / low[j, j]
    y = np.zeros(n)
    for i in range(n):
        t = rhs[i]
        for k in range(i):
            t -= low[i, k] * y[k]
        y[i] = t / low[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        t = y[i]
        for k in range(i + 1, n):
            t -= low[k, i] * x[k]
        x[i] = t / low[i, i]
    return x


@njit(cache=True)
def inverse_dynamics(b, inertia, gamma, damping, gravity, q, qd, qdd):
    n = q.shape[0]
    m = mass_matrix(b, inertia, q)
    c = coriolis_matrix(b, q, qd)
    g = gravity_vector(gamma, gravity, q)
    u = np.empty(n)
    for i in range(n):
        s = g[i] + damping[i] * qd[i]
        for j in range(n):
            s += m[i, j] * qdd[j] + c[i, j] * qd[j]
        u[i] = s
    return u


@njit(cache=True)
def forward_dynamics(b, inertia, gamma, damping, gravity, q, qd, u):
    n = q.shape[0]
    m = mass_matrix(b, inertia, q)
    c = coriolis_matrix(b, q, qd)
    g = gravity_vector(gamma, gravity, q)
    rhs = np.empty(n)
    for i in range(n):
        s = u[i] - g[i] - damping[i] * qd[i]
        for j in range(n):
            s -= c[i, j] * qd[j]
        rhs[i] = s
    return solve_spd(m, rhs)


@njit(cache=True)
def rk4_step(b, inertia, gamma, damping, gravity, q, qd, u, dt):
    """One classical RK4 step of the chain ODE with zero-order-hold torque."""
    k1q = qd
    k1v = forward_dynamics(b, inertia, gamma, damping, gravity, q, qd, u)
    q2 = q + 0.5 * dt * k1q
    v2 = qd + 0.5 * dt * k1v
    k2q = v2
    k2v = forward_dynamics(b, inertia, gamma, damping, gravity, q2, v2, u)
    q3 = q + 0.5 * dt * k2q
    v3 = qd + 0.5 * dt * k2v
    k3q = v3
    k3v = forward_dynamics(b, inertia, gamma, damping, gravity, q3, v3, u)
    q4 = q + dt * k3q
    v4 = qd + dt * k3v
    k4q = v4
    k4v = forward_dynamics(b, inertia, gamma, damping, gravity, q4, v4, u)
    q_next = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    qd_next = qd + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q_next, qd_next


@njit(cache=True)
def end_effector(lengths, base_x, base_y, q):
    n = q.shape[0]
    x = base_x
    y = base_y
    acc = 0.0
    for i in range(n):
        acc += q[i]
        x += lengths[i] * np.cos(acc)
        y += lengths[i] * np.sin(acc)
    return x, y


@njit(cache=True)
def pd_torque(kp, kd, q_des, qd_des, q, qd, limits):
    n = q.shape[0]
    u = np.empty(n)
    for i in range(n):
        raw = kp[i] * (q_des[i] - q[i]) + kd[i] * (qd_des[i] - qd[i])
        if raw > limits[i]:
            raw = limits[i]
        elif raw < -limits[i]:
            raw = -limits[i]
        u[i] = raw
    return u


@njit(cache=True)
def rollout(b, inertia, gamma, damping, gravity, lengths, base_x, base_y,
            q_des, qd_des, kp, kd, limits, dt):
    """Closed-loop execution of the full setpoint table.

    Tick 0 logs the rest state on the first setpoint with zero torque; every
    later tick applies the PD command for that tick's setpoint and advances
    the plant one RK4 step. Returns (q, qd, u, ee, status); status is -1 on
    success, else the index of the first non-finite/blown-up tick.
    """
    ticks = q_des.shape[0]
    n = q_des.shape[1]
    q_log = np.zeros((ticks, n))
    qd_log = np.zeros((ticks, n))
    u_log = np.zeros((ticks, n))
    ee_log = np.zeros((ticks, 2))

    q = q_des[0].copy()
    qd = np.zeros(n)
    q_log[0] = q
    ex, ey = end_effector(lengths, base_x, base_y, q)
    ee_log[0, 0] = ex
    ee_log[0, 1] = ey

    for i in range(1, ticks):
        u = pd_torque(kp, kd, q_des[i], qd_des[i], q, qd, limits)
        q, qd = rk4_step(b, inertia, gamma, damping, gravity, q, qd, u, dt)
        ok = True
        for j in range(n):
            if not (np.isfinite(q[j]) and np.isfinite(qd[j])):
                ok = False
            elif np.abs(q[j]) > BLOWUP_ANGLE:
                ok = False
        if not ok:
            return q_log, qd_log, u_log, ee_log, i
        q_log[i] = q
        qd_log[i] = qd
        u_log[i] = u
        ex, ey = end_effector(lengths, base_x, base_y, q)
        ee_log[i, 0] = ex
        ee_log[i, 1] = ey
    return q_log, qd_log, u_log, ee_log, -1
