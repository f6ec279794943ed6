"""Moment/thrust to motor-speed allocation.

The actuation model is quadratic in motor speed with a transient term from
rotor spin inertia:

    [mu_c; T_c] = G1 w_c**2 + G2 (w_c - w) / tau_m

allocate() inverts this with a damped Newton iteration. When the exact
solution violates the speed limits, the command is made feasible in a
fixed priority order: the yaw moment is projected onto its feasible
interval first, then total thrust is adjusted, and as a last resort the
yaw moment is centered between the crossed bounds and the speeds clipped.
Roll and pitch moments are never touched directly.

allocate_linearized() is a first-order alternative that inverts the model
linearized about the filtered motor speeds, with a one-sample backshift
term standing in for the rotor spin-up transient. It is cheap but known to
oscillate on the yaw axis when the motor time constant is much larger than
the control interval; it exists for comparison studies.
"""

import numpy as np

from .errors import NoConvergence


def closed_form_speeds(mu_c, thrust_c, params):
    """Speeds from the steady-state model alone (no spin-inertia term).

    Squared speeds are clipped to the feasible band before the root, so
    the result is always a valid command.
    """
    target = np.array([mu_c[0], mu_c[1], mu_c[2], thrust_c])
    w_sq = params.g1_inv @ target
    np.clip(w_sq, params.omega_min ** 2, params.omega_max ** 2, out=w_sq)
    return np.sqrt(w_sq)


def feasible_yaw_moment(mu_x, mu_y, thrust, params):
    """Yaw-moment interval realizable at the given roll/pitch/thrust.

    Derived from requiring each squared motor speed of the steady-state
    inversion to sit inside [omega_min^2, omega_max^2]; both sign
    combinations of the roll/pitch terms are enumerated and the tightest
    pair is returned. The interval may be empty (lower > upper).
    """
    c = params.k_yaw / params.k_thrust
    a = mu_y / params.arm_x - mu_x / params.arm_y
    b = mu_y / params.arm_x + mu_x / params.arm_y
    t_lo = 4.0 * params.k_thrust * params.omega_min ** 2
    t_hi = 4.0 * params.k_thrust * params.omega_max ** 2
    lower = max(c * (t_lo + thrust + a), c * (t_lo + thrust - a),
                -c * (t_hi + thrust + b), -c * (t_hi + thrust - b))
    upper = min(c * (t_hi + thrust + a), c * (t_hi + thrust - a),
                -c * (t_lo + thrust + b), -c * (t_lo + thrust - b))
    return lower, upper


def _resolve_saturation(mu_c, thrust_c, params):
    """Feasible (mu, thrust) nearest the command, yaw and thrust adjusted."""
    mu_x, mu_y, mu_z = mu_c
    lower, upper = feasible_yaw_moment(mu_x, mu_y, thrust_c, params)
    if lower <= upper:
        return np.array([mu_x, mu_y, min(max(mu_z, lower), upper)]), thrust_c

    # Empty interval: shift thrust until the bounds meet. The bound pairs
    # move with equal and opposite rates in thrust, so feasibility in
    # thrust is itself an interval, additionally limited by what the
    # motors can produce at all.
    t_lo = 4.0 * params.k_thrust * params.omega_min ** 2
    t_hi = 4.0 * params.k_thrust * params.omega_max ** 2
    a = mu_y / params.arm_x - mu_x / params.arm_y
    b = mu_y / params.arm_x + mu_x / params.arm_y
    span = t_hi - t_lo
    if 2.0 * abs(a) <= span and 2.0 * abs(b) <= span:
        th_min = max(-t_hi + 0.5 * (abs(a) + abs(b)), -t_hi)
        th_max = min(-t_lo - 0.5 * (abs(a) + abs(b)), -t_lo)
        if th_min <= th_max:
            thrust_adj = min(max(thrust_c, th_min), th_max)
            lower, upper = feasible_yaw_moment(mu_x, mu_y, thrust_adj, params)
            mu_z_adj = min(max(mu_z, lower), upper)
            return np.array([mu_x, mu_y, mu_z_adj]), thrust_adj

    # No feasible thrust either: split the difference and let the final
    # clip absorb the rest.
    return np.array([mu_x, mu_y, 0.5 * (lower + upper)]), thrust_c


def allocate(mu_c, thrust_c, motor_speeds, params, max_iter=20, tol=1e-8):
    """Motor speed commands realizing a moment/thrust command.

    Returns (w_c, mu_out, thrust_out); the last two equal the inputs
    unless saturation forced an adjustment. motor_speeds is the current
    measured speed, which the spin-inertia transient acts against.
    """
    target = np.array([mu_c[0], mu_c[1], mu_c[2], thrust_c])
    g2_tau = params.g2 / params.motor_tau

    w = params.g1_inv @ target
    np.clip(w, params.omega_min ** 2, params.omega_max ** 2, out=w)
    w = np.sqrt(w)

    scale = np.linalg.norm(target) + 1e-9
    converged = False
    res = params.g1 @ (w * w) + g2_tau @ (w - motor_speeds) - target
    err = np.linalg.norm(res)
    for _ in range(max_iter):
        if err <= tol * scale:
            converged = True
            break
        jac = 2.0 * params.g1 * w + g2_tau
        try:
            dw = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        for _ in range(6):
            w_try = w - lam * dw
            res_try = (params.g1 @ (w_try * w_try)
                       + g2_tau @ (w_try - motor_speeds) - target)
            err_try = np.linalg.norm(res_try)
            if err_try < err:
                break
            lam *= 0.5
        else:
            break
        w, res, err = w_try, res_try, err_try
    else:
        converged = err <= tol * scale

    if not converged:
        # Fall back to the steady-state closed form; saturation handling
        # below still applies to it.
        w = closed_form_speeds(mu_c, thrust_c, params)

    slack = 1e-9 * params.omega_max
    if (w >= params.omega_min - slack).all() and (w <= params.omega_max + slack).all():
        np.clip(w, params.omega_min, params.omega_max, out=w)
        return w, np.asarray(mu_c, dtype=float).copy(), thrust_c

    mu_adj, thrust_adj = _resolve_saturation(np.asarray(mu_c, dtype=float),
                                             thrust_c, params)
    w = closed_form_speeds(mu_adj, thrust_adj, params)
    return w, mu_adj, thrust_adj


def allocate_linearized(mu_c, thrust_c, mu_f, thrust_f, motor_f, params, dt,
                        backshift):
    """First-order incremental allocation about the filtered motor speeds.

    backshift is the previous tick's commanded speed increment; it feeds
    the spin-inertia term one sample late. Returns (w_c, new_backshift).
    """
    delta = np.array([mu_c[0] - mu_f[0], mu_c[1] - mu_f[1],
                      mu_c[2] - mu_f[2], thrust_c - thrust_f])
    g2_dt = params.g2 / dt
    m = 2.0 * params.g1 * motor_f + g2_dt
    try:
        dw = np.linalg.solve(m, delta + g2_dt @ backshift)
    except np.linalg.LinAlgError as e:
        raise NoConvergence("linearized allocation matrix is singular") from e
    w_c = np.clip(motor_f + dw, params.omega_min, params.omega_max)
    return w_c, w_c - motor_f
