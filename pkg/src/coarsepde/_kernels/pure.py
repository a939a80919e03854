"""Pure-numpy implementations of the hot kernels.

These mirror the compiled versions in ``_core.pyx`` operation for
operation (same expression trees, same accumulation order), so both
backends produce bit-identical results. Keep the two files in sync.
"""

import numpy as np


def box_counts(positions: np.ndarray, n_boxes: int,
               domain_length: float) -> np.ndarray:
    """Particle counts per box, box i = [i*w, (i+1)*w)."""
    scale = n_boxes / domain_length
    idx = np.floor(positions * scale).astype(np.int64)
    np.minimum(idx, n_boxes - 1, out=idx)
    return np.bincount(idx, minlength=n_boxes)


def box_moments(positions: np.ndarray, n_boxes: int, domain_length: float,
                inv_r: float, k_max: int) -> np.ndarray:
    """Raw moments M_0..M_k of in-box positions rescaled to [0, 1].

    Returns an (n_boxes, k_max+1) array; M_k = inv_r * sum(x_p^k).
    """
    scale = n_boxes / domain_length
    w = domain_length / n_boxes
    idx = np.floor(positions * scale).astype(np.int64)
    np.minimum(idx, n_boxes - 1, out=idx)
    xn = (positions - idx * w) * scale
    out = np.empty((n_boxes, k_max + 1), dtype=np.float64)
    out[:, 0] = np.bincount(idx, minlength=n_boxes) * inv_r
    p = xn
    for k in range(1, k_max + 1):
        out[:, k] = np.bincount(idx, weights=p, minlength=n_boxes) * inv_r
        if k < k_max:
            p = p * xn
    return out


def em_step(positions: np.ndarray, noise: np.ndarray, dt: float,
            n_boxes: int, domain_length: float, inv_wr: float) -> np.ndarray:
    """One Euler-Maruyama step with box-histogram density in the drift.

    ``noise`` is the pre-scaled stochastic increment sqrt(2 nu dt) * xi;
    density is estimated from the positions at step start (self included).
    """
    scale = n_boxes / domain_length
    half_dt = 0.5 * dt
    idx = np.floor(positions * scale).astype(np.int64)
    np.minimum(idx, n_boxes - 1, out=idx)
    rho = np.bincount(idx, minlength=n_boxes) * inv_wr
    y = positions + half_dt * rho[idx] + noise
    y = np.fmod(y, domain_length)
    y = np.where(y < 0.0, y + domain_length, y)
    y = np.where(y >= domain_length, 0.0, y)
    return y


# Jiang-Shu WENO5 constants.
_WENO_EPS = 1e-6
_G0, _G1, _G2 = 0.1, 0.6, 0.3
_C13 = 13.0 / 12.0


def burgers_rhs(u: np.ndarray, dz: float, nu: float) -> np.ndarray:
    """Semi-discrete RHS of u_t = -(u^2/2)_z + nu u_zz on a periodic grid.

    WENO5 reconstruction of the interface states, local Lax-Friedrichs
    flux, 4th-order central diffusion; ``u`` holds cell averages.
    """
    um2 = np.roll(u, 2)
    um1 = np.roll(u, 1)
    up1 = np.roll(u, -1)
    up2 = np.roll(u, -2)
    up3 = np.roll(u, -3)

    def _weno_state(vm2, vm1, v0, vp1, vp2):
        # Explicit t*t squares keep this bit-identical to the compiled loop.
        q0 = (2.0 * vm2 - 7.0 * vm1 + 11.0 * v0) / 6.0
        q1 = (-vm1 + 5.0 * v0 + 2.0 * vp1) / 6.0
        q2 = (2.0 * v0 + 5.0 * vp1 - vp2) / 6.0
        t = vm2 - 2.0 * vm1 + v0
        b0 = _C13 * (t * t)
        t = vm2 - 4.0 * vm1 + 3.0 * v0
        b0 = b0 + 0.25 * (t * t)
        t = vm1 - 2.0 * v0 + vp1
        b1 = _C13 * (t * t)
        t = vm1 - vp1
        b1 = b1 + 0.25 * (t * t)
        t = v0 - 2.0 * vp1 + vp2
        b2 = _C13 * (t * t)
        t = 3.0 * v0 - 4.0 * vp1 + vp2
        b2 = b2 + 0.25 * (t * t)
        t = _WENO_EPS + b0
        a0 = _G0 / (t * t)
        t = _WENO_EPS + b1
        a1 = _G1 / (t * t)
        t = _WENO_EPS + b2
        a2 = _G2 / (t * t)
        asum = a0 + a1 + a2
        return (a0 * q0 + a1 * q1 + a2 * q2) / asum

    u_minus = _weno_state(um2, um1, u, up1, up2)
    u_plus = _weno_state(up3, up2, up1, u, um1)

    alpha = np.maximum(np.abs(u_minus), np.abs(u_plus))
    flux = 0.5 * ((0.5 * u_minus) * u_minus + (0.5 * u_plus) * u_plus) \
        - (0.5 * alpha) * (u_plus - u_minus)

    inv_dz = 1.0 / dz
    adv = (np.roll(flux, 1) - flux) * inv_dz
    inv_12dz2 = 1.0 / (12.0 * dz * dz)
    diff = nu * ((-um2 + 16.0 * um1 - 30.0 * u + 16.0 * up1 - up2) * inv_12dz2)
    return adv + diff
