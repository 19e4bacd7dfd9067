"""Linear stability of the curl-Maxwell subsystem and Langmuir oscillations.

The explicit splitting propagates each Fourier mode of (e2, b3) with a
2x2 transfer matrix of trace 2 - 2*alpha^2*r(theta), alpha = dt/dx and
r(theta) the mass-symbol ratio times (1 - cos theta); the step is stable
when alpha^2 * r <= 2 for every mode.  The implicit midpoint curl step
has unit-modulus amplification for every dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldState, curl_avf_step, field_energy
from .splines import (
    SplineSpace,
    circulant_solve,
    derivative_stencil,
    mass_operator,
    mass_stencil,
)

__all__ = [
    "AmplificationPair",
    "mass_symbol",
    "symbol_ratio",
    "maxwell_alpha_max",
    "langmuir_amplification",
    "curl_transfer_matrix",
    "empirical_stability_scan",
]


@dataclass(frozen=True)
class AmplificationPair:
    """Roots xi of the per-mode amplification quadratic xi^2 - 2q xi + 1."""

    xi_plus: complex
    xi_minus: complex


def mass_symbol(p: int, theta) -> np.ndarray:
    """Fourier symbol of the degree-p mass matrix on dx=1 at mode angle theta."""
    stencil = mass_stencil(p, 1.0, 2 * p + 3).stencil
    theta = np.asarray(theta, dtype=float)
    out = np.full(theta.shape, stencil[0])
    for j in range(1, p + 1):
        out = out + 2.0 * stencil[j] * np.cos(j * theta)
    return out


def symbol_ratio(p: int, theta) -> np.ndarray:
    """r(theta) = (lambda^(p-1)/lambda^(p)) * (1 - cos theta)."""
    theta = np.asarray(theta, dtype=float)
    return mass_symbol(p - 1, theta) / mass_symbol(p, theta) * (1.0 - np.cos(theta))


def maxwell_alpha_max(p: int) -> float:
    """Largest stable ratio dt/dx for the explicit curl splitting.

    Maximizes r(theta) on a fine grid and polishes the maximizer with
    golden-section search; the limit is sqrt(2 / max r).
    """
    if p < 1:
        raise ValueError("degree must be >= 1")
    grid = np.linspace(1e-6, np.pi, 100_001)
    values = symbol_ratio(p, grid)
    i = int(np.argmax(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = symbol_ratio(p, c)
    fd = symbol_ratio(p, d)
    for _ in range(200):
        if b - a < 1e-14:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = symbol_ratio(p, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = symbol_ratio(p, d)
    r_max = max(float(values[i]), float(fc), float(fd))
    return float(np.sqrt(2.0 / r_max))


def langmuir_amplification(scheme: str, z: float, c: float = 1.0) -> AmplificationPair:
    """Amplification roots of the Langmuir-oscillation recurrence.

    ``z`` is omega_pe * dt scaled by the constant ``c``.  The explicit
    splitting satisfies 4 sin^2(omega dt / 2) = z^2, solvable with real
    frequency only for z <= 2; the implicit midpoint version satisfies
    4 sin^2(omega dt / 2) = z^2 cos(omega dt / 2), solvable for every z.
    Either way the roots are xi = q +/- sqrt(q^2 - 1) with q = cos(omega dt),
    so xi_plus * xi_minus = 1 exactly.
    """
    if not z > 0:
        raise ValueError(f"z must be positive, got {z}")
    z = c * z / c  # only the product matters; keep the signature explicit
    if scheme == "explicit":
        q = 1.0 - z * z / 2.0
    elif scheme == "implicit":
        u = (-z * z + np.sqrt(z**4 + 64.0)) / 8.0  # cos(omega dt / 2) root in (0, 1]
        q = 2.0 * u * u - 1.0
    else:
        raise ValueError(f"scheme must be 'explicit' or 'implicit', got {scheme!r}")
    disc = q * q - 1.0
    if disc >= 0.0:
        root = np.sqrt(disc)
        return AmplificationPair(complex(q + root), complex(q - root))
    root = np.sqrt(-disc)
    return AmplificationPair(complex(q, root), complex(q, -root))


def curl_transfer_matrix(p: int, theta: float, alpha: float, composition: str = "strang"):
    """One-step 2x2 matrix acting on the (e2, b3) Fourier mode at angle theta.

    Uses dx = 1, so alpha is the time step.  ``composition`` selects the
    symmetric Strang splitting E/2, B, E/2 or the Lie splitting B after E;
    both share the same trace and therefore the same spectrum.
    """
    lam_d = 1.0 - np.exp(-1j * theta)
    ratio = mass_symbol(p - 1, theta) / mass_symbol(p, theta)

    def h_e(tau):
        # b <- b - tau * D e
        return np.array([[1.0, 0.0], [-tau * lam_d, 1.0]], dtype=complex)

    def h_b(tau):
        # e <- e + tau * M0^-1 D^T M1 b
        return np.array([[1.0, tau * ratio * np.conj(lam_d)], [0.0, 1.0]], dtype=complex)

    if composition == "strang":
        return h_e(alpha / 2.0) @ h_b(alpha) @ h_e(alpha / 2.0)
    if composition == "lie":
        return h_b(alpha) @ h_e(alpha)
    raise ValueError(f"composition must be 'strang' or 'lie', got {composition!r}")


def _smooth_random(n, rng):
    """Random real field with mild spectral decay; all modes populated."""
    k = np.arange(n // 2 + 1)
    amp = 1.0 / (1.0 + (k / 4.0) ** 2)
    coeffs = amp * (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size))
    return np.fft.irfft(coeffs, n)


def empirical_stability_scan(
    p: int,
    n: int,
    steps: int = 2000,
    scheme: str = "explicit",
    seed: int = 0,
    length: float = 2 * np.pi / 1.25,
) -> float:
    """Largest dt keeping the field energy bounded over ``steps`` curl steps.

    Bisects dt on (0, 2*dx] with random smooth initial data and no
    particles.  A probe counts as stable when the energy never grows by
    more than 10%.  The implicit midpoint step never trips the threshold,
    so the scan returns the upper bound 2*dx for it.
    """
    space = SplineSpace(p, n, length)
    dx = space.dx
    rng = np.random.default_rng(seed)
    e2_0 = _smooth_random(n, rng)
    b3_0 = _smooth_random(n, rng)
    m0 = mass_operator(space)
    m1 = mass_operator(space.lowered())
    d_op = derivative_stencil(space)

    def energy(e2, b3):
        return 0.5 * float(e2 @ m0.apply(e2)) + 0.5 * float(b3 @ m1.apply(b3))

    def stable(dt):
        e2, b3 = e2_0.copy(), b3_0.copy()
        e_ref = energy(e2, b3)
        if scheme == "implicit":
            state = FieldState(np.zeros(n), e2, b3, space)
            for _ in range(steps):
                state = curl_avf_step(state, dt)
                if field_energy(state).total > 1.1 * e_ref:
                    return False
            return True
        for _ in range(steps):
            b3 = b3 - (dt / 2.0) * d_op.apply(e2)
            e2 = e2 + dt * circulant_solve(m0, d_op.transpose().apply(m1.apply(b3)))
            b3 = b3 - (dt / 2.0) * d_op.apply(e2)
            e_now = energy(e2, b3)
            if not np.isfinite(e_now) or e_now > 1.1 * e_ref:
                return False
        return True

    hi = 2.0 * dx
    if stable(hi):
        return hi
    lo = 0.0
    for _ in range(16):
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return lo
