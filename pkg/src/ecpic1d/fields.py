"""Electromagnetic field state for the 1d2v reduction.

Fields are E = (E1(x), E2(x), 0) and B = (0, 0, B3(x)) on a periodic box.
e1 and b3 carry 1-form dofs (degree p-1), e2 carries 0-form dofs (degree p).
This assignment makes Faraday's law b3' = -D e2 a strong identity between
compatible spaces and the weak Gauss law D^T M1 e1 = rho exact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .splines import (
    SplineSpace,
    basis_values,
    circulant_solve,
    derivative_stencil,
    eval_spline,
    mass_operator,
    spectral,
)

__all__ = [
    "FieldState",
    "FieldEnergy",
    "NetChargeError",
    "zero_state",
    "eval_field",
    "curl_avf_step",
    "poisson_init",
    "gauss_residual",
    "field_energy",
    "project_l2",
]


class NetChargeError(Exception):
    """Charge density has a net component; the periodic Poisson problem is unsolvable."""


@dataclass
class FieldState:
    """Coefficient vectors for (e1, e2, b3); `space` is the 0-form space."""

    e1: np.ndarray
    e2: np.ndarray
    b3: np.ndarray
    space: SplineSpace

    def __post_init__(self):
        n = self.space.n_cells
        self.e1 = np.asarray(self.e1, dtype=float)
        self.e2 = np.asarray(self.e2, dtype=float)
        self.b3 = np.asarray(self.b3, dtype=float)
        for name in ("e1", "e2", "b3"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")


@dataclass(frozen=True)
class FieldEnergy:
    e1_energy: float
    e2_energy: float
    b3_energy: float

    @property
    def total(self) -> float:
        return self.e1_energy + self.e2_energy + self.b3_energy


def zero_state(space: SplineSpace) -> FieldState:
    n = space.n_cells
    return FieldState(np.zeros(n), np.zeros(n), np.zeros(n), space)


def eval_field(state: FieldState, which: str, x):
    """Evaluate E1, E2 or B3 at positions x (scalar or array)."""
    if which == "E1":
        return eval_spline(state.space.lowered(), state.e1, x)
    if which == "E2":
        return eval_spline(state.space, state.e2, x)
    if which == "B3":
        return eval_spline(state.space.lowered(), state.b3, x)
    raise ValueError(f"unknown field component {which!r}")


def curl_avf_step(state: FieldState, dt: float) -> FieldState:
    """Average-vector-field step of the source-free curl subsystem.

    Midpoint update of e2' = M0^{-1} D^T M1 b3, b3' = -D e2 with the Schur
    complement S = M0 + (dt^2/4) D^T M1 D inverted exactly in Fourier space.
    Conserves the field energy to round-off for any dt.
    """
    space0 = state.space
    space1 = space0.lowered()
    d = derivative_stencil(space0)
    d_eig = spectral(d).eigenvalues
    m0_eig = spectral(mass_operator(space0)).eigenvalues.real
    m1_eig = spectral(mass_operator(space1)).eigenvalues.real

    curl_sq = (dt * dt / 4.0) * np.abs(d_eig) ** 2 * m1_eig
    schur = m0_eig + curl_sq
    rhs = (m0_eig - curl_sq) * np.fft.fft(state.e2) + dt * np.conj(d_eig) * m1_eig * np.fft.fft(state.b3)
    e2_new = np.fft.ifft(rhs / schur).real
    b3_new = state.b3 - (dt / 2.0) * d.apply(state.e2 + e2_new)
    return replace(state, e2=e2_new, b3=b3_new)


def poisson_init(rho_dofs: np.ndarray, space: SplineSpace) -> np.ndarray:
    """Solve D^T M1 e1 = rho for the 1-form dofs e1 (zero-mean gauge).

    `space` is the 0-form space carrying rho. Raises NetChargeError when the
    k=0 component of rho is not negligible: the periodic problem has no
    solution without overall neutrality.
    """
    rho = np.asarray(rho_dofs, dtype=float)
    scale = np.max(np.abs(rho)) if rho.size else 0.0
    rho_hat = np.fft.fft(rho)
    if abs(rho_hat[0]) > 1e-12 * max(scale, 1e-300):
        raise NetChargeError(f"net charge {rho_hat[0].real:.3e} exceeds neutrality tolerance")
    d_eig = spectral(derivative_stencil(space)).eigenvalues
    m1_eig = spectral(mass_operator(space.lowered())).eigenvalues.real
    op_eig = np.conj(d_eig) * m1_eig
    e1_hat = np.zeros_like(rho_hat)
    e1_hat[1:] = rho_hat[1:] / op_eig[1:]
    return np.fft.ifft(e1_hat).real


def gauss_residual(e1: np.ndarray, rho_dofs: np.ndarray, space: SplineSpace) -> float:
    """Max-norm residual of the discrete Gauss law D^T M1 e1 = rho."""
    d = derivative_stencil(space)
    m1 = mass_operator(space.lowered())
    return float(np.max(np.abs(d.transpose().apply(m1.apply(np.asarray(e1, float))) - rho_dofs)))


def field_energy(state: FieldState) -> FieldEnergy:
    m0 = mass_operator(state.space)
    m1 = mass_operator(state.space.lowered())
    return FieldEnergy(
        e1_energy=0.5 * float(state.e1 @ m1.apply(state.e1)),
        e2_energy=0.5 * float(state.e2 @ m0.apply(state.e2)),
        b3_energy=0.5 * float(state.b3 @ m1.apply(state.b3)),
    )


def project_l2(space: SplineSpace, func, points_per_cell: int = 12) -> np.ndarray:
    """L2 projection of a callable onto the spline space: solve M c = <f, basis>."""
    nodes, weights = np.polynomial.legendre.leggauss(points_per_cell)
    t = 0.5 * (nodes + 1.0)
    cells = np.arange(space.n_cells)[:, None]
    x = ((cells + t[None, :]) * space.dx).ravel()
    w = np.tile(0.5 * space.dx * weights, space.n_cells)
    first, vals = basis_values(space, x)
    fx = func(x) * w
    rhs = np.zeros(space.n_cells)
    for j in range(space.degree + 1):
        np.add.at(rhs, (first + j) % space.n_cells, vals[:, j] * fx)
    return circulant_solve(mass_operator(space), rhs)
