"""Particle storage, sampling, deposition and particle-sampled mass matrices.

Charge and current deposits pair each velocity component with its field
space: v1 with the 1-form space of e1, v2 with the 0-form space of e2.
Current along the particle path is deposited through exact line integrals
of the basis functions, which is what makes the discrete Gauss law an
invariant of the conservative steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .splines import SplineSpace, _basis_on_cell, _basis_on_cell_pair, basis_values


@lru_cache(maxsize=None)
def _gauss_rule(points: int):
    nodes, weights = np.polynomial.legendre.leggauss(points)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _segment_bounds(start, span, count):
    """Local (t_lo, width) of each cell segment of a path, in cell units.

    The path runs from ``start`` (in [0,1), cell-local) over ``span`` cells
    crossing ``count`` cells.  Widths are formed so their error is relative
    to the segment, never an absolute remnant of the additions: a plain
    (start+span)-start would leave an O(eps) absolute error that dominates
    the weights of slow particles once divided by span.
    """
    zeros = np.zeros_like(start)
    for s in range(count):
        if count == 1:
            yield start, span
        elif s == 0:
            yield start, 1.0 - start
        elif s < count - 1:
            yield zeros, np.ones_like(start)
        else:
            yield zeros, np.maximum(span - (count - 2) - (1.0 - start), 0.0)

__all__ = [
    "Species",
    "SpeciesParams",
    "SampledMassMatrix",
    "UnknownCase",
    "sample_species",
    "deposit_charge",
    "deposit_current_point",
    "line_integral_basis",
    "line_integral_batch",
    "line_integral_pair",
    "scatter_add",
    "gather_dot",
    "sampled_mass",
    "kinetic_energy",
    "dump_particles",
]


class UnknownCase(Exception):
    """Requested case or distribution kind is not in the library."""


@dataclass
class Species:
    """One particle species: charge q, mass m, phase-space markers, weights."""

    q: float
    m: float
    x: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v1 = np.asarray(self.v1, dtype=float)
        self.v2 = np.asarray(self.v2, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        n_p = self.x.shape[0]
        for name in ("v1", "v2", "w"):
            if getattr(self, name).shape != (n_p,):
                raise ValueError(f"{name} must have shape ({n_p},)")
        if n_p and not np.all(self.w > 0):
            raise ValueError("weights must be strictly positive")
        if not self.m > 0:
            raise ValueError("mass must be positive")

    @property
    def n_p(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SpeciesParams:
    """Sampling description: density(x) = density*(1 + alpha*cos(k_mode*x))
    on [0, length), v1 an equal-weight mixture of Gaussians centered at
    v1_drifts with spread sigma1, v2 a centered Gaussian with spread sigma2.
    """

    q: float
    m: float
    length: float
    sigma1: float
    sigma2: float
    density: float = 1.0
    alpha: float = 0.0
    k_mode: float = 0.0
    v1_drifts: tuple = (0.0,)
    kind: str = "maxwellian"


def sample_species(case_params: SpeciesParams, n_p: int, seed) -> Species:
    """Draw a Species of n_p markers from the case distribution.

    All draws come from one seeded generator in a fixed order (positions,
    mixture labels, v1, v2), so a given seed reproduces the species bitwise.
    Weights are uniform, w = density*length/n_p, making the total charge
    q*density*length exact.
    """
    params = case_params
    if params.kind != "maxwellian":
        raise UnknownCase(f"unknown distribution kind {params.kind!r}")
    if n_p <= 0:
        raise ValueError(f"n_p must be positive, got {n_p}")
    rng = np.random.default_rng(seed)
    x = _invert_density_cdf(params.length, params.alpha, params.k_mode, rng.random(n_p))
    if len(params.v1_drifts) > 1:
        labels = rng.integers(0, len(params.v1_drifts), n_p)
        means = np.asarray(params.v1_drifts, dtype=float)[labels]
    else:
        means = params.v1_drifts[0]
    v1 = means + params.sigma1 * rng.standard_normal(n_p)
    v2 = params.sigma2 * rng.standard_normal(n_p)
    w = np.full(n_p, params.density * params.length / n_p)
    return Species(q=params.q, m=params.m, x=x, v1=v1, v2=v2, w=w)


def _invert_density_cdf(length, alpha, k, u):
    """Invert F(x) = (x + (alpha/k) sin(kx)) / length by Newton iteration.

    Valid for |alpha| < 1 (density stays positive, F strictly increasing);
    the perturbation must carry an integer number of periods in the box.
    """
    x = u * length
    if alpha == 0.0:
        return x
    target = u * length
    for _ in range(100):
        f = x + (alpha / k) * np.sin(k * x) - target
        x = x - f / (1.0 + alpha * np.cos(k * x))
        if np.max(np.abs(f)) < 1e-14 * length:
            break
    return np.mod(x, length)


def scatter_add(n: int, first_dof, table, out=None):
    """Accumulate per-particle dof tables into a length-n vector.

    ``table`` has one row per particle; column j goes to dof
    (first_dof + j) mod n.
    """
    if out is None:
        out = np.zeros(n)
    width = table.shape[1]
    idx = (first_dof[:, None] + np.arange(width)) % n
    # bincount over the raveled indices is several times faster than ufunc.at
    out += np.bincount(idx.ravel(), weights=np.ascontiguousarray(table).ravel(), minlength=n)
    return out


def gather_dot(coeffs, first_dof, table):
    """Per-particle dot product of a dof table with a coefficient vector.

    Row a yields sum_j coeffs[(first_dof[a]+j) mod n] * table[a, j]; the
    adjoint of scatter_add.
    """
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[0]
    idx = (first_dof[:, None] + np.arange(table.shape[1])) % n
    return np.einsum("mj,mj->m", coeffs[idx], table)


def deposit_charge(species_list, space: SplineSpace) -> np.ndarray:
    """Charge density dofs rho_i = sum over species of q*w*basis_i(x)."""
    rho = np.zeros(space.n_cells)
    for s in species_list:
        if s.n_p == 0:
            continue
        first, vals = basis_values(space, s.x)
        scatter_add(space.n_cells, first, vals * (s.q * s.w)[:, None], rho)
    return rho


def deposit_current_point(species: Species, space: SplineSpace, component: int) -> np.ndarray:
    """Point-deposited current j_i = q*w*v_component*basis_i(x)."""
    v = species.v1 if component == 1 else species.v2
    if species.n_p == 0:
        return np.zeros(space.n_cells)
    first, vals = basis_values(space, species.x)
    return scatter_add(space.n_cells, first, vals * (species.q * species.w * v)[:, None])


def line_integral_batch(space: SplineSpace, x_start, displacement):
    """Path-averaged basis values int_0^1 basis_j(x + tau*d) dtau, batched.

    Returns (first_dof, table) where table row a holds the integrals for
    dofs (first_dof[a] + j) mod n, j = 0..width-1.  Each crossed cell is
    integrated with ceil((p+1)/2) Gauss-Legendre points, exact for the
    piecewise degree-p integrand.
    """
    x, d = np.broadcast_arrays(np.asarray(x_start, dtype=float), np.asarray(displacement, dtype=float))
    x = np.mod(x, space.length)
    p, dx, n = space.degree, space.dx, space.n_cells
    # Work in cell units relative to the first crossed cell.  Segment widths
    # (see _segment_bounds) sum to |d|/dx up to relative rounding; round-off
    # only nudges panel boundaries, which the per-cell exact quadrature does
    # not feel.  Absolute-coordinate segment arithmetic would put an
    # O(eps*L/|d|) error on the weights instead, which is catastrophic for
    # slow particles.
    s_pos = x / dx
    dc = d / dx
    a_c = np.minimum(s_pos, s_pos + dc)
    abs_dc = np.abs(dc)
    c_lo = np.floor(a_c).astype(np.int64)
    nseg = np.floor(a_c + abs_dc).astype(np.int64) - c_lo + 1
    first = (c_lo - p) % n
    out = np.zeros((x.shape[0], p + int(nseg.max())))

    still = abs_dc < 1e-300  # includes d == 0; keeps 1/span finite below
    if np.any(still):
        fd, vals = basis_values(space, x[still])
        first[still] = fd
        out[np.nonzero(still)[0][:, None], np.arange(p + 1)[None, :]] = vals

    moving = ~still
    if np.any(moving):
        t_ref, half_wts = _gauss_rule((p + 2) // 2)
        for count in np.unique(nseg[moving]):
            sel = moving & (nseg == count)
            rows = np.nonzero(sel)[0]
            start = a_c[sel] - c_lo[sel]
            span = abs_dc[sel]
            inv = 1.0 / span
            for s, (t_lo, width) in enumerate(_segment_bounds(start, span, count)):
                t_loc = t_lo[:, None] + t_ref[None, :] * width[:, None]
                vals = _basis_on_cell(p, t_loc)
                weight = half_wts[None, :] * (width * inv)[:, None]
                out[rows[:, None], np.arange(s, s + p + 1)[None, :]] += np.einsum(
                    "mg,mgj->mj", weight, vals
                )
    return first, out


def line_integral_pair(space: SplineSpace, x_start, displacement):
    """Path-averaged tables for a 0-form space and its lowered partner.

    One geometry pass serves both current deposits of a conservative step:
    the 1-form table (degree p-1, paired with v1) and the 0-form table
    (degree p, paired with v2) over the same straight paths.  Returns
    (first_lower, table_lower, first_full, table_full) with the row and
    offset conventions of line_integral_batch.
    """
    x, d = np.broadcast_arrays(np.asarray(x_start, dtype=float), np.asarray(displacement, dtype=float))
    x = np.mod(x, space.length)
    p, dx, n = space.degree, space.dx, space.n_cells
    s_pos = x / dx
    dc = d / dx
    a_c = np.minimum(s_pos, s_pos + dc)
    abs_dc = np.abs(dc)
    c_lo = np.floor(a_c).astype(np.int64)
    nseg = np.floor(a_c + abs_dc).astype(np.int64) - c_lo + 1
    first_full = (c_lo - p) % n
    first_low = (c_lo - (p - 1)) % n
    max_seg = int(nseg.max())
    out_full = np.zeros((x.shape[0], p + max_seg))
    out_low = np.zeros((x.shape[0], p - 1 + max_seg))

    still = abs_dc < 1e-300
    if np.any(still):
        rows = np.nonzero(still)[0]
        fd, vals = basis_values(space, x[still])
        first_full[still] = fd
        out_full[rows[:, None], np.arange(p + 1)[None, :]] = vals
        fd, vals = basis_values(space.lowered(), x[still])
        first_low[still] = fd
        out_low[rows[:, None], np.arange(p)[None, :]] = vals

    moving = ~still
    if np.any(moving):
        t_ref, half_wts = _gauss_rule((p + 2) // 2)
        for count in np.unique(nseg[moving]):
            sel = moving & (nseg == count)
            rows = np.nonzero(sel)[0]
            start = a_c[sel] - c_lo[sel]
            span = abs_dc[sel]
            inv = 1.0 / span
            for s, (t_lo, width) in enumerate(_segment_bounds(start, span, count)):
                t_loc = t_lo[:, None] + t_ref[None, :] * width[:, None]
                vals_low, vals_full = _basis_on_cell_pair(p, t_loc)
                weight = half_wts[None, :] * (width * inv)[:, None]
                out_full[rows[:, None], np.arange(s, s + p + 1)[None, :]] += np.einsum(
                    "mg,mgj->mj", weight, vals_full
                )
                out_low[rows[:, None], np.arange(s, s + p)[None, :]] += np.einsum(
                    "mg,mgj->mj", weight, vals_low
                )
    return first_low, out_low, first_full, out_full


def line_integral_basis(space: SplineSpace, x_start: float, displacement: float):
    """Single-path version of line_integral_batch: (first_dof, values)."""
    first, table = line_integral_batch(
        space, np.asarray([x_start], dtype=float), np.asarray([displacement], dtype=float)
    )
    return int(first[0]), table[0]


@dataclass(frozen=True)
class SampledMassMatrix:
    """Particle-sampled mass matrix, symmetric PSD with wrapped band 2p+1."""

    matrix: np.ndarray

    def apply(self, v):
        return self.matrix @ v


def sampled_mass(species: Species, space: SplineSpace, dt: float) -> SampledMassMatrix:
    """N_jk = (dt^2/4) sum_a (q^2 w_a / m) basis_j(x_a) basis_k(x_a)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n, p = space.n_cells, space.degree
    if species.n_p == 0:
        return SampledMassMatrix(np.zeros((n, n)))
    first, vals = basis_values(space, species.x)
    coeff = (dt * dt / 4.0) * (species.q**2 / species.m) * species.w
    idx = (first[:, None] + np.arange(p + 1)) % n
    pair = coeff[:, None, None] * vals[:, :, None] * vals[:, None, :]
    lin = (idx[:, :, None] * n + idx[:, None, :]).ravel()
    mat = np.bincount(lin, weights=pair.ravel(), minlength=n * n).reshape(n, n)
    return SampledMassMatrix(mat)


def kinetic_energy(species_list) -> float:
    """Total kinetic energy 0.5 * sum m*w*(v1^2 + v2^2)."""
    total = 0.0
    for s in species_list:
        total += 0.5 * s.m * float(np.sum(s.w * (s.v1**2 + s.v2**2)))
    return total


def dump_particles(species: Species, path) -> None:
    """Write markers as CSV columns x,v1,v2,w (debugging aid)."""
    data = np.column_stack([species.x, species.v1, species.v2, species.w])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header="x,v1,v2,w", comments="")
