"""Periodic uniform B-spline spaces and circulant operator algebra.

All field operations in the code are built from three one-dimensional
ingredients on a uniform periodic grid: B-spline basis evaluation, banded
circulant matrices (mass and derivative), and their diagonalization by the
discrete Fourier transform.  Basis functions are indexed by their leftmost
support cell, wrapped modulo the number of cells, which makes every matrix
in sight circulant.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "SplineSpace",
    "CirculantOperator",
    "SpectralDiagonal",
    "SingularOperator",
    "basis_values",
    "eval_spline",
    "mass_stencil",
    "mass_operator",
    "derivative_stencil",
    "spectral",
    "circulant_solve",
]


class SingularOperator(Exception):
    """Raised when a circulant solve hits a vanishing eigenvalue."""


@dataclass(frozen=True)
class SplineSpace:
    """Space of periodic uniform B-splines of one degree on [0, L).

    Parameters
    ----------
    degree : int
        Polynomial degree p >= 0.  A degree-p basis function is supported
        on p+1 consecutive cells and every point is covered by exactly
        p+1 basis functions.
    n_cells : int
        Number of grid cells n; must satisfy n >= 2p+1 so that a stencil
        never overlaps itself around the period.
    length : float
        Period L > 0 of the domain.
    """

    degree: int
    n_cells: int
    length: float
    dx: float = field(init=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError(f"degree must be >= 0, got {self.degree}")
        if self.n_cells < 2 * self.degree + 1:
            raise ValueError(
                f"need n_cells >= 2*degree+1, got n_cells={self.n_cells} "
                f"for degree={self.degree}"
            )
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        # dx is stored once and reused everywhere; no per-call recomputation.
        object.__setattr__(self, "dx", self.length / self.n_cells)

    def lowered(self):
        """Space of degree p-1 on the same cells (holds d/dx of this space)."""
        return SplineSpace(self.degree - 1, self.n_cells, self.length)


def basis_values(space, x):
    """Evaluate all nonzero basis functions at position(s) x.

    Positions are wrapped periodically into [0, L).  For each point the
    p+1 covering basis functions are evaluated with the uniform-knot
    Cox-de Boor recurrence.

    Parameters
    ----------
    space : SplineSpace
    x : float or array_like

    Returns
    -------
    first_dof : int or ndarray of int
        Index (mod n_cells) of the leftmost covering basis function.
    values : ndarray
        Shape (..., p+1); non-negative and summing to 1.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    if scalar:
        x = x[None]
    cell, t = _locate(space, x)
    values = _basis_on_cell(space.degree, t)
    first_dof = (cell - space.degree) % space.n_cells
    if scalar:
        return int(first_dof[0]), values[0]
    return first_dof, values


def eval_spline(space, coeffs, x):
    """Evaluate sum_i coeffs[i] * basis_i at position(s) x."""
    first_dof, values = basis_values(space, np.asarray(x, dtype=float))
    scalar = np.ndim(first_dof) == 0
    if scalar:
        first_dof = np.asarray([first_dof])
        values = values[None]
    idx = (first_dof[:, None] + np.arange(space.degree + 1)) % space.n_cells
    out = np.einsum("ij,ij->i", np.asarray(coeffs)[idx], values)
    return float(out[0]) if scalar else out


def _locate(space, x):
    """Cell index and local coordinate t in [0, 1) for wrapped positions."""
    u = np.mod(x, space.length) / space.dx
    cell = np.minimum(u.astype(np.int64), space.n_cells - 1)
    return cell, u - cell


def _basis_on_cell(degree, t):
    """Cox-de Boor values of the p+1 basis functions covering a cell.

    ``t`` is the local coordinate in the cell; entry j of the result is
    the value of the basis function whose leftmost support cell is c-p+j,
    where c is the cell containing the point.
    """
    t = np.asarray(t, dtype=float)
    values = np.zeros(t.shape + (degree + 1,))
    values[..., 0] = 1.0
    for d in range(1, degree + 1):
        prev = values[..., : d + 1].copy()
        for j in range(d + 1):
            acc = 0.0
            if j > 0:
                acc = prev[..., j - 1] * ((t + d - j) / d)
            if j < d:
                acc = acc + prev[..., j] * ((j + 1 - t) / d)
            values[..., j] = acc
    return values


def _basis_on_cell_pair(degree, t):
    """Values for degrees degree-1 and degree from one recursion pass.

    Returns (lower, full); the degree-1 values fall out of the Cox-de Boor
    recursion one level before the last, so evaluating both costs the same
    as evaluating the higher degree alone.
    """
    if degree < 1:
        raise ValueError("pair evaluation needs degree >= 1")
    t = np.asarray(t, dtype=float)
    values = np.zeros(t.shape + (degree + 1,))
    values[..., 0] = 1.0
    lower = values[..., :1]
    for d in range(1, degree + 1):
        prev = values[..., : d + 1].copy()
        if d == degree:
            lower = prev[..., :d]
        for j in range(d + 1):
            acc = 0.0
            if j > 0:
                acc = prev[..., j - 1] * ((t + d - j) / d)
            if j < d:
                acc = acc + prev[..., j] * ((j + 1 - t) / d)
            values[..., j] = acc
    return lower, values


@dataclass(frozen=True)
class CirculantOperator:
    """Banded circulant matrix A with (A v)_i = sum_j stencil[j] * v_{(i+j) mod n}.

    Parameters
    ----------
    n : int
        Matrix dimension.
    stencil : dict
        Map from column offset j to coefficient; finite band.
    kind : str
        Informational tag, e.g. ``"mass(3)"``, ``"derivative"``.
    """

    n: int
    stencil: dict
    kind: str = "composite"

    def apply(self, v):
        out = np.zeros_like(np.asarray(v, dtype=float))
        for offset, c in self.stencil.items():
            out += c * np.roll(v, -offset)
        return out

    def transpose(self):
        return CirculantOperator(
            self.n,
            {-j: c for j, c in self.stencil.items()},
            kind=f"{self.kind}^T",
        )

    def compose(self, other):
        """Circulant product self @ other (offsets add under composition)."""
        if self.n != other.n:
            raise ValueError("operator dimensions differ")
        stencil = {}
        for j1, c1 in self.stencil.items():
            for j2, c2 in other.stencil.items():
                stencil[j1 + j2] = stencil.get(j1 + j2, 0.0) + c1 * c2
        return CirculantOperator(self.n, stencil, kind="composite")

    def first_column(self):
        col = np.zeros(self.n)
        for offset, c in self.stencil.items():
            col[(-offset) % self.n] += c
        return col


@dataclass(frozen=True)
class SpectralDiagonal:
    """Fourier eigenvalues of a circulant operator, mode k = 0..n-1.

    Eigenvalues of a real circulant come in conjugate pairs,
    lambda_k = conj(lambda_{n-k}).
    """

    eigenvalues: np.ndarray

    def apply(self, v):
        return np.real(np.fft.ifft(self.eigenvalues * np.fft.fft(v)))


@lru_cache(maxsize=None)
def mass_stencil(p, dx, n_cells):
    """Mass matrix c_j = int N^p(x) N^p(x - j*dx) dx for degree p.

    Entries are computed per cell with Gauss-Legendre quadrature of order
    p+1, which is exact for the degree-2p integrand.  The stencil is
    symmetric with band |j| <= p and its row sum equals dx (integral of
    the partition of unity over one period, divided by n).
    """
    if p < 0:
        raise ValueError("degree must be >= 0")
    nodes, weights = np.polynomial.legendre.leggauss(p + 1)
    t = 0.5 * (nodes + 1.0)
    vals = _basis_on_cell(p, t)
    stencil = {}
    for j in range(p + 1):
        # Overlap of N_0 and N_j on the reference grid dx=1: cells j..p.
        # In cell c the value of N_i sits at local index p - (c - i).
        total = 0.0
        for cell in range(j, p + 1):
            n0 = vals[:, p - cell]
            nj = vals[:, p - (cell - j)]
            total += 0.5 * np.sum(weights * n0 * nj)
        stencil[j] = total * dx
        if j > 0:
            stencil[-j] = stencil[j]
    return CirculantOperator(n_cells, stencil, kind=f"mass({p})")


def mass_operator(space):
    """Mass matrix of a spline space."""
    return mass_stencil(space.degree, space.dx, space.n_cells)


def derivative_stencil(space):
    """Derivative matrix D mapping degree-p coefficients to degree p-1.

    For f = sum_i c_i N_i^p the derivative is f' = sum_k (Dc)_k N_k^{p-1}
    with (Dc)_k = (c_k - c_{k-1}) / dx, so the stencil is +1/dx at offset
    0 and -1/dx at offset -1.  D applied to a constant vector vanishes.
    """
    inv = 1.0 / space.dx
    return CirculantOperator(space.n_cells, {0: inv, -1: -inv}, kind="derivative")


def spectral(op):
    """Fourier eigenvalues of a circulant operator.

    The eigenvalues are the DFT of the first matrix column; for the
    derivative this reproduces lambda_k^+ = (1 - exp(-2*pi*i*k/n)) / dx
    and for a mass stencil the cosine sum c_0 + sum_j c_j 2 cos(2 pi k j / n).
    """
    return SpectralDiagonal(np.fft.fft(op.first_column()))


def circulant_solve(op, rhs, zero_mean_fix=False):
    """Solve op @ x = rhs exactly in Fourier space.

    Parameters
    ----------
    op : CirculantOperator
    rhs : array_like
    zero_mean_fix : bool
        Permit a vanishing k=0 eigenvalue provided the right-hand side
        has (numerically) zero mean; the returned solution then has zero
        mean as well.

    Raises
    ------
    SingularOperator
        If an eigenvalue at k != 0 vanishes, or the k=0 eigenvalue
        vanishes without the zero-mean escape hatch.
    """
    rhs = np.asarray(rhs, dtype=float)
    eig = spectral(op).eigenvalues
    scale = np.max(np.abs(eig))
    if scale == 0.0:
        raise SingularOperator("zero operator")
    small = np.abs(eig) <= 1e-14 * scale
    if np.any(small[1:]):
        raise SingularOperator("vanishing eigenvalue at nonzero mode")
    rhs_hat = np.fft.fft(rhs)
    if small[0]:
        # rhs_hat[0] is n times the mean of the right-hand side.
        mean_ok = np.abs(rhs_hat[0]) <= 1e-12 * max(np.max(np.abs(rhs)), 1e-300) * op.n
        if not (zero_mean_fix and mean_ok):
            raise SingularOperator("vanishing k=0 eigenvalue and rhs has nonzero mean")
        rhs_hat[0] = 0.0
        eig = eig.copy()
        eig[0] = 1.0
    return np.real(np.fft.ifft(rhs_hat / eig))
