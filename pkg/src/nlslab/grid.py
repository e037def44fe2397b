"""Uniform radial grids on [0, rmax] for radial functions on R^N.

A radial function f(r) stands for f(|x|) on R^N.  Integrals carry the
surface measure of the unit sphere,

    int_{R^N} g(|x|) dx = omega_N int_0^inf g(r) r^{N-1} dr,
    omega_N = 2 pi^{N/2} / Gamma(N/2),   omega_1 = 2 (even extension).

Nodes are r_i = i h, i = 0..n, h = rmax/n.  Quadrature weights are the
trapezoid weights of the radial measure,

    w_i = omega_N r_i^{N-1} h,   halved at i = 0 and i = n.

The discrete Laplacian is the second-order centered stencil

    (Lap f)_i = f''_i + (N-1)/r_i f'_i
             ~= (f_{i+1} - 2 f_i + f_{i-1})/h^2 + (N-1)/r_i (f_{i+1} - f_{i-1})/(2h)

with the regular-origin limit Lap f(0) = N f''(0) ~= 2N (f_1 - f_0)/h^2
and a homogeneous Dirichlet value at r = rmax.  For N <= 3 this stencil
satisfies an exact detailed-balance relation with respect to the weights
rho_i ~ r_i^{N-1}:  rho_i T_{i,i+1} = rho_{i+1} T_{i+1,i}, so the operator
is exactly symmetrizable by the similarity sqrt(rho); matrix assembly in
the linearized/evolution modules relies on this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import GridMismatchError, InvalidParameterError

__all__ = [
    "RadialGrid",
    "Field",
    "Norms",
    "make_grid",
    "integrate",
    "laplacian_apply",
    "norms",
    "gradient_values",
    "omega_n",
    "write_field_csv",
    "read_field_csv",
]

FLOAT_FMT = "%.17g"


def omega_n(N: int) -> float:
    """Surface measure of the unit sphere in R^N; omega_1 = 2 by even extension."""
    if N == 1:
        return 2.0
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True)
class RadialGrid:
    """Immutable uniform radial grid with trapezoid quadrature weights."""

    N: int
    rmax: float
    n: int
    h: float
    r: NDArray[np.float64] = field(repr=False)
    w: NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        self.r.setflags(write=False)
        self.w.setflags(write=False)

    def same_as(self, other: "RadialGrid") -> bool:
        return (
            self.N == other.N
            and self.n == other.n
            and self.rmax == other.rmax
        )


def make_grid(N: int, rmax: float, n: int) -> RadialGrid:
    """Build a RadialGrid. Requires N >= 1 integer, rmax > 0, n >= 16."""
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise InvalidParameterError(f"dimension N must be an integer >= 1, got {N!r}")
    if not rmax > 0:
        raise InvalidParameterError(f"rmax must be positive, got {rmax!r}")
    if not (isinstance(n, (int, np.integer)) and n >= 16):
        raise InvalidParameterError(f"node count n must be an integer >= 16, got {n!r}")
    N = int(N)
    n = int(n)
    rmax = float(rmax)
    h = rmax / n
    r = np.arange(n + 1, dtype=float) * h
    w = omega_n(N) * r ** (N - 1) * h
    w[0] *= 0.5
    w[-1] *= 0.5
    return RadialGrid(N=N, rmax=rmax, n=n, h=h, r=r, w=w)


@dataclass
class Field:
    """Complex-valued radial function sampled on a RadialGrid.

    ``regular_origin``: first derivative vanishes at r = 0.
    ``decaying``: the value at r = rmax is pinned to 0.
    ``real``: the field is flagged real; the imaginary part must vanish.
    """

    grid: RadialGrid
    values: NDArray[np.complex128]
    real: bool = False
    regular_origin: bool = True
    decaying: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n + 1,):
            raise GridMismatchError(
                f"field length {self.values.shape} does not match grid "
                f"node count {self.grid.n + 1}"
            )
        if self.real and np.any(self.values.imag != 0.0):
            raise InvalidParameterError("field flagged real has nonzero imaginary part")

    def real_values(self) -> NDArray[np.float64]:
        return self.values.real

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), real=self.real,
                     regular_origin=self.regular_origin, decaying=self.decaying)


def integrate(f: Field, integrand=None) -> float:
    """Quadrature of int integrand(f(r)) omega_N r^{N-1} dr over [0, rmax].

    ``integrand`` maps the complex node values to real values; the default
    takes the real part (the identity map for real fields).
    """
    vals = f.values
    g = vals.real if integrand is None else np.asarray(integrand(vals), dtype=float)
    return float(np.dot(f.grid.w, g))


def laplacian_bands(grid: RadialGrid):
    """Stencil bands (lo, di, up) of the radial Laplacian on nodes 0..n-1.

    Row i couples to nodes i-1, i, i+1 through lo[i], di[i], up[i];
    node n is the pinned Dirichlet value.  Row 0 is the regular-origin
    rule 2N (f_1 - f_0)/h^2.
    """
    N, h, n = grid.N, grid.h, grid.n
    ri = grid.r[1:n]
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    di[0] = -2.0 * N / h**2
    up[0] = 2.0 * N / h**2
    lo[1:] = 1.0 / h**2 - (N - 1) / (2.0 * h * ri)
    di[1:] = -2.0 / h**2
    up[1:] = 1.0 / h**2 + (N - 1) / (2.0 * h * ri)
    return lo, di, up


def laplacian_apply_values(grid: RadialGrid, v: NDArray) -> NDArray:
    """Apply the discrete radial Laplacian to a full node-value array."""
    n = grid.n
    lo, di, up = laplacian_bands(grid)
    out = np.zeros(n + 1, dtype=v.dtype)
    out[0] = di[0] * v[0] + up[0] * v[1]
    out[1:n] = lo[1:] * v[0:n - 1] + di[1:] * v[1:n] + up[1:] * v[2:n + 1]
    # node n stays 0 (Dirichlet)
    return out


def laplacian_apply(f: Field) -> Field:
    """Discrete Delta f with regular origin and Dirichlet 0 at rmax."""
    out = laplacian_apply_values(f.grid, f.values)
    return Field(f.grid, out, real=False, regular_origin=f.regular_origin,
                 decaying=True)


def gradient_values(grid: RadialGrid, v: NDArray) -> NDArray:
    """Centered first differences; f'(0) = 0 (regular origin), backward at rmax."""
    h, n = grid.h, grid.n
    out = np.zeros(n + 1, dtype=v.dtype)
    out[1:n] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = 0.0
    out[n] = (v[n] - v[n - 1]) / h
    return out


@dataclass(frozen=True)
class Norms:
    l2: float
    grad_l2: float
    h1: float
    lp: float | None
    linf: float


def norms(f: Field, lp_exponent: float | None = None) -> Norms:
    """L2, gradient-L2, H1 = L2 + grad (the additive convention), Lp, Linf.

    grad_l2 uses centered first differences.  ``lp`` is the L^{p}-norm for
    the given exponent (``None`` skips it).
    """
    w = f.grid.w
    a2 = np.abs(f.values) ** 2
    l2 = math.sqrt(float(np.dot(w, a2)))
    g = gradient_values(f.grid, f.values)
    grad = math.sqrt(float(np.dot(w, np.abs(g) ** 2)))
    lp = None
    if lp_exponent is not None:
        lp = float(np.dot(w, np.abs(f.values) ** lp_exponent)) ** (1.0 / lp_exponent)
    return Norms(l2=l2, grad_l2=grad, h1=l2 + grad, lp=lp,
                 linf=float(np.max(np.abs(f.values))))


def write_field_csv(f: Field, path) -> None:
    """Snapshot format: header ``r,re,im``, one node per row, 17 digits."""
    cols = np.column_stack([f.grid.r, f.values.real, f.values.imag])
    np.savetxt(path, cols, fmt=FLOAT_FMT, delimiter=",", header="r,re,im", comments="")


def read_field_csv(path, grid: RadialGrid) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.shape[0] != grid.n + 1:
        raise GridMismatchError(
            f"snapshot has {data.shape[0]} rows, grid has {grid.n + 1} nodes")
    if not np.allclose(data[:, 0], grid.r, rtol=0, atol=1e-12 * max(grid.rmax, 1.0)):
        raise GridMismatchError("snapshot radii do not match the grid")
    return Field(grid, data[:, 1] + 1j * data[:, 2])
