"""Linearized operators around the standing wave e^{it} Q.

In the rescaled convention (all (1 - s_c) constants mapped to 1),

    L_+ = 1 - Delta - p Q^{p-1},      L_- = 1 - Delta - Q^{p-1},
    script_L f = -L_- f_2 + i L_+ f_1          (f = f_1 + i f_2),

and the linearized flow of u = e^{it}(Q + v) is  v_t + script_L v = i R(v).

Known kernel/algebra used as cross-checks (derived from the equation and
the scaling family Q_lambda = lambda^{2/(p-1)} Q(lambda .)):

    L_- Q = 0,          L_+ Q = (1-p) Q^p,
    L_+ (Lam Q) = -2 Q,  where  Lam f = 2/(p-1) f + r f'.

script_L has a real eigenvalue pair +-e0 with eigenfunctions
Y_pm = Y_1 pm i Y_2:   L_+ Y_1 = e0 Y_2,  L_- Y_2 = -e0 Y_1.
e0^2 is found as minus the bottom eigenvalue of the symmetrized product
L_-^{1/2} L_+ L_-^{1/2} on {Q}^perp (dense path), refined by shifted
inverse iteration on the pentadiagonal product L_- L_+ (banded path).

Normalization: B(Y+, Y-) = e0 (Y1, Y2)_{L2} is *negative* for the genuine
eigenpair -- (L_+ Y1, Y1) = -e0^2 ||g||^2 < 0 forces (Y1, Y2) < 0 -- so the
pair is scaled to B(Y+, Y-) = -1, i.e. (Y1, Y2)_{L2} = -1/e0, together
with the sign convention (Q, Y1)_{H1} > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, solve_banded

from .errors import (
    GridMismatchError,
    NonConvergenceError,
    SingularSystemError,
    SpectralFailureError,
)
from .grid import Field, RadialGrid, gradient_values, laplacian_bands, omega_n
from .ground import GroundProfile

__all__ = [
    "LinearizedOps",
    "SpectrumData",
    "assemble",
    "assemble_critical",
    "bilinear_B",
    "linearized_energy_phi",
    "compute_spectrum",
    "resolvent_solve",
    "coercivity_min",
    "scaling_generator",
]

Q_FLOOR = 1e-10  # relative floor below which Q-ratios are not trusted


@dataclass
class LinearizedOps:
    """Banded L_+/L_- with their exact symmetrization weights.

    Active nodes are 1..n-1 for N >= 3 (the node-1 stencil decouples from
    the origin there) and 0..n-1 for N <= 2, where the origin row carries
    the detailed-balance weight rho_0 = omega_N h^N (3-N)/(4N).  ``sym``
    is sqrt(rho); the symmetrized tridiagonal matrices are exactly
    symmetric for N <= 3.  For N >= 4 the interior rows switch to the
    flux (Sturm-Liouville) form, which is exactly symmetric with respect
    to rho = omega_N r^{N-1} h for every N.
    """

    grid: RadialGrid
    gp: GroundProfile | None
    p: float
    const: float                 # 1 in the intercritical convention, 0 critical
    potential: np.ndarray        # Q^{p-1} (or W^{p_c - 1}) on active nodes
    idx0: int                    # first active node
    rho: np.ndarray              # detailed-balance weights on active nodes
    sym: np.ndarray              # sqrt(rho)
    lap_lo: np.ndarray           # Laplacian bands on active nodes
    lap_di: np.ndarray
    lap_up: np.ndarray

    @property
    def m(self) -> int:
        return self.lap_di.size

    # ---- band applications (active-node vectors) ----

    def apply_lap(self, v):
        out = np.empty_like(v)
        out[0] = self.lap_di[0] * v[0] + self.lap_up[0] * v[1]
        out[1:-1] = (self.lap_lo[1:-1] * v[:-2] + self.lap_di[1:-1] * v[1:-1]
                     + self.lap_up[1:-1] * v[2:])
        out[-1] = self.lap_lo[-1] * v[-2] + self.lap_di[-1] * v[-1]
        return out

    def apply_lplus(self, v):
        return self.const * v - self.apply_lap(v) - self.p * self.potential * v

    def apply_lminus(self, v):
        return self.const * v - self.apply_lap(v) - self.potential * v

    def apply_script_l(self, g):
        """script_L g = -L_- g_2 + i L_+ g_1 on active-node complex vectors."""
        return -self.apply_lminus(g.imag) + 1j * self.apply_lplus(g.real)

    # ---- band triples (sub, diag, sup) of L_+ / L_- ----

    def bands_lplus(self):
        return (-self.lap_lo[1:],
                self.const - self.lap_di - self.p * self.potential,
                -self.lap_up[:-1])

    def bands_lminus(self):
        return (-self.lap_lo[1:],
                self.const - self.lap_di - self.potential,
                -self.lap_up[:-1])

    def sym_tridiag(self, bands):
        """Symmetrized (diagonal, offdiagonal) of a band triple."""
        sub, dia, sup = bands
        off = sup * self.sym[:-1] / self.sym[1:]
        return dia, off

    # ---- field <-> active-vector helpers ----

    def restrict(self, f: Field):
        if not f.grid.same_as(self.grid):
            raise GridMismatchError("field does not live on the operator grid")
        return f.values[self.idx0:self.grid.n]

    def extend(self, v, real=False) -> Field:
        """Active-node vector -> Field; slaved nodes filled by regularity."""
        full = np.zeros(self.grid.n + 1, dtype=complex)
        full[self.idx0:self.grid.n] = v
        if self.idx0 == 1:
            full[0] = (4.0 * full[1] - full[2]) / 3.0  # f'(0) = 0, 2nd order
        fld = Field(self.grid, full)
        if real:
            fld = Field(self.grid, full.real.astype(complex), real=True)
        return fld


def _flux_bands(grid: RadialGrid, idx0: int):
    """Divergence-form bands on nodes idx0..n-1, exactly rho-symmetric."""
    N, h, n = grid.N, grid.h, grid.n
    i = np.arange(idx0, n, dtype=float)
    rm = (i - 0.5) * h
    rp = (i + 0.5) * h
    ri = np.maximum(i * h, 1e-300)
    lo = rm ** (N - 1) / (h**2 * ri ** (N - 1))
    up = rp ** (N - 1) / (h**2 * ri ** (N - 1))
    lo[0] = 0.0  # zero flux through the inner face
    return lo, -(lo + up), up


def assemble(gp: GroundProfile) -> LinearizedOps:
    """L_+/L_- around a certified ground profile (intercritical, const = 1)."""
    return _assemble(gp.grid, gp.Q.values.real, gp.p, const=1.0, gp=gp)


def assemble_critical(W: Field) -> LinearizedOps:
    """L_+/L_- around the static critical profile W (const = 1 - s_c = 0).

    Used only for static quadratic-form checks such as Phi(W).
    """
    N = W.grid.N
    p_c = (N + 2.0) / (N - 2.0)
    return _assemble(W.grid, W.values.real, p_c, const=0.0, gp=None)


def _assemble(grid: RadialGrid, profile, p: float, const: float,
              gp: GroundProfile | None) -> LinearizedOps:
    N, n, h = grid.N, grid.n, grid.h
    idx0 = 0 if N <= 2 else 1
    if N <= 3:
        lo, di, up = laplacian_bands(grid)
        lo, di, up = lo[idx0:n].copy(), di[idx0:n].copy(), up[idx0:n].copy()
        if idx0 == 1:
            lo[0] = 0.0  # exact for N = 3: the node-1 row has no origin term
    else:
        lo, di, up = _flux_bands(grid, idx0=1)
        idx0 = 1
    rho = omega_n(N) * grid.r[idx0:n] ** (N - 1) * h
    if idx0 == 0:
        # detailed balance for the origin row: rho_0 T_01 = rho_1 T_10
        rho[0] = omega_n(N) * h**N * (3.0 - N) / (4.0 * N)
    return LinearizedOps(
        grid=grid, gp=gp, p=float(p), const=float(const),
        potential=profile[idx0:n] ** (p - 1.0), idx0=idx0,
        rho=rho, sym=np.sqrt(rho),
        lap_lo=lo, lap_di=di, lap_up=up,
    )


def scaling_generator(gp: GroundProfile) -> Field:
    """Lam Q = 2/(p-1) Q + r Q' (centered derivative)."""
    grid = gp.grid
    q = gp.Q.values.real
    lam = 2.0 / (gp.p - 1.0) * q + grid.r * gradient_values(grid, q).real
    lam[-1] = 0.0
    return Field(grid, lam.astype(complex), real=True)


def bilinear_B(f: Field, g: Field, ops: LinearizedOps) -> float:
    """B(f, g) = 1/2 (L_+ f_1, g_1) + 1/2 (L_- f_2, g_2) under quadrature."""
    fv = ops.restrict(f)
    gv = ops.restrict(g)
    t1 = np.dot(ops.rho * ops.apply_lplus(fv.real), gv.real)
    t2 = np.dot(ops.rho * ops.apply_lminus(fv.imag), gv.imag)
    return float(0.5 * (t1 + t2))


def linearized_energy_phi(f: Field, ops: LinearizedOps) -> float:
    """Phi(f) = B(f, f)."""
    return bilinear_B(f, f, ops)


def phi_quadratic_form(f: Field, ops: LinearizedOps) -> float:
    """Phi(f) evaluated in integral form,

        Phi(f) = const/2 int |f|^2 + 1/2 int |grad f|^2
                 - 1/2 int V (p f_1^2 + f_2^2),

    which agrees with B(f, f) for decaying fields but, unlike the banded
    operator (whose last row pins f(rmax) = 0), stays correct for slowly
    decaying static profiles such as W.
    """
    grid = f.grid
    w = grid.w
    v1 = f.values.real
    v2 = f.values.imag
    pot = np.zeros(grid.n + 1)
    pot[ops.idx0:grid.n] = ops.potential
    if ops.idx0 == 1:  # extend the potential to the slaved origin node
        base = ops.gp.Q.values.real if ops.gp is not None else None
        pot[0] = (base[0] ** (ops.p - 1.0) if base is not None
                  else (4 * pot[1] - pot[2]) / 3.0)
    pot[grid.n] = pot[grid.n - 1]
    g1 = gradient_values(grid, v1)
    g2 = gradient_values(grid, v2)
    return float(
        0.5 * ops.const * np.dot(w, v1**2 + v2**2)
        + 0.5 * np.dot(w, g1**2 + g2**2)
        - 0.5 * np.dot(w, pot * (ops.p * v1**2 + v2**2)))


@dataclass
class SpectrumData:
    """Eigen-triple (e0, Y1, Y2) with the artifact's normalizations.

    L_+ Y1 = e0 Y2 and L_- Y2 = -e0 Y1;  (Y1, Q)_{L2} = 0 is forced.
    (Y1, Y2)_{L2} = -1/e0, hence B(Y+, Y-) = -1 (the sign is dictated by
    the eigenpair; see module docstring), and (Q, Y1)_{H1} > 0.
    ``decay_eta`` is the fitted margin in |Y| <~ Q e^{-eta r}.
    ``mu_second`` is the second-smallest eigenvalue of the symmetrized
    product on {Q}^perp (coarse grid), the simplicity proxy.
    """

    e0: float
    Y1: Field
    Y2: Field
    residual_plus: float
    residual_minus: float
    decay_eta: float
    mu_second: float
    q_overlap: float

    def y_plus_values(self):
        return self.Y1.values + 1j * self.Y2.values


def _dense_bottom(ops: LinearizedOps, qvec):
    """Dense path: A = (P L~_- P)^{1/2}, S = A L~_+ A, bottom of S on {Q}^perp."""
    m = ops.m
    dp, off_p = ops.sym_tridiag(ops.bands_lplus())
    dm, off_m = ops.sym_tridiag(ops.bands_lminus())

    def dense_mat(d, o):
        M = np.diag(d)
        k = np.arange(m - 1)
        M[k, k + 1] = o
        M[k + 1, k] = o
        return M

    Lp = dense_mat(dp, off_p)
    Lm = dense_mat(dm, off_m)
    qt = ops.sym * qvec
    qt = qt / np.linalg.norm(qt)
    P = np.eye(m) - np.outer(qt, qt)
    lam, V = eigh(P @ Lm @ P)
    # discretization can push the zero mode slightly negative; clamp
    A = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    mu, G = eigh(A @ Lp @ A)
    return mu, G, A


def _refine_inverse_iteration(ops: LinearizedOps, e0_guess: float, y_guess,
                              tol: float, max_iter: int = 60):
    """Shifted inverse iteration on the pentadiagonal product L~_- L~_+.

    Finds the unique negative eigenvalue -e0^2 (eigenvector = symmetrized
    Y1) with a directly controlled residual; O(n) per iteration.
    """
    m = ops.m
    dp, op_ = ops.sym_tridiag(ops.bands_lplus())
    dm, om_ = ops.sym_tridiag(ops.bands_lminus())

    def product_bands(shift):
        # C = L~_- L~_+ + shift, pentadiagonal (both factors symmetric tri)
        c0 = dm * dp + shift
        c0[1:] += om_ * op_
        c0[:-1] += om_ * op_
        ab = np.zeros((5, m))
        ab[0, 2:] = om_[:-1] * op_[1:]              # C[i, i+2]
        ab[1, 1:] = dm[:-1] * op_ + om_ * dp[1:]    # C[i, i+1]
        ab[2, :] = c0
        ab[3, :-1] = om_ * dp[:-1] + dm[1:] * op_   # C[i+1, i]
        ab[4, :-2] = om_[1:] * op_[:-1]             # C[i+2, i]
        return ab

    def apply_prod(x):
        # L~_- (L~_+ x)
        y = dp * x
        y[:-1] += op_ * x[1:]
        y[1:] += op_ * x[:-1]
        z = dm * y
        z[:-1] += om_ * y[1:]
        z[1:] += om_ * y[:-1]
        return z

    mu = -e0_guess**2
    x = y_guess / np.linalg.norm(y_guess)
    shift = -1.05 * mu  # sits below -e0^2, far from the 0 mode
    ab = product_bands(shift)
    best = math.inf
    stall = 0
    for it in range(max_iter):
        x_new = solve_banded((2, 2), ab, x)
        x_new /= np.linalg.norm(x_new)
        Ax = apply_prod(x_new)
        mu = float(np.dot(x_new, Ax))
        res = float(np.linalg.norm(Ax - mu * x_new))
        x = x_new
        if res <= tol * max(abs(mu), 1.0):
            return mu, x, res
        # the product matrix has norm ~ h^-4; once the residual floors at
        # its roundoff level further sweeps cannot help
        stall = stall + 1 if res > 0.5 * best else 0
        best = min(best, res)
        if stall >= 2 and it >= 4:
            break
        if it == max_iter // 2:  # one shift update keeps convergence fast
            shift = -mu * 1.02
            ab = product_bands(shift)
    if res <= 1e-5 * max(abs(mu), 1.0):
        return mu, x, res
    raise NonConvergenceError(
        f"inverse iteration stalled: residual {res:.3e}, "
        f"eigenvalue estimate {mu:.6e}")


def compute_spectrum(ops: LinearizedOps, dense_nodes: int = 2200,
                     refine_tol: float = 1e-12,
                     start: "SpectrumData | None" = None) -> SpectrumData:
    """Eigenvalue e0 and eigenfunctions Y1, Y2 of the linearized flow.

    A dense symmetric eigendecomposition (on the grid itself when it is
    small enough, otherwise on a coarse companion grid) supplies the
    negative-eigenvalue bracket, the simplicity proxy, and a starting
    vector; shifted inverse iteration on the full grid then drives the
    eigen-residual to ``refine_tol``.  Passing ``start`` (a spectrum
    computed on a coarser grid with the same rmax) skips the dense stage.
    """
    if ops.gp is None:
        raise SpectralFailureError("spectrum requires intercritical operators")
    grid = ops.grid
    gp = ops.gp
    qvec = ops.restrict(gp.Q).real

    if start is not None:
        e0_guess = start.e0
        mu_second = start.mu_second
        y_start = np.interp(grid.r, start.Y1.grid.r,
                            start.Y1.values.real)[ops.idx0:grid.n] * ops.sym
    else:
        if ops.m <= dense_nodes:
            mu_c, G_c, A_c = _dense_bottom(ops, qvec)
            y_start = A_c @ G_c[:, 0]
        else:
            from .grid import make_grid
            from .ground import solve_ground
            n_c = max(int(math.ceil(grid.rmax / 0.02)), 600)
            cgrid = make_grid(grid.N, grid.rmax, n_c)
            cgp = solve_ground(cgrid, gp.p, polish=True)
            cops = assemble(cgp)
            mu_c, G_c, A_c = _dense_bottom(cops, cops.restrict(cgp.Q).real)
            ycoarse = cops.extend((A_c @ G_c[:, 0]) / cops.sym).values.real
            y_start = np.interp(grid.r, cgrid.r, ycoarse)[ops.idx0:grid.n] * ops.sym
        if not mu_c[0] < 0:
            raise SpectralFailureError(
                f"no negative eigenvalue found (bottom of spectrum {mu_c[0]:.3e}); "
                "the ground profile or grid is suspect")
        mu_second = float(mu_c[1])
        e0_guess = math.sqrt(-mu_c[0])

    mu, ysym, res = _refine_inverse_iteration(ops, e0_guess, y_start, refine_tol)
    if not mu < 0:
        raise SpectralFailureError(f"refined bottom eigenvalue is {mu:.3e} >= 0")
    e0 = math.sqrt(-mu)

    y1 = ysym / ops.sym
    y2 = ops.apply_lplus(y1) / e0

    # normalization |B(Y+,Y-)| = 1: (Y1, Y2) = -1/e0 (negative is forced)
    ip12 = float(np.dot(ops.rho, y1 * y2))
    sc = 1.0 / math.sqrt(abs(ip12) * e0)
    y1 *= sc
    y2 *= sc

    # sign convention (Q, Y1)_{H1} > 0
    Y1f = ops.extend(y1, real=True)
    qy1 = _h1_inner(gp.Q, Y1f)
    if qy1 < 0:
        y1, y2 = -y1, -y2
        Y1f = ops.extend(y1, real=True)
    Y2f = ops.extend(y2, real=True)

    rp = float(np.linalg.norm(ops.apply_lplus(y1) - e0 * y2)
               / max(np.linalg.norm(e0 * y2), 1e-300))
    rm = float(np.linalg.norm(ops.apply_lminus(y2) + e0 * y1)
               / max(np.linalg.norm(e0 * y1), 1e-300))
    qov = abs(float(np.dot(ops.rho, qvec * y1))) / (
        math.sqrt(float(np.dot(ops.rho, qvec**2)))
        * math.sqrt(float(np.dot(ops.rho, y1**2))))

    eta = _decay_margin(grid, gp, Y1f, Y2f)
    return SpectrumData(e0=e0, Y1=Y1f, Y2=Y2f, residual_plus=rp,
                        residual_minus=rm, decay_eta=eta,
                        mu_second=mu_second, q_overlap=qov)


def _h1_inner(f: Field, g: Field) -> float:
    w = f.grid.w
    df = gradient_values(f.grid, f.values.real)
    dg = gradient_values(g.grid, g.values.real)
    return float(np.dot(w, f.values.real * g.values.real) + np.dot(w, df * dg))


def _decay_margin(grid: RadialGrid, gp: GroundProfile, Y1: Field, Y2: Field) -> float:
    """Log-linear fit of |Y|/Q on the inner window, above the noise floor.

    The window [rmax/3, 2 rmax/3] is additionally clipped to nodes where Q
    is above its relative floor and |Y| is above the eigen-solver noise,
    so the fit never touches roundoff-dominated tails.
    """
    q = gp.Q.values.real
    absy = np.abs(Y1.values.real + 1j * Y2.values.real)
    yfloor = 1e-11 * float(np.max(absy))
    qfloor = Q_FLOOR * q[0]
    mask = ((grid.r >= grid.rmax / 3.0) & (grid.r <= 2.0 * grid.rmax / 3.0)
            & (q > qfloor) & (absy > yfloor))
    if np.count_nonzero(mask) < 8:
        return float("nan")
    slope = np.polyfit(grid.r[mask], np.log(absy[mask] / q[mask]), 1)[0]
    return float(-slope)


def resolvent_solve(c: float, F: Field, ops: LinearizedOps,
                    tol: float = 1e-9) -> Field:
    """Solve (script_L + c) g = F for decaying F and real c off the spectrum.

    Eliminating g_1 = (F_1 + L_- g_2)/c reduces the coupled system to the
    pentadiagonal real solve  (L_+ L_- + c^2) g_2 = c F_2 - L_+ F_1.
    The back-substituted residual must come out below ``tol``.
    """
    if c == 0.0:
        raise SingularSystemError("c = 0 lies in the spectrum of script_L")
    fv = ops.restrict(F)
    m = ops.m
    dp, op_ = ops.sym_tridiag(ops.bands_lplus())
    dm, om_ = ops.sym_tridiag(ops.bands_lminus())
    s = ops.sym

    f1 = s * fv.real
    f2 = s * fv.imag

    def apply_sym(d, o, x):
        y = d * x
        y[:-1] += o * x[1:]
        y[1:] += o * x[:-1]
        return y

    rhs = c * f2 - apply_sym(dp, op_, f1)
    # pentadiagonal bands of L~_+ L~_- + c^2
    c0 = dp * dm + c * c
    c0[1:] += op_ * om_
    c0[:-1] += op_ * om_
    c1u = dp[:-1] * om_ + op_ * dm[1:]
    c1l = op_ * dm[:-1] + dp[1:] * om_
    ab = np.zeros((5, m))
    ab[0, 2:] = op_[:-1] * om_[1:]
    ab[1, 1:] = c1u
    ab[2, :] = c0
    ab[3, :-1] = c1l
    ab[4, :-2] = op_[1:] * om_[:-1]
    try:
        g2 = solve_banded((2, 2), ab, rhs)
    except Exception as exc:  # singular to machine precision
        raise SingularSystemError(f"banded resolvent solve failed: {exc}") from exc
    g1 = (f1 + apply_sym(dm, om_, g2)) / c

    gsym = g1 + 1j * g2
    gv = gsym / s
    res = np.linalg.norm(ops.apply_script_l(gv) + c * gv - fv)
    nf = np.linalg.norm(fv)
    if nf > 0 and res > tol * nf:
        raise SingularSystemError(
            f"resolvent residual {res / nf:.3e} exceeds {tol:.1e}; "
            f"c = {c} is too close to the spectrum")
    return ops.extend(gv)


def coercivity_min(ops: LinearizedOps, spectrum: SpectrumData,
                   subspace: str = "Gperp") -> float:
    """Minimal Rayleigh quotient Phi(f)/||f||_{H1}^2 on a constraint set.

    Constraints (radial sector; w-weighted inner products):
      Gperp:       int Q^p v_1 = 0   and  int Q v_2 = 0
      Gtildeperp:  int Y2 v_1 = 0,   int Q v_2 = 0,  int Y1 v_2 = 0
    The real and imaginary sectors decouple in both Phi and the H1 form,
    so the minimum is the smaller of the two sector minima, each solved as
    a dense symmetric-definite generalized eigenproblem on the constraint
    null space.
    """
    if ops.gp is None:
        raise SpectralFailureError("coercivity requires intercritical operators")
    qvec = ops.restrict(ops.gp.Q).real
    y1 = ops.restrict(spectrum.Y1).real
    y2 = ops.restrict(spectrum.Y2).real
    p = ops.p
    if subspace == "Gperp":
        cons1 = [qvec**p]
        cons2 = [qvec]
    elif subspace == "Gtildeperp":
        cons1 = [y2]
        cons2 = [qvec, y1]
    else:
        raise ValueError(f"unknown subspace {subspace!r}")

    val1 = _sector_min(ops, ops.bands_lplus(), cons1)
    val2 = _sector_min(ops, ops.bands_lminus(), cons2)
    return min(val1, val2)


def _sector_min(ops: LinearizedOps, bands, constraints) -> float:
    m = ops.m
    d, off = ops.sym_tridiag(bands)
    dlap, offlap = ops.sym_tridiag((ops.lap_lo[1:], ops.lap_di, ops.lap_up[:-1]))

    def dense_mat(dg, od):
        M = np.diag(dg)
        k = np.arange(m - 1)
        M[k, k + 1] = od
        M[k + 1, k] = od
        return M

    K = 0.5 * dense_mat(d, off)                    # 1/2 (L f, f)
    H = dense_mat(1.0 - dlap, -offlap)             # ||f||^2 + ||grad f||^2 form
    # constraint (c, v)_rho = (s c, s v): rows live in symmetrized coordinates
    C = np.array([ops.sym * c for c in constraints])
    # orthonormal basis of the constraint null space
    _, _, Vt = np.linalg.svd(C, full_matrices=True)
    Z = Vt[len(constraints):].T
    Kz = Z.T @ (K @ Z)
    Hz = Z.T @ (H @ Z)
    vals = eigh(Kz, Hz, eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])
