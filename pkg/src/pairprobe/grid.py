"""Radial grid, sine-spectral kinetic operator, and grid-Hamiltonian eigensolver.

The wavefunction lives on a uniform grid r_j = r_min + j*dr. The kinetic
operator is applied spectrally in the sine (DST-II/III) basis, which pins the
wavefunction to zero at hard walls half a step outside both grid edges. This
keeps the weakly bound ladder free of the spurious near-zero extended mode a
periodic (FFT) kinetic operator would admit, at identical cost.

Eigensolver strategy:

* n <= DENSE_LIMIT: dense symmetric diagonalization of T + diag(V).
* larger n, bound states: dense solve on a same-spacing truncated prefix of
  the grid (bound states are spatially compact), zero-padded back onto the
  full grid; the embedding residual is checked against the full operator.
* larger n, positive-energy box states: Numerov shooting for the box
  eigenvalue, sampled onto the grid, then polished by deflating the bound
  subspace and applying a short Chebyshev-Gaussian spectral filter.

Every returned eigenpair is validated against ``GridHamiltonian.apply`` with
an absolute residual tolerance; failure raises ConvergenceError.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
from scipy.optimize import brentq

from . import shooting
from .units import HARTREE_TO_CM1, RB2_REDUCED_MASS

DENSE_LIMIT = 4096
RESIDUAL_TOL = 1e-8


class GridError(ValueError):
    """Grid construction or shape mismatch error."""


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Grid:
    """Uniform radial grid with sine-spectral kinetic metadata.

    Hard walls sit at r_min - dr/2 and r_max + dr/2; the sine box length is
    exactly n_points * dr and k_max = pi/dr.
    """

    r_min: float
    r_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise GridError("n_points must be >= 2")
        if self.n_points & (self.n_points - 1):
            raise GridError(f"n_points must be a power of two, got {self.n_points}")
        if self.r_max <= self.r_min:
            raise GridError("r_max must exceed r_min")

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.n_points - 1)

    @property
    def box_length(self) -> float:
        return self.n_points * self.dr

    @property
    def k_max(self) -> float:
        return np.pi / self.dr

    @property
    def r(self) -> np.ndarray:
        return self.r_min + self.dr * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Sine-mode wavenumbers k_m = m*pi/(n*dr), m = 1..n."""
        return np.pi * np.arange(1, self.n_points + 1) / self.box_length

    @property
    def wall_left(self) -> float:
        return self.r_min - 0.5 * self.dr

    @property
    def wall_right(self) -> float:
        return self.r_max + 0.5 * self.dr


def default_grid() -> Grid:
    """Default production grid: fits the 20 uK de Broglie wavelength."""
    return Grid(r_min=3.0, r_max=4000.0, n_points=16384)


def apply_kinetic(grid: Grid, psi: np.ndarray, mass: float = RB2_REDUCED_MASS) -> np.ndarray:
    """(-1/2m) d^2/dr^2 via forward sine transform, k^2/2m multiply, inverse.

    Works on the last axis, so stacked wavefunctions propagate in one call.
    """
    psi = np.asarray(psi)
    if psi.shape[-1] != grid.n_points:
        raise GridError(
            f"wavefunction length {psi.shape[-1]} != grid n_points {grid.n_points}"
        )
    tk = grid.k**2 / (2.0 * mass)
    return sfft.idst(tk * sfft.dst(psi, type=2, norm="ortho", axis=-1),
                     type=2, norm="ortho", axis=-1)


def kinetic_matrix(grid: Grid, mass: float = RB2_REDUCED_MASS) -> np.ndarray:
    """Dense n x n kinetic matrix (symmetrized for eigh)."""
    tk = grid.k**2 / (2.0 * mass)
    eye = np.eye(grid.n_points)
    t = sfft.idst(tk[:, None] * sfft.dst(eye, type=2, norm="ortho", axis=0),
                  type=2, norm="ortho", axis=0)
    return 0.5 * (t + t.T)


def norm(grid: Grid, psi: np.ndarray) -> float:
    """L2 norm with the dr integration weight."""
    return float(np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dr))


def inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b) * grid.dr)


def momentum_coverage(grid: Grid, v: np.ndarray, e_max: float,
                      mass: float = RB2_REDUCED_MASS) -> float:
    """k_max over the largest kinetic momentum any state up to e_max develops."""
    k_need = np.sqrt(2.0 * mass * max(e_max - float(np.min(v)), 1e-300))
    return grid.k_max / k_need


@dataclass(frozen=True, eq=False)
class GridHamiltonian:
    """H = T + diag(v) on a Grid. ``v`` already contains the centrifugal term
    for partial wave ``j`` (kept as metadata)."""

    grid: Grid
    v: np.ndarray
    mass: float = RB2_REDUCED_MASS
    j: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        if len(v) != self.grid.n_points:
            raise GridError("potential sample count does not match grid")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return apply_kinetic(self.grid, psi, self.mass) + self.v * psi

    def expectation(self, psi: np.ndarray) -> float:
        nrm = np.sum(np.abs(psi) ** 2)
        return float(np.real(np.vdot(psi, self.apply(psi))) / nrm)

    def spectral_bounds(self, margin: float = 0.05) -> tuple[float, float]:
        """Safe (E_min, E_max) enclosing the spectrum, padded by ``margin``."""
        t_max = self.grid.k_max**2 / (2.0 * self.mass)
        e_min = float(np.min(self.v))
        e_max = float(np.max(self.v)) + t_max
        span = e_max - e_min
        return e_min - margin * span, e_max + margin * span

    def dense_matrix(self) -> np.ndarray:
        return kinetic_matrix(self.grid, self.mass) + np.diag(self.v)

    def residual(self, energy: float, psi: np.ndarray) -> float:
        return float(np.linalg.norm(self.apply(psi) - energy * psi)
                     / np.linalg.norm(psi))


def filter_gaussian(h: GridHamiltonian, psi: np.ndarray, center: float,
                    width: float, order: int = 300) -> np.ndarray:
    """Apply exp(-(H-center)^2 / 2 width^2) to psi via Chebyshev expansion."""
    e_min, e_max = h.spectral_bounds(margin=0.02)
    half = 0.5 * (e_max - e_min)
    mid = 0.5 * (e_max + e_min)
    m = 2 * order
    theta = np.pi * (np.arange(m) + 0.5) / m
    x = np.cos(theta)
    fx = np.exp(-((half * x + mid - center) ** 2) / (2.0 * width * width))
    coef = np.array([2.0 / m * np.sum(fx * np.cos(k * theta)) for k in range(order)])
    coef[0] *= 0.5

    def h_norm(vec):
        return (h.apply(vec) - mid * vec) / half

    t_prev = psi
    t_cur = h_norm(psi)
    out = coef[0] * t_prev + coef[1] * t_cur
    for k in range(2, order):
        t_next = 2.0 * h_norm(t_cur) - t_prev
        out += coef[k] * t_next
        t_prev, t_cur = t_cur, t_next
    return out


@lru_cache(maxsize=8)
def _bound_set(h: GridHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """All E < 0 eigenpairs of h via truncated dense solve, grid-embedded.

    Returns (energies, states) with states rows normalized to unit vector
    norm (no dr weight). Cached per Hamiltonian instance.
    """
    n = h.grid.n_points
    n_tr = min(n, 1024)
    while True:
        w, u = _dense_prefix_eig(h, n_tr)
        nb = int(np.sum(w < 0.0))
        edge = np.abs(u[max(n_tr - 8, 0):, :nb]).max() if nb else 0.0
        if n_tr == n or (nb and edge < 1e-9) or (nb == 0 and n_tr >= 4096):
            break
        n_tr = min(n, 2 * n_tr)
    states = np.zeros((nb, n))
    states[:, :n_tr] = u[:, :nb].T
    return w[:nb], states


def _dense_prefix_eig(h: GridHamiltonian, n_tr: int):
    """Dense eigendecomposition of the Hamiltonian restricted to the first
    n_tr grid points (same spacing, wall moved in)."""
    dr = h.grid.dr
    tk = (np.pi * np.arange(1, n_tr + 1) / (n_tr * dr)) ** 2 / (2.0 * h.mass)
    eye = np.eye(n_tr)
    t = sfft.idst(tk[:, None] * sfft.dst(eye, type=2, norm="ortho", axis=0),
                  type=2, norm="ortho", axis=0)
    ham = 0.5 * (t + t.T) + np.diag(h.v[:n_tr])
    return sla.eigh(ham)


def _box_state_ode(h: GridHamiltonian, e_target: float):
    """Numerov-shot box eigenstate with eigenvalue nearest e_target > 0.

    Returns (energy, psi) with psi sampled on the grid (unit vector norm),
    before spectral polishing.
    """
    g = h.grid
    sub = 16
    dro = g.dr / sub
    v_grid = h.v

    def pot(rr):
        # linear interpolation of the sampled potential onto the fine mesh
        return np.interp(rr, g.r, v_grid)

    mesh = g.wall_left + dro * np.arange(int(round(g.box_length / dro)) + 1)
    r_start = shooting.safe_start_radius(pot, e_target, dro, h.mass,
                                         r_lo=max(g.wall_left, 0.05))
    i0 = max(int(np.ceil((r_start - g.wall_left) / dro)), 0)

    def end_value(e):
        f = 2.0 * h.mass * (pot(mesh[i0:]) - e)
        u = shooting._numerov_kernel(np.ascontiguousarray(f), dro)
        return u[-1]

    spacing = np.pi * np.sqrt(2.0 * e_target / h.mass) / g.box_length
    offsets = np.arange(-1.5, 1.51, 0.25)
    roots = []
    for widen in range(4):
        es = e_target + spacing * offsets * (2.0**widen)
        es = es[es > 0]
        vals = np.array([end_value(e) for e in es])
        sign_flips = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
        for i in sign_flips:
            roots.append(brentq(end_value, es[i], es[i + 1],
                                xtol=1e-18, rtol=8.9e-16))
        if roots:
            break
    if not roots:
        raise ConvergenceError(
            f"no box eigenvalue found near E = {e_target:.3e} hartree")
    energy = min(roots, key=lambda e: abs(e - e_target))
    f = 2.0 * h.mass * (pot(mesh[i0:]) - energy)
    u = np.zeros(len(mesh))
    u[i0:] = shooting._numerov_kernel(np.ascontiguousarray(f), dro)
    psi = u[sub // 2::sub][: g.n_points].copy()
    return energy, psi / np.linalg.norm(psi)


def _polish_interior(h: GridHamiltonian, psi: np.ndarray, e_target: float,
                     filter_width: float = 3e-5) -> tuple[float, np.ndarray]:
    """Deflate bound subspace and band-filter high-energy junk from psi."""
    _, bound = _bound_set(h)

    def deflate(vec):
        if len(bound):
            vec = vec - bound.T @ (bound @ vec)
        return vec / np.linalg.norm(vec)

    psi = deflate(psi)
    psi = filter_gaussian(h, psi, e_target, filter_width)
    psi = deflate(psi)
    hp = h.apply(psi)
    energy = float(psi @ hp)
    return energy, psi


def eigensolve(h: GridHamiltonian, count: int, which="lowest",
               residual_tol: float = RESIDUAL_TOL):
    """Eigenpairs of the grid Hamiltonian.

    ``which`` is "lowest" or a tuple ("nearest", energy_hartree). Returns a
    list of (energy, psi) sorted by energy, psi normalized so that
    sum |psi|^2 dr = 1. Raises ConvergenceError (with the residual norm) if
    any returned pair misses ``residual_tol``.
    """
    n = h.grid.n_points
    if count < 1 or count > n:
        raise GridError(f"count must be in [1, {n}]")

    if n <= DENSE_LIMIT:
        w, u = _dense_prefix_eig(h, n)
        if which == "lowest":
            idx = np.arange(count)
        else:
            _, e0 = which
            idx = np.argsort(np.abs(w - e0))[:count]
            idx = np.sort(idx)
        pairs = [(float(w[i]), u[:, i].copy()) for i in idx]
    else:
        pairs = _eigensolve_large(h, count, which)

    out = []
    for energy, psi in sorted(pairs, key=lambda p: p[0]):
        res = h.residual(energy, psi)
        if res > residual_tol:
            raise ConvergenceError(
                f"eigenpair at E = {energy:.6e} hartree has residual "
                f"{res:.2e} > {residual_tol:.0e}", residual=res)
        sign = 1.0
        big = np.nonzero(np.abs(psi) > 1e-8 * np.abs(psi).max())[0]
        if len(big) and psi[big[0]].real < 0:
            sign = -1.0
        out.append((energy, sign * psi / np.sqrt(h.grid.dr)))
    return out


def _eigensolve_large(h: GridHamiltonian, count: int, which):
    w_b, states_b = _bound_set(h)
    nb = len(w_b)
    if which == "lowest":
        if count > nb:
            raise ConvergenceError(
                f"grid too large for dense solve and only {nb} bound states "
                f"exist; request count <= {nb} or use ('nearest', E) for "
                "positive-energy box states")
        return [(float(w_b[i]), states_b[i].copy()) for i in range(count)]

    _, e0 = which
    if e0 <= 0.0:
        idx = np.argsort(np.abs(w_b - e0))[:count]
        if len(idx) < count:
            raise ConvergenceError("not enough bound states below threshold")
        return [(float(w_b[i]), states_b[i].copy()) for i in idx]

    # positive-energy targets: shoot box states around e0
    pairs = []
    spacing = np.pi * np.sqrt(2.0 * e0 / h.mass) / h.grid.box_length
    seen = set()
    shift = 0
    while len(pairs) < count:
        for target in (e0 + shift * spacing, e0 - shift * spacing):
            if target <= 0 or len(pairs) >= count:
                continue
            energy, psi = _box_state_ode(h, target)
            key = round(energy / (0.05 * spacing))
            if key in seen:
                continue
            seen.add(key)
            energy, psi = _polish_interior(h, psi, energy)
            pairs.append((energy, psi))
        shift += 1
        if shift > 4 * count + 8:
            raise ConvergenceError("box-state search did not find enough "
                                   "distinct eigenvalues")
    pairs.sort(key=lambda p: abs(p[0] - e0))
    return pairs[:count]


def node_count(psi: np.ndarray, floor_rel: float = 1e-8) -> int:
    """Sign changes of the (real) wavefunction above a noise floor."""
    p = np.real(psi)
    w = p[np.abs(p) > floor_rel * np.abs(p).max()]
    return int(np.sum(w[1:] * w[:-1] < 0.0))


def save_eigenpairs(directory, grid: Grid, pairs) -> None:
    """Dump eigenpairs: levels.csv (energy_cm1, node_count) plus one binary
    blob per state (header: n_points uint64 LE, r_min f64, dr f64; payload:
    little-endian float64 wavefunction)."""
    os.makedirs(directory, exist_ok=True)
    lines = ["energy_cm1,node_count"]
    for i, (energy, psi) in enumerate(pairs):
        lines.append(f"{energy * HARTREE_TO_CM1!r},{node_count(psi)}")
        blob = struct.pack("<Qdd", grid.n_points, grid.r_min, grid.dr)
        blob += np.asarray(np.real(psi), dtype="<f8").tobytes()
        with open(os.path.join(directory, f"state_{i:04d}.bin"), "wb") as fh:
            fh.write(blob)
    with open(os.path.join(directory, "levels.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_eigenstate(path):
    """Read one wavefunction blob; returns (n_points, r_min, dr, psi)."""
    with open(path, "rb") as fh:
        head = fh.read(24)
        n_points, r_min, dr = struct.unpack("<Qdd", head)
        psi = np.frombuffer(fh.read(), dtype="<f8")
    if len(psi) != n_points:
        raise GridError(f"blob payload length {len(psi)} != header {n_points}")
    return int(n_points), r_min, dr, psi
