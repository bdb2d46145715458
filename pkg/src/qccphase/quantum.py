"""Quantum side: correlated coherent states on a 2D grid, split-operator
propagation and the quantal structure measure chi_2q.

For a pure state the Wigner-gradient measure collapses to a sum of
variances, ``chi_2q^2 = (2/hbar^2) sum_i Var(gamma_i)``, so propagation never
needs the 4D Wigner function. :func:`chi2q_spectral_diag` builds it anyway on
small grids as an independent check of that identity.

Momentum convention: ``p = hbar * k`` with ``k`` the discrete wavenumbers of
the position grid (``2 pi * fftfreq(n, dq)``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .classical import GaussianSpec, lambda2c_initial, lambda2c_series, mode_moments
from .hamiltonian import ModelParams, higher_derivatives, potential

NORM_TOL = 1e-10
BOUNDARY_TOL = 1e-10
EDGE_CELLS = 2
RESOLUTION_CELLS = 4
MAX_WIGNER_GRID = 64


class BoxError(RuntimeError):
    """Probability reached the edge of the position (or momentum) grid."""


class ResolutionError(ValueError):
    """Initial state is not resolved by the grid."""


@dataclass(frozen=True)
class GridSpec:
    n: int = 512
    half_width: float = 6.0
    hbar: float = 0.05

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {self.n}")
        if not self.half_width > 0 or not self.hbar > 0:
            raise ValueError("half_width and hbar must be positive")

    @property
    def dq(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def q(self) -> np.ndarray:
        return -self.half_width + self.dq * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, self.dq)

    @property
    def p(self) -> np.ndarray:
        return self.hbar * self.k

    @property
    def dp(self) -> float:
        return np.pi * self.hbar / self.half_width


@dataclass
class WaveState:
    grid: GridSpec
    psi: np.ndarray
    t: float = 0.0

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dq**2)


def _mode_wavefunction(q, qbar, pbar, r, eta, hbar):
    x = q - qbar
    chirp = r / np.sqrt(1.0 - r * r)
    return (2 * np.pi * eta * eta) ** -0.25 * np.exp(
        -x * x / (4 * eta * eta) * (1 - 1j * chirp) + 1j * pbar * x / hbar)


def init_correlated_coherent(grid: GridSpec, spec: GaussianSpec) -> WaveState:
    """Product of two correlated coherent states, normalized on the grid.

    Resolution rule per mode: ``eta >= 4 dq`` (grid resolves the packet) and
    ``sigma_p >= 4 hbar/(2L)`` (box holds the packet), plus the centroid must
    sit at least ``4 eta`` inside the box.
    """
    if not np.isclose(grid.hbar, spec.hbar, rtol=1e-12, atol=0):
        raise ValueError(f"grid hbar {grid.hbar} differs from state hbar {spec.hbar}")
    L = grid.half_width
    for i in range(2):
        r, eta = spec.mode(i)
        sigma_p = np.sqrt(mode_moments(r, eta, spec.hbar)[1])
        if eta < RESOLUTION_CELLS * grid.dq * (1 - 1e-12):
            raise ResolutionError(f"mode {i + 1}: eta={eta:.4g} below {RESOLUTION_CELLS} grid cells "
                                  f"(dq={grid.dq:.4g}); increase n")
        if sigma_p < RESOLUTION_CELLS * spec.hbar / (2 * L) * (1 - 1e-12):
            raise ResolutionError(f"mode {i + 1}: momentum width {sigma_p:.4g} not resolved by box "
                                  f"half-width {L}; increase half_width")
        if abs(spec.qbar[i]) + RESOLUTION_CELLS * eta > L:
            raise ResolutionError(f"mode {i + 1}: centroid too close to the box edge")
    q = grid.q
    f1 = _mode_wavefunction(q, spec.qbar[0], spec.pbar[0], spec.r1, spec.eta1, spec.hbar)
    f2 = _mode_wavefunction(q, spec.qbar[1], spec.pbar[1], spec.r2, spec.eta2, spec.hbar)
    psi = np.outer(f1, f2)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dq**2)
    return WaveState(grid, psi, 0.0)


def boundary_mass(state: WaveState) -> float:
    """Probability in the outermost ``EDGE_CELLS`` rows/columns of the box."""
    rho = np.abs(state.psi) ** 2
    e = EDGE_CELLS
    strips = rho[:e].sum() + rho[-e:].sum() + rho[e:-e, :e].sum() + rho[e:-e, -e:].sum()
    return float(strips * state.grid.dq**2)


def _spectral_edge_mass(psi_k: np.ndarray) -> float:
    rho = np.abs(psi_k) ** 2
    n, e = rho.shape[0], EDGE_CELLS
    # highest |k| rows/columns sit around index n/2 in FFT ordering
    band = np.zeros(n, bool)
    band[n // 2 - e:n // 2 + e] = True
    edge = rho[band, :].sum() + rho[~band][:, band].sum()
    return float(edge / rho.sum())


class SplitOperator:
    """Strang-split propagator ``exp(-iV dt/2h) exp(-iT dt/h) exp(-iV dt/2h)``.

    Phase tables are computed once and never modified. ``dt`` may be negative
    for backward propagation. Consecutive half potential phases are fused.
    """

    def __init__(self, grid: GridSpec, params: ModelParams, dt: float):
        self.grid, self.params, self.dt = grid, params, float(dt)
        h = grid.hbar
        q1, q2 = np.meshgrid(grid.q, grid.q, indexing="ij")
        zeros = np.zeros_like(q1)
        V = potential(params, np.stack([q1, q2, zeros, zeros], axis=-1))
        self.v_half = np.exp(-0.5j * V * self.dt / h)
        self.v_full = self.v_half * self.v_half
        k1, k2 = np.meshgrid(grid.k, grid.k, indexing="ij")
        self.kinetic = np.exp(-0.5j * h * (k1 * k1 + k2 * k2) * self.dt)
        for arr in (self.v_half, self.v_full, self.kinetic):
            arr.setflags(write=False)

    def propagate(self, state: WaveState, steps: int, check: bool = True) -> WaveState:
        if state.grid != self.grid:
            raise ValueError("state lives on a different grid")
        psi = state.psi * self.v_half
        psi_k = None
        for i in range(int(steps)):
            psi_k = sfft.fft2(psi, overwrite_x=True)
            psi_k *= self.kinetic
            psi = sfft.ifft2(psi_k, overwrite_x=False)
            psi *= self.v_full if i < steps - 1 else self.v_half
        if steps == 0:
            psi = state.psi.copy()
        out = WaveState(self.grid, psi, state.t + steps * self.dt)
        if check and steps:
            self.check(out, psi_k)
        return out

    def check(self, state: WaveState, psi_k=None):
        mass = boundary_mass(state)
        if mass > BOUNDARY_TOL:
            raise BoxError(f"boundary mass {mass:.3g} at t={state.t:.4g}; enlarge the box")
        if psi_k is None:
            psi_k = sfft.fft2(state.psi)
        edge = _spectral_edge_mass(psi_k)
        if edge > BOUNDARY_TOL:
            raise BoxError(f"momentum-edge mass {edge:.3g} at t={state.t:.4g}; refine the grid")


@lru_cache(maxsize=8)
def _propagator(grid, params, dt):
    return SplitOperator(grid, params, dt)


def step_split_operator(state: WaveState, params: ModelParams, dt: float, steps: int = 1) -> WaveState:
    """Advance ``steps`` split-operator steps; raises :class:`BoxError` if the box leaks."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _propagator(state.grid, params, float(dt)).propagate(state, steps)


def _densities(state: WaveState):
    g = state.grid
    rho_q = np.abs(state.psi) ** 2
    rho_q /= rho_q.sum()
    psi_k = sfft.fft2(state.psi)
    rho_p = np.abs(psi_k) ** 2
    rho_p /= rho_p.sum()
    return rho_q, rho_p, psi_k


def quantum_moments(state: WaveState) -> tuple[np.ndarray, np.ndarray]:
    """Means and variances of ``(q1, q2, p1, p2)``.

    Positions come from ``|psi(q)|^2``, momenta from the spectral density.
    """
    g = state.grid
    rho_q, rho_p, _ = _densities(state)
    means, variances = np.empty(4), np.empty(4)
    for i, (rho, axis_vals) in enumerate([(rho_q, g.q), (rho_q, g.q), (rho_p, g.p), (rho_p, g.p)]):
        marginal = rho.sum(axis=1 - i % 2)
        m = marginal @ axis_vals
        means[i] = m
        variances[i] = marginal @ (axis_vals - m) ** 2
    return means, variances


def quantum_covariance(state: WaveState) -> np.ndarray:
    """Symmetrized 4x4 covariance ``Re<(g_i - <g_i>)(g_j - <g_j>)>``."""
    g = state.grid
    psi = state.psi
    norm = np.sum(np.abs(psi) ** 2)
    means, var = quantum_moments(state)
    q1, q2 = np.meshgrid(g.q, g.q, indexing="ij")
    k1, k2 = np.meshgrid(g.k, g.k, indexing="ij")
    psi_k = sfft.fft2(psi)
    ops = [q1 * psi, q2 * psi, g.hbar * sfft.ifft2(k1 * psi_k), g.hbar * sfft.ifft2(k2 * psi_k)]
    cov = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            cov[i, j] = np.real(np.vdot(ops[i], ops[j])) / norm - means[i] * means[j]
    np.fill_diagonal(cov, var)
    return cov


def chi2q_variance(state: WaveState) -> float:
    """``chi_2q`` from the pure-state variance identity."""
    _, var = quantum_moments(state)
    return float(np.sqrt(2.0 * var.sum()) / state.grid.hbar)


def expected_energy(state: WaveState, params: ModelParams) -> float:
    g = state.grid
    rho_q, rho_p, _ = _densities(state)
    q1, q2 = np.meshgrid(g.q, g.q, indexing="ij")
    zeros = np.zeros_like(q1)
    V = potential(params, np.stack([q1, q2, zeros, zeros], axis=-1))
    k1, k2 = np.meshgrid(g.k, g.k, indexing="ij")
    return float(np.sum(rho_q * V) + 0.5 * g.hbar**2 * np.sum(rho_p * (k1 * k1 + k2 * k2)))


lambda2q_series = lambda2c_series


def mode_gradient_norm(r: float, eta: float, hbar: float) -> float:
    """``int |grad rho^W|^2 dq dp`` for one correlated-coherent mode.

    The Gaussian Wigner function with covariance S (det S = hbar^2/4) gives
    ``tr(S^{-1}) / (4 pi hbar) = (Var q + Var p) / (pi hbar^3)``.
    """
    vq, vp, _ = mode_moments(r, eta, hbar)
    return (vq + vp) / (np.pi * hbar**3)


def mode_square_norm(hbar: float) -> float:
    """``int (rho^W)^2 dq dp`` for any pure Gaussian mode."""
    return 1.0 / (2.0 * np.pi * hbar)


def lambda2q_initial(spec: GaussianSpec, params: ModelParams) -> float:
    """Zero-time quantal exponent with the leading Moyal correction."""
    h = spec.hbar
    _, fourth = higher_derivatives(params, spec.centroid)
    v4 = fourth[0, 0, 1, 1]
    g1 = mode_gradient_norm(spec.r1, spec.eta1, h)
    g2 = mode_gradient_norm(spec.r2, spec.eta2, h)
    s = mode_square_norm(h)
    total = g1 * s + s * g2
    bracket = (spec.r2 / np.sqrt(1 - spec.r2**2) * g1 + spec.r1 / np.sqrt(1 - spec.r1**2) * g2)
    return lambda2c_initial(spec, params) - v4 * bracket / (16.0 * np.pi * total)


@dataclass
class WignerDiag:
    """Discrete Wigner function ``W[q1, q2, p1, p2]`` with its axes."""

    values: np.ndarray
    q: np.ndarray
    p: np.ndarray

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def integral(self) -> float:
        return float(self.values.sum() * self.dq**2 * self.dp**2)


def wigner_function(state: WaveState) -> WignerDiag:
    """Wigner function on integer shifts ``y = m dq`` (zero outside the box).

    The momentum axis has spacing ``pi hbar / (n dq)``, half the wavefunction's.
    """
    g = state.grid
    n = g.n
    if n > MAX_WIGNER_GRID:
        raise ValueError(f"Wigner diagnostic limited to n <= {MAX_WIGNER_GRID}, got {n}")
    pad = n // 2
    padded = np.zeros((2 * n, 2 * n), complex)
    padded[pad:pad + n, pad:pad + n] = state.psi
    shifts = np.fft.ifftshift(np.arange(-n // 2, n // 2))
    plus = np.arange(n)[:, None] + shifts[None, :] + pad
    minus = np.arange(n)[:, None] - shifts[None, :] + pad
    a = np.conj(padded[plus[:, None, :, None], plus[None, :, None, :]])
    a *= padded[minus[:, None, :, None], minus[None, :, None, :]]
    w = sfft.ifft2(a, axes=(2, 3), overwrite_x=True)
    w = np.fft.fftshift(w.real, axes=(2, 3)) * (n * g.dq / (np.pi * g.hbar)) ** 2
    p = np.pi * g.hbar / (n * g.dq) * np.arange(-n // 2, n // 2)
    return WignerDiag(w, g.q.copy(), p)


def chi2q_spectral_diag(state: WaveState) -> float:
    """Gradient-definition chi_2q from the explicit Wigner function.

    Gradients are spectral (per-axis discrete Fourier derivatives), combined
    via Parseval: ``sum |grad W|^2 / sum W^2 = sum |k|^2 |W_k|^2 / sum |W_k|^2``.
    """
    wd = wigner_function(state)
    n = state.grid.n
    wk = np.abs(np.fft.fftn(wd.values)) ** 2
    kq = 2 * np.pi * np.fft.fftfreq(n, wd.dq)
    kp = 2 * np.pi * np.fft.fftfreq(n, wd.dp)
    k2 = (kq[:, None, None, None] ** 2 + kq[None, :, None, None] ** 2
          + kp[None, None, :, None] ** 2 + kp[None, None, None, :] ** 2)
    return float(np.sqrt(np.sum(k2 * wk) / np.sum(wk)))
