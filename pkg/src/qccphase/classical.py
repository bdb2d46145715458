"""Classical Liouville ensembles: Gaussian sampling, tangent propagation and
the phase-space structure measure chi_2c.

The structure measure of the evolved density is computed without ever
building the density. Because the Liouville flow carries gradients with the
stability matrix, ``grad rho_t(gamma(t)) = -J M J grad rho_0(gamma(0))``, so
for a Gaussian initial density

    chi_2c(t)^2 = E_{rho_0^2} |J M J Sigma^{-1} (gamma0 - centroid)|^2

where the expectation is over the normalized square of the initial density
(a Gaussian with covariance Sigma/2). Members sampled from that law need no
importance weights.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .hamiltonian import SYMPLECTIC_J, ModelParams, energy, hessian, potential_hessian

MAX_CORRELATION = 0.99
SYMPLECTIC_TOL = 1e-8
SYMPLECTIC_FAIL = 1e-5
MIN_ESTIMATOR_MEMBERS = 100


class StepSizeError(RuntimeError):
    """Symplectic defect of the propagated stability matrices is too large."""


@dataclass(frozen=True)
class GaussianSpec:
    """Correlated-coherent-state parameters, one ``(r, eta)`` pair per mode.

    Doubles as the classical initial density: the Gaussian whose moments
    equal those of the quantum state.
    """

    r1: float = 0.0
    r2: float = 0.0
    eta1: float = 0.05
    eta2: float = 0.05
    qbar: tuple[float, float] = (0.40, 0.60)
    pbar: tuple[float, float] = (0.50, 0.414)
    hbar: float = 0.005

    def __post_init__(self):
        for name in ("r1", "r2"):
            r = getattr(self, name)
            if not abs(r) <= MAX_CORRELATION:
                raise ValueError(f"|{name}| must be <= {MAX_CORRELATION}, got {r}")
        for name in ("eta1", "eta2", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "qbar", tuple(float(v) for v in self.qbar))
        object.__setattr__(self, "pbar", tuple(float(v) for v in self.pbar))

    @classmethod
    def coherent(cls, hbar, qbar=(0.40, 0.60), pbar=(0.50, 0.414), r=(0.0, 0.0)):
        """State with ``eta1 = eta2 = sqrt(hbar/2)``."""
        eta = float(np.sqrt(hbar / 2.0))
        return cls(r1=r[0], r2=r[1], eta1=eta, eta2=eta, qbar=qbar, pbar=pbar, hbar=hbar)

    @property
    def centroid(self) -> np.ndarray:
        return np.array([*self.qbar, *self.pbar])

    def mode(self, i: int):
        """``(r, eta)`` of mode ``i`` (0 or 1)."""
        return (self.r1, self.eta1) if i == 0 else (self.r2, self.eta2)

    def swapped(self) -> "GaussianSpec":
        return replace(self, r1=self.r2, r2=self.r1, eta1=self.eta2, eta2=self.eta1,
                       qbar=self.qbar[::-1], pbar=self.pbar[::-1])


def mode_moments(r: float, eta: float, hbar: float) -> tuple[float, float, float]:
    """``(Var q, Var p, Cov(q, p))`` of one correlated coherent mode."""
    s = 1.0 - r * r
    return eta * eta, hbar * hbar / (4.0 * eta * eta * s), hbar * r / (2.0 * np.sqrt(s))


def covariance_from_spec(spec: GaussianSpec) -> np.ndarray:
    cov = np.zeros((4, 4))
    for i in range(2):
        vq, vp, c = mode_moments(*spec.mode(i), spec.hbar)
        cov[i, i], cov[i + 2, i + 2] = vq, vp
        cov[i, i + 2] = cov[i + 2, i] = c
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance is not positive definite") from None
    return cov


def sample_initial(spec: GaussianSpec, n: int, seed: int, law: str = "density") -> np.ndarray:
    """Draw ``n`` phase points from the initial density or its normalized square."""
    if n < 1:
        raise ValueError("need at least one sample")
    cov = covariance_from_spec(spec)
    if law == "density-squared":
        cov = cov / 2.0
    elif law != "density":
        raise ValueError(f"unknown sampling law {law!r}")
    chol = np.linalg.cholesky(cov)
    z = np.random.default_rng(seed).standard_normal((n, 4))
    return spec.centroid + z @ chol.T


@dataclass
class TangentEnsemble:
    """Ensemble members stored column-wise: one row per member.

    ``weight`` caches ``Sigma^{-1} (gamma0 - centroid)`` so the structure
    estimator never touches the initial density again.
    """

    gamma0: np.ndarray
    gamma: np.ndarray
    M: np.ndarray
    weight: np.ndarray
    t: float = 0.0

    @classmethod
    def start(cls, spec: GaussianSpec, points: np.ndarray) -> "TangentEnsemble":
        points = np.ascontiguousarray(points, dtype=float)
        inv = np.linalg.inv(covariance_from_spec(spec))
        weight = (points - spec.centroid) @ inv.T
        M = np.ascontiguousarray(np.broadcast_to(np.eye(4), (len(points), 4, 4)))
        return cls(points.copy(), points.copy(), M, weight, 0.0)

    def __len__(self):
        return len(self.gamma)

    def copy(self) -> "TangentEnsemble":
        return TangentEnsemble(self.gamma0, self.gamma.copy(), self.M.copy(), self.weight, self.t)


def symplectic_defect(M: np.ndarray) -> np.ndarray:
    """Frobenius norm of ``M^T J M - J`` for each matrix in the stack."""
    d = np.einsum("...ji,jk,...kl->...il", M, SYMPLECTIC_J, M) - SYMPLECTIC_J
    return np.sqrt(np.einsum("...ij,...ij->...", d, d))


def propagate_tangent(params: ModelParams, ens: TangentEnsemble, dt: float, steps: int,
                      check: bool = True) -> TangentEnsemble:
    """Advance phase points and stability matrices together (RK4).

    ``dt`` may be negative (backward propagation). Raises :class:`StepSizeError`
    when the worst symplectic defect exceeds ``SYMPLECTIC_FAIL``.
    """
    out = ens.copy()
    kernels.tangent_rk4(params.coefficients, out.gamma, out.M, float(dt), int(steps))
    out.t = ens.t + steps * dt
    if check and len(out):
        worst = float(symplectic_defect(out.M).max())
        if not np.isfinite(worst) or worst > SYMPLECTIC_FAIL:
            raise StepSizeError(f"symplectic defect {worst:.3g} at t={out.t:.4g}; reduce dt")
    return out


def propagate_points(params: ModelParams, points: np.ndarray, dt: float, steps: int) -> np.ndarray:
    """Advance bare phase points (no tangent dynamics)."""
    out = np.ascontiguousarray(points, dtype=float).copy()
    kernels.flow_rk4(params.coefficients, out, float(dt), int(steps))
    return out


def chi2c_estimate(spec: GaussianSpec, ens: TangentEnsemble) -> tuple[float, float]:
    """Monte-Carlo chi_2c and its delta-method standard error.

    Members must have been drawn with ``law="density-squared"``.
    """
    n = len(ens)
    if n < MIN_ESTIMATOR_MEMBERS:
        raise ValueError(f"need at least {MIN_ESTIMATOR_MEMBERS} members, got {n}")
    # |J M J w| = |M J w| since J is orthogonal
    v = np.einsum("nij,nj->ni", ens.M, ens.weight @ SYMPLECTIC_J.T)
    sq = np.einsum("ni,ni->n", v, v)
    mean = float(np.sum(sq) / n)
    se_mean = float(np.std(sq, ddof=1) / np.sqrt(n))
    chi = np.sqrt(mean)
    return chi, se_mean / (2.0 * chi)


def chi2c_closed_form(spec: GaussianSpec) -> float:
    """Exact chi_2c at t = 0: ``sqrt(tr(Sigma^{-1}) / 2)``."""
    return float(np.sqrt(0.5 * np.trace(np.linalg.inv(covariance_from_spec(spec)))))


def lambda2c_series(times, chi) -> np.ndarray:
    """Finite-time exponent ``ln(chi(t)/chi(0))/t``; NaN where ``t = 0``."""
    times = np.asarray(times, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if chi.shape != times.shape:
        raise ValueError("times and chi differ in length")
    if np.any(~(chi > 0)):
        raise ValueError("structure measure must stay positive (estimator breakdown)")
    if times[0] != 0.0:
        raise ValueError("series must start at t = 0")
    out = np.full_like(chi, np.nan)
    pos = times > 0
    out[pos] = np.log(chi[pos] / chi[0]) / times[pos]
    return out


def lambda2c_initial(spec: GaussianSpec, params: ModelParams) -> float:
    """Zero-time exponent with the potential curvature taken at the centroid."""
    curv = np.diag(potential_hessian(params, spec.centroid))
    h = spec.hbar
    num = den = 0.0
    for i in range(2):
        r, eta = spec.mode(i)
        s = 1.0 - r * r
        num += h * r / np.sqrt(s) * (1.0 - curv[i])
        den += 2.0 * eta * eta + h * h / (2.0 * s * eta * eta)
    return float(num / den)


def classical_moments(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate sample means and unbiased variances."""
    points = np.asarray(points)
    if len(points) < MIN_ESTIMATOR_MEMBERS:
        raise ValueError(f"need at least {MIN_ESTIMATOR_MEMBERS} members")
    return points.mean(axis=0), points.var(axis=0, ddof=1)


def stability_matrix(params: ModelParams, gamma0, t: float, dt: float = 1e-3) -> np.ndarray:
    """``M(gamma0, t)`` for a single trajectory; steps are rounded to fit ``t``."""
    steps = max(1, int(round(abs(t) / dt)))
    g = np.array(gamma0, dtype=float).reshape(1, 4)
    M = np.eye(4).reshape(1, 4, 4).copy()
    kernels.tangent_rk4(params.coefficients, g, M, np.sign(t) * abs(t) / steps, steps)
    return M[0]


def trajectory_ftle(params: ModelParams, gamma0, t: float, dt: float = 1e-3) -> float:
    """``ln(sigma_max(M(gamma0, t))) / t`` for one trajectory."""
    if not t > 0:
        raise ValueError("t must be positive")
    M = stability_matrix(params, gamma0, t, dt)
    return float(np.log(np.linalg.svd(M, compute_uv=False)[0]) / t)


def energy_drift(params: ModelParams, ens: TangentEnsemble) -> np.ndarray:
    """Relative energy change of every member since ``t = 0``."""
    e0 = energy(params, ens.gamma0)
    return np.abs(energy(params, ens.gamma) - e0) / np.abs(e0)


def linearized_rate(params: ModelParams, gamma0) -> float:
    """Instantaneous stretching rate: top eigenvalue of sym(J H)."""
    K = SYMPLECTIC_J @ hessian(params, gamma0)
    return float(np.linalg.eigvalsh(0.5 * (K + K.T))[-1])
