"""Stability-tensor expansion of the classical structure measure.

Along the centroid trajectory ``gammabar(t)`` the flow map is expanded as

    delta gamma_j(t) = A_jk d_k + (1/2) B_jkl d_k d_l + (1/6) C_jklm d_k d_l d_m + ...

with ``d = delta gamma(0)``; equivalently ``A`` is the stability matrix at the
centroid and ``B``, ``C`` are its first and second derivatives with respect
to the starting point. Substituting the expansion into the Gaussian ensemble
average splits ``chi_2c^2`` into the quantum-like moment term and an
hbar-independent correction ``f(t)`` whose exponential growth sets the
logarithmic break time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classical import GaussianSpec, covariance_from_spec
from .hamiltonian import SYMPLECTIC_J, ModelParams, flow_field, hessian, higher_derivatives

OVERFLOW_NORM = 1e12
FLOOR_FACTOR = 1e3


class TensorOverflowError(ArithmeticError):
    """Stability matrix grew beyond the representable range of the analysis."""


@dataclass(frozen=True)
class StabilityTensors:
    """Snapshot of the expansion coefficients at time ``t``.

    ``B[j, k, l] = d^2 gamma_j(t) / d gamma_k(0) d gamma_l(0)`` and likewise
    ``C`` with three derivative indices, all at the centroid.
    """

    t: float
    centroid: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @classmethod
    def initial(cls, centroid) -> "StabilityTensors":
        return cls(0.0, np.asarray(centroid, dtype=float).copy(), np.eye(4),
                   np.zeros((4, 4, 4)), np.zeros((4, 4, 4, 4)))


def _derivative(params, y):
    g, A, B, C = y
    JH2 = SYMPLECTIC_J @ hessian(params, g)
    h3, h4 = higher_derivatives(params, g)
    JH3 = np.einsum("ka,abc->kbc", SYMPLECTIC_J, h3)
    JH4 = np.einsum("ka,abcd->kbcd", SYMPLECTIC_J, h4)
    dA = JH2 @ A
    dB = np.einsum("kbc,bl,cm->klm", JH3, A, A) + np.einsum("kb,blm->klm", JH2, B)
    # contract one index at a time; the fourth-derivative term is a triple product
    t4 = np.einsum("kbcd,dn->kbcn", JH4, A)
    t4 = np.einsum("kbcn,cm->kbmn", t4, A)
    t4 = np.einsum("kbmn,bl->klmn", t4, A)
    t3 = (np.einsum("kbc,blm,cn->klmn", JH3, B, A)
          + np.einsum("kbc,bln,cm->klmn", JH3, B, A)
          + np.einsum("kbc,bl,cmn->klmn", JH3, A, B))
    dC = t4 + t3 + np.einsum("kb,blmn->klmn", JH2, C)
    return flow_field(params, g), dA, dB, dC


def integrate_tensors(params: ModelParams, centroid, dt: float = 1e-3, t_max: float = 8.0,
                      record_every: int = 10) -> list[StabilityTensors]:
    """RK4 co-integration of the centroid trajectory and ``A``, ``B``, ``C``.

    Returns snapshots every ``record_every`` steps, starting with ``t = 0``.
    Raises :class:`TensorOverflowError` once ``|A|`` exceeds ``OVERFLOW_NORM``.
    """
    if not dt > 0 or not t_max >= 0:
        raise ValueError("need dt > 0 and t_max >= 0")
    first = StabilityTensors.initial(centroid)
    y = (first.centroid, first.A, first.B, first.C)
    out = [first]
    steps = int(round(t_max / dt))
    for s in range(1, steps + 1):
        k1 = _derivative(params, y)
        k2 = _derivative(params, tuple(a + 0.5 * dt * b for a, b in zip(y, k1)))
        k3 = _derivative(params, tuple(a + 0.5 * dt * b for a, b in zip(y, k2)))
        k4 = _derivative(params, tuple(a + dt * b for a, b in zip(y, k3)))
        y = tuple(a + (dt / 6.0) * (p + 2.0 * q + 2.0 * r + w)
                  for a, p, q, r, w in zip(y, k1, k2, k3, k4))
        norm = np.linalg.norm(y[1])
        if not norm <= OVERFLOW_NORM:
            raise TensorOverflowError(f"|A| = {norm:.3g} at t = {s * dt:.4g} exceeds {OVERFLOW_NORM:g}")
        if s % record_every == 0 or s == steps:
            out.append(StabilityTensors(s * dt, *(a.copy() for a in y)))
    return out


def _pairing_bracket() -> np.ndarray:
    """Index bracket of the f(t) sums: Wick pair count / 4 for unit variances."""
    d = np.eye(4)
    all_equal = np.einsum("ij,ik,il->ijkl", d, d, d)
    kk, ll = d[:, :, None, None], d[None, None, :, :]
    kl_ = d[:, None, None, :] * d[None, :, :, None]  # delta_{k l'} delta_{l k'}
    not_kl = 1.0 - d[:, None, :, None]                 # 1 - delta_{k l}
    kl, kpl = d[:, None, :, None], d[None, :, None, :]
    not_kk = 1.0 - d[:, :, None, None]
    return 0.75 * all_equal + 0.25 * ((kk * ll + kl_) * not_kl + kl * kpl * not_kk)


PAIRING_BRACKET = _pairing_bracket()
PAIRING_BRACKET.setflags(write=False)


def f_of_t(tensors: StabilityTensors) -> float:
    """hbar-independent correction to ``chi_2c^2`` for equal-width coherent states."""
    A, B, C, W, J = tensors.A, tensors.B, tensors.C, PAIRING_BRACKET, SYMPLECTIC_J
    bb = np.einsum("jkl,jKL->kKlL", B, B)
    ac = np.einsum("jk,jKlL->kKlL", A, C)
    direct = np.einsum("kKlL,kKlL->", 0.5 * bb + (2.0 / 3.0) * ac, W)
    rotated = np.einsum("km,KM,kKlL,mMlL->", J, J, bb + ac, W)
    return float(rotated - direct)


def _wick(S) -> np.ndarray:
    """``E[d_k d_k' d_l d_l']`` for a zero-mean Gaussian with covariance ``S``."""
    return (np.einsum("ab,cd->abcd", S, S) + np.einsum("ac,bd->abcd", S, S)
            + np.einsum("ad,bc->abcd", S, S))


def chi2c_short_time(tensors: StabilityTensors, spec: GaussianSpec) -> float:
    """Fourth-order expansion of ``chi_2c^2`` for an uncorrelated coherent state.

    The moment term is the mean square displacement from the centroid
    trajectory, taken from the same expansion (``A``, ``B``, ``C``) so that all
    fourth-order contributions cancel consistently.
    """
    if spec.r1 != 0.0 or spec.r2 != 0.0:
        raise ValueError("short-time expansion requires r1 = r2 = 0")
    A, B, C, J = tensors.A, tensors.B, tensors.C, SYMPLECTIC_J
    S = covariance_from_spec(spec)
    Si = np.linalg.inv(S)
    E4 = _wick(S)
    bb = np.einsum("jkl,jKL->kKlL", B, B)
    ac = np.einsum("jk,jKlL->kKlL", A, C)
    moment4 = np.einsum("kKlL,kKlL->", 0.25 * bb + ac / 3.0, E4)
    msd = np.trace(A @ S @ A.T) + moment4
    # alpha = J Sigma^{-1} d, so E[alpha alpha d d] is the Wick tensor rotated twice
    R = J @ Si
    E_alpha = np.einsum("km,KM,mMlL->kKlL", R, R, E4)
    corr = np.einsum("kKlL,kKlL->", 0.25 * (bb + ac), E_alpha)
    h2 = 2.0 / spec.hbar**2
    return float(h2 * msd - h2 * moment4 + corr)


def centroid_shift_term(tensors: StabilityTensors, spec: GaussianSpec) -> float:
    """``(2/hbar^2) |<delta gamma(t)>|^2``: variance vs. mean-square-displacement gap."""
    S = covariance_from_spec(spec)
    shift = 0.5 * np.einsum("jkl,kl->j", tensors.B, S)
    return float(2.0 / spec.hbar**2 * shift @ shift)


@dataclass(frozen=True)
class BreakFit:
    lambda_fit: float
    f0: float
    omega_sq: float
    window: tuple[float, float]
    t_break: float
    residual_rms: float

    def as_metadata(self) -> dict:
        return {"lambda_fit": self.lambda_fit, "f0": self.f0, "omega_sq": self.omega_sq,
                "window_lo": self.window[0], "window_hi": self.window[1],
                "t_break": self.t_break, "fit_residual_rms": self.residual_rms}


def break_time_formula(lam: float, f0: float, omega_sq: float, hbar: float) -> float:
    """``t_b = ln(sqrt(8 Omega^2 / f0) / hbar) / lambda``."""
    return float(np.log(np.sqrt(8.0 * omega_sq / f0) / hbar) / lam)


def default_fit_window(times, f, t_hi: float) -> tuple[float, float]:
    """Window from the first time ``|f|`` exceeds ``FLOOR_FACTOR`` times its
    numerical floor (smallest nonzero magnitude on the series) up to ``t_hi``."""
    times, f = np.asarray(times, dtype=float), np.abs(np.asarray(f, dtype=float))
    nonzero = f[f > 0]
    if nonzero.size == 0:
        raise ValueError("f(t) vanishes identically; no growth to fit")
    above = np.nonzero(f > FLOOR_FACTOR * nonzero.min())[0]
    if above.size == 0 or times[above[0]] >= t_hi:
        raise ValueError("f(t) never rises above its floor before the window end")
    return float(times[above[0]]), float(min(t_hi, times[-1]))


def _window_samples(times, f, window):
    times = np.asarray(times, dtype=float)
    f = np.asarray(f, dtype=float)
    lo, hi = window
    if not (times[0] <= lo < hi <= times[-1]):
        raise ValueError(f"window {window} outside data range [{times[0]}, {times[-1]}]")
    sel = (times >= lo) & (times <= hi)
    if sel.sum() < 3:
        raise ValueError("fit window holds fewer than three samples")
    if np.any(~(f[sel] > 0)):
        raise ValueError("f(t) must be strictly positive on the fit window")
    return sel, times[sel], np.log(f[sel])


def _growth_fit(t, logf):
    coef, res, *_ = np.polyfit(t, logf, 1, full=True)
    slope, intercept = coef
    lam = 0.5 * slope
    if not lam > 0:
        raise ValueError(f"fitted rate {lam:.3g} is not positive: no exponential regime")
    rms = float(np.sqrt(res[0] / t.size)) if res.size else 0.0
    return float(lam), float(np.exp(intercept)), rms


def estimate_break_time(times, f, classical_variances, hbar: float, window) -> BreakFit:
    """Fit ``ln f = ln f0 + 2 lambda t`` on ``window`` and evaluate the break time."""
    sel, t, logf = _window_samples(times, f, window)
    lam, f0, rms = _growth_fit(t, logf)
    omega_sq = float(np.asarray(classical_variances, dtype=float)[sel].max())
    lo, hi = window
    return BreakFit(lam, f0, omega_sq, (float(lo), float(hi)),
                    break_time_formula(lam, f0, omega_sq, hbar), rms)


def pooled_growth_fit(runs) -> tuple[float, float]:
    """One ``(lambda, f0)`` from several ``(times, f, window)`` series.

    ``f`` does not depend on hbar, so runs at different hbar sample the same
    curve; pooling their fit windows gives a single growth rate for all of them.
    """
    t_all, logf_all = [], []
    for times, f, window in runs:
        _, t, logf = _window_samples(times, f, window)
        t_all.append(t)
        logf_all.append(logf)
    lam, f0, _ = _growth_fit(np.concatenate(t_all), np.concatenate(logf_all))
    return lam, f0
