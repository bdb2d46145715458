"""The five experiment families.

Every runner takes a :class:`RunConfig` and returns a :class:`ResultTable`
whose metadata carries the derived scalars (fits, slopes, break times).
Random streams are derived from the configured seed with
``numpy.random.SeedSequence`` so each ensemble is reproducible on its own.
"""
from __future__ import annotations

import warnings

import numpy as np

from .. import __version__
from ..classical import (TangentEnsemble, chi2c_estimate, classical_moments, lambda2c_initial,
                         lambda2c_series, propagate_points, propagate_tangent, sample_initial)
from ..expansion import (BreakFit, centroid_shift_term, chi2c_short_time, default_fit_window,
                         estimate_break_time, f_of_t, integrate_tensors)
from ..hamiltonian import ModelParams
from ..quantum import (SplitOperator, chi2q_variance, init_correlated_coherent, lambda2q_initial,
                       lambda2q_series, quantum_moments)
from .config import RunConfig, config_hash
from .table import ResultTable

BREAK_THRESHOLD = 0.1
MOMENT_HORIZON = 8.0
CONTRAST_WINDOW = (1.0, 10.0)
PLATEAU_WINDOW = (1.0, 2.5)


def _streams(cfg: RunConfig):
    """Independent seeds for the density-squared and density ensembles."""
    return np.random.SeedSequence(cfg.ensemble.seed).spawn(2)


def _times(cfg: RunConfig) -> np.ndarray:
    e = cfg.ensemble
    return np.arange(e.n_records + 1) * (e.dt * e.output_stride)


def _metadata(cfg: RunConfig, **extra) -> dict:
    meta = {"experiment": cfg.experiment, "code_version": __version__,
            "config_hash": config_hash(cfg), "seed": cfg.ensemble.seed}
    meta.update(extra)
    return meta


def classical_structure_series(cfg: RunConfig, params: ModelParams | None = None):
    """``(chi2c, stderr)`` at every record time."""
    e, spec = cfg.ensemble, cfg.spec
    points = sample_initial(spec, e.n_samples, _streams(cfg)[0], "density-squared")
    ens = TangentEnsemble.start(spec, points)
    params = params or cfg.model
    chi, se = np.empty(e.n_records + 1), np.empty(e.n_records + 1)
    chi[0], se[0] = chi2c_estimate(spec, ens)
    for i in range(1, e.n_records + 1):
        ens = propagate_tangent(params, ens, e.dt, e.output_stride)
        chi[i], se[i] = chi2c_estimate(spec, ens)
    return chi, se


def classical_variance_series(cfg: RunConfig) -> np.ndarray:
    """Per-coordinate classical variances, shape ``(records, 4)``."""
    e = cfg.ensemble
    points = sample_initial(cfg.spec, e.n_samples, _streams(cfg)[1], "density")
    out = np.empty((e.n_records + 1, 4))
    out[0] = classical_moments(points)[1]
    for i in range(1, e.n_records + 1):
        points = propagate_points(cfg.model, points, e.dt, e.output_stride)
        out[i] = classical_moments(points)[1]
    return out


def quantum_series(cfg: RunConfig):
    """``(chi2q, variances)`` at every record time from split-operator propagation."""
    e = cfg.ensemble
    state = init_correlated_coherent(cfg.grid, cfg.spec)
    prop = SplitOperator(cfg.grid, cfg.model, e.dt)
    chi, var = np.empty(e.n_records + 1), np.empty((e.n_records + 1, 4))
    for i in range(e.n_records + 1):
        if i:
            state = prop.propagate(state, e.output_stride)
        chi[i] = chi2q_variance(state)
        var[i] = quantum_moments(state)[1]
    return chi, var


def measured_break_time(times, chi_c, chi_q, threshold: float = BREAK_THRESHOLD) -> float:
    """First time the relative gap ``|chi_c - chi_q| / chi_q`` exceeds ``threshold``."""
    rel = np.abs(np.asarray(chi_c) - np.asarray(chi_q)) / np.asarray(chi_q)
    above = np.nonzero(rel > threshold)[0]
    return float(times[above[0]]) if above.size else float("nan")


def run_structure_compare(cfg: RunConfig) -> ResultTable:
    t = _times(cfg)
    chi_c, se = classical_structure_series(cfg)
    chi_q, _ = quantum_series(cfg)
    cols = ("t", "chi2c", "chi2c_stderr", "chi2q", "lambda2c", "lambda2q")
    data = np.column_stack([t, chi_c, se, chi_q, lambda2c_series(t, chi_c), lambda2q_series(t, chi_q)])
    meta = _metadata(cfg, measured_break_time=measured_break_time(t, chi_c, chi_q),
                     lambda2c_initial=lambda2c_initial(cfg.spec, cfg.model),
                     lambda2q_initial=lambda2q_initial(cfg.spec, cfg.model))
    return ResultTable(cols, data, meta, cfg)


def fit_break(times, f, variances, hbar: float, t_hi: float | None = None) -> BreakFit:
    """Break-time fit; without a measured break time, a coarse pass over the
    whole series supplies the window end for a second pass."""
    times = np.asarray(times)
    if t_hi is None or not np.isfinite(t_hi):
        coarse = estimate_break_time(times, f, variances, hbar, default_fit_window(times, f, times[-1]))
        t_hi = min(max(coarse.t_break, coarse.window[0] + 3 * (times[1] - times[0])), times[-1])
    return estimate_break_time(times, f, variances, hbar, default_fit_window(times, f, t_hi))


def run_break_analysis(cfg: RunConfig) -> tuple[ResultTable, BreakFit | None]:
    e, spec = cfg.ensemble, cfg.spec
    t = _times(cfg)
    chi_c, se = classical_structure_series(cfg)
    chi_q, _ = quantum_series(cfg)
    var_c = classical_variance_series(cfg)
    tensors = integrate_tensors(cfg.model, spec.centroid, e.dt, t[-1], e.output_stride)
    f = np.array([f_of_t(x) for x in tensors])
    expansion = np.array([chi2c_short_time(x, spec) for x in tensors])
    shift = np.array([centroid_shift_term(x, spec) for x in tensors])
    a_norm = np.array([np.linalg.norm(x.A) for x in tensors])
    gap = chi_c**2 - chi_q**2
    t_meas = measured_break_time(t, chi_c, chi_q)
    cols = ("t", "chi2c_sq", "chi2c_sq_stderr", "chi2q_sq", "chi2c_sq_minus_chi2q_sq", "f",
            "chi2c_expansion", "centroid_shift", "A_norm", "omega_sq_c")
    data = np.column_stack([t, chi_c**2, 2 * chi_c * se, chi_q**2, gap, f, expansion, shift,
                            a_norm, var_c.max(axis=1)])
    meta = _metadata(cfg, measured_break_time=t_meas)
    try:
        fit = fit_break(t, f, var_c, spec.hbar, t_meas)
    except ValueError as exc:
        fit = None
        meta["break_fit"] = f"none ({exc})"
    else:
        meta.update(fit.as_metadata())
        meta["break_fit_window_rule"] = ("first f above 1e3 x floor .. measured break"
                                         if np.isfinite(t_meas) else "two-pass")
    return ResultTable(cols, data, meta, cfg), fit


def run_moments(cfg: RunConfig) -> ResultTable:
    if cfg.ensemble.t_max > MOMENT_HORIZON:
        warnings.warn(f"t_max = {cfg.ensemble.t_max} lies beyond the validated grid horizon "
                      f"t = {MOMENT_HORIZON}; the box checks still guard the run", stacklevel=2)
    t = _times(cfg)
    var_c = classical_variance_series(cfg)
    _, var_q = quantum_series(cfg)
    cols = ("t", "qvar1_c", "qvar2_c", "pvar1_c", "pvar2_c", "qvar1_q", "qvar2_q", "pvar1_q", "pvar2_q")
    dev = np.abs(var_c - var_q) / np.maximum.accumulate(np.maximum(var_c, var_q), axis=0)
    meta = _metadata(cfg, max_relative_variance_gap=float(dev.max()))
    return ResultTable(cols, np.column_stack([t, var_c, var_q]), meta, cfg)


def run_initial_slope(cfg: RunConfig) -> ResultTable:
    t = _times(cfg)
    if len(t) < 2:
        raise ValueError("initial-slope needs at least one step after t = 0")
    chi_c, se = classical_structure_series(cfg)
    chi_q, _ = quantum_series(cfg)
    dt = t[1] - t[0]
    meta = _metadata(cfg, slope_c=(chi_c[1] - chi_c[0]) / (dt * chi_c[0]),
                     slope_q=(chi_q[1] - chi_q[0]) / (dt * chi_q[0]), slope_dt=dt,
                     lambda2c_initial=lambda2c_initial(cfg.spec, cfg.model),
                     lambda2q_initial=lambda2q_initial(cfg.spec, cfg.model))
    return ResultTable(("t", "chi2c", "chi2c_stderr", "chi2q"),
                       np.column_stack([t, chi_c, se, chi_q]), meta, cfg)


def loglog_slopes(times, chi, window=CONTRAST_WINDOW):
    """Least-squares and maximal local slope of ``ln chi`` against ``ln t`` on ``window``."""
    times, chi = np.asarray(times), np.asarray(chi)
    sel = (times >= window[0]) & (times <= window[1])
    x, y = np.log(times[sel]), np.log(chi[sel])
    fit = np.polyfit(x, y, 1)[0]
    local = np.gradient(y, x)
    return float(fit), float(local.max())


def run_integrable_contrast(cfg: RunConfig) -> ResultTable:
    t = _times(cfg)
    chaotic = ModelParams.quartic()
    chi_i, _ = classical_structure_series(cfg)
    chi_x, _ = classical_structure_series(cfg, chaotic)
    lam_i, lam_x = lambda2c_series(t, chi_i), lambda2c_series(t, chi_x)
    fit, local = loglog_slopes(t, chi_i, (CONTRAST_WINDOW[0], min(CONTRAST_WINDOW[1], t[-1])))
    plateau = (t >= PLATEAU_WINDOW[0]) & (t <= PLATEAU_WINDOW[1])
    if not plateau.any():
        raise ValueError(f"t_max = {t[-1]} does not reach the plateau window {PLATEAU_WINDOW}")
    meta = _metadata(cfg, loglog_slope_fit=fit, loglog_slope_max=local,
                     chaotic_lambda2c_min=float(lam_x[plateau].min()),
                     chaotic_lambda2c_max=float(lam_x[plateau].max()))
    cols = ("t", "chi2c_integrable", "chi2c_chaotic", "lambda2c_integrable", "lambda2c_chaotic")
    return ResultTable(cols, np.column_stack([t, chi_i, chi_x, lam_i, lam_x]), meta, cfg)


def run_experiment(cfg: RunConfig) -> ResultTable:
    if cfg.experiment == "structure-compare":
        return run_structure_compare(cfg)
    if cfg.experiment == "break-analysis":
        return run_break_analysis(cfg)[0]
    if cfg.experiment == "moments":
        return run_moments(cfg)
    if cfg.experiment == "initial-slope":
        return run_initial_slope(cfg)
    return run_integrable_contrast(cfg)
