"""End-to-end acceptance criteria, run at full resolution.

Each test prints one ``criterion N: PASS|FAIL ...`` line with the measured
numbers before asserting. The long runs (two break analyses, the moments run
and the integrable contrast) are shared through module-scoped fixtures;
the whole module takes roughly half an hour on one core.
"""
import math

import numpy as np
import pytest

from qccphase.classical import (GaussianSpec, TangentEnsemble, chi2c_closed_form, chi2c_estimate,
                                covariance_from_spec, energy_drift, lambda2c_initial,
                                propagate_tangent, sample_initial, stability_matrix,
                                symplectic_defect)
from qccphase.expansion import break_time_formula, f_of_t, integrate_tensors, pooled_growth_fit
from qccphase.hamiltonian import SYMPLECTIC_J, ModelParams
from qccphase.lab.config import preset
from qccphase.lab.experiments import run_break_analysis, run_experiment
from qccphase.quantum import (GridSpec, SplitOperator, chi2q_spectral_diag, chi2q_variance,
                              expected_energy, init_correlated_coherent, lambda2q_initial)

pytestmark = pytest.mark.slow

QUARTIC = ModelParams.quartic(1.0, 0.01)
QUAD = ModelParams.quadratic((1.0, 1.3), 0.2)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} -- {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def breaks():
    return {h: run_break_analysis(preset(f"ref-h{h:g}-r0", "break-analysis")) for h in (0.05, 0.005)}


# 1 -------------------------------------------------------------------------

def test_criterion_1_initial_slope_trichotomy(report):
    tables = {label: run_experiment(preset(f"ref-h0.5-{label}", "initial-slope"))
              for label in ("r0", "rp0.6", "rm0.6")}
    s = {k: (float(t.metadata["slope_c"]), float(t.metadata["slope_q"])) for k, t in tables.items()}
    neg = tables["rm0.6"]
    inside = (neg["t"] > 0) & (neg["t"] < 0.1)
    raw_above = bool(np.all(neg["chi2q"][inside] > neg["chi2c"][inside]))
    # Every record reuses the same members, so the t = 0 sampling error is a
    # common factor; the exact t = 0 value removes it (ratio control variate).
    exact0 = chi2c_closed_form(preset("ref-h0.5-rm0.6", "initial-slope").spec)
    chi_c = neg["chi2c"] * (exact0 / neg["chi2c"][0])
    q_above = bool(np.all(neg["chi2q"][inside] > chi_c[inside]))
    ok = (all(abs(x) < 0.05 for x in s["r0"]) and all(x > 0.1 for x in s["rp0.6"])
          and all(x < -0.1 for x in s["rm0.6"]) and q_above)
    detail = "; ".join(f"{k}: slope_c={c:+.4f} slope_q={q:+.4f}" for k, (c, q) in s.items())
    report(1, ok, f"{detail}; r=-0.6 chi2q > chi2c on (0, 0.1): {q_above} with the t=0 offset "
                  f"removed ({raw_above} raw; offset {neg['chi2c'][0] / exact0 - 1:+.1e})")
    assert ok


# 2 -------------------------------------------------------------------------

def test_criterion_2_closed_form_initial_rate(report):
    zero_c = lambda2c_initial(GaussianSpec.coherent(0.005), QUARTIC)
    zero_q = lambda2q_initial(GaussianSpec.coherent(0.005), QUARTIC)
    table = run_experiment(preset("ref-h0.005-rm0.6", "initial-slope"))
    mc, closed = float(table.metadata["slope_c"]), float(table.metadata["lambda2c_initial"])
    rel = abs(mc - closed) / abs(closed)
    spec = GaussianSpec.coherent(0.005, r=(-0.6, -0.6))
    quad_gap = lambda2q_initial(spec, QUAD) - lambda2c_initial(spec, QUAD)
    ok = zero_c == 0.0 and zero_q == 0.0 and rel < 0.10 and quad_gap == 0.0
    report(2, ok, f"lambda2c(0)|r=0 = {zero_c}, lambda2q(0)|r=0 = {zero_q}; r=-0.6: closed {closed:.5f} "
                  f"vs Monte-Carlo {mc:.5f} (rel {rel:.3%}); quadratic correction {quad_gap}")
    assert ok


# 3 -------------------------------------------------------------------------

def test_criterion_3_break_placement(report, breaks):
    bounds = {0.05: (1.0, 1.5), 0.005: (2.0, 3.0)}
    measured = {h: float(breaks[h][0].metadata["measured_break_time"]) for h in bounds}
    ok = all(lo <= measured[h] <= hi for h, (lo, hi) in bounds.items())
    report(3, ok, "; ".join(f"hbar={h:g}: first |chi2c-chi2q|/chi2q > 0.1 at t={measured[h]:.2f} "
                            f"(required [{lo}, {hi}])" for h, (lo, hi) in bounds.items()))
    assert ok


# 4 -------------------------------------------------------------------------

def test_criterion_4_f_explains_gap(report, breaks):
    worst = {}
    for h, (table, fit) in breaks.items():
        assert fit is not None, f"no break fit at hbar={h}"
        t = table["t"]
        lo, hi = fit.t_break - 0.5, fit.t_break + 0.5
        assert t[-1] >= hi - 1e-9, f"run ends before t_b + 0.5 at hbar={h}"
        sel = (t >= lo - 1e-9) & (t <= hi + 1e-9)
        rel = np.abs(table["f"] - table["chi2c_sq_minus_chi2q_sq"]) / table["chi2c_sq"]
        i = np.argmax(np.where(sel, rel, -1))
        worst[h] = (fit.t_break, rel[i], t[i])
    ok = all(w[1] < 0.2 for w in worst.values())
    report(4, ok, "; ".join(f"hbar={h:g}: t_b={tb:.3f}, max |f-gap|/chi2c^2 = {r:.3f} at t={tt:.2f}"
                            for h, (tb, r, tt) in worst.items()))
    assert ok


# 5 -------------------------------------------------------------------------

def test_criterion_5_logarithmic_scaling(report, breaks):
    runs = [(table["t"], table["f"], fit.window) for table, fit in breaks.values()]
    lam, f0 = pooled_growth_fit(runs)
    tb = {h: break_time_formula(lam, f0, fit.omega_sq, h) for h, (_, fit) in breaks.items()}
    predicted = math.log(10) / lam
    delta = tb[0.005] - tb[0.05]
    rel = abs(delta - predicted) / predicted
    ok = rel < 0.25
    per_run = ", ".join(f"hbar={h:g}: lambda={fit.lambda_fit:.3f} t_b={fit.t_break:.3f}"
                        for h, (_, fit) in breaks.items())
    report(5, ok, f"pooled lambda_fit={lam:.4f}: t_b(0.005)-t_b(0.05) = {delta:.3f} vs ln10/lambda = "
                  f"{predicted:.3f} (rel {rel:.1%}); per-run fits {per_run}")
    assert ok


# 6 -------------------------------------------------------------------------

def test_criterion_6_moment_correspondence(report):
    table = run_experiment(preset("ref-h0.005-r0", "moments"))
    c = table.data[:, 1:5]
    q = table.data[:, 5:9]
    dev = np.abs(c - q) / np.maximum.accumulate(np.maximum(c, q), axis=0)
    worst = dev.max(axis=0)
    ok = table["t"][-1] >= 8.0 - 1e-9 and bool(np.all(worst < 0.10))
    report(6, ok, f"max relative deviation per variance (q1, q2, p1, p2) up to t={table['t'][-1]:g}: "
                  + ", ".join(f"{w:.4f}" for w in worst))
    assert ok


# 7 -------------------------------------------------------------------------

def test_criterion_7_quadratic_exactness(report):
    spec = GaussianSpec.coherent(0.05)
    tensors = integrate_tensors(QUAD, spec.centroid, dt=1e-3, t_max=10.0, record_every=100)
    worst_bc = max(max(np.abs(x.B).max(), np.abs(x.C).max()) for x in tensors)
    worst_f = max(abs(f_of_t(x)) for x in tensors)
    S = covariance_from_spec(spec)
    W = SYMPLECTIC_J @ np.linalg.inv(S) @ SYMPLECTIC_J.T
    ens = TangentEnsemble.start(spec, sample_initial(spec, 1000, seed=3, law="density-squared"))
    worst_rel, spread = 0.0, 0.0
    for _ in range(20):
        ens = propagate_tangent(QUAD, ens, 1e-3, 500)
        spread = max(spread, float(np.abs(ens.M - ens.M[0]).max()))
        M = ens.M[0]
        chi_sq = 0.5 * np.trace(M @ W @ M.T)
        moments = np.trace(M @ S @ M.T)
        worst_rel = max(worst_rel, abs(chi_sq * spec.hbar**2 / 2 - moments) / moments)
    ok = worst_bc <= 1e-10 and worst_f <= 1e-10 and worst_rel <= 1e-6
    report(7, ok, f"max |B|,|C| = {worst_bc:.1e}, max |f| = {worst_f:.1e}, "
                  f"max rel |chi2c^2 hbar^2/2 - moment sum| = {worst_rel:.1e} (t <= 10; "
                  f"member spread of M {spread:.1e})")
    assert ok


# 8 -------------------------------------------------------------------------

def _fd_tensor_error():
    centroid = np.array([0.40, 0.60, 0.50, 0.414])
    snap = integrate_tensors(QUARTIC, centroid, dt=1e-3, t_max=2.0, record_every=2000)[-1]
    eps = 1e-5
    B_fd = np.stack([(stability_matrix(QUARTIC, centroid + eps * e, 2.0)
                      - stability_matrix(QUARTIC, centroid - eps * e, 2.0)) / (2 * eps)
                     for e in np.eye(4)], axis=-1)
    h = 1e-3
    C_fd = np.empty((4, 4, 4, 4))
    for l, el in enumerate(np.eye(4)):
        for m, em in enumerate(np.eye(4)):
            C_fd[:, :, l, m] = (stability_matrix(QUARTIC, centroid + h * (el + em), 2.0)
                                - stability_matrix(QUARTIC, centroid + h * (el - em), 2.0)
                                - stability_matrix(QUARTIC, centroid - h * (el - em), 2.0)
                                + stability_matrix(QUARTIC, centroid - h * (el + em), 2.0)) / (4 * h * h)
    errA = np.abs(snap.A - stability_matrix(QUARTIC, centroid, 2.0)).max()
    errB = np.abs(snap.B - B_fd).max() / np.abs(snap.B).max()
    errC = np.abs(snap.C - C_fd).max() / np.abs(snap.C).max()
    return errA, errB, errC


def _mc_closed_form_z():
    zs = []
    for h, r in ((0.5, (0.6, 0.6)), (0.05, (0.0, 0.0)), (0.005, (-0.6, 0.3))):
        spec = GaussianSpec.coherent(h, r=r)
        ens = TangentEnsemble.start(spec, sample_initial(spec, 100_000, seed=11, law="density-squared"))
        chi, se = chi2c_estimate(spec, ens)
        zs.append(abs(chi - chi2c_closed_form(spec)) / se)
    return max(zs)


def _wigner_identity_error():
    errs = []
    for n, width, r in ((32, 4.0, 0.0), (64, 8.0, 0.4)):
        spec = GaussianSpec.coherent(0.05, r=(r, -r), qbar=(0.0, 0.0), pbar=(0.0, 0.0))
        state = init_correlated_coherent(GridSpec(n, width * spec.eta1, 0.05), spec)
        errs.append(abs(chi2q_spectral_diag(state) / chi2q_variance(state) - 1))
    return max(errs)


def _invariants_over_t4():
    spec = GaussianSpec.coherent(0.05)
    ens = TangentEnsemble.start(spec, sample_initial(spec, 20_000, seed=5))
    later = propagate_tangent(QUARTIC, ens, 1e-3, 4000)
    sym = float(symplectic_defect(later.M).max())
    energy = float(energy_drift(QUARTIC, later).max())
    back = propagate_tangent(QUARTIC, later, -1e-3, 4000)
    rev = propagate_tangent(QUARTIC, TangentEnsemble.start(spec, later.gamma), -1e-3, 4000)
    compose = np.einsum("nij,njk->nik", rev.M, later.M) - np.eye(4)
    reversal = max(float(np.abs(back.gamma - ens.gamma).max()), float(np.abs(compose).max()))
    grid = GridSpec(256, 4.8, 0.05)
    state = init_correlated_coherent(grid, spec)
    e0 = expected_energy(state, QUARTIC)
    fwd = SplitOperator(grid, QUARTIC, 1e-3).propagate(state, 4000)
    norm = abs(fwd.norm() - 1)
    qenergy = abs(expected_energy(fwd, QUARTIC) - e0) / e0
    ret = SplitOperator(grid, QUARTIC, -1e-3).propagate(fwd, 4000)
    fidelity = abs(np.vdot(state.psi, ret.psi)) * grid.dq**2
    return sym, energy, reversal, norm, qenergy, fidelity


def test_criterion_8_oracle_suites(report):
    errA, errB, errC = _fd_tensor_error()
    z = _mc_closed_form_z()
    wig = _wigner_identity_error()
    sym, energy, reversal, norm, qenergy, fidelity = _invariants_over_t4()
    checks = {
        "(a) A vs M": errA <= 1e-8, "(a) B vs FD": errB <= 1e-3, "(a) C vs FD": errC <= 1e-3,
        "(b) MC vs closed form": z <= 3.0, "(c) Wigner identity": wig <= 0.02,
        "(d) symplectic": sym <= 1e-8, "(d) energy": energy <= 4e-8, "(d) reversal": reversal <= 1e-6,
        "(d) norm": norm <= 1e-10, "(d) quantum energy": qenergy <= 1e-6,
        "(d) quantum reversal": fidelity >= 1 - 1e-8,
    }
    ok = all(checks.values())
    report(8, ok, f"A err {errA:.1e}, B rel {errB:.1e}, C rel {errC:.1e}; MC max |z| {z:.2f}; "
                  f"Wigner rel {wig:.1e}; symplectic {sym:.1e}, energy {energy:.1e}, "
                  f"reversal {reversal:.1e}, norm {norm:.1e}, quantum energy {qenergy:.1e}, "
                  f"fidelity 1-{1 - fidelity:.1e}"
                  + ("" if ok else f"; failing: {[k for k, v in checks.items() if not v]}"))
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_9_integrable_contrast(report):
    table = run_experiment(preset("integrable", "integrable-contrast"))
    fit = float(table.metadata["loglog_slope_fit"])
    local = float(table.metadata["loglog_slope_max"])
    lo, hi = float(table.metadata["chaotic_lambda2c_min"]), float(table.metadata["chaotic_lambda2c_max"])
    # quasi-periodic motion makes the pointwise slope oscillate; the fitted slope measures growth
    integrable_ok = fit < 3
    chaotic_ok = lo > 0.5
    ok = integrable_ok and chaotic_ok
    report(9, ok, f"integrable log-log slope fit {fit:.3f} (max local {local:.3f}, informational) over [1, 10] "
                  f"({'bounded' if integrable_ok else 'unbounded'}); chaotic lambda2c on [1, 2.5] "
                  f"in [{lo:.3f}, {hi:.3f}] (plateau > 0.5 required)")
    assert ok
