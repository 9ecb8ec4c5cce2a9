"""The ten acceptance criteria, each at its stated size and tolerance.

Every test prints one ``CRITERION k: PASS|FAIL`` line (also repeated in the
terminal summary) and then asserts the outcome.
"""

import math
import time

import numpy as np
from conftest import CRITERIA_LINES
from rmtlab.harness import ExperimentConfig, count_scaling_experiment, emergence_experiment, location_experiment
from rmtlab.localtree import build_tridiagonal, eigvec_coefficients, transfer_matrix, tridiag_extreme_eigs
from rmtlab.model import BipartiteGraph, ModelParams, WeightDistribution, degree_profile, make_params, sample_graph
from rmtlab.nonbacktracking import (ihara_bass_instance, loewner_lower_check, loewner_upper_check,
                                    lower_margin, nb_spectral_radius_bipartite, upper_margin)
from rmtlab.pruning import prune, verify_pruned
from rmtlab.spectra import build_operator, singular_values
from rmtlab.theory import critical_q_star, mp_edges, thresholds

SQ3 = math.sqrt(3)


def report(k, passed, detail, t0):
    line = f"CRITERION {k}: {'PASS' if passed else 'FAIL'} ({time.perf_counter() - t0:.1f}s) {detail}"
    print(line)
    CRITERIA_LINES.append(line)
    assert passed, line


def test_criterion_1_thresholds():
    t0 = time.perf_counter()
    th = thresholds(SQ3)
    errs = {
        "r2": abs(th.r2_star - 6.634), "l2": abs(th.l2_star - 5.289), "r1": abs(th.r1_star - 1.179),
        "r2(q=1)": abs(thresholds(1.0).r2_star - 1 / (math.log(4) - 1)),
        "q_star": abs(critical_q_star() - 1.5084747),
    }
    tol = {"r2": 1e-3, "l2": 1e-3, "r1": 1e-3, "r2(q=1)": 1e-12, "q_star": 1e-5}
    ok = all(errs[k] <= tol[k] for k in errs)
    report(1, ok, " ".join(f"{k}_err={v:.1e}" for k, v in errs.items()), t0)


def test_criterion_2_emergence():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(gamma=9, b=[7.5, 5.29, 1.5], m=[1000], trials=20, seed=0)
    res = emergence_experiment(cfg)
    parts = []
    for r in res["rows"]:
        frac = {"quiet": r["frac_any"], "right": r["frac_right"], "left": r["frac_left"]}[r["check"]]
        parts.append(f"b={r['b']:g}[{r['check']} frac={frac:.2f} top={r['median_top']:.3f} "
                     f"bottom={r['median_bottom']:.3f} window={r['window']:.3f} "
                     f"{'ok' if r['pass'] else 'miss'}]")
    report(2, res["pass"], " ".join(parts), t0)


def test_criterion_3_outlier_locations():
    t0 = time.perf_counter()
    sizes = {9: [100, 1000, 10_000], 4: [200, 2000, 20_000]}
    ok, parts = True, []
    for gamma, ms in sizes.items():
        rows = location_experiment(gamma, ms, trials=20, seed=0)["rows"]
        gaps = [r["median_gap"] for r in rows]
        mid = rows[1]
        at_1e4 = mid["median_gap"] <= mid["xi"]
        decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
        ok &= at_1e4 and decreasing
        parts.append(f"gamma={gamma}: medians={[round(g, 5) for g in gaps]} xi(1e4)={mid['xi']:.3f} "
                     f"le_xi={at_1e4} decreasing={decreasing} "
                     f"median_residuals={[round(r['median_residual'], 3) for r in rows]}")
    report(3, ok, "; ".join(parts), t0)


def test_criterion_4_tridiagonal():
    t0 = time.perf_counter()
    top = tridiag_extreme_eigs(build_tridiagonal(SQ3, 5.0, 60))["top"]
    sp = tridiag_extreme_eigs(build_tridiagonal(SQ3, 1.0, 60))["smallest_positive"]
    lo, hi = mp_edges(SQ3)
    worst = 0.0
    for r in range(1, 201):
        a = np.abs(tridiag_extreme_eigs(build_tridiagonal(SQ3, 3.0, r))["eigenvalues"])
        a = a[a > 1e-9]
        worst = max(worst, float(np.max(np.maximum(lo - a, a - hi), initial=0.0)))
    e_top, e_sp = abs(top - 2.415229), abs(sp - 0.912871)
    ok = e_top <= 1e-6 and e_sp <= 1e-3 and worst <= 0.05
    report(4, ok, f"top_err={e_top:.1e} smallest_pos_err={e_sp:.1e} bulk_excursion={worst:.3f}", t0)


def test_criterion_5_ihara_bass():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst, theta_ok, used = 0.0, True, 0
    for _ in range(50):
        res = ihara_bass_instance(rng.standard_normal((5, 3)) * 0.6)
        worst = max(worst, res["worst_scaled_det"])
        used += res["admissible"]
        theta_ok &= res["theta_star"] <= res["rho"] + 1e-4
    ok = worst <= 1e-6 and theta_ok and used > 0
    report(5, ok, f"instances=50 admissible_eigs={used} worst_scaled_det={worst:.1e} theta_star_le_rho={theta_ok}", t0)


def test_criterion_6_nonbacktracking_radius():
    t0 = time.perf_counter()
    ests = []
    for s in range(10):
        params = make_params(9, 200, 2.0)     # N = 2000, d = 2 ln N
        g = sample_graph(params, seed=(6, s))
        X = build_operator(g, params, "X-rect").dense_X()
        ests.append(nb_spectral_radius_bipartite(X, seed=s).estimate)
    hits = sum(e <= 1.5 for e in ests)
    report(6, hits >= 9, f"gamma=9 N=2000 hits={hits}/10 max_estimate={max(ests):.4f}", t0)


def test_criterion_7_loewner():
    t0 = time.perf_counter()
    up_hits = low_hits = 0
    ups, lows = [], []
    for s in range(10):
        params = make_params(9, 200, 5.0)
        g = sample_graph(params, seed=(7, s))
        up = loewner_upper_check(g, params, C=10)
        low = loewner_lower_check(g, params, C=10)
        up_hits += up.passed
        low_hits += low.passed
        ups.append(up.margin - up.bound)
        lows.append(low.margin - low.bound)
    ok = up_hits >= 9 and low_hits >= 9
    report(7, ok, f"upper={up_hits}/10 (worst margin-bound={max(ups):.3f}) "
                  f"lower={low_hits}/10 (worst margin-bound={min(lows):.3f})", t0)


def test_criterion_8_pruned_graph():
    t0 = time.perf_counter()
    exact, bounds, specials = 0, 0, []
    for s in range(10):
        params = make_params(9, 1000, 5.0)
        pg = prune(sample_graph(params, seed=(8, s)), params)
        rep = verify_pruned(pg, C=10)
        exact += rep.exact_ok
        bounds += rep.bounds_ok
        specials.append(rep.details["special_count"])
    ok = exact == 10 and bounds >= 9
    report(8, ok, f"exact(1-4)={exact}/10 bounds(5-6)={bounds}/10 special_counts={specials} "
                  f"radius_raw={pg.radius.raw}", t0)


def test_criterion_9_count_scaling():
    t0 = time.perf_counter()
    r2 = thresholds(SQ3).r2_star
    cfg = ExperimentConfig(gamma=9, b=[0.8 * r2], m=[100, 1000, 10_000], trials=50, seed=0)
    res = count_scaling_experiment(cfg)
    means = [r["mean_R2"] for r in res["rows"]]
    report(9, res["pass"], f"b={0.8 * r2:.4f} mean_R2={means} slope={res['slope']:.4f} "
                           f"target={res['theory_slope']:.4f}+-0.15", t0)


def test_criterion_10_property_suites():
    t0 = time.perf_counter()
    checks = {}
    rng = np.random.default_rng(10)
    # spectral +/- symmetry and zero multiplicity (N <= 40)
    ok = True
    for s in range(20):
        n, m = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        params = ModelParams.from_values(n, m, p=0.4)
        g = sample_graph(params, seed=(10, s))
        ev = np.linalg.eigvalsh(build_operator(g, params, "H-full").dense_H())
        ok &= np.allclose(np.sort(ev), np.sort(-ev), atol=1e-10) and np.sum(np.abs(ev) < 1e-9) >= n - m
    checks["pm_symmetry_zero_mult"] = ok
    # matrix-free vs dense
    worst = 0.0
    for s in range(20):
        params = ModelParams.from_values(10, 6, p=0.4)
        g = sample_graph(params, seed=(11, s))
        op = build_operator(g, params, "H-full")
        z = rng.standard_normal(16)
        worst = max(worst, float(np.abs(op.H(z) - op.dense_H() @ z).max()))
    checks["matrix_free_vs_dense"] = worst <= 1e-12
    # Rademacher weights leave every alpha unchanged
    params = make_params(9, 200, 3.0)
    a = degree_profile(sample_graph(params, seed=3), params)
    b = degree_profile(sample_graph(params, WeightDistribution("rademacher"), seed=3), params)
    checks["rademacher_alpha"] = np.array_equal(a.alpha1, b.alpha1) and np.array_equal(a.alpha2, b.alpha2)
    # transfer matrix: det = 1 and it advances the coefficient recurrence
    ok = True
    for eta in np.linspace(0.05, 4, 60):
        ok &= abs(np.linalg.det(transfer_matrix(eta, SQ3).T) - 1) <= 1e-9
    for alpha in (4.5, 5.0, 8.0):
        u, lam = eigvec_coefficients(alpha, SQ3, 9)
        T = transfer_matrix(lam, SQ3).T
        for k in range(1, 4):
            want = np.array([u[2 * k + 2], u[2 * k + 1]])
            ok &= np.allclose(T @ np.array([u[2 * k], u[2 * k - 1]]), want, atol=1e-12)
            ok &= abs(u[2 * k + 1] / u[1] - (alpha - 3) ** (-k)) <= 1e-12
    checks["transfer_identities"] = bool(ok)
    # permutation invariance of sigma and both margins
    params = make_params(9, 30, 5.0)
    g = sample_graph(params, seed=12)
    p1, p2 = rng.permutation(g.n), rng.permutation(g.m)
    u, v = g.edges()
    h = BipartiteGraph.from_edges(g.n, g.m, np.argsort(p1)[u], np.argsort(p2)[v])
    sg = singular_values(build_operator(g, params)).values
    sh = singular_values(build_operator(h, params)).values
    pg, ph = degree_profile(g, params), degree_profile(h, params)
    Xg = build_operator(g, params, "X-rect").dense_X()
    Xh = build_operator(h, params, "X-rect").dense_X()
    up_g = upper_margin(build_operator(g, params, "H-full").dense_H(), np.concatenate([pg.deg1, pg.deg2]), params.d)
    up_h = upper_margin(build_operator(h, params, "H-full").dense_H(), np.concatenate([ph.deg1, ph.deg2]), params.d)
    lo_g = lower_margin(Xg, pg.deg1, pg.deg2, params.d)
    lo_h = lower_margin(Xh, ph.deg1, ph.deg2, params.d)
    checks["permutation_invariance"] = (np.allclose(sg, sh, atol=1e-12) and abs(up_g - up_h) <= 1e-10
                                        and abs(lo_g - lo_h) <= 1e-10)
    report(10, all(checks.values()), " ".join(f"{k}={v}" for k, v in checks.items()), t0)
