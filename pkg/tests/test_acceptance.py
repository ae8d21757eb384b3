"""Acceptance gate: one test per criterion, one PASS/FAIL line each.

Each test prints its verdict before asserting; the verdicts are also
collected and replayed in the terminal summary (see conftest) so a full
run always lists every criterion's outcome and measured values.
"""

import json
import math
import time

import numpy as np
import pytest

import ergodic_riskctl as er
from ergodic_riskctl import Side, eval_H
from ergodic_riskctl.cli import main as cli_main

import fd_oracle

SQ = math.sqrt(0.5)

VERDICTS = []


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    VERDICTS.append(line)
    return ok


def test_criterion_1_closed_form_turning_points(ou):
    t0 = time.perf_counter()
    tp = er.find_turning_points(ou, 1.0)
    elapsed = time.perf_counter() - t0
    expect = (-1.0 - SQ, -1.0 + SQ, 1.0 - SQ, 1.0 + SQ)
    got = (tp.alpha_minus, tp.alpha_plus, tp.beta_minus, tp.beta_plus)
    err = max(abs(g - e) for g, e in zip(got, expect))
    ok = err <= 1e-8 and elapsed < 1.0
    assert report(1, ok, f"max error {err:.2e}, {elapsed:.2f}s")


def test_criterion_2_eigen_oracle_equivalence(bm):
    t0 = time.perf_counter()
    sol = er.principal_eigenpair(bm, -1.0, 1.0, theta=1.0)
    oracle = fd_oracle.richardson_eigenvalue(bm, -1.0, 1.0, 1.0, n=600)
    ray = er.rayleigh_quotient(bm, sol)
    elapsed = time.perf_counter() - t0
    e_fd = abs(sol.lambda0 - oracle)
    e_ray = abs(ray - sol.lambda0)
    ok = e_fd <= 1e-5 and e_ray <= 1e-6 and elapsed < 5.0
    assert report(2, ok, f"lambda0={sol.lambda0:.9f}, |shooting-FD|={e_fd:.2e}, "
                         f"|rayleigh-lambda0|={e_ray:.2e}, {elapsed:.1f}s")


def test_criterion_3_partial_derivative_identities(bm, ou):
    t0 = time.perf_counter()
    triples = {
        "bm": [(-1.0, 1.0, 1.0), (-1.5, 1.2, 0.5), (-0.8, 0.9, 2.0)],
        "ou": [(-2.0, 2.0, 1.0), (-2.5, 1.8, 0.5), (-1.9, 2.2, 2.0)],
    }
    eps = 1e-4
    worst, all_dth_pos = 0.0, True
    for name, m in (("bm", bm), ("ou", ou)):
        for a, b, th in triples[name]:
            da, db, dth = er.lambda_partials(m, a, b, th)
            all_dth_pos &= dth > 0.0

            def lam(aa, bb, tt):
                return er.principal_eigenpair(m, aa, bb, tt).lambda0

            fd = ((lam(a + eps, b, th) - lam(a - eps, b, th)) / (2 * eps),
                  (lam(a, b + eps, th) - lam(a, b - eps, th)) / (2 * eps),
                  (lam(a, b, th + eps) - lam(a, b, th - eps)) / (2 * eps))
            for an, num in zip((da, db, dth), fd):
                worst = max(worst, abs(an - num) / abs(num))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and all_dth_pos and elapsed < 30.0
    assert report(3, ok, f"worst relative error {worst:.2e}, "
                         f"d_theta > 0: {all_dth_pos}, {elapsed:.1f}s")


def test_criterion_4_free_boundary_fixed_point(bm, ou):
    details, ok = [], True
    for name, m in (("bm", bm), ("ou", ou)):  # both presets are symmetric
        t0 = time.perf_counter()
        sol = er.solve_boundaries(m, 1.0)
        elapsed = time.perf_counter() - t0
        tp = er.find_turning_points(m, 1.0)
        sym = abs(sol.alpha_star + sol.beta_star)
        ok &= (sol.residual_alpha <= 1e-7 and sol.residual_beta <= 1e-7
               and sol.alpha_star < tp.alpha_minus
               and sol.beta_star > tp.beta_plus
               and sym <= 1e-8 and elapsed < 30.0)
        details.append(f"{name}: res=({sol.residual_alpha:.1e},"
                       f"{sol.residual_beta:.1e}) |a*+b*|={sym:.1e} "
                       f"{elapsed:.1f}s")
    assert report(4, ok, "; ".join(details))


def test_criterion_5_hjb_verification(bm, ou):
    t0 = time.perf_counter()
    ok = True
    for m in (bm, ou):
        for th in (0.5, 1.0, 2.0):
            sol = er.solve_boundaries(m, th)
            ok &= er.verify_hjb(sol, m, th).passed
        # perturbed boundaries must flip the verdict
        sol = er.solve_boundaries(m, 1.0)
        a, b = sol.alpha_star - 0.2, sol.beta_star + 0.2
        fake = er.reflection_solution(m, 1.0, a, b,
                                      lambda_override=eval_H(m, 1.0, b, Side.PLUS))
        ok &= not er.verify_hjb(fake, m, 1.0).passed
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    assert report(5, ok, f"6 PASS verdicts + 2 perturbed FAIL verdicts, "
                         f"{elapsed:.1f}s")


def test_criterion_6_monte_carlo_rate_identity(bm):
    t0 = time.perf_counter()
    lam = er.principal_eigenpair(bm, -1.0, 1.0, theta=1.0).lambda0
    cfg = er.PathConfig(x0=0.0, alpha=-1.0, beta=1.0, horizon=200.0,
                        dt=1e-3, n_paths=10_000, seed=0)
    batch = er.reflected_cost_paths(bm, 1.0, cfg, n_threads=4)
    elapsed = time.perf_counter() - t0
    rel = abs(batch.rate_estimate - lam) / lam
    within_ci = abs(batch.rate_estimate - lam) <= 3.0 * batch.ci_halfwidth
    ok = rel <= 0.03 and within_ci and elapsed < 300.0
    assert report(6, ok, f"rate={batch.rate_estimate:.5f} lambda={lam:.5f} "
                         f"rel={rel:.3f} ci={batch.ci_halfwidth:.4f} "
                         f"ess={batch.ess:.1f} {elapsed:.0f}s")


def test_criterion_7_optimality_probe(bm, bm_solution):
    t0 = time.perf_counter()
    sol = bm_solution
    offsets = [(da, db) for da in (-0.25, 0.25) for db in (-0.25, 0.25)]
    # eigen side: exact, noise-free
    eigen_ok = True
    for da, db in offsets:
        lam = er.principal_eigenpair(bm, sol.alpha_star + da,
                                     sol.beta_star + db, 1.0).lambda0
        eigen_ok &= lam >= sol.lambda_star - 1e-9
    # simulation side: no perturbation beats (undercuts) lambda_star beyond
    # one CI half-width; horizon short enough for a healthy ESS at theta=1
    cfg = er.PathConfig(x0=0.0, alpha=sol.alpha_star, beta=sol.beta_star,
                        horizon=10.0, dt=1e-3, n_paths=10_000, seed=0)
    rows = er.optimality_probe(bm, 1.0, sol, offsets, cfg, n_threads=4)
    sim_ok = all(r.rate >= sol.lambda_star - r.ci_halfwidth for r in rows)
    elapsed = time.perf_counter() - t0
    ok = eigen_ok and sim_ok and elapsed < 900.0
    assert report(7, ok, f"eigen-side min margin ok: {eigen_ok}, "
                         f"sim-side no winner: {sim_ok}, {elapsed:.0f}s")


def test_criterion_8_comparative_statics(bm):
    t0 = time.perf_counter()
    thetas = [0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0]
    sols = {th: er.solve_boundaries(bm, th) for th in thetas}
    elapsed = time.perf_counter() - t0

    sweep = [0.25, 0.5, 1.0, 2.0, 4.0]
    lam_inc = all(sols[a].lambda_star < sols[b].lambda_star
                  for a, b in zip(sweep, sweep[1:]))
    alpha_dec = all(sols[a].alpha_star > sols[b].alpha_star
                    for a, b in zip(sweep, sweep[1:]))
    beta_inc = all(sols[a].beta_star < sols[b].beta_star
                   for a, b in zip(sweep, sweep[1:]))
    slopes = [(sols[2 * th].lambda_star - sols[th].lambda_star) / th
              for th in (0.5, 0.25, 0.125, 0.0625)]
    slopes_grow = all(a < b for a, b in zip(slopes, slopes[1:]))

    ok = lam_inc and alpha_dec and beta_inc and slopes_grow and elapsed < 120.0
    assert report(
        8, ok,
        f"lambda* increasing: {lam_inc}, alpha* decreasing: {alpha_dec}, "
        f"beta* increasing: {beta_inc}, slopes grow as theta drops: "
        f"{slopes_grow} (slopes at theta=0.5..0.0625: "
        + ", ".join(f"{s:.4f}" for s in slopes) + f"), {elapsed:.0f}s")


def test_criterion_9_determinism(tmp_path):
    cfg = {"command": "simulate",
           "model": {"form": "bm_quadratic",
                     "params": {"sigma": 1.0, "c": 1.0, "K": 1.0}},
           "theta": 1.0,
           "simulation": {"x0": 0.0, "alpha": -1.0, "beta": 1.0, "T": 0.05,
                          "dt": 1e-3, "n_paths": 8192, "seed": 42}}
    blobs = []
    for run, threads in ((0, 1), (1, 1), (2, 4), (3, 4)):
        out = tmp_path / f"out{run}"
        path = tmp_path / f"cfg{run}.json"
        path.write_text(json.dumps(dict(cfg, output_dir=str(out))))
        assert cli_main(["--config", str(path), "--threads", str(threads)]) == 0
        blobs.append((out / "paths.csv").read_bytes())
    ok = all(b == blobs[0] for b in blobs)
    assert report(9, ok, f"4 runs x threads {{1,4}}: "
                         f"{len(blobs[0])}-byte CSVs byte-identical: {ok}")
