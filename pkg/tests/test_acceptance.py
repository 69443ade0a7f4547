"""End-to-end acceptance checks, one test per criterion, each logging a PASS/FAIL line."""
import time

import numpy as np
import pytest

from conftest import random_instance, record_criterion
from replasso.engine import SolverOptions, interpolate, solve_mode, solve_path, weights_at
from replasso.experiments import (Method, SyntheticConfig, gen_synthetic, gene_fixture,
                                  implication_audit, recovery_curve, trial_rng)
from replasso.geometry import ball_membership, enumerate_weight_vectors, eval_omega, family_membership
from replasso.model import Partition, ProblemInstance
from replasso.oracles import (brute_force_p1, check_assumptions, kkt_residual,
                              signed_support_window, weighted_lasso_solve)
from replasso.preprocess import irls_sparse_logistic

pytestmark = pytest.mark.slow


def test_criterion_1_ball_decomposition():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        sizes = rng.integers(2, 4, size=2)
        part = Partition([list(range(sizes[0])), list(range(sizes[0], sizes.sum()))])
        theta = rng.uniform(0, 10, size=2)
        beta = rng.standard_normal(part.p) * rng.uniform(0.1, 10)
        beta[rng.uniform(size=part.p) < 0.2] = 0.0
        omega = eval_omega(beta, part, theta)
        # half the radii sit exactly on the boundary
        tau = omega if rng.uniform() < 0.5 else omega * rng.uniform(0.5, 1.5)
        tau = max(tau, 1e-9)
        fam = enumerate_weight_vectors(part, theta)
        mismatches += ball_membership(beta, part, theta, tau) != family_membership(beta, fam, tau)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5
    record_criterion(1, "ball equals union of weighted l1 balls", ok,
                     f"{mismatches} mismatches in 1000 draws, {elapsed:.2f}s")
    assert ok


def test_criterion_2_theta_zero_matches_coordinate_descent():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        inst, part = random_instance(rng, n=40, p=20, k=5, sigma=0.3, rho=0.3)
        path = solve_path(inst, part, 0.0)
        lam0 = path.lambdas[0]
        for lam in lam0 * np.exp(rng.uniform(np.log(1e-3), 0.0, size=20)):
            ref = weighted_lasso_solve(inst.X, inst.y, np.ones(inst.p), lam, tol=1e-12)
            worst = max(worst, float(np.max(np.abs(interpolate(path, lam) - ref))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    record_criterion(2, "theta=0 path equals weighted-lasso coordinate descent", ok,
                     f"max error {worst:.2e} over 50x20 levels, {elapsed:.2f}s")
    assert ok


def test_criterion_3_segment_kkt():
    rng = np.random.default_rng(303)
    worst, segments = 0.0, 0
    cases = []
    for gsize in (2, 3):
        for _ in range(20):
            cases.append(random_instance(rng, n=40, p=18, k=4, rho=0.6, group_size=gsize))
    cfg = SyntheticConfig(k=25, rho=0.5)
    cases += [gen_synthetic(cfg, trial_rng(3, t)) for t in range(10)]
    for inst, part in cases:
        for mode in ("lasso", "replasso"):
            for theta in (0.0, 2.0, 20.0):
                path = solve_mode(inst, mode, part, theta)
                for hi, lo, b_hi, b_lo, _, s in path.segments():
                    lam = 0.5 * (hi + lo)
                    worst = max(worst, kkt_residual(0.5 * (b_hi + b_lo), inst.X, inst.y, s, lam))
                    segments += 1
    ok = worst <= 1e-6
    record_criterion(3, "segment midpoints satisfy weighted-lasso optimality", ok,
                     f"max residual {worst:.2e} over {segments} segments")
    assert ok


PAIR = Partition([[0, 1]])
STEP = 1e-3


def _vertex_case(rng):
    """Path point on an axis of the ball, placed on the grid."""
    X = rng.standard_normal((20, 2))
    X /= np.linalg.norm(X, axis=0)
    truth = np.array([1.0, rng.uniform(0.3, 0.8) * rng.choice([-1, 1])])
    inst = ProblemInstance(X, X @ truth + 0.05 * rng.standard_normal(20))
    path = solve_path(inst, PAIR, 2.0)
    j = path.events[0].variable
    c = abs(float(X[:, j] @ inst.y))
    hi, lo = path.lambdas[0], path.lambdas[1]
    k_lo, k_hi = int(np.ceil((c - hi) / STEP)) + 1, int(np.floor((c - lo) / STEP)) - 1
    if k_hi < k_lo:
        return None
    lam = c - rng.integers(k_lo, k_hi + 1) * STEP
    return inst, path, lam


def _face_case(rng):
    """Path point in the interior of the face with weights (1, 3), placed on the grid."""
    X = rng.standard_normal((20, 2))
    X /= np.linalg.norm(X, axis=0)
    k1 = int(rng.integers(400, 900))
    k2 = int(rng.integers(100, int(0.4 * k1))) * int(rng.choice([-1, 1]))
    b0 = np.array([k1, k2]) * STEP
    lam = rng.uniform(0.02, 0.1)
    s = np.array([1.0, 3.0])
    perp = rng.standard_normal(20)
    perp -= X @ np.linalg.lstsq(X, perp, rcond=None)[0]
    y = X @ b0 + X @ np.linalg.solve(X.T @ X, lam * np.sign(b0) * s) + 0.05 * perp
    inst = ProblemInstance(X, y)
    path = solve_path(inst, PAIR, 2.0)
    if path.events[0].variable != 0 or not np.allclose(weights_at(path, lam), s):
        return None
    return inst, path, lam


def test_criterion_4_brute_force_desk_check():
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    dists = []
    for make in (_vertex_case, _face_case):
        got = 0
        while got < 10:
            case = make(rng)
            if case is None:
                continue
            inst, path, lam = case
            b = interpolate(path, lam)
            tau = float(np.abs(weights_at(path, lam) * b).sum())
            bf = brute_force_p1(inst, PAIR, 2.0, tau, STEP, tau + 2 * STEP)
            dists.append(float(np.max(np.abs(b - bf))))
            got += 1
    elapsed = time.perf_counter() - t0
    worst = max(dists) / STEP
    ok = worst <= 1.0 + 1e-9 and elapsed < 120
    record_criterion(4, "path point within one grid step of the brute-force minimiser", ok,
                     f"worst distance {worst:.12f} steps over {len(dists)} instances, {elapsed:.1f}s")
    assert ok


def test_criterion_5_implication_audits():
    t0 = time.perf_counter()
    totals = {}
    # a sparser truth is added so that the signed-support premise is met more often
    for k in (25, 5):
        for rho in (0.1, 0.5):
            cfg = SyntheticConfig(n=150, p=50, group_size=2, k=k, rho=rho, sigma=0.2, seed=2013)
            totals[(k, rho)] = implication_audit(cfg, 2.0, trials=500, seed=2013)
    elapsed = time.perf_counter() - t0
    bad = {key: (r.subset_violations, r.signed_violations, r.nodrop_subset_violations)
           for key, r in totals.items()}
    failures = sum(r.failures for r in totals.values())
    premises = {key: (r.subset_premise, r.signed_premise, r.nodrop_subset_premise)
                for key, r in totals.items()}
    ok = all(v == (0, 0, 0) for v in bad.values()) and failures == 0 and elapsed < 600
    record_criterion(5, "lasso premise never holds while the grouped conclusion fails", ok,
                     f"violations {bad}, premises {premises}, failed trials {failures}, {elapsed:.0f}s")
    assert ok


def test_criterion_6_recovery_curves():
    lines, ok = [], True
    for rho in (0.1, 0.5):
        cfg = SyntheticConfig(n=150, p=50, group_size=2, k=25, rho=rho, sigma=0.2, seed=2013)
        for base, grouped in ((Method.LASSO, Method.REPLASSO),
                              (Method.ADAPTIVE_LASSO, Method.ADAPTIVE_REPLASSO)):
            lo = recovery_curve(base, cfg, 2.0, 200, cfg.seed)
            hi = recovery_curve(grouped, cfg, 2.0, 200, cfg.seed)
            margin = 2 * np.sqrt(lo.se ** 2 + hi.se ** 2)
            short = np.flatnonzero(hi.probabilities < lo.probabilities - margin)
            diff = hi.probabilities - lo.probabilities
            lines.append(f"rho={rho} {grouped.value}: gap range [{diff.min():+.3f}, {diff.max():+.3f}], "
                         f"{short.size} sizes below")
            if base is Method.LASSO:
                ok &= short.size == 0
    record_criterion(6, "grouped recovery curve at or above the lasso curve", ok, "; ".join(lines))
    assert ok


def test_criterion_7_recovery_window():
    rng = np.random.default_rng(707)
    instances = checks = mismatches = inside = 0
    while instances < 200:
        inst, part = random_instance(rng, n=30, p=8, k=2, sigma=0.15, rho=0.3)
        rep = check_assumptions(inst.X, inst.beta_star, part)
        if not (rep.a1_holds and rep.a3_holds and rep.a4_holds):
            continue
        instances += 1
        n = inst.n
        win = signed_support_window(inst.X, inst.beta_star, inst.y - inst.X @ inst.beta_star)
        path = solve_path(inst)
        top = path.lambdas[0] / n
        lams = list(np.exp(rng.uniform(np.log(1e-3 * top), np.log(top), size=5)))
        if win.nonempty and win.lambda_l < top:
            lo, hi = max(win.lambda_l, 1e-3 * top), min(win.lambda_u, top)
            lams += list(rng.uniform(lo, hi, size=5))
        else:
            lams += list(np.exp(rng.uniform(np.log(1e-3 * top), np.log(top), size=5)))
        truth = np.sign(inst.beta_star)
        for lam in lams:
            if min(abs(lam - win.lambda_l), abs(lam - win.lambda_u)) < 1e-9:
                continue
            actual = np.array_equal(np.sign(interpolate(path, lam * n)), truth)
            checks += 1
            inside += win.predicts(lam)
            mismatches += actual != win.predicts(lam)
    ok = mismatches == 0
    record_criterion(7, "analytic recovery window predicts the lasso signed support", ok,
                     f"{mismatches} mismatches in {checks} checks on {instances} instances, "
                     f"{inside} inside the window")
    assert ok


def test_criterion_8_weight_increase_off_support():
    rng = np.random.default_rng(808)
    failures, worst = 0, 0.0
    for _ in range(200):
        inst, _ = random_instance(rng, n=30, p=12, k=3, rho=0.4)
        b = rng.uniform(1, 4, inst.p)
        lam = rng.uniform(0.05, 0.8) * np.max(np.abs(inst.X.T @ inst.y) / b)
        beta_b = weighted_lasso_solve(inst.X, inst.y, b, lam, tol=1e-13)
        a = b + np.where(beta_b == 0, rng.uniform(0, 5, inst.p), 0.0)
        beta_a = weighted_lasso_solve(inst.X, inst.y, a, lam, tol=1e-13)
        err = float(np.max(np.abs(beta_a - beta_b)))
        worst = max(worst, err)
        failures += err > 1e-8
    ok = failures == 0
    record_criterion(8, "raising weights where the solution is zero leaves it unchanged", ok,
                     f"{failures} failures in 200 triples, max difference {worst:.2e}")
    assert ok


def _selections(theta, seeds, line_search):
    """Per fixture seed, the group labels of the first four selections of every iteration."""
    out = []
    for seed in seeds:
        X, labels, part = gene_fixture(seed)
        lam = 0.05 * np.max(np.abs(X.T @ (labels - 0.5)))
        res = irls_sparse_logistic(X, labels, part, theta, lam, k=4, line_search=line_search)
        out.append([[g for _, g, _, _ in it.selections] for it in res.iterations])
    return out


def test_criterion_9_irls_group_exclusivity():
    seeds = range(5)
    exclusive = all(len(set(gs)) == len(gs) == 4
                    for ls in (False, True) for run in _selections(20.0, seeds, ls) for gs in run)
    plain = _selections(0.0, seeds, False)
    duplicates = sum(any(len(set(gs)) < len(gs) for gs in run) for run in plain)
    ok = exclusive and duplicates >= 1
    record_criterion(9, "large theta keeps the first four IRLS selections in distinct groups", ok,
                     f"theta=20 exclusive in every iteration: {exclusive}; "
                     f"theta=0 runs with a duplicate group: {duplicates}/5")
    assert ok
