"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with ``pytest -s tests/test_acceptance.py`` to see them).

The benchmark-backed criteria share module-scoped runs so the whole suite
stays inside its time budget.
"""

import time
from collections import Counter

import numpy as np
import pytest

from raplasso import bench, glm, lasso_cd, simgen
from raplasso.bench import BenchConfig, contraction_probe, run_replications
from raplasso.cli import main as cli_main
from raplasso.glm import BINOMIAL, ObsBuffer
from raplasso.lasso_cd import lambda_max
from raplasso.rap import RapRunner, dbeta_dlambda, dcost_dlambda
from raplasso.streaming_stats import WeightedMoments


def report(num, ok, detail):
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def make_moments(rng, p, n, r=1.0, rho=0.4, snr=0.5):
    beta = np.zeros(p)
    k = max(1, int(round(rho * p)))
    beta[rng.choice(p, k, replace=False)] = rng.standard_normal(k)
    m = WeightedMoments(p, r)
    for _ in range(n):
        x = rng.standard_normal(p)
        m.update(x, float(x @ beta + snr * rng.standard_normal()))
    return m


# ---------------------------------------------------------------------------
# 1. closed-form path derivative vs finite differences (linear model)
# ---------------------------------------------------------------------------

def test_criterion_1_gradient_oracle():
    t0 = time.time()
    rng = np.random.default_rng(101)
    accepted = 0
    worst = 0.0
    attempts = 0
    while accepted < 100 and attempts < 1000:
        attempts += 1
        p = int(rng.integers(3, 11))
        n = int(rng.integers(40, 201))
        m = make_moments(rng, p, n)
        lam = float(rng.uniform(0.1, 0.85)) * lambda_max(m)
        h = 1e-5 * max(1.0, lam)
        f0 = lasso_cd.fit(m, lam, tol=1e-12)
        fp = lasso_cd.fit(m, lam + h, warm=f0, tol=1e-12)
        fm = lasso_cd.fit(m, lam - h, warm=f0, tol=1e-12)
        # rejection: stay away from path breakpoints (same support and signs)
        if (f0.active_set.size == 0
                or not np.array_equal(np.sign(fp.beta), np.sign(f0.beta))
                or not np.array_equal(np.sign(fm.beta), np.sign(f0.beta))):
            continue
        fd = (fp.beta - fm.beta) / (2 * h)
        exact = dbeta_dlambda(m, f0)
        rel = np.linalg.norm(exact - fd) / np.linalg.norm(fd)
        worst = max(worst, rel)
        accepted += 1
    elapsed = time.time() - t0
    ok = accepted == 100 and worst <= 1e-4 and elapsed < 30.0
    report(1, ok, f"{accepted} instances, worst rel err {worst:.3g} "
                  f"(tol 1e-4), {elapsed:.1f}s (limit 30s)")


# ---------------------------------------------------------------------------
# 2. GLM path derivative vs finite differences (logistic model)
# ---------------------------------------------------------------------------

def test_criterion_2_glm_gradient_oracle():
    t0 = time.time()
    rng = np.random.default_rng(202)
    accepted = 0
    worst = 0.0
    attempts = 0
    while accepted < 100 and attempts < 1000:
        attempts += 1
        p = int(rng.integers(3, 11))
        n = int(rng.integers(80, 201))
        beta_true = np.zeros(p)
        k = max(1, p // 3)
        beta_true[rng.choice(p, k, replace=False)] = 1.5 * rng.standard_normal(k)
        buf = ObsBuffer(p, 1.0)
        for _ in range(n):
            x = rng.standard_normal(p)
            prob = 1.0 / (1.0 + np.exp(-x @ beta_true))
            buf.append(x, float(rng.random() < prob))
        X, y, w = buf.arrays()
        boundary = np.max(np.abs(X.T @ (w * (y - 0.5))))
        lam = float(rng.uniform(0.15, 0.6)) * boundary
        h = 1e-4 * lam
        f0 = glm.fit_penalized(buf, BINOMIAL, lam, tol=1e-11, max_iter=300)
        fp = glm.fit_penalized(buf, BINOMIAL, lam + h, warm=f0, tol=1e-11, max_iter=300)
        fm = glm.fit_penalized(buf, BINOMIAL, lam - h, warm=f0, tol=1e-11, max_iter=300)
        if (f0.active_set.size == 0
                or not np.array_equal(np.sign(fp.beta), np.sign(f0.beta))
                or not np.array_equal(np.sign(fm.beta), np.sign(f0.beta))):
            continue
        fd = (fp.beta - fm.beta) / (2 * h)
        gram = glm.curvature_gram(buf, BINOMIAL, f0.beta)
        exact = dbeta_dlambda(gram, f0)
        rel = np.linalg.norm(exact - fd) / np.linalg.norm(fd)
        worst = max(worst, rel)
        accepted += 1
    elapsed = time.time() - t0
    ok = accepted == 100 and worst <= 1e-3 and elapsed < 60.0
    report(2, ok, f"{accepted} instances, worst rel err {worst:.3g} "
                  f"(tol 1e-3), {elapsed:.1f}s (limit 60s)")


# ---------------------------------------------------------------------------
# 3. zero-solution boundary is exactly lambda_max
# ---------------------------------------------------------------------------

def test_criterion_3_lambda_max_boundary():
    rng = np.random.default_rng(303)
    all_zero = 0
    some_nonzero = 0
    for _ in range(100):
        p = int(rng.integers(2, 15))
        n = int(rng.integers(10, 120))
        r = float(rng.uniform(0.85, 1.0))
        m = make_moments(rng, p, n, r=r)
        top = lambda_max(m)
        f_hi = lasso_cd.fit(m, top * (1 + 1e-6))
        f_lo = lasso_cd.fit(m, top * (1 - 1e-3))
        all_zero += int(np.all(f_hi.beta == 0.0))
        some_nonzero += int(np.any(f_lo.beta != 0.0))
    ok = all_zero == 100 and some_nonzero == 100
    report(3, ok, f"zero fits above boundary {all_zero}/100, "
                  f"nonzero fits below {some_nonzero}/100")


# ---------------------------------------------------------------------------
# 4. piecewise-linear solution path
# ---------------------------------------------------------------------------

def test_criterion_4_piecewise_linear_path():
    rng = np.random.default_rng(404)
    ok_all = True
    worst_detail = ""
    for inst in range(20):
        p = 6
        n = 60
        m = make_moments(rng, p, n)
        top = lambda_max(m)
        grid = np.linspace(0.998 * top, 0.002 * top, 500)
        betas = np.array([f.beta for f in lasso_cd.fit_path(m, grid, tol=1e-12)])
        second = np.abs(betas[2:] - 2 * betas[1:-1] + betas[:-2]).max(axis=1)
        violations = int(np.sum(second >= 1e-6))
        allowed = p * min(n, p)
        if violations > allowed:
            ok_all = False
            worst_detail = f"instance {inst}: {violations} > {allowed}"
    report(4, ok_all, worst_detail or "20 instances, second differences flat "
                                      "away from <= p*min(n,p) breakpoints")


# ---------------------------------------------------------------------------
# 5. contraction of the penalty update map
# ---------------------------------------------------------------------------

def test_criterion_5_contraction_probe():
    rng = np.random.default_rng(505)
    total_same = 0
    total_contracting = 0
    orbits_ok = 0
    for _ in range(20):
        p = int(rng.integers(4, 9))
        m = make_moments(rng, p, int(rng.integers(60, 150)))
        x_new = rng.standard_normal(p)
        y_new = float(rng.standard_normal())
        eps = 1e-3 * lambda_max(m)
        rep = contraction_probe(m, x_new, y_new, epsilon=eps, n_pairs=60,
                                n_orbit=10_000, rng=rng)
        total_same += rep.n_same_set
        total_contracting += rep.n_contracting
        orbits_ok += int(rep.orbit_within_bounds)
    ok = total_same > 0 and total_contracting == total_same and orbits_ok == 20
    report(5, ok, f"{total_contracting}/{total_same} same-active-set pairs "
                  f"contract, {orbits_ok}/20 orbits stayed in [0, lambda_max] "
                  f"over 10^4 iterations")


# ---------------------------------------------------------------------------
# 6. stationary tracking: l1-norm agreement with cross-validation
# ---------------------------------------------------------------------------

def test_criterion_6_stationary_tracking():
    t0 = time.time()
    cfg = BenchConfig(preset="stationary", family="gaussian", seed=0)
    res = run_replications(cfg, 100)
    details = []
    ok = res.n_failed == 0
    for p in (10, 50, 100):
        d = res.deltas[p]
        se = np.std(d, ddof=1) / np.sqrt(d.size)
        centered = abs(np.mean(d)) <= 2 * se
        med_ok = np.median(np.abs(d)) <= 0.2 * np.median(res.cv_norms[p])
        ok = ok and centered and med_ok
        details.append(f"p={p}: mean {np.mean(d):+.3f} (2se {2 * se:.3f}) "
                       f"med|d| {np.median(np.abs(d)):.3f}")
    elapsed = time.time() - t0
    ok = ok and elapsed < 600.0
    report(6, ok, "; ".join(details) + f"; {elapsed:.0f}s (limit 600s)")


# ---------------------------------------------------------------------------
# 7 + 8. non-stationary benchmark: arm ordering, F gap, penalty tracking
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def nonstationary_results():
    t0 = time.time()
    out = {}
    for family in ("gaussian", "binomial"):
        cfg = BenchConfig(preset="nonstationary", family=family, seed=0)
        out[family] = run_replications(cfg, 100)
    out["elapsed"] = time.time() - t0
    return out


def _paired_se(a, b):
    d = a - b
    return float(np.std(d, ddof=1) / np.sqrt(d.size))


def test_criterion_7_nonstationary_ordering(nonstationary_results):
    details = []
    ok = nonstationary_results["elapsed"] < 1200.0
    for family in ("gaussian", "binomial"):
        res = nonstationary_results[family]
        ok = ok and res.n_failed == 0
        chain = ["rap", "rap_approx", "stepwise", "fixed_cv"]
        means = {a: res.arms[a].summary.mean_loss for a in chain}
        for a, b in zip(chain[:-1], chain[1:]):
            allowance = _paired_se(res.arms[a].per_rep_loss, res.arms[b].per_rep_loss)
            if means[a] > means[b] + allowance:
                ok = False
                details.append(f"{family}: {a} ({means[a]:.3f}) > {b} "
                               f"({means[b]:.3f}) + se {allowance:.3f}")
        f_gap = (res.arms["rap"].summary.mean_f
                 - res.arms["fixed_cv"].summary.mean_f)
        if f_gap < 0.05:
            ok = False
        details.append(f"{family}: losses "
                       + " <= ".join(f"{means[a]:.3f}" for a in chain)
                       + f", F gap {f_gap:+.3f}")
    details.append(f"{nonstationary_results['elapsed']:.0f}s (limit 1200s)")
    report(7, ok, "; ".join(details))


def test_criterion_8_lambda_tracking_direction(nonstationary_results):
    details = []
    ok = True
    for family in ("gaussian", "binomial"):
        res = nonstationary_results[family]
        lam_med = np.median(res.arms["rap"].lam_traces, axis=0)
        sparse = np.median(lam_med[119:200])
        dense1 = np.median(lam_med[19:100])
        dense2 = np.median(lam_med[219:300])
        good = sparse > dense1 and sparse > dense2
        ok = ok and good
        details.append(f"{family}: dense {dense1:.2f} / sparse {sparse:.2f} / "
                       f"dense {dense2:.2f}")
    report(8, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 9. byte-identical CLI determinism
# ---------------------------------------------------------------------------

def test_criterion_9_cli_determinism(tmp_path):
    def run_twice(build_argv, outputs):
        pairs = []
        for tag in ("a", "b"):
            d = tmp_path / tag
            d.mkdir(exist_ok=True)
            assert cli_main(build_argv(d)) == 0
            pairs.append([d / name for name in outputs(d)])
        return all(x.read_bytes() == y.read_bytes() for x, y in zip(*pairs))

    rng = np.random.default_rng(9)
    nodes = tmp_path / "nodes.csv"
    data = rng.standard_normal((80, 4))
    nodes.write_text("a,b,c,d\n" + "\n".join(
        ",".join(format(v, ".9g") for v in row) for row in data) + "\n")

    checks = {}
    checks["simulate"] = run_twice(
        lambda d: ["simulate", "--out", str(d / "sim.csv"), "--preset", "table1",
                   "--seed", "5"],
        lambda d: ["sim.csv"])
    sim = tmp_path / "a" / "sim.csv"
    checks["run"] = run_twice(
        lambda d: ["run", "--in", str(sim), "--out", str(d / "trace.csv"),
                   "--epsilon", "0.05", "--lambda0", "0.5"],
        lambda d: ["trace.csv", "trace.png"])
    checks["bench"] = run_twice(
        lambda d: ["bench", "--preset", "nonstationary", "--family", "gaussian",
                   "--reps", "2", "--seed", "11", "--out-dir", str(d / "bench")],
        lambda d: ["bench/summary.csv", "bench/traces_rap.csv",
                   "bench/bench_nonstationary_gaussian.png"])
    checks["network"] = run_twice(
        lambda d: ["network", "--in", str(nodes), "--out", str(d / "edges.csv"),
                   "--stride", "20", "--epsilon", "0.1"],
        lambda d: ["edges.csv", "edges_lambda.csv", "edges.png"])

    ok = all(checks.values())
    report(9, ok, ", ".join(f"{k}={'identical' if v else 'DIFFERS'}"
                            for k, v in checks.items()))


# ---------------------------------------------------------------------------
# 10. network mode sanity on null and planted-dependence streams
# ---------------------------------------------------------------------------

def test_criterion_10_network_sanity(tmp_path):
    rng = np.random.default_rng(1010)

    def write_nodes(path, data):
        head = ",".join(f"n{j}" for j in range(1, data.shape[1] + 1))
        path.write_text(head + "\n" + "\n".join(
            ",".join(format(v, ".9g") for v in row) for row in data) + "\n")

    flags = ["--stride", "25", "--lambda0", "5.0", "--epsilon", "10.0",
             "--r", "0.95", "--mode", "approx", "--and-rule", "--no-figures"]
    checkpoints = sorted(set(range(25, 501, 25)) | {500})

    noise_csv = tmp_path / "noise.csv"
    write_nodes(noise_csv, rng.standard_normal((500, 10)))
    edges_csv = tmp_path / "edges_noise.csv"
    assert cli_main(["network", "--in", str(noise_csv), "--out", str(edges_csv)]
                    + flags) == 0
    rows = [l.split(",") for l in edges_csv.read_text().splitlines()[1:]]
    counts = Counter(int(r[0]) for r in rows)
    density = float(np.mean([counts.get(t, 0) / 45.0 for t in checkpoints]))

    planted = rng.standard_normal((500, 10))
    planted[:, 1] = 0.9 * planted[:, 0] + 0.3 * rng.standard_normal(500)
    pair_csv = tmp_path / "pair.csv"
    write_nodes(pair_csv, planted)
    edges2_csv = tmp_path / "edges_pair.csv"
    assert cli_main(["network", "--in", str(pair_csv), "--out", str(edges2_csv)]
                    + flags) == 0
    rows2 = [l.split(",") for l in edges2_csv.read_text().splitlines()[1:]]
    late = [t for t in checkpoints if t > 100]
    present = sum(1 for t in late
                  if any(int(r[0]) == t and r[1] == "1" and r[2] == "2" for r in rows2))
    frac = present / len(late)

    ok = density <= 0.05 and frac >= 0.9
    report(10, ok, f"white-noise mean edge density {density:.3f} (limit 0.05), "
                   f"planted edge present {present}/{len(late)} late checkpoints "
                   f"({frac:.0%}, need >= 90%)")
