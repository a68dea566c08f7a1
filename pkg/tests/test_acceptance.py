"""Exit criteria for the build, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
The last criterion needs the original provincial dataset; point the
``SALES_ANOMALY_REFERENCE_DATA`` environment variable at its CSV to run it.
"""
import io
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from sales_anomaly.cli import main
from sales_anomaly.forest import ForestConfig, fit_forest, predict_forest_quantile
from sales_anomaly.intervals import AnomalyClass, TauPair, run_detection
from sales_anomaly.metrics import interval_metrics, point_metrics
from sales_anomaly.panel import read_panel, write_panel
from sales_anomaly.qr import fit_qr, predict_qr
from sales_anomaly.reporting import aggregate_annual
from sales_anomaly.synthetic import synthetic_panel

from oracles import (
    empirical_quantile_left,
    exact_forest_weights,
    exact_weighted_quantile,
    qr_enumeration,
)


@contextmanager
def criterion(results, name, budget_s=None):
    detail = {}
    start = time.perf_counter()
    try:
        yield detail
        elapsed = time.perf_counter() - start
        if budget_s is not None:
            assert elapsed < budget_s, f"runtime {elapsed:.2f}s exceeds {budget_s}s"
    except AssertionError as exc:
        results.append((name, "FAIL", str(exc).splitlines()[0]))
        raise
    elapsed = time.perf_counter() - start
    msg = detail.get("msg", "")
    results.append((name, "PASS", f"{msg} ({elapsed:.2f}s)".strip()))


def qr_fixtures():
    rng = np.random.default_rng(2024)
    out = []
    for n, k in [(8, 1), (10, 1), (12, 1), (9, 2), (11, 2), (12, 2)]:
        X = np.round(rng.uniform(0, 10, (n, k)), 1)
        y = np.round(5 + X @ rng.uniform(-2, 2, k) + rng.normal(0, 3, n), 1)
        out.append((X, y))
    return out


def test_qr_optimality(acceptance):
    with criterion(acceptance, "QR optimality", 1.0) as d:
        fixtures = qr_fixtures()
        oracle = {
            (i, tau): qr_enumeration(X, y, tau)[0]
            for i, (X, y) in enumerate(fixtures) for tau in (0.1, 0.5, 0.9)
        }
        start = time.perf_counter()
        worst = 0.0
        for i, (X, y) in enumerate(fixtures):
            for tau in (0.1, 0.5, 0.9):
                m = fit_qr(X, y, tau)
                best = oracle[i, tau]
                worst = max(worst, abs(m.objective - best) / max(best, 1e-300))
                r = y - m.predict(X)
                zero = np.abs(r) <= 1e-9 * max(1.0, np.abs(y).max())
                n_neg, n_zero = np.sum((r < 0) & ~zero), np.sum(zero)
                assert n_neg <= len(y) * tau <= n_neg + n_zero, f"subgradient condition fails (fixture {i}, tau {tau})"
        fit_time = time.perf_counter() - start
        assert worst <= 1e-8, f"relative gap {worst:.2e} > 1e-8"
        assert fit_time < 1.0, f"fits took {fit_time:.2f}s"
        d["msg"] = f"{len(fixtures)} fixtures x 3 taus, worst relative gap {worst:.1e}, fits {fit_time:.2f}s"


def test_qr_consistency(acceptance):
    with criterion(acceptance, "QR consistency", 10.0) as d:
        worst = (0.0, None)
        for seed in range(1, 6):
            rng = np.random.default_rng(seed)
            x = rng.uniform(0, 1, 2000)
            y = 1 + 2 * x + (1 + x) * rng.uniform(-1, 1, 2000)
            for tau in (0.1, 0.9):
                m = fit_qr(x, y, tau)
                for x0 in (0.2, 0.5, 0.8):
                    truth = 1 + 2 * x0 + (1 + x0) * (2 * tau - 1)
                    rel = abs(predict_qr(m, [x0]) - truth) / abs(truth)
                    if rel > worst[0]:
                        worst = (rel, (seed, tau, x0))
        rel, where = worst
        assert rel <= 0.05, f"worst relative error {rel:.3f} > 0.05 at (seed, tau, x) = {where}"
        d["msg"] = f"worst relative error {rel:.3f}"


def test_qrf_oracle_equivalence(acceptance):
    with criterion(acceptance, "QRF oracle equivalence", 5.0) as d:
        rng = np.random.default_rng(77)
        checked = 0
        cases = [(12, 1, False), (20, 3, True), (30, 10, True), (25, 10, False), (30, 7, True), (16, 5, True)]
        for n, n_trees, bootstrap in cases:
            X = np.round(rng.uniform(0, 10, (n, 2)), 2)
            y = np.round(2 * X[:, 0] - X[:, 1] + rng.normal(0, 2, n), 1)
            f = fit_forest(X, y, ForestConfig(n_trees=n_trees, bootstrap=bootstrap, min_node_size=3, seed=n * 31 + n_trees))
            queries = np.vstack([X[:4], rng.uniform(-1, 11, (4, 2))])
            taus = [0.1, 0.25, 0.5, 0.75, 0.9]
            got = f.predict_quantiles(queries, taus)
            for j, x in enumerate(queries):
                w = exact_forest_weights(f, x)
                for k, tau in enumerate(taus):
                    want = exact_weighted_quantile(y.tolist(), w, tau)
                    assert got[j, k] == want, f"mismatch n={n} trees={n_trees} tau={tau}: {got[j, k]} != {want}"
                    checked += 1
        d["msg"] = f"{len(cases)} fixtures, {checked} quantiles identical"


def test_degenerate_forest_identity(acceptance):
    with criterion(acceptance, "Degenerate-forest identity", 1.0) as d:
        rng = np.random.default_rng(5)
        for n in (7, 10, 13):
            X = rng.uniform(0, 1, (n, 2))
            y = np.round(rng.normal(50, 10, n), 2)
            f = fit_forest(X, y, ForestConfig(n_trees=1, bootstrap=False, mtry=2, min_node_size=n))
            assert f.trees[0].n_nodes == 1
            for tau in (0.1, 0.25, 0.5, 0.9):
                got = predict_forest_quantile(f, X[0], tau)
                assert got == empirical_quantile_left(y.tolist(), tau), f"n={n}, tau={tau}"
        d["msg"] = "3 samples x 4 taus exact"


def test_coverage_identity(acceptance):
    with criterion(acceptance, "Coverage identity", 120.0) as d:
        normal = total = 0
        for seed in range(50):
            records = run_detection(synthetic_panel(20, 16, seed=1000 + seed), "qr", TauPair(0.1, 0.9))
            normal += sum(r.anomaly_class is AnomalyClass.NORMAL for r in records)
            total += len(records)
        rate = normal / total
        assert abs(rate - 0.8) <= 0.05, f"Normal rate {rate:.4f} outside 0.80 +/- 0.05"
        d["msg"] = f"Normal rate {rate:.4f} over {total} cells"


def test_planted_anomaly_recovery(acceptance):
    with criterion(acceptance, "Planted-anomaly recovery", 120.0) as d:
        planted = ("R03", "R14")
        hi_hits = lo_hits = cells = 0
        for seed in range(5):
            up = run_detection(synthetic_panel(20, 16, seed=2000 + seed, scale={r: 2.0 for r in planted}), "qr")
            down = run_detection(synthetic_panel(20, 16, seed=3000 + seed, scale={r: 0.5 for r in planted}), "qr")
            for r in up:
                if r.anomaly_class is AnomalyClass.HIGH:
                    assert r.uar > 0
            for r in down:
                if r.anomaly_class is AnomalyClass.LOW:
                    assert r.lar < 0
            hi_hits += sum(r.anomaly_class is AnomalyClass.HIGH for r in up if r.region in planted)
            lo_hits += sum(r.anomaly_class is AnomalyClass.LOW for r in down if r.region in planted)
            cells += sum(r.region in planted for r in up)
        assert hi_hits / cells >= 0.9, f"High rate {hi_hits / cells:.3f} < 0.9"
        assert lo_hits / cells >= 0.9, f"Low rate {lo_hits / cells:.3f} < 0.9"
        d["msg"] = f"High {hi_hits}/{cells}, Low {lo_hits}/{cells}"


def test_metric_exactness(acceptance):
    with criterion(acceptance, "Metric exactness") as d:
        tol = 1e-12
        # fixture 1: e = (-2, 4)
        m = point_metrics([10.0, 20.0], [12.0, 16.0])
        for got, want in [(m.mae, 3), (m.mse, 10), (m.mape, 0.2), (m.medae, 3), (m.medse, 10), (m.medape, 0.2)]:
            assert abs(got - want) <= tol
        # fixture 2: e = (1, -3, 2, 0, -5)
        y = np.array([10.0, 20.0, 40.0, 50.0, 100.0])
        m = point_metrics(y, y - np.array([1.0, -3.0, 2.0, 0.0, -5.0]))
        for got, want in [(m.mae, 2.2), (m.mse, 7.8), (m.mape, 0.07), (m.medae, 2), (m.medse, 4), (m.medape, 0.05)]:
            assert abs(got - want) <= tol
        assert m.medse == m.medae**2
        # fixture 3: intervals with both exceedances
        im = interval_metrics([5.0, 12.0, 30.0, 20.0], [10.0, 10.0, 10.0, 20.0], [20.0, 20.0, 25.0, 20.0], 0.2)
        for got, want in [(im.mis, 33.75), (im.coverage, 50), (im.range_width, 8.75), (im.range_ratio, 1.875),
                          (im.pinball_lo, 1.675), (im.pinball_hi, 1.7)]:
            assert abs(got - want) <= tol, (got, want)
        rng = np.random.default_rng(0)
        for n in (1, 3, 7, 15, 31):
            yy, yh = rng.normal(size=n), rng.normal(size=n)
            pm = point_metrics(yy, yh)
            assert pm.medse == pm.medae**2
        lo = rng.uniform(0, 10, 50)
        hi = lo + rng.uniform(0, 5, 50)
        inside = lo + (hi - lo) * rng.uniform(0, 1, 50)
        assert abs(interval_metrics(inside, lo, hi, 0.2).mis - np.mean(hi - lo)) <= 1e-12
        for _ in range(200):
            n = int(rng.integers(1, 40))
            yy = rng.normal(0, 10, n)
            lo = rng.normal(0, 10, n)
            hi = lo + rng.exponential(5, n)
            alpha = float(rng.uniform(0.05, 0.5))
            im = interval_metrics(yy, lo, hi, alpha)
            below, above = np.mean(np.maximum(lo - yy, 0)), np.mean(np.maximum(yy - hi, 0))
            assert abs(im.mis - (im.range_width + 2 / alpha * below + 2 / alpha * above)) <= 1e-10
        d["msg"] = "3 fixtures to 1e-12, MedSE = MedAE^2, MIS identities"


def test_determinism(acceptance, tmp_path):
    with criterion(acceptance, "Determinism") as d:
        panel = tmp_path / "panel.csv"
        buf = io.StringIO()
        write_panel(synthetic_panel(8, 6, seed=11, scale={"R02": 2.0}), buf)
        panel.write_text(buf.getvalue())
        runs = {}
        # -1 is every core; 4 forces worker processes even on a single-core host
        for label, jobs in (("serial", "1"), ("again", "1"), ("all_cores", "-1"), ("four", "4")):
            out = tmp_path / label
            for method in ("qr", "qrf"):
                code = main(["detect", "--input", str(panel), "--method", method, "--seed", "99",
                             "--n-trees", "40", "--jobs", jobs, "--output-dir", str(out / method)])
                assert code == 0
            runs[label] = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        assert runs["serial"] == runs["again"] == runs["all_cores"] == runs["four"], "outputs differ between runs"
        d["msg"] = f"{len(runs['serial'])} files byte-identical across 4 runs (--jobs 1, 1, -1, 4)"


REFERENCE_DATA = os.environ.get("SALES_ANOMALY_REFERENCE_DATA")


@pytest.mark.skipif(not REFERENCE_DATA, reason="original provincial dataset not supplied (non-gating)")
def test_optional_reference_check(acceptance):
    with criterion(acceptance, "Optional reference-data check") as d:
        from sales_anomaly.evaluation import run_evaluation

        panel = read_panel(REFERENCE_DATA)
        _, averages = run_evaluation(panel, "qr")
        train = averages["train"]
        assert abs(train["mae"] - 16.3) <= 0.15 * 16.3, f"train MAE {train['mae']:.2f}"
        assert abs(train["mape"] - 0.13) <= 0.15 * 0.13, f"train MAPE {train['mape']:.3f}"
        agg = aggregate_annual(run_detection(panel, "qr"))
        assert any(
            a.avg_uar is not None and a.avg_uar > 0.40 and (a.avg_lar_magnitude or 0.0) < 0.15 for a in agg
        ), "no year with avg UAR > 0.40 and avg |LAR| < 0.15"
        d["msg"] = f"train MAE {train['mae']:.2f}, MAPE {train['mape']:.3f}"


def test_optional_reference_check_status(acceptance):
    if not REFERENCE_DATA:
        acceptance.append(("Optional reference-data check", "SKIP", "set SALES_ANOMALY_REFERENCE_DATA to the original panel CSV"))
