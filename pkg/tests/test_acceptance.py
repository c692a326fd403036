"""Acceptance criteria, each run at its stated tolerance.

Every test records a single PASS/FAIL line that is printed in the terminal summary.
"""

import itertools
import json
import time

import numpy as np
import pytest

import conftest
from grmssvdd.cli import main
from grmssvdd.data import EventSeries, split_train_test
from grmssvdd.graphs import between_cluster_laplacian, build_laplacian, kmeans, knn_laplacian, within_cluster_laplacian
from grmssvdd.inference import DecisionStrategy, fuse
from grmssvdd.metrics import evaluate_earliness, geometric_mean, harmonic_mean
from grmssvdd.npt import fit_npt, map_test
from grmssvdd.pipeline import GridSpec, evaluate_model, grid_search, preprocess
from grmssvdd.preprocessing import WindowSpec
from grmssvdd.regularizers import GRAPH_OF_ID, RegularizerSpec, omega_gradient, omega_value
from grmssvdd.svdd import SvddSolution, dual_objective, solve_svdd
from grmssvdd.synthgen import SynthConfig, generate
from grmssvdd.trainer import ModelConfig, TrainedModel, train
from oracles import central_difference, double_center, rbf_loop, svdd_cvxopt, svdd_enumerate


def record(number, title, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")
    assert ok, detail


def test_1_gradient_correctness():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        N = int(rng.integers(3, 11))
        d = int(rng.integers(1, 4))
        dims = rng.integers(d, d + 4, size=3)
        C = float(rng.choice([0.2, 0.5, 1.0]))
        X = [rng.normal(size=(D, N)) for D in dims]
        Q = [rng.normal(size=(d, D)) for D in dims]
        alpha = rng.uniform(0, C, size=(3, N))
        alpha[:, rng.integers(N)] = C
        k = int(rng.integers(1, N))
        for rid in range(10):
            spec = RegularizerSpec(rid, beta=1.0, k=k)
            L = [build_laplacian(GRAPH_OF_ID[rid], x, k, 0) for x in X] if rid in GRAPH_OF_ID else None
            for m in range(3):
                def f(Qm, m=m):
                    Qs = list(Q)
                    Qs[m] = Qm
                    return omega_value(spec, Qs, X, alpha, L, C)

                numeric = central_difference(f, Q[m], 1e-6 * max(1.0, np.abs(Q[m]).max()))
                analytic = omega_gradient(spec, m, Q, X, alpha, L, C)
                scale = max(np.abs(numeric).max(), np.abs(analytic).max())
                err = np.abs(analytic - numeric).max() / scale if scale > 0 else 0.0
                worst = max(worst, err)
    elapsed = time.perf_counter() - start
    record(1, "gradient vs finite differences (ids 0-9, 20 instances)",
           worst < 1e-4 and elapsed < 10, f"max rel err {worst:.2e} (<1e-4), {elapsed:.1f}s (<10s)")


def test_2_svdd_oracle_equivalence():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst_obj = worst_sum = worst_box = 0.0
    for i in range(50):
        C = float(rng.choice([0.2, 0.5, 1.0]))
        N = int(rng.integers(int(np.ceil(1 / C)), 13))
        d = int(rng.integers(1, 4))
        Y = rng.normal(size=(d, N)) * rng.uniform(0.5, 3.0)
        sol = solve_svdd(Y, C)
        ref, _ = svdd_cvxopt(Y, C)
        if N <= 7:
            ref = max(ref, svdd_enumerate(Y, C)[0])
        worst_obj = max(worst_obj, abs(dual_objective(Y, sol.alpha) - ref))
        worst_sum = max(worst_sum, abs(sol.alpha.sum() - 1.0))
        worst_box = max(worst_box, -sol.alpha.min(), sol.alpha.max() - C)
    elapsed = time.perf_counter() - start
    ok = worst_obj <= 1e-6 and worst_sum <= 1e-6 and worst_box <= 1e-9 and elapsed < 30
    record(2, "SVDD vs dense QP oracle (50 instances)", ok,
           f"objective gap {worst_obj:.1e}, |sum(alpha)-1| {worst_sum:.1e}, box violation {max(worst_box, 0):.1e}, {elapsed:.1f}s")


def test_3_npt_defining_property():
    rng = np.random.default_rng(303)
    worst_rec = worst_map = 0.0
    for _ in range(20):
        D, N = int(rng.integers(2, 8)), int(rng.integers(2, 25))
        sigma = float(10.0 ** rng.uniform(-0.5, 1.5))
        X = rng.normal(size=(D, N))
        model = fit_npt(X, sigma)
        oracle = double_center(rbf_loop(X, X, sigma))
        worst_rec = max(worst_rec, np.abs(model.phi_train.T @ model.phi_train - oracle).max())
        worst_map = max(worst_map, np.abs(map_test(model, X) - model.phi_train).max())
    ok = worst_rec < 1e-6 and worst_map < 1e-6
    record(3, "NPT reconstruction and training-point map (20 fits)", ok,
           f"|Phi^T Phi - K_hat| {worst_rec:.1e}, |map(X) - Phi| {worst_map:.1e} (<1e-6)")


def test_4_qr_contract(small_pipeline):
    targets = small_pipeline.train.targets()
    configs = [
        ModelConfig(d=3, C=0.2, regularizer=7, beta=1.0, k=3, max_iter=40),
        ModelConfig(d=2, C=0.3, regularizer=9, beta=10.0, k=2, use_npt=True, sigma=10.0, signs=(1, -1, 1), max_iter=40),
        ModelConfig(d=5, C=0.1, regularizer=6, beta=0.1, max_iter=40),
    ]
    worst, n_logged = 0.0, 0
    for cfg in configs:
        def log(i, Q):
            nonlocal worst, n_logged
            n_logged += 1
            for Qm in Q:
                worst = max(worst, np.abs(Qm @ Qm.T - np.eye(Qm.shape[0])).max())

        train(targets, cfg, log)
    record(4, "QR contract after every iteration", worst < 1e-8 and n_logged > 0,
           f"max |Q Q^T - I| {worst:.1e} over {n_logged} logged iterations (<1e-8)")


def test_5_laplacian_algebra():
    rng = np.random.default_rng(505)
    sym = ones = psd = idem = 0.0
    for _ in range(20):
        N = int(rng.integers(3, 30))
        X = rng.normal(size=(int(rng.integers(1, 6)), N))
        k = int(rng.integers(1, N))
        assignment = kmeans(X, min(k, N), int(rng.integers(1000)))
        mats = [
            knn_laplacian(X, k).matrix,
            within_cluster_laplacian(assignment, N).matrix,
            between_cluster_laplacian(assignment, N).matrix,
        ]
        for L in mats:
            sym = max(sym, np.abs(L - L.T).max())
            ones = max(ones, np.abs(L @ np.ones(N)).max())
            psd = min(psd, np.linalg.eigvalsh(L).min())
        idem = max(idem, np.abs(mats[1] @ mats[1] - mats[1]).max())
    ok = sym == 0.0 and ones < 1e-8 and psd > -1e-8 and idem < 1e-10
    record(5, "Laplacian algebra (kNN, within, between)", ok,
           f"asym {sym:.1e}, |L 1| {ones:.1e}, min eig {psd:.1e}, |Lw^2 - Lw| {idem:.1e}")


def test_6_metric_spot_checks_and_fusion_table():
    gm = geometric_mean(0.86, 0.72)
    hm = harmonic_mean(0.67, 0.86)
    expected = {
        "and": lambda p: p[0] and p[1] and p[2],
        "or": lambda p: p[0] or p[1] or p[2],
        "uni0": lambda p: p[0],
        "uni1": lambda p: p[1],
        "uni2": lambda p: p[2],
    }
    mismatches = 0
    for p in itertools.product([False, True], repeat=3):
        for name, rule in expected.items():
            mismatches += fuse(p, DecisionStrategy.parse(name)) != rule(p)
    ok = abs(gm - 0.79) <= 0.005 and abs(hm - 0.75) <= 0.005 and mismatches == 0
    record(6, "metric spot-checks and fusion truth table", ok,
           f"gm {gm:.4f} (0.79), hm {hm:.4f} (0.75), fusion mismatches {mismatches}/40")


@pytest.mark.slow
def test_7_end_to_end_learnability():
    start = time.perf_counter()
    seed = 0
    events = generate(SynthConfig(n_events=60, magnitude=10.0, seed=seed))
    train_ev, test_ev = split_train_test(events, 0.7, seed)
    pre = preprocess(train_ev, test_ev, WindowSpec(10), 0.0, 30, seed)
    grid = GridSpec(d=(2, 5), C=(0.1, 0.3), beta=(0.0, 1.0), regularizer=(0, 8), use_npt=(True,),
                    sigma=(1.0, 10.0, 100.0), k=(3,), eta=(0.1,), signs=((-1, -1, -1),))
    result = grid_search(pre.train, grid.expand(seed, 3), seed=seed)
    best = result.best
    model = train(pre.train.targets(), best.config)
    report = evaluate_model(model, pre.test, [DecisionStrategy.parse(best.strategy)])[best.strategy]
    elapsed = time.perf_counter() - start
    c = best.config
    record(7, "end-to-end learnability on synthetic events", report.gm >= 0.90 and elapsed < 300,
           f"test gm {report.gm:.3f} (>=0.90) with {best.strategy}, id {c.regularizer}, d={c.d}, "
           f"C={c.C}, beta={c.beta}, sigma={c.sigma}; {result.n_configs} configs in {elapsed:.0f}s (<300s)")


def test_8_earliness_harness():
    dt = 2.0**-6
    n, w = 64, 10
    t = np.arange(n) * dt

    def event(i, first_anomalous, tau1_idx, tau2_idx):
        x = np.full((1, n), 5.0)
        if first_anomalous is not None:
            x[0, first_anomalous:tau2_idx + 1] = 0.0
        return EventSeries(f"c{i}", t, x, (0,), t[tau1_idx], t[tau2_idx])

    # one channel, the window's last sample is projected and compared to a sphere of radius 1/2 at 0
    Q = np.zeros((1, w))
    Q[0, -1] = 1.0
    model = TrainedModel(ModelConfig(d=1, signs=(-1,)), (Q,), SvddSolution(np.array([1.0]), np.zeros(1), 0.5, 1.0))
    offsets = [0, 3, 7, 12]
    events = [event(i, 20 + o, 20, 40) for i, o in enumerate(offsets)] + [event(9, None, 20, 40)]
    cct = 0.1
    rep = evaluate_earliness(model, DecisionStrategy("and"), events, cct, WindowSpec(w))
    analytic_delay = sum(o * dt for o in offsets) / len(offsets)
    analytic_earl = (cct - analytic_delay) / cct
    ok = (
        rep.delay == analytic_delay
        and abs(rep.earl - analytic_earl) < 1e-12
        and abs(rep.ttr + rep.ftr - 1.0) < 1e-12
        and rep.false_trigger == (False, False, False, False, True)
    )
    record(8, "earliness harness on constructed events", ok,
           f"delay {rep.delay!r} vs {analytic_delay!r}, earl err {abs(rep.earl - analytic_earl):.1e}, "
           f"ttr+ftr {rep.ttr + rep.ftr}")


def test_9_determinism(tmp_path):
    cfg = {
        "seed": 11,
        "pca_components": 10,
        "synth": {"n_events": 16, "channels": [4, 5, 5], "n_timesteps": 80},
        "model": {"d": 2, "C": 0.3, "use_npt": True, "sigma": 10.0, "regularizer": 8, "beta": 1.0, "k": 3, "max_iter": 20},
    }
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        path = tmp_path / f"{run}.json"
        path.write_text(json.dumps({**cfg, "out_dir": str(out)}))
        for cmd in ("generate", "preprocess", "train", "evaluate"):
            assert main([cmd, "--config", str(path)]) == 0
        outputs.append({name: (out / name).read_bytes() for name in ("model.json", "report.json", "report.txt")})
    same = outputs[0] == outputs[1]
    record(9, "determinism of two full pipeline runs", same,
           "model.json, report.json, report.txt byte-identical" if same else "outputs differ")
