"""End-to-end acceptance checks for the retail root-cause experiment.

Each test records a PASS/FAIL line (see conftest) in addition to asserting.
The seeded full-year runs are expensive, so they are computed once per module.
"""

import datetime as dt
import os
import time

import numpy as np
import pandas as pd
import pytest

from oracles import brute_force_paths, random_instance
from pathtrace import pipeline
from pathtrace.attribution import AttributionConfig, attribute_anomalies
from pathtrace.datagen import DATE
from pathtrace.graph import build_dag
from pathtrace.pathfinder import (PathConfig, analyze, combined_score, discover_paths, path_consistency,
                                  path_significance, report_for)
from pathtrace.report import build_document
from pathtrace.scm import extract_noise, fit_scm, propagate
from pathtrace.scoring import fit_scorer, score

pytestmark = pytest.mark.slow

EXPECTED = {
    dt.date(2023, 1, 10): ["PROFIT_MARGIN", "NET_SALES", "DISCOUNT"],
    dt.date(2023, 6, 10): ["PROFIT_MARGIN", "PROFIT", "COST_OF_GOODS_SOLD", "UNIT_COST"],
    dt.date(2023, 9, 10): ["PROFIT_MARGIN", "PROFIT", "FULFILLMENT_COST"],
    dt.date(2023, 12, 10): ["PROFIT_MARGIN", "PROFIT", "RETURN_COST"],
}
SEEDS = list(range(42, 52))
RUNTIME_LIMIT = 300.0
ALL_SEEDS = os.environ.get("PATHTRACE_ACCEPTANCE_ALL_SEEDS") == "1"


def run_pipeline(seed, out_dir):
    """Every stage of the default pipeline with artifacts on disk; keeps the
    in-memory reports so other thresholds can be replayed cheaply."""
    t0 = time.perf_counter()
    cfg = pipeline.PipelineConfig(out_dir=out_dir, dates=[d.isoformat() for d in EXPECTED]).resolved(seed=seed)
    frame = pipeline.stage_inject(cfg, pipeline.stage_generate(cfg))
    detection = pipeline.stage_detect(cfg, frame)
    scm = pipeline.stage_fit(cfg, frame)
    reports = analyze(scm, frame, cfg.dates, cfg.path, cfg.attribution, cfg.target)
    pipeline.write_json(cfg.path_of("analysis"), build_document(reports, cfg.target, cfg.path, cfg.attribution,
                                                                scm.metadata))
    pipeline.stage_report(cfg)
    return {"seed": seed, "seconds": time.perf_counter() - t0, "frame": frame, "scm": scm,
            "detection": detection, "reports": reports, "cfg": cfg}


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    cache = {}

    def get(seed):
        if seed not in cache:
            cache[seed] = run_pipeline(seed, tmp_path_factory.mktemp(f"seed{seed}"))
        return cache[seed]

    return get


def top_nodes(report):
    return report.top.nodes if report.top else None


def test_criterion_01_pathway_recovery(runs, criterion):
    passed, failed, lines = 0, 0, []
    for seed in SEEDS:
        run = runs(seed)
        tops = {d: top_nodes(r) for d, r in run["reports"].items()}
        ok = all(tops[d] == EXPECTED[d] for d in EXPECTED) and run["seconds"] < RUNTIME_LIMIT
        passed += ok
        failed += not ok
        lines.append(f"seed {seed}: {'ok' if ok else 'mismatch'} in {run['seconds']:.0f}s")
        for d in EXPECTED:
            if tops[d] != EXPECTED[d]:
                lines.append(f"  {d}: got {tops[d]}")
        # with two misses, nine of ten is out of reach; skip the rest unless asked
        if failed >= 2 and not ALL_SEEDS:
            break
    print("\n".join(lines))
    evaluated = passed + failed
    ok = passed >= 9
    criterion(1, ok, f"{passed}/{evaluated} seeds recovered all four top paths (need 9/10)")
    assert ok


def test_criterion_02_detection(runs, criterion):
    flagged = set(runs(42)["detection"].dates)
    missing = set(EXPECTED) - flagged
    spurious = flagged - set(EXPECTED)
    ok = not missing and len(spurious) <= 2
    criterion(2, ok, f"flagged {sorted(d.isoformat() for d in flagged)}; spurious {len(spurious)}")
    assert ok


def test_criterion_03_upstream_noise_trend(runs, criterion):
    reports = runs(42)["reports"]
    details, ok = [], True
    for d in (dt.date(2023, 1, 10), dt.date(2023, 6, 10)):
        rep = reports[d]
        terminal = EXPECTED[d][-1]
        term = rep.node_scores[terminal].max_abs_noise
        tgt = rep.node_scores["PROFIT_MARGIN"].max_abs_noise
        ok &= term > tgt
        details.append(f"{d}: {terminal} {term:.4f} vs PROFIT_MARGIN {tgt:.4f}")
    criterion(3, ok, "; ".join(details))
    assert ok


def test_criterion_04_threshold_robustness(runs, criterion):
    run = runs(42)
    cfg = run["cfg"]
    low = PathConfig(alpha=cfg.path.alpha, beta=cfg.path.beta, theta=0.3, gamma=cfg.path.gamma)
    ok, details = True, []
    for d, rep in run["reports"].items():
        rep_low = report_for(d, np.arange(rep.n_rows), rep.node_scores, rep.contributions, run["scm"].dag,
                             cfg.target, low)
        same = top_nodes(rep_low) == top_nodes(rep)
        more = len(rep_low.paths) >= len(rep.paths)
        ok &= same and more
        details.append(f"{d}: top {top_nodes(rep)} -> {top_nodes(rep_low)}, "
                       f"candidates {len(rep.paths)} -> {len(rep_low.paths)}")
    print("\n".join(details))
    criterion(4, ok, "; ".join(details))
    assert ok


def test_criterion_05_dfs_oracle(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(500):
        dag, edges, names, scores, target, theta, beta = random_instance(rng)
        got = sorted(tuple(p.nodes) for p in discover_paths(dag, scores, target, PathConfig(theta=theta, beta=beta)))
        mismatches += got != brute_force_paths(edges, names, scores, target, theta, beta)
    secs = time.perf_counter() - t0
    ok = mismatches == 0 and secs < 30
    criterion(5, ok, f"{mismatches} mismatches on 500 DAGs in {secs:.1f}s")
    assert ok


def _nonlinear_scm(rng, n=800):
    # target T has six ancestors: seven players, inside exact enumeration range
    a = rng.normal(0, 1, n)
    b = rng.exponential(1, n)
    c = a ** 2 + rng.normal(0, 0.3, n)
    d = np.sin(a) + b + rng.normal(0, 0.3, n)
    e = c - d + rng.normal(0, 0.5, n)
    f = 0.5 * e + rng.normal(0, 0.5, n)
    t = e * 0.3 + f + np.abs(d) + rng.normal(0, 0.2, n)
    data = pd.DataFrame({"A": a, "B": b, "C": c, "D": d, "E": e, "F": f, "T": t})
    dag = build_dag([("A", "C"), ("A", "D"), ("B", "D"), ("C", "E"), ("D", "E"), ("E", "F"),
                     ("E", "T"), ("F", "T"), ("D", "T")])
    return data, fit_scm(dag, data)


def test_criterion_06_shapley_efficiency(criterion):
    rng = np.random.default_rng(6)
    data, scm = _nonlinear_scm(rng)
    rows = np.sort(rng.choice(len(data), 50, replace=False))
    cfg = AttributionConfig(seed=6)
    cm = attribute_anomalies(scm, "T", data, rows, cfg)
    assert len(cm.nodes) <= cfg.exact_max_players
    gap = np.max(np.abs(sum(cm[n] for n in cm.nodes) - (cm.full - cm.empty)))
    ok = gap <= 1e-9
    criterion(6, ok, f"max |sum C - (h_full - h_empty)| = {gap:.2e} over 50 rows, {len(cm.nodes)} players")
    assert ok


def test_criterion_07_attribution_dominance(criterion):
    rng = np.random.default_rng(7)
    n = 1000
    sig = {"A": 1.0, "B": 1.0, "C": 1.0, "T": 1.0}
    noise = {k: rng.normal(0, s, n) for k, s in sig.items()}

    def forward(eps):
        a = eps["A"]
        b = a + eps["B"]
        c = 0.5 * a + eps["C"]
        return {"A": a, "B": b, "C": c, "T": b + c + eps["T"]}

    data = pd.DataFrame(forward(noise))
    scm = fit_scm(build_dag([("A", "B"), ("A", "C"), ("B", "T"), ("C", "T")]), data)
    hits = 0
    for trial in range(100):
        node = ["A", "B", "C"][trial % 3]
        row = int(rng.integers(n))
        eps = {k: v[row:row + 1].copy() for k, v in noise.items()}
        eps[node] = eps[node] + 10 * sig[node]
        shocked = pd.DataFrame(forward(eps))
        cm = attribute_anomalies(scm, "T", shocked, [0], AttributionConfig(seed=trial))
        hits += max(cm.nodes, key=lambda v: abs(cm[v][0])) == node
    ok = hits >= 95
    criterion(7, ok, f"{hits}/100 shocks attributed to the shocked ancestor")
    assert ok


def test_criterion_08_scorer_properties(criterion):
    rng = np.random.default_rng(8)
    bounded = True
    for k in range(100):
        sample = rng.normal(0, 10 ** rng.uniform(-3, 3), int(rng.integers(2, 500)))
        scorer = fit_scorer(sample)
        xs = np.concatenate([rng.normal(0, 10 ** rng.uniform(-4, 4), 996), [np.inf, -np.inf, 0.0, sample[0]]])
        s = score(scorer, xs)
        bounded &= bool(np.all((s >= 0) & (s <= 1)))
    sym = mono = True
    for _ in range(300):
        half = rng.integers(0, 50, int(rng.integers(1, 40)))
        scorer = fit_scorer(np.concatenate([half, -half]))
        d = rng.integers(0, 60, 20)
        sym &= bool(np.array_equal(score(scorer, d.astype(float)), score(scorer, -d.astype(float))))
        sample = rng.integers(-30, 30, int(rng.integers(2, 60)))
        scorer = fit_scorer(sample)
        med = float(np.median(sample))
        steps = np.sort(rng.integers(0, 40, 20)).astype(float)
        mono &= bool(np.all(np.diff(score(scorer, med + steps)) >= 0))
        mono &= bool(np.all(np.diff(score(scorer, med - steps)) >= 0))
    ref = score(fit_scorer(np.arange(1, 101)), 1000.0) == 1.0
    ok = bounded and sym and mono and ref
    criterion(8, ok, f"bounded(1e5)={bounded} symmetry={sym} monotone={mono} 1..100@1000->1.0={ref}")
    assert ok


def test_criterion_09_round_trip(runs, criterion):
    run = runs(42)
    scm, frame = run["scm"], run["frame"]
    rebuilt = propagate(scm, extract_noise(scm, frame))
    worst, zero_misses = 0.0, 0
    for node in scm.dag.nodes:
        obs = frame[node].to_numpy(dtype=float)
        err = np.abs(rebuilt[node] - obs)
        nz = obs != 0
        worst = max(worst, float(np.max(err[nz] / np.abs(obs[nz]))))
        # a relative tolerance around an exact zero means exact reconstruction
        zero_misses += int(np.count_nonzero(err[~nz]))
    ok = worst <= 1e-6 and zero_misses == 0
    criterion(9, ok, f"worst relative error {worst:.2e}, {zero_misses} inexact zeros, "
                     f"over {len(frame)} rows x {len(scm.dag.nodes)} nodes")
    assert ok


def test_criterion_10_formula_spot_checks(criterion):
    from pathtrace.attribution import ContributionMatrix
    cm = ContributionMatrix("T", np.arange(3), {"T": np.array([1.0, 2, 3]), "B": np.array([2.0, 4, 6])})
    checks = {
        "combined(0.8,0.5,0.7)=0.71": abs(combined_score(0.8, 0.5, 0.7) - 0.71) < 1e-12,
        "significance(0.1,0.5,0.7)=0.22": abs(path_significance(0.1, 0.5, 0.7) - 0.22) < 1e-12,
        "consistency(perfect pair)=1.0": abs(path_consistency(cm, ["T", "B"]) - 1.0) < 1e-12,
    }
    ok = all(checks.values())
    criterion(10, ok, ", ".join(f"{k}:{'ok' if v else 'bad'}" for k, v in checks.items()))
    assert ok
