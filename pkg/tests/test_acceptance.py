"""Acceptance criteria 1-10; each test prints one PASS/FAIL line.

Set ``PCSIBENCH_FULL_FOREST=1`` to run criterion 8 with 500-tree forests.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from oracles import brute_force_pcsi

from pcsibench import models
from pcsibench.cli import main
from pcsibench.cohort import DEFAULT_SYMPTOMS, Cohort, Participant, SymptomRecord, VaccinationInfo, build_dataset, filter_eligible
from pcsibench.dataset import Dataset
from pcsibench.evalx import benchmark, stratified_split
from pcsibench.explain import explain_rows, kernel_shap, linear_coefficients, sample_background, shap_summary
from pcsibench.models import GboostParams, MlpParams, RidgeModel, RidgeParams, fit_forest, fit_gboost, fit_mlp, fit_ridge
from pcsibench.models.mlp import init_weights, loss_and_grads
from pcsibench.pcsi import compute_all
from pcsibench.stats import chi_square, cramers_v, indicator_matrix, mca
from pcsibench.synth import SynthConfig, generate

pytestmark = pytest.mark.acceptance

PLANTED_N = 4657


@pytest.fixture
def verdict(capsys):
    def report(number: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"criterion {number}: {detail}"

    return report


def planted_dataset(seed: int) -> tuple[Dataset, tuple[str, ...]]:
    cohort, truth = generate(SynthConfig(n_participants=PLANTED_N, seed=seed))
    eligible, _ = filter_eligible(cohort)
    return build_dataset(eligible, compute_all(eligible)), truth.active_features


def random_cohort(seed: int, n: int) -> Cohort:
    rng = np.random.default_rng(seed)
    symptoms = DEFAULT_SYMPTOMS
    days = np.array([-60, -30, -14, -8, -7, 90, 100, 121, 135, 150])
    parts, recs, vacc = {}, {}, {}
    for i in range(n):
        pid = f"s{seed}_{i:03d}"
        parts[pid] = Participant(pid, "female", 40, "low", False, 3, False, "omicron")
        vacc[pid] = VaccinationInfo(pid, "none")
        base = rng.choice(days[days <= -7], size=rng.integers(1, 4), replace=False)
        post = rng.choice(days[days >= 90], size=rng.integers(1, 4), replace=False)
        out = []
        for d in sorted(np.concatenate([base, post])):
            chosen = rng.choice(len(symptoms), size=rng.integers(1, len(symptoms) + 1), replace=False)
            out.append(SymptomRecord(pid, int(d), {symptoms[j]: float(rng.integers(1, 6)) for j in sorted(chosen)}))
        recs[pid] = tuple(out)
    return Cohort(parts, recs, vacc, symptoms)


def test_criterion_1_pcsi_oracle(verdict):
    start = time.perf_counter()
    mismatches = 0
    total = 0
    for seed in range(1, 6):
        cohort = random_cohort(seed, 200)
        results = compute_all(cohort)
        for pid, res in results.items():
            cells = [(r.day_offset, s, v) for r in cohort.records_for(pid) for s, v in r.scores.items()]
            persistent, lc, value, basis = brute_force_pcsi(cells)
            total += 1
            same = (res.persistent_symptoms == persistent and res.lc_positive is lc
                    and res.pcsi_basis == basis and abs(res.pcsi - float(value)) <= 1e-12)
            mismatches += not same
    elapsed = time.perf_counter() - start
    verdict(1, mismatches == 0 and total == 1000 and elapsed < 10,
            f"{total} participants, {mismatches} mismatches, {elapsed:.2f}s")


def test_criterion_2_statistics_fixtures(verdict):
    t = [[10, 20], [20, 10]]
    (a, b), (c, d) = t
    n = a + b + c + d
    closed = n * (a * d - b * c) ** 2 / ((a + b) * (c + d) * (a + c) * (b + d))
    res = chi_square(t)
    v = cramers_v(t)
    ok = (abs(res.statistic - 6.6667) <= 1e-3 and abs(res.statistic - closed) <= 1e-12
          and abs(res.p_value - 0.0098) <= 5e-4 and abs(v - 0.3333) <= 1e-4
          and abs(v - math.sqrt(closed / n)) <= 1e-12)
    verdict(2, ok, f"chi2={res.statistic:.4f} p={res.p_value:.5f} V={v:.4f}")


def test_criterion_3_mca_identity(verdict, dataset_small):
    rng = np.random.default_rng(3)
    datasets = [rng.integers(0, k, size=(n, q)) for n, q, k in [(20, 2, 2), (50, 3, 3), (80, 5, 4), (200, 4, 5)]]
    datasets.append(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]))
    # a realistic one: binary and ordinal columns of the synthetic dataset
    cols = [j for j, name in enumerate(dataset_small.feature_names) if len(np.unique(dataset_small.x[:, j])) in (2, 3, 4, 5)]
    datasets.append(dataset_small.x[:, cols[:6]].astype(int))
    worst_identity = 0.0
    worst_dup = 0.0
    for data in datasets:
        res = mca(data)
        j = indicator_matrix(data)[0].shape[1]
        worst_identity = max(worst_identity, abs(res.total_inertia - (j / data.shape[1] - 1)))
        dup = mca(np.vstack([data, data]))
        worst_dup = max(worst_dup, abs(dup.total_inertia - res.total_inertia),
                        float(np.max(np.abs(dup.singular_values - res.singular_values))))
    verdict(3, worst_identity <= 1e-9 and worst_dup <= 1e-9,
            f"{len(datasets)} datasets, identity err {worst_identity:.1e}, duplication err {worst_dup:.1e}")


def test_criterion_4_ridge_oracle(verdict):
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(50, 5)) * rng.uniform(0.5, 3, size=5) + rng.normal(size=5)
        y = x @ rng.normal(size=5) + rng.normal(size=50)
        model = fit_ridge(Dataset(x, y, tuple("abcde")), RidgeParams(lam=1.0))
        mu, sd = x.mean(0), x.std(0)
        z = (x - mu) / sd
        beta = np.linalg.inv(z.T @ z + np.eye(5)) @ z.T @ (y - y.mean())
        worst = max(worst, float(np.max(np.abs(model.coef - beta / sd))))
    verdict(4, worst <= 1e-8, f"10 seeds, max |coef - oracle| = {worst:.1e}")


def test_criterion_5_mlp_gradient(verdict):
    rng = np.random.default_rng(5)
    layers = init_weights([4, 8, 1], rng)
    x = rng.normal(size=(3, 4))
    y = rng.normal(size=3)
    _, grads = loss_and_grads(layers, x, y)
    h = 1e-5
    worst = 0.0
    for k, (w, b) in enumerate(layers):
        for arr, g in ((w, grads[k][0]), (b, grads[k][1])):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss_and_grads(layers, x, y)[0]
                arr[idx] = orig - h
                down = loss_and_grads(layers, x, y)[0]
                arr[idx] = orig
                num = (up - down) / (2 * h)
                worst = max(worst, abs(num - g[idx]) / max(abs(num), abs(g[idx]), 1e-6))
    verdict(5, worst < 1e-4, f"max relative error {worst:.1e}")


def test_criterion_6_gboost_convergence(verdict):
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([1.0, 3.0, 4.0, 2.0])
    model = fit_gboost(Dataset(x, y, ("a", "b")),
                       GboostParams(n_estimators=10, learning_rate=1.0, max_depth=3, subsample_fraction=1.0))
    mse = float(np.mean((model.predict(x) - y) ** 2))
    verdict(6, mse < 1e-6, f"training MSE {mse:.1e}")


def test_criterion_7_shap(verdict, dataset_small):
    rng = np.random.default_rng(7)
    worst_linear = 0.0
    worst_eff = 0.0
    for p in (2, 5, 8, 12):
        beta = rng.normal(size=p)
        model = RidgeModel(tuple(f"f{j}" for j in range(p)), {"lam": 0.0}, beta, rng.normal())
        bg = rng.normal(size=(40, p))
        for _ in range(3):
            x = rng.normal(size=p)
            e = kernel_shap(model, x, bg)
            worst_linear = max(worst_linear, float(np.max(np.abs(e.values - beta * (x - bg.mean(0))))))
            worst_eff = max(worst_eff, abs(e.base_value + e.values.sum() - e.prediction))
    data = dataset_small
    bg = sample_background(data.x, 7, 30)
    for model in (fit_mlp(data, MlpParams(hidden_layers=(16,), epochs=5)),
                  fit_forest(data, models.make_params("forest", {"n_estimators": 10, "max_depth": 5}))):
        for e in explain_rows(model, data.take(np.arange(4)), bg, n_samples=256, seed=7):
            worst_eff = max(worst_eff, abs(e.base_value + e.values.sum() - e.prediction))
    verdict(7, worst_linear <= 1e-9 and worst_eff <= 1e-6,
            f"linear error {worst_linear:.1e}, worst efficiency gap {worst_eff:.1e}")


@pytest.mark.slow
def test_criterion_8_all_features_win(verdict):
    trees = 500 if os.environ.get("PCSIBENCH_FULL_FOREST") == "1" else 100
    params = {"forest": models.make_params("forest", {"n_estimators": trees})}
    start = time.perf_counter()
    failures = []
    for seed in (1, 2, 3):
        data, _ = planted_dataset(seed)
        table = benchmark(data, models.FAMILIES, ["all", "static"], k=5, seed=seed, params=params, test_rows=False)
        baseline = table.cells[("mean", "all")]
        for family in models.FAMILIES:
            cell = table.cells[(family, "all")]
            mae_static = table.cells[(family, "static")].mae
            # the baseline also bounds MAPE, as the benchmark's own sanity row
            if not (cell.mae <= mae_static and cell.mae <= baseline.mae and cell.mape <= baseline.mape):
                failures.append(f"seed {seed} {family}: all {cell.mae:.3f} static {mae_static:.3f} "
                                f"mean {baseline.mae:.3f}")
    elapsed = time.perf_counter() - start
    detail = f"3 seeds x {len(models.FAMILIES)} families, forest {trees} trees, {elapsed / 60:.1f} min"
    verdict(8, not failures and elapsed < 15 * 60, "; ".join([detail, *failures]))


@pytest.mark.slow
def test_criterion_9_ground_truth_recovery(verdict):
    counts = []
    for seed in (1, 2, 3):
        data, active = planted_dataset(seed)
        plan = stratified_split(data, seed)
        train, test = data.take(plan.fit_idx), data.take(plan.test_idx)
        mlp = models.fit("mlp", train, models.with_seed("mlp", models.default_params("mlp"), seed))
        bg = sample_background(train.x, seed, 50)
        shap = explain_rows(mlp, test.take(np.arange(30)), bg, n_samples=512, seed=seed)
        top6 = {name for name, _, _ in shap_summary(shap)[:6]}
        top5 = {name for name, _ in linear_coefficients(fit_ridge(train)).by_magnitude()[:5]}
        counts.append((len(top6 & set(active)), len(top5 & set(active))))
    ok = all(s >= 4 and r >= 4 for s, r in counts)
    verdict(9, ok, "planted in SHAP top 6 / ridge top 5 per seed: " + ", ".join(f"{s}/{r}" for s, r in counts))


def _snapshot(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(verdict, tmp_path):
    cfg = {
        "synth": {"n_participants": 300},
        "bench": {"k": 3},
        "models": {"forest": {"n_estimators": 10}, "gboost": {"n_estimators": 20, "max_depth": 4},
                   "mlp": {"hidden_layers": [16, 16], "epochs": 10}},
        "tune": {"budget": 4, "spaces": {"ridge": {"lam": {"kind": "continuous-log", "low": 0.01, "high": 100.0}}}},
        "explain": {"n_rows": 4, "n_samples": 128, "background": 30},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    codes = []
    for tag in ("first", "second"):
        for stage in ("synth", "pcsi", "stats", "bench", "explain", "report"):
            codes.append(main([stage, "--config", str(path), "--out", str(tmp_path / tag)]))
    a, b = _snapshot(tmp_path / "first"), _snapshot(tmp_path / "second")
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    verdict(10, all(c == 0 for c in codes) and not differing and len(a) > 10,
            f"{len(a)} files compared, {len(differing)} differ")
