"""``pcsibench`` command line: synth -> pcsi -> stats -> bench -> explain -> report.

Every stage writes into its own directory under ``--out`` together with a
``manifest.json`` that records the resolved config, its hash and the
sha256 of each file written. ``report`` cross-checks those manifests.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numba
import numpy as np

from . import __version__, config as cfgmod, models
from .artifacts import atomic_write_text, sha256_file, write_csv
from .cohort import SchemaConfig, build_dataset, filter_eligible, load_cohort, save_cohort
from .dataset import Dataset
from .errors import ConfigurationError, ConsistencyError, DataError, NumericalError, PcsiBenchError
from .evalx import benchmark, stratified_kfold, stratified_split
from .explain import (
    explain_rows,
    impurity_importance,
    linear_coefficients,
    sample_background,
    shap_summary,
    write_shap_summary,
    write_shap_values,
)
from .pcsi import compute_all
from .rng import derive_seed
from .stats import ContingencyTable, chi_square, cramers_v, discretize_pcsi, mca
from .synth import generate
from .tune import search, validation_objective

logger = logging.getLogger("pcsibench")

STAGE_DIRS = {"synth": "cohort", "pcsi": "pcsi", "stats": "stats", "bench": "bench", "explain": "explain"}
PCSI_HEADER = ("id", "lc_positive", "pcsi", "basis", "persistent_symptoms")
TUNE_HEADER = ("eval_index", "params_json", "score")
STAT_VARIABLES = ("gender", "income", "smoker", "general_health", "chronic_disease", "variant", "vaccination")


class Run:
    """Resolved config plus output location for one invocation."""

    def __init__(self, cfg: dict, out: Path, threads: int = 1):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.hash = cfgmod.config_hash(cfg)

    @property
    def seed(self) -> int:
        return int(self.cfg["seed"])

    def stage_dir(self, stage: str) -> Path:
        d = self.out / STAGE_DIRS[stage]
        d.mkdir(parents=True, exist_ok=True)
        return d

    def write_manifest(self, stage: str, files) -> Path:
        d = self.out / STAGE_DIRS[stage]
        manifest = {
            "stage": stage,
            "config_hash": self.hash,
            "config": self.cfg,
            "versions": _versions(),
            "files": {Path(f).name: sha256_file(f) for f in sorted(files, key=lambda f: Path(f).name)},
        }
        return atomic_write_text(d / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    return {"pcsibench": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "numba": numba.__version__}


def _write_json(path: Path, payload) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _clean(value):
    """JSON-safe copy: NaN becomes null."""
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _require(path: Path) -> Path:
    if not path.is_file():
        raise FileNotFoundError(2, "missing input file", str(path))
    return path


def _cohort_paths(run: Run) -> tuple[Path, Path, Path]:
    given = run.cfg["input"]
    default = run.out / STAGE_DIRS["synth"]
    return tuple(
        _require(Path(given[key]) if given.get(key) else default / f"{key}.csv")
        for key in ("static", "records", "vaccination")
    )


def _load_cohort(run: Run):
    schema = SchemaConfig(tuple(run.cfg["symptoms"]), tuple(run.cfg["income_levels"]))
    return load_cohort(*_cohort_paths(run), schema)


# -- stages ------------------------------------------------------------------

def cmd_synth(run: Run) -> int:
    cohort, truth = generate(cfgmod.synth_config(run.cfg))
    d = run.stage_dir("synth")
    files = list(save_cohort(cohort, d).values())
    files.append(atomic_write_text(d / "ground_truth.json", truth.to_json() + "\n"))
    run.write_manifest("synth", files)
    logger.info("wrote %d participants to %s", len(cohort), d)
    return 0


def cmd_pcsi(run: Run) -> int:
    rules = cfgmod.rules_of(run.cfg)
    cohort, ingest = _load_cohort(run)
    eligible, exclusions = filter_eligible(cohort, rules)
    results = compute_all(eligible, rules)
    if not results:
        logger.warning("no participant is eligible; writing an empty PCSI table")
    d = run.stage_dir("pcsi")
    files = [write_csv(d / "pcsi.csv", PCSI_HEADER, (
        [pid, r.lc_positive, r.pcsi, r.pcsi_basis, ";".join(sorted(r.persistent_symptoms))]
        for pid, r in results.items()
    ))]
    data = build_dataset(eligible, results, rules)
    files.append(write_csv(d / "dataset.csv", ("id", *data.feature_names, "pcsi"), (
        [data.ids[i], *data.x[i].tolist(), float(data.y[i])] for i in range(data.n)
    )))
    files.append(_write_json(d / "feature_groups.json", data.feature_groups))
    files.append(_write_json(d / "exclusions.json", {
        "config_hash": run.hash,
        "ingest": ingest.to_dict(),
        "eligibility": exclusions.to_dict(),
        "n_lc_positive": sum(r.lc_positive for r in results.values()),
    }))
    run.write_manifest("pcsi", files)
    return 0


def _read_pcsi(run: Run) -> dict[str, dict]:
    path = _require(run.out / STAGE_DIRS["pcsi"] / "pcsi.csv")
    with path.open(newline="", encoding="utf-8") as fh:
        return {row["id"]: row for row in csv.DictReader(fh)}


def load_dataset(run: Run) -> Dataset:
    d = run.out / STAGE_DIRS["pcsi"]
    groups = json.loads(_require(d / "feature_groups.json").read_text(encoding="utf-8"))
    with _require(d / "dataset.csv").open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    names = tuple(header[1:-1])
    x = np.array([[float(v) for v in row[1:-1]] for row in rows], dtype=np.float64).reshape(len(rows), len(names))
    y = np.array([float(row[-1]) for row in rows], dtype=np.float64)
    return Dataset(x, y, names, groups, tuple(row[0] for row in rows))


def _stat_levels(cohort, pid: str) -> dict[str, str]:
    p = cohort.participants[pid]
    return {
        "gender": p.gender,
        "income": p.income,
        "smoker": "yes" if p.smoker else "no",
        "general_health": str(p.general_health),
        "chronic_disease": "yes" if p.chronic_disease else "no",
        "variant": p.variant,
        "vaccination": cohort.vaccinations[pid].status,
    }


def cmd_stats(run: Run) -> int:
    pcsi_rows = _read_pcsi(run)
    cohort, _ = _load_cohort(run)
    missing = [pid for pid in pcsi_rows if pid not in cohort.participants]
    if missing:
        raise ConsistencyError(f"pcsi.csv lists participants absent from the cohort: {missing[:5]}")
    ids = list(pcsi_rows)
    levels = {pid: _stat_levels(cohort, pid) for pid in ids}
    intensity = [str(discretize_pcsi(float(pcsi_rows[pid]["pcsi"]))) for pid in ids]

    tests, skipped = [], []
    for var in STAT_VARIABLES:
        try:
            table = ContingencyTable.crosstab([levels[pid][var] for pid in ids], intensity).drop_empty()
            res = chi_square(table)
        except DataError as exc:
            skipped.append({"variable": var, "reason": str(exc)})
            continue
        tests.append({
            "variable": var,
            "against": "pcsi_level",
            "n": int(table.counts.sum()),
            "statistic": res.statistic,
            "df": res.df,
            "p_value": res.p_value,
            "cramers_v": cramers_v(table),
            "row_labels": list(table.row_labels),
            "col_labels": list(table.col_labels),
            "counts": table.counts.tolist(),
        })

    d = run.stage_dir("stats")
    mca_vars = [v for v in (*STAT_VARIABLES, "pcsi_level") if v == "pcsi_level" or len({levels[p][v] for p in ids}) > 1]
    if "pcsi_level" in mca_vars and len(set(intensity)) < 2:
        mca_vars.remove("pcsi_level")
    mca_info = None
    axes = run.cfg["stats"]["n_axes"]
    coords_rows, person_rows, n_cols = [], [], 0
    if len(ids) >= 2 and len(mca_vars) >= 2:
        matrix = [[intensity[i] if v == "pcsi_level" else levels[pid][v] for v in mca_vars]
                  for i, pid in enumerate(ids)]
        res = mca(matrix, axes, names=mca_vars)
        n_cols = res.col_coords.shape[1]
        coords_rows = [[f"{var}={lvl}", *res.col_coords[j].tolist()] for j, (var, lvl) in enumerate(res.categories)]
        person_rows = [[pid, *res.row_coords[i].tolist()] for i, pid in enumerate(ids)]
        mca_info = {
            "variables": mca_vars,
            "total_inertia": res.total_inertia,
            "explained_inertia": res.explained_inertia.tolist(),
        }
    axis_names = [f"axis{k + 1}" for k in range(n_cols)]
    files = [
        write_csv(d / "mca_coords.csv", ("label", *axis_names), coords_rows),
        write_csv(d / "mca_rows.csv", ("id", *axis_names), person_rows),
        _write_json(d / "stats.json", {"config_hash": run.hash, "n": len(ids), "tests": tests,
                                       "skipped": skipped, "mca": mca_info}),
    ]
    run.write_manifest("stats", files)
    return 0


def _tuned_params(run: Run, data: Dataset, d: Path, files: list) -> dict:
    spaces = run.cfg["tune"]["spaces"]
    params = {f: cfgmod.model_params(run.cfg, f) for f in models.FAMILIES}
    if not spaces:
        return params
    split = run.cfg["split"]
    plan = stratified_split(data, run.seed, split["test_fraction"], split["val_fraction"])
    train, val = data.take(plan.train_idx), data.take(plan.val_idx)
    for family in sorted(spaces):
        space = cfgmod.search_space(run.cfg, family)
        tune_seed = derive_seed(run.seed, "tune", family)
        objective = validation_objective(train, val, family, params[family], seed=tune_seed)
        result = search(space, objective, int(run.cfg["tune"]["budget"]), seed=tune_seed)
        files.append(write_csv(d / f"tune_history_{family}.csv", TUNE_HEADER, result.history_rows()))
        params[family] = replace(params[family], **result.best_params)
        logger.info("tuned %s: %s (validation MAE %.4f)", family, result.best_params, result.best_score)
    return params


def cmd_bench(run: Run) -> int:
    data = load_dataset(run)
    d = run.stage_dir("bench")
    files: list = []
    params = _tuned_params(run, data, d, files)
    b = run.cfg["bench"]
    split = run.cfg["split"]
    table = benchmark(data, b["families"], b["groups"], k=b["k"], seed=run.seed, params=params,
                      include_baseline=b["include_baseline"], test_rows=b["test_rows"], threads=run.threads,
                      test_fraction=split["test_fraction"], val_fraction=split["val_fraction"])
    files.append(table.write_csv(d / "benchmark.csv"))
    payload = table.to_dict()
    payload["config_hash"] = run.hash
    payload["params"] = {f: _clean(asdict(p)) for f, p in sorted(params.items())}
    files.append(_write_json(d / "benchmark.json", payload))
    run.write_manifest("bench", files)
    return 0


def cmd_explain(run: Run) -> int:
    data = load_dataset(run)
    split = run.cfg["split"]
    plan = stratified_split(data, run.seed, split["test_fraction"], split["val_fraction"])
    pool = plan.fit_idx
    folds = stratified_kfold(pool, plan.strata_bins[pool], run.cfg["bench"]["k"], run.seed)
    ex = run.cfg["explain"]
    d = run.stage_dir("explain")

    def fitted(family, rows, tag):
        params = models.with_seed(family, cfgmod.model_params(run.cfg, family), derive_seed(run.seed, "explain", tag))
        return models.fit(family, data.take(rows), params)

    ridge_models = [fitted("ridge", folds.split(i)[0], f"ridge{i}") for i in range(folds.k)]
    files = [linear_coefficients(ridge_models).write_csv(d / "coefficients.csv")]
    forest = fitted("forest", pool, "forest")
    files.append(impurity_importance(forest).write_csv(d / "importances.csv"))

    family = ex["shap_family"]
    model = fitted(family, pool, family)
    background = sample_background(data.x[pool], derive_seed(run.seed, "background"), ex["background"])
    rows = plan.test_idx[: ex["n_rows"]]
    explanations = explain_rows(model, data.take(rows), background, ex["n_samples"], run.seed)
    files.append(write_shap_values(d / "shap_values.csv", explanations))
    files.append(write_shap_summary(d / "shap_summary.csv", shap_summary(explanations) if explanations else []))
    run.write_manifest("explain", files)
    return 0


def _fmt_pm(mean, sd) -> str:
    if mean is None:
        return "NaN"
    return f"{mean:.3f} ± {sd:.3f}"


def cmd_report(run: Run) -> int:
    manifests = {}
    for stage, sub in STAGE_DIRS.items():
        path = run.out / sub / "manifest.json"
        if path.is_file():
            manifests[stage] = json.loads(path.read_text(encoding="utf-8"))
        elif stage != "synth":
            raise FileNotFoundError(2, f"missing artifacts of stage {stage!r}", str(path))
    hashes = {m["config_hash"] for m in manifests.values()}
    if len(hashes) != 1:
        detail = ", ".join(f"{s}={m['config_hash'][:12]}" for s, m in manifests.items())
        raise ConsistencyError(f"artifacts come from different configurations: {detail}")
    for stage, m in manifests.items():
        for name, digest in m["files"].items():
            f = _require(run.out / STAGE_DIRS[stage] / name)
            if sha256_file(f) != digest:
                raise ConsistencyError(f"{f} was modified after stage {stage!r} wrote it")
    config_hash = hashes.pop()
    cfg = manifests["pcsi"]["config"]

    lines = ["# pcsibench report", "", "## Provenance", "",
             f"- config hash: `{config_hash}`",
             f"- seed: {cfg['seed']} (synthetic cohort seed {cfg['synth']['seed']})"]
    lines += [f"- {k}: {v}" for k, v in manifests["pcsi"]["versions"].items()]
    lines += ["", "Artifacts:", ""]
    for stage, m in manifests.items():
        for name, digest in m["files"].items():
            lines.append(f"- `{STAGE_DIRS[stage]}/{name}` sha256 `{digest[:16]}`")

    excl = json.loads((run.out / "pcsi" / "exclusions.json").read_text(encoding="utf-8"))
    elig = excl["eligibility"]
    lines += ["", "## Cohort", "",
              f"- participants after ingest: {excl['ingest']['n_participants']}",
              f"- eligible: {elig['n_retained']} (missing baseline {elig['missing_baseline']}, "
              f"missing post window {elig['missing_post_window']})",
              f"- long-COVID positive: {excl['n_lc_positive']}"]

    stats = json.loads((run.out / "stats" / "stats.json").read_text(encoding="utf-8"))
    lines += ["", "## Association with discretized PCSI", "",
              "| variable | chi2 | df | p | Cramér's V |", "|---|---|---|---|---|"]
    for t in stats["tests"]:
        lines.append(f"| {t['variable']} | {t['statistic']:.3f} | {t['df']} | {t['p_value']:.3g} | {t['cramers_v']:.3f} |")
    if stats["mca"]:
        expl = ", ".join(f"{v:.3f}" for v in stats["mca"]["explained_inertia"][:5])
        lines += ["", f"MCA total inertia {stats['mca']['total_inertia']:.4f}; leading axes explain {expl}."]

    bench = json.loads((run.out / "bench" / "benchmark.json").read_text(encoding="utf-8"))
    lines += ["", f"## Benchmark ({bench['k']}-fold, mean ± sd)", "",
              "| family | group | MAE | MSE | MAPE | Pearson r | test MAE |", "|---|---|---|---|---|---|---|"]
    for c in bench["cells"]:
        mean, sd = c["mean"], c["sd"]
        test = c.get("test", {}).get("mae")
        lines.append(
            f"| {c['family']} | {c['group']} | {_fmt_pm(mean['mae'], sd['mae'])} | {_fmt_pm(mean['mse'], sd['mse'])} | "
            f"{_fmt_pm(mean['mape'], sd['mape'])} | {_fmt_pm(mean['pearson_r'], sd['pearson_r'])} | "
            f"{'NaN' if test is None else f'{test:.3f}'} |"
        )

    def top(path, k=10):
        with (run.out / "explain" / path).open(newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))[1:k + 1]

    lines += ["", "## Explanations", "", "Ridge coefficients (fold average, largest first):", ""]
    lines += [f"- {name}: {float(v):+.4f}" for name, v in top("coefficients.csv")]
    lines += ["", "Forest impurity importances:", ""]
    lines += [f"- {name}: {float(v):.4f}" for name, v in top("importances.csv")]
    lines += ["", f"SHAP ranking ({cfg['explain']['shap_family']}, mean |phi|):", ""]
    lines += [f"- {name}: {float(a):.4f} (mean {float(s):+.4f})" for name, a, s in top("shap_summary.csv")]
    atomic_write_text(run.out / "report.md", "\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "pcsi": cmd_pcsi,
    "stats": cmd_stats,
    "bench": cmd_bench,
    "explain": cmd_explain,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="YAML or JSON run configuration")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker cap (default: 1)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="pcsibench", parents=[common],
                                     description="Symptom-intensity benchmark pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    synth = sub.add_parser("synth", parents=[common], help="generate a synthetic cohort")
    synth.add_argument("--n", type=int, default=None, help="number of participants")
    sub.add_parser("pcsi", parents=[common], help="eligibility filter and PCSI targets")
    sub.add_parser("stats", parents=[common], help="chi-square, Cramér's V and MCA")
    sub.add_parser("bench", parents=[common], help="cross-validated model benchmark")
    sub.add_parser("explain", parents=[common], help="coefficients, importances and SHAP")
    sub.add_parser("report", parents=[common], help="assemble report.md from all stages")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        user = cfgmod.load_config_file(args.config) if hasattr(args, "config") else {}
        if getattr(args, "n", None) is not None:
            user = {**user, "synth": {**user.get("synth", {}), "n_participants": args.n}}
        cfg = cfgmod.resolve(user, getattr(args, "seed", None))
        threads = getattr(args, "threads", 1)
        if threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        run = Run(cfg, Path(getattr(args, "out", "out")), threads)
        return COMMANDS[args.command](run)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except PcsiBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
