"""Retraining ensembles, invalidation metrics, and the experiment pipeline.

An experiment trains a base model, generates counterfactuals for validation
origins that the base assigns the undesired class, retrains leave-one-out and
random-seed ensembles, and aggregates invalidation rates, costs, success
rates and the pooled cost-vs-invalidation regression into a report mirroring
the usual results-table layout (per-method rows plus "+SNS" refinements).

Aggregation is a deterministic fold over records in (method, origin) order,
so reports are byte-identical regardless of how many worker threads ran the
training or generation.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import data, generators, nn
from .errors import ConfigError, DataError

REPORT_SCHEMA_VERSION = 1
METHOD_ORDER = (generators.MIN_L1, generators.MIN_L2, generators.MIN_EPS_PGD)


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str       # "LOO" | "RS"
    count: int
    base_seed: int

    def __post_init__(self):
        if self.kind not in ("LOO", "RS"):
            raise ConfigError(f"ensemble kind must be LOO or RS, got {self.kind!r}")
        if self.count < 1:
            raise ConfigError("ensemble count must be >= 1")


def _parallel_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def build_ensemble(base: nn.Network, train_ds: data.Dataset, spec: EnsembleSpec,
                   config: nn.TrainConfig, pool_seed: int = 17, threads: int = 1):
    """Retrained model list per the LOO / RS protocol.

    LOO: one model per leave-one-out variant, initialized and shuffled with the
    base seed. RS: models on the full training set with seeds base_seed+1 ...
    base_seed+count.
    """
    net_spec = base.spec
    if spec.kind == "LOO":
        if spec.count > train_ds.n:
            raise DataError(f"LOO count {spec.count} exceeds training rows {train_ds.n}")
        variants = data.leave_one_out_variants(train_ds, spec.count, pool_seed)

        def train_one(variant):
            _, ds = variant
            return nn.train(nn.init_network(net_spec, config.seed), ds, config)

        return _parallel_map(train_one, variants, threads)

    def train_one(k):
        seed = spec.base_seed + k
        cfg = nn.TrainConfig(seed=seed, epochs=config.epochs, batch_size=config.batch_size,
                             learning_rate=config.learning_rate, beta1=config.beta1,
                             beta2=config.beta2, eps_hat=config.eps_hat, shuffle=config.shuffle)
        return nn.train(nn.init_network(net_spec, seed), train_ds, cfg)

    return _parallel_map(train_one, list(range(1, spec.count + 1)), threads)


def invalidation_rate(record: generators.CounterfactualRecord, base: nn.Network,
                      ensemble) -> float:
    """Fraction of ensemble members disagreeing with the base at x_c."""
    if not record.success:
        raise ValueError("invalidation is defined for successful records only")
    x_c = record.counterfactual
    base_pred = nn.predict(base, x_c)
    flips = sum(1 for member in ensemble if nn.predict(member, x_c) != base_pred)
    return flips / len(ensemble)


def regress_cost_iv(points):
    """OLS of iv on cost: (r_squared, slope, intercept).

    Zero cost variance is undefined (DataError); constant iv gives R^2 = 0 by
    convention.
    """
    pts = [(float(c), float(v)) for c, v in points]
    if len(pts) < 2:
        raise DataError("regression needs at least 2 points")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx == 0.0:
        raise DataError("zero variance in cost: regression undefined")
    sxy = float(((x - x.mean()) * (y - y.mean())).sum())
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 0.0, slope, intercept
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot
    return r2, slope, intercept


# ---------------------------------------------------------------------------
# experiment pipeline
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    report: dict
    records: list               # flat, (method, origin) order
    iv_rows: list                # dicts: method row, origin index, ivs, costs
    base: nn.Network
    ensembles: dict              # kind -> list[Network]


def _method_row(rec: generators.CounterfactualRecord) -> str:
    if rec.method == generators.SNS:
        return f"{rec.base_method}+SNS"
    return rec.method


def _train_config_from(cfg: dict) -> nn.TrainConfig:
    return nn.TrainConfig(seed=int(cfg["seed"]), epochs=int(cfg["epochs"]),
                          batch_size=int(cfg["batch_size"]),
                          learning_rate=float(cfg["learning_rate"]),
                          beta1=float(cfg["beta1"]), beta2=float(cfg["beta2"]),
                          eps_hat=float(cfg["eps_hat"]), shuffle=bool(cfg["shuffle"]))


def build_dataset(dcfg: dict) -> data.Dataset:
    if dcfg["kind"] == "synth":
        s = dcfg["synth"]
        return data.synth_2d(s["kind"], int(s["n"]), float(s["noise"]), int(s["seed"]))
    if dcfg["kind"] == "csv":
        c = dcfg["csv"]
        if not c.get("path"):
            raise DataError("dataset.csv.path is empty")
        if c.get("schema_file"):
            with open(c["schema_file"], "r", encoding="utf-8") as fh:
                cols, label = data.schema_from_json(json.load(fh))
        else:
            cols, label = data.schema_from_json({"columns": c["columns"], "label": c["label"]})
        return data.load_csv(c["path"], cols, label)
    raise ConfigError(f"unknown dataset kind {dcfg['kind']!r}")


def median_l2_norm(ds: data.Dataset) -> float:
    return float(np.median(np.sqrt((ds.features ** 2).sum(axis=1))))


def generate_records(base: nn.Network, train_ds: data.Dataset, val_ds: data.Dataset,
                     cfg: dict, threads: int = 1):
    """Per-method counterfactual records (+SNS refinements) over the origins.

    Origins are the first origins.count validation points whose base prediction
    differs from the target class. Returns (records, by_row, derived) where
    derived carries the max_eps / SNS parameters actually used.
    """
    target = int(cfg["origins"]["target_class"])
    preds = nn.predict_batch(base, val_ds.features)
    origin_idx = [i for i in range(val_ds.n) if preds[i] != target][:int(cfg["origins"]["count"])]
    if not origin_idx:
        raise DataError("no undesired-class origins in the validation split")
    origins = [val_ds.features[i] for i in origin_idx]

    mcfg = cfg["methods"]
    max_eps = float(mcfg["MinEpsPGD"]["max_eps"]) or median_l2_norm(train_ds)
    sns_steps = int(mcfg["SNS"]["steps"])
    sns_delta = float(mcfg["SNS"]["delta"]) or 0.8 * max_eps
    sns_step = float(mcfg["SNS"]["step_size"]) or 2.0 * 0.8 * max_eps / sns_steps
    sns_cfg = generators.SnsConfig(delta=sns_delta, steps=sns_steps,
                                   grid_points=int(mcfg["SNS"]["grid_points"]),
                                   step_size=sns_step)

    def generate_for(method):
        c = mcfg[method]
        if method in (generators.MIN_L1, generators.MIN_L2):
            def one(x):
                return generators.gen_elastic_net(
                    base, x, target, beta=float(c["beta"]), confidence=float(c["confidence"]),
                    max_steps=int(c["max_steps"]), step_size=float(c["step_size"]))
        else:
            def one(x):
                return generators.gen_pgd_min_eps(
                    base, x, target, max_eps=max_eps,
                    n_interp=int(c["n_interp"]), max_steps=int(c["max_steps"]))
        return _parallel_map(one, origins, threads)

    records = []
    by_row: dict = {}
    for method in METHOD_ORDER:
        if not mcfg[method]["enabled"]:
            continue
        recs = generate_for(method)
        records.extend(recs)
        by_row[method] = recs
        if mcfg["SNS"]["enabled"]:
            winners = [r for r in recs if r.success]
            refined = _parallel_map(lambda r: generators.gen_sns(base, r, sns_cfg),
                                    winners, threads)
            records.extend(refined)
            by_row[f"{method}+SNS"] = refined
    derived = {"max_eps": max_eps, "sns_cfg": sns_cfg, "origin_count": len(origins),
               "target": target}
    return records, by_row, derived


def run_experiment(cfg: dict, threads: int = 1) -> ExperimentResult:
    """Full pipeline over a parsed experiment config (see config.DEFAULTS)."""
    dataset = build_dataset(cfg["dataset"])
    train_ds, val_ds = data.split(dataset, float(cfg["dataset"]["train_frac"]),
                                  int(cfg["dataset"]["split_seed"]))
    spec = nn.NetworkSpec(tuple(cfg["model"]["layer_dims"]))
    tcfg = _train_config_from(cfg["train"])
    base = nn.train(nn.init_network(spec, tcfg.seed), train_ds, tcfg)

    records, by_row, derived = generate_records(base, train_ds, val_ds, cfg, threads)
    max_eps = derived["max_eps"]
    sns_cfg = derived["sns_cfg"]
    target = derived["target"]

    ecfg = cfg["ensembles"]
    base_seed = int(ecfg["base_seed"]) or tcfg.seed
    ensembles = {}
    if int(ecfg["loo_count"]) > 0:
        ensembles["LOO"] = build_ensemble(base, train_ds,
                                          EnsembleSpec("LOO", int(ecfg["loo_count"]), base_seed),
                                          tcfg, pool_seed=int(ecfg["pool_seed"]), threads=threads)
    if int(ecfg["rs_count"]) > 0:
        ensembles["RS"] = build_ensemble(base, train_ds,
                                         EnsembleSpec("RS", int(ecfg["rs_count"]), base_seed),
                                         tcfg, threads=threads)

    iv_rows = []
    methods_out = {}
    pooled = []
    for row in sorted(by_row):
        recs = by_row[row]
        ok = [r for r in recs if r.success]
        entry = {
            "records": len(recs),
            "success_rate": len(ok) / len(recs) if recs else 0.0,
            "iv": {},
        }
        for stat, vals in (("cost_l1", [r.cost_l1 for r in ok]), ("cost_l2", [r.cost_l2 for r in ok])):
            arr = np.array(vals) if vals else np.zeros(0)
            entry[f"{stat}_mean"] = float(arr.mean()) if arr.size else None
            entry[f"{stat}_std"] = float(arr.std()) if arr.size else None
        ivs_by_kind = {}
        for kind in sorted(ensembles):
            ivs = _parallel_map(lambda r: invalidation_rate(r, base, ensembles[kind]), ok, threads)
            ivs_by_kind[kind] = ivs
            arr = np.array(ivs) if ivs else np.zeros(0)
            entry["iv"][kind] = {
                "mean": float(arr.mean()) if arr.size else None,
                "std": float(arr.std()) if arr.size else None,
            }
            for rec, iv in zip(ok, ivs):
                pooled.append((rec.cost_l2, iv))
        for i, rec in enumerate(ok):
            iv_rows.append({
                "method": row,
                "origin_index": i,
                "cost_l1": rec.cost_l1,
                "cost_l2": rec.cost_l2,
                **{f"iv_{kind.lower()}": ivs_by_kind[kind][i] for kind in sorted(ensembles)},
            })
        methods_out[row] = entry

    try:
        r2, slope, intercept = regress_cost_iv(pooled)
        regression = {"r_squared": r2, "slope": slope, "intercept": intercept,
                      "points": len(pooled)}
    except DataError as exc:
        regression = {"error": str(exc), "points": len(pooled)}

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "meta": {
            "dataset_fingerprint": dataset.fingerprint,
            "train_fingerprint": train_ds.fingerprint,
            "layer_dims": list(spec.layer_dims),
            "train_config": cfg["train"],
            "origin_count": derived["origin_count"],
            "target_class": target,
            "ensembles": {k: len(v) for k, v in ensembles.items()},
            "max_eps": max_eps,
            "sns": {"delta": sns_cfg.delta, "steps": sns_cfg.steps,
                    "grid_points": sns_cfg.grid_points, "step_size": sns_cfg.step_size},
            "success_floor": float(cfg["report"]["success_floor"]),
        },
        "methods": methods_out,
        "regression": regression,
    }
    return ExperimentResult(report, records, iv_rows, base, ensembles)


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, separators=(",", ":"))


def report_from_json(text: str) -> dict:
    return json.loads(text)


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "ensemble", "iv_mean", "iv_std", "cost_l2_mean",
                     "cost_l2_std", "cost_l1_mean", "cost_l1_std", "success_rate"])
    for method in sorted(report["methods"]):
        entry = report["methods"][method]
        kinds = sorted(entry["iv"]) or ["-"]
        for kind in kinds:
            iv = entry["iv"].get(kind, {})
            writer.writerow([
                method, kind, iv.get("mean"), iv.get("std"),
                entry["cost_l2_mean"], entry["cost_l2_std"],
                entry["cost_l1_mean"], entry["cost_l1_std"],
                entry["success_rate"],
            ])
    return buf.getvalue()


def _cell(value, dashed: bool) -> str:
    if dashed or value is None:
        return "-"
    return f"{value:.2f}"


def report_to_text(report: dict) -> str:
    """Fixed-width table: one row per method, IV per ensemble kind then costs.

    Methods whose success rate falls below the configured floor get "-" cells,
    with the success rate still shown.
    """
    floor = report["meta"].get("success_floor", 0.25)
    kinds = sorted({k for e in report["methods"].values() for k in e["iv"]})
    header = ["Method"] + [f"IV {k}" for k in kinds] + ["Cost l2", "Cost l1", "Success"]
    rows = [header]
    for method in sorted(report["methods"]):
        e = report["methods"][method]
        dashed = e["success_rate"] < floor
        row = [method]
        for k in kinds:
            iv = e["iv"].get(k, {})
            row.append("-" if dashed or iv.get("mean") is None
                       else f"{iv['mean']:.2f}±{iv['std']:.2f}")
        row.append(_cell(e["cost_l2_mean"], dashed))
        row.append(_cell(e["cost_l1_mean"], dashed))
        row.append(f"{e['success_rate']:.2f}")
        rows.append(row)
    reg = report["regression"]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    if "r_squared" in reg:
        lines.append(f"IV-cost correlation R^2: {reg['r_squared']:.4f} "
                     f"(slope {reg['slope']:.4f}, n={reg['points']})")
    else:
        lines.append(f"IV-cost correlation: {reg['error']}")
    return "\n".join(lines) + "\n"


def emit_report(report: dict, out_dir, formats=("json", "csv", "txt")) -> dict:
    """Write report artifacts; returns {format: path}."""
    import os
    paths = {}
    os.makedirs(out_dir, exist_ok=True)
    if "json" in formats:
        p = os.path.join(out_dir, "report.json")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report))
        paths["json"] = p
    if "csv" in formats:
        p = os.path.join(out_dir, "report.csv")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(report_to_csv(report))
        paths["csv"] = p
    if "txt" in formats:
        p = os.path.join(out_dir, "report.txt")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(report_to_text(report))
        paths["txt"] = p
    return paths
