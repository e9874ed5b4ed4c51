"""cfstab command line: train / ensemble / generate / evaluate / verify / plot / report.

Every subcommand takes --config (TOML or JSON), repeatable --override k=v
flags, --out DIR and --threads N. Outputs are byte-identical across runs and
thread counts for fixed inputs; the effective config is echoed into the
output directory for provenance.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure,
5 theorem-verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import config as cfgmod
from . import data, generators, geometry, harness, nn
from .errors import ConfigError, DataError, NumericError, VerificationError


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _prepare(args):
    cfg = cfgmod.effective_config(args.config, args.override)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "effective_config.json"), _canonical_json(cfg))
    return cfg


def _train_base(cfg):
    dataset = harness.build_dataset(cfg["dataset"])
    train_ds, val_ds = data.split(dataset, float(cfg["dataset"]["train_frac"]),
                                  int(cfg["dataset"]["split_seed"]))
    spec = nn.NetworkSpec(tuple(cfg["model"]["layer_dims"]))
    tcfg = harness._train_config_from(cfg["train"])
    base = nn.train(nn.init_network(spec, tcfg.seed), train_ds, tcfg)
    return dataset, train_ds, val_ds, base, tcfg


def cmd_train(args) -> int:
    cfg = _prepare(args)
    _, train_ds, val_ds, base, _ = _train_base(cfg)
    nn.save_model(base, os.path.join(args.out, "model.json"))
    with open(os.path.join(args.out, "training_log.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        for ep, loss in enumerate(base.meta.get("loss_log", [])):
            writer.writerow([ep, repr(loss)])
    acc = float((nn.predict_batch(base, val_ds.features) == val_ds.labels).mean())
    print(f"model.json written (validation accuracy {acc:.3f})")
    return 0


def cmd_ensemble(args) -> int:
    cfg = _prepare(args)
    _, train_ds, _, base, tcfg = _train_base(cfg)
    nn.save_model(base, os.path.join(args.out, "base.json"))
    ecfg = cfg["ensembles"]
    base_seed = int(ecfg["base_seed"]) or tcfg.seed
    for kind, count in (("LOO", int(ecfg["loo_count"])), ("RS", int(ecfg["rs_count"]))):
        if count < 1:
            continue
        members = harness.build_ensemble(base, train_ds,
                                         harness.EnsembleSpec(kind, count, base_seed),
                                         tcfg, pool_seed=int(ecfg["pool_seed"]),
                                         threads=args.threads)
        for i, member in enumerate(members):
            nn.save_model(member, os.path.join(args.out, f"{kind.lower()}_{i:03d}.json"))
    print("ensemble models written")
    return 0


def cmd_generate(args) -> int:
    cfg = _prepare(args)
    dataset = harness.build_dataset(cfg["dataset"])
    train_ds, val_ds = data.split(dataset, float(cfg["dataset"]["train_frac"]),
                                  int(cfg["dataset"]["split_seed"]))
    if cfg["generate"]["model_file"]:
        base = nn.load_model(cfg["generate"]["model_file"])
    else:
        spec = nn.NetworkSpec(tuple(cfg["model"]["layer_dims"]))
        tcfg = harness._train_config_from(cfg["train"])
        base = nn.train(nn.init_network(spec, tcfg.seed), train_ds, tcfg)
    records, _, _ = harness.generate_records(base, train_ds, val_ds, cfg, threads=args.threads)
    generators.write_records(os.path.join(args.out, "records.jsonl"), records)
    n_ok = sum(1 for r in records if r.success)
    print(f"records.jsonl written ({len(records)} records, {n_ok} successful)")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _prepare(args)
    result = harness.run_experiment(cfg, threads=args.threads)
    generators.write_records(os.path.join(args.out, "records.jsonl"), result.records)
    fieldnames = ["method", "origin_index", "cost_l1", "cost_l2"] + \
        [f"iv_{k.lower()}" for k in sorted(result.ensembles)]
    with open(os.path.join(args.out, "iv_records.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in result.iv_rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    harness.emit_report(result.report, args.out, tuple(cfg["report"]["formats"]))
    print(harness.report_to_text(result.report))
    return 0


def cmd_verify(args) -> int:
    cfg = _prepare(args)
    v = cfg["verify"]
    for key in ("grad_trials", "prop1_trials", "theorem1_nets", "theorem2_nets",
                "theorem2_trials_per_net"):
        if int(v[key]) < 1:
            raise ConfigError(f"verify.{key} must be >= 1")
    seed = int(v["seed"])

    grad_fn = None
    if v["inject_grad_sign_bug"]:
        def grad_fn(net, x, idx):  # negative-control hook: deliberately wrong sign
            return -nn.grad_input(net, x, idx)

    reports = []
    reports.append(geometry.sweep_gradcheck(int(v["grad_trials"]), seed=seed, grad_fn=grad_fn))
    reports.append(geometry.sweep_prop1(int(v["prop1_trials"]), seed=seed))

    ds = data.synth_2d("blobs", 240, 0.3, seed=seed + 5)
    tr, _ = data.split(ds, 0.7, seed=seed + 6)
    spec = nn.NetworkSpec((2, 16, 1))
    nets = []
    for i in range(int(v["theorem1_nets"])):
        tcfg = nn.TrainConfig(seed=seed + 100 + i, epochs=int(v["theorem1_epochs"]), batch_size=32)
        nets.append(nn.train(nn.init_network(spec, tcfg.seed), tr, tcfg))
    nets.append(geometry.orthogonal_fixture_net())
    reports.append(geometry.sweep_theorem1(nets, anchors_per_net=int(v["theorem1_anchors"]),
                                           seed=seed))
    reports.append(geometry.sweep_theorem2(
        n_nets=int(v["theorem2_nets"]), trials_per_net=int(v["theorem2_trials_per_net"]),
        doi_samples=int(v["theorem2_doi_samples"]), seed=seed,
        k_grid=int(v["theorem2_k_grid"])))

    failed = []
    for rep in reports:
        path = os.path.join(args.out, f"verify_{rep.name}.json")
        _write(path, _canonical_json(rep.to_dict()))
        status = "ok" if rep.ok else "VIOLATIONS"
        print(f"{rep.name}: checked={rep.checked} passed={rep.passed} {status}")
        if not rep.ok:
            failed.append(path)
    if failed:
        raise VerificationError("theorem violations recorded in: " + ", ".join(failed))
    return 0


def cmd_plot(args) -> int:
    cfg = _prepare(args)
    if len(cfg["model"]["layer_dims"]) < 2 or int(cfg["model"]["layer_dims"][0]) != 2:
        raise ConfigError("plot needs a 2-D input model")
    dataset = harness.build_dataset(cfg["dataset"])
    if dataset.dim != 2:
        raise ConfigError("plot needs a 2-D dataset")
    p = cfg["plot"]
    resolution = int(p["resolution"])
    if resolution < 1:
        raise ConfigError("plot.resolution must be >= 1")
    if p["bbox"]:
        (x0, x1), (y0, y1) = p["bbox"]
        bbox = ((float(x0), float(x1)), (float(y0), float(y1)))
    else:
        lo = dataset.features.min(axis=0) - 0.5
        hi = dataset.features.max(axis=0) + 0.5
        bbox = ((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])))

    if p["model_files"]:
        models = [nn.load_model(path) for path in p["model_files"]]
    else:
        train_ds, _ = data.split(dataset, float(cfg["dataset"]["train_frac"]),
                                 int(cfg["dataset"]["split_seed"]))
        spec = nn.NetworkSpec(tuple(cfg["model"]["layer_dims"]))
        models = []
        for seed in p["seeds"]:
            tcfg = harness._train_config_from(dict(cfg["train"], seed=int(seed)))
            models.append(nn.train(nn.init_network(spec, int(seed)), train_ds, tcfg))

    sidecar = {"bbox": [list(bbox[0]), list(bbox[1])], "resolution": resolution,
               "rows": "y ascending", "cols": "x ascending", "models": len(models)}
    for i, model in enumerate(models):
        grid = geometry.raster_2d(model, bbox, resolution)
        geometry.write_pgm(os.path.join(args.out, f"classes_{i}.pgm"), grid, 1)
    if len(models) >= 2:
        grid = geometry.raster_2d((models[0], models[1]), bbox, resolution)
        geometry.write_pgm(os.path.join(args.out, "disagreement.pgm"), grid, 2)
        sidecar["disagreement_values"] = {"0": "agree class 0", "1": "agree class 1",
                                          "2": "disagree"}
        sidecar["disagree_fraction"] = float((grid == 2).mean())
    if p["overlay_records"]:
        recs = generators.read_records(p["overlay_records"])
        overlay = [{"origin": r.origin.tolist(), "counterfactual": r.counterfactual.tolist(),
                    "method": r.method, "success": r.success} for r in recs]
        _write(os.path.join(args.out, "overlay.json"), _canonical_json(overlay))
    _write(os.path.join(args.out, "raster.json"), _canonical_json(sidecar))
    print("rasters written")
    return 0


def cmd_report(args) -> int:
    cfg = _prepare(args)
    if not args.report_input:
        raise ConfigError("report needs --input pointing at a report.json")
    try:
        with open(args.report_input, "r", encoding="utf-8") as fh:
            report = harness.report_from_json(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read report {args.report_input}: {exc}") from None
    harness.emit_report(report, args.out, tuple(cfg["report"]["formats"]))
    print("report re-emitted")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfstab")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    handlers = {
        "train": cmd_train,
        "ensemble": cmd_ensemble,
        "generate": cmd_generate,
        "evaluate": cmd_evaluate,
        "verify": cmd_verify,
        "plot": cmd_plot,
        "report": cmd_report,
    }
    for name, fn in handlers.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--override", action="append", default=[])
        p.add_argument("--out", required=True)
        p.add_argument("--threads", type=int, default=1)
        if name == "report":
            p.add_argument("--input", dest="report_input", default="")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
