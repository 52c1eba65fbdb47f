"""Command-line entry point wiring the pipeline stages together.

Subcommands: gen-synthetic, build-network, split, train, grid-search,
evaluate, analyze, export-heatmaps. Configuration is a flat key=value file
(``#`` comments allowed) overridable per key with ``--set key=value``; flags
win. The effective configuration is echoed into every output directory so a
run can be reproduced from its artifacts alone.

Exit codes: 0 success, 2 input/parse error, 3 consistency error (e.g. a
checkpoint trained on a different vocabulary), 4 runtime failure. Logs go to
stderr; data only ever goes to files.
"""

import argparse
import dataclasses
import json
import os
import sys

from affinitykg import builder, evaluator, kg as kgmod, models, snn, synthetic, trainer
from affinitykg.errors import ConsistencyError, ParseError
from affinitykg.util import atomic_write_text, canonical_json


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _parse_float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


# key -> (parser, default, help)
CONFIG_KEYS = {
    "seed": (int, 0, "global random seed"),
    "threads": (int, 1, "worker threads (1 keeps runs bit-reproducible)"),
    "builder.k_security": (float, 20.0, "security factor over expected random co-occurrence"),
    "builder.min_occurrences": (int, 20, "drop surnames borne by fewer individuals"),
    "builder.kcore_k": (int, 2, "k-core threshold for periphery pruning"),
    "builder.n_deciles": (int, 10, "number of income deciles"),
    "builder.rare_filter_order": (str, "after_mateos", "rare-surname pass order: after_mateos|before_mateos"),
    "split.valid_size": (int, 200, "validation fold size (triples)"),
    "split.test_size": (int, 200, "test fold size (triples)"),
    "train.model": (str, "tucker", "tucker|transe|distmult|complex"),
    "train.epochs": (int, 200, "maximum training epochs"),
    "train.batch_size": (int, 128, "queries per Adam update"),
    "train.learning_rate": (float, 0.005, "Adam learning rate"),
    "train.decay_rate": (float, 1.0, "per-epoch learning-rate multiplier"),
    "train.d_e": (int, 200, "entity embedding dim"),
    "train.d_r": (int, 10, "relation embedding dim"),
    "train.dropout_input": (float, 0.5, "dropout on the head entity row"),
    "train.dropout_relation": (float, 0.2, "dropout after the core-relation product"),
    "train.dropout_combination": (float, 0.2, "dropout on the combined query vector"),
    "train.label_smoothing": (float, 0.0, "label smoothing toward 1/n_e"),
    "train.adam_beta1": (float, 0.9, "Adam first-moment decay"),
    "train.adam_beta2": (float, 0.999, "Adam second-moment decay"),
    "train.adam_eps": (float, 1e-8, "Adam denominator epsilon"),
    "train.eval_every": (int, 10, "epochs between validation passes"),
    "train.patience": (int, 20, "non-improving validations tolerated before stopping"),
    "grid.d_r": (_parse_int_list, (10, 20, 30), "relation-dim candidates"),
    "grid.d_e": (_parse_int_list, (100, 200, 500, 1000), "entity-dim candidates"),
    "grid.dropout_input": (_parse_float_list, (0.2, 0.3, 0.4, 0.5), "input dropout candidates"),
    "grid.dropout_relation": (_parse_float_list, (0.2, 0.3, 0.4, 0.5), "relation dropout candidates"),
    "grid.dropout_combination": (_parse_float_list, (0.2, 0.3, 0.4, 0.5), "combination dropout candidates"),
    "eval.mode": (str, "filtered", "ranking mode: filtered|raw"),
    "snn.k": (int, 50, "kNN size in the embedding space"),
    "snn.tau": (float, 0.0, "SNN threshold for classifying a hit as grounded"),
    "snn.hit_rank_cutoff": (int, 10, "rank cutoff defining a correctly predicted triple"),
    "synth.communities": (int, 2, "planted communities"),
    "synth.surnames_per_community": (int, 99, "surname pool per community"),
    "synth.individuals": (int, 10000, "population size"),
    "synth.intra_bias": (float, 0.8, "probability a record uses a planted pair"),
    "synth.ses_noise": (float, 8.0, "SES noise standard deviation"),
}


class RunConfig:
    """Flat dotted-key configuration with typed, defaulted keys."""

    def __init__(self):
        self.values = {key: default for key, (_, default, _) in CONFIG_KEYS.items()}

    def set(self, key: str, raw: str, where: str = "command line") -> None:
        if key not in CONFIG_KEYS:
            raise ParseError(f"unknown config key {key!r} (from {where})")
        parse = CONFIG_KEYS[key][0]
        try:
            self.values[key] = parse(raw)
        except ValueError as err:
            raise ParseError(f"bad value for {key}: {err} (from {where})") from None

    def load_file(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for n, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ParseError("expected key=value", n, path)
                key, _, value = line.partition("=")
                self.set(key.strip(), value.strip(), where=f"{path}:{n}")

    def __getitem__(self, key: str):
        return self.values[key]

    def echo_text(self) -> str:
        lines = []
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key}={value}")
        return "".join(line + "\n" for line in lines)


def load_run_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        config.load_file(args.config)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ParseError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        config.set(key.strip(), value.strip())
    if getattr(args, "seed", None) is not None:
        config.values["seed"] = args.seed
    return config


def _echo_config(out_dir: str, config: RunConfig) -> None:
    atomic_write_text(os.path.join(out_dir, "effective_config.cfg"), config.echo_text())


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _train_config(config: RunConfig) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        epochs=config["train.epochs"],
        batch_size=config["train.batch_size"],
        learning_rate=config["train.learning_rate"],
        decay_rate=config["train.decay_rate"],
        seed=config["seed"],
        model=config["train.model"],
        d_e=config["train.d_e"],
        d_r=config["train.d_r"],
        dropout=models.DropoutSpec(
            config["train.dropout_input"],
            config["train.dropout_relation"],
            config["train.dropout_combination"],
        ),
        label_smoothing=config["train.label_smoothing"],
        adam_beta1=config["train.adam_beta1"],
        adam_beta2=config["train.adam_beta2"],
        adam_eps=config["train.adam_eps"],
        eval_every=config["train.eval_every"],
        patience=config["train.patience"],
    )


def _vocab_hashes(graph: kgmod.KnowledgeGraph) -> dict:
    return {"entities": graph.entities.digest(), "relations": graph.relations.digest()}


def _check_vocab(meta: dict, graph: kgmod.KnowledgeGraph) -> None:
    expected = _vocab_hashes(graph)
    if meta.get("vocab_hash") != expected:
        raise ConsistencyError(
            "checkpoint was trained on a different vocabulary; refusing to proceed"
        )


def cmd_gen_synthetic(args) -> int:
    config = load_run_config(args)
    spec = synthetic.PopulationSpec(
        n_communities=config["synth.communities"],
        surnames_per_community=config["synth.surnames_per_community"],
        n_individuals=config["synth.individuals"],
        intra_bias=config["synth.intra_bias"],
        ses_noise=config["synth.ses_noise"],
        seed=config["seed"],
    )
    records, planted = synthetic.generate_population(spec)
    os.makedirs(args.out, exist_ok=True)
    synthetic.write_records_csv(os.path.join(args.out, "records.csv"), records)
    sidecar = {
        "planted_pairs": [list(p) for p in sorted(planted)],
        "spec": dataclasses.asdict(spec),
    }
    atomic_write_text(os.path.join(args.out, "ground_truth.json"), canonical_json(sidecar))
    _echo_config(args.out, config)
    _log(f"gen-synthetic: {len(records)} records, {len(planted)} planted pairs -> {args.out}")
    return 0


def cmd_build_network(args) -> int:
    config = load_run_config(args)
    records = builder.read_records_csv(args.records)
    cfg = builder.BuilderConfig(
        k_security=config["builder.k_security"],
        min_occurrences=config["builder.min_occurrences"],
        kcore_k=config["builder.kcore_k"],
        n_deciles=config["builder.n_deciles"],
        rare_filter_order=config["builder.rare_filter_order"],
    )
    triples, report = builder.build(records, cfg)
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(
        os.path.join(args.out, "triples.tsv"),
        "".join(f"{h}\t{r}\t{t}\n" for h, r, t in triples),
    )
    atomic_write_text(os.path.join(args.out, "build_report.json"), canonical_json(report.to_dict()))
    _echo_config(args.out, config)
    _log(f"build-network: {report.n_nodes} nodes, {report.n_pairs} pairs, "
         f"{report.n_triples} triples -> {args.out}")
    return 0


def cmd_split(args) -> int:
    config = load_run_config(args)
    graph, duplicates = kgmod.load_triples_file(args.triples)
    if duplicates:
        _log(f"split: collapsed {duplicates} duplicate triples")
    graph = kgmod.split(graph, config["split.valid_size"], config["split.test_size"], config["seed"])
    kgmod.save_kg_dir(args.out, graph)
    meta = {
        "triples": {"train": len(graph.train), "valid": len(graph.valid), "test": len(graph.test)},
        "entities": graph.n_entities,
        "relations": graph.n_relations,
        "duplicates_collapsed": duplicates,
        "seed": config["seed"],
    }
    atomic_write_text(os.path.join(args.out, "split_meta.json"), canonical_json(meta))
    _echo_config(args.out, config)
    _log(f"split: {meta['triples']} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    config = load_run_config(args)
    graph = kgmod.load_kg_dir(args.data)
    tc = _train_config(config)
    result = trainer.fit(graph, tc)
    os.makedirs(args.out, exist_ok=True)
    metrics = result.best_val_report.to_dict() if result.best_val_report else {}
    trainer.save_checkpoint(args.out, result.params, result.adam_state, tc,
                            result.best_epoch, metrics, _vocab_hashes(graph))
    log_lines = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in result.log)
    atomic_write_text(os.path.join(args.out, "log.jsonl"), log_lines)
    _echo_config(args.out, config)
    _log(f"train: {result.epochs_run} epochs, best val MRR {result.best_val_mrr:.4f} "
         f"at epoch {result.best_epoch} -> {args.out}")
    return 0


def cmd_grid_search(args) -> int:
    config = load_run_config(args)
    graph = kgmod.load_kg_dir(args.data)
    base = _train_config(config)
    grid = trainer.GridSpec(
        d_r=config["grid.d_r"],
        d_e=config["grid.d_e"],
        dropout_input=config["grid.dropout_input"],
        dropout_relation=config["grid.dropout_relation"],
        dropout_combination=config["grid.dropout_combination"],
    )
    cells = trainer.grid_search(graph, grid, base)
    rows = [
        {
            "rank": i + 1,
            "d_r": cell.config.d_r,
            "d_e": cell.config.d_e,
            "dropout": cell.config.dropout.rates(),
            "val_mrr": cell.val_mrr,
            "val_hits1": cell.val_hits1,
            "best_epoch": cell.best_epoch,
            "epochs_run": cell.epochs_run,
        }
        for i, cell in enumerate(cells)
    ]
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(os.path.join(args.out, "grid_results.json"), canonical_json(rows))
    csv_lines = ["rank,d_r,d_e,dropout_input,dropout_relation,dropout_combination,val_mrr,val_hits1"]
    for row in rows:
        dr = row["dropout"]
        csv_lines.append(
            f"{row['rank']},{row['d_r']},{row['d_e']},{dr['input_rate']},"
            f"{dr['after_relation_rate']},{dr['after_combination_rate']},"
            f"{row['val_mrr']!r},{row['val_hits1']!r}"
        )
    atomic_write_text(os.path.join(args.out, "grid_results.csv"),
                      "".join(line + "\n" for line in csv_lines))
    _echo_config(args.out, config)
    _log(f"grid-search: {len(rows)} cells -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    config = load_run_config(args)
    graph = kgmod.load_kg_dir(args.data)
    params, _, meta = trainer.load_checkpoint(args.checkpoint)
    _check_vocab(meta, graph)
    report = evaluator.evaluate(params, graph, mode=config["eval.mode"])
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(os.path.join(args.out, "metrics.json"), canonical_json(report.to_dict()))
    atomic_write_text(os.path.join(args.out, "per_relation.csv"), evaluator.per_relation_csv(report))
    _echo_config(args.out, config)
    _log(f"evaluate: hits@1={report.hits1:.3f} hits@3={report.hits3:.3f} "
         f"hits@10={report.hits10:.3f} MRR={report.mrr:.3f} -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    config = load_run_config(args)
    graph = kgmod.load_kg_dir(args.data)
    params, _, meta = trainer.load_checkpoint(args.checkpoint)
    _check_vocab(meta, graph)
    if meta["model"] != "tucker":
        raise ConsistencyError("SNN analysis needs a tucker checkpoint (relation matrices)")
    records = evaluator.compute_ranks(params, graph)
    hits = snn.select_hits(records, config["snn.hit_rank_cutoff"], config["eval.mode"])
    report = snn.analyze_predictions(params, graph, hits,
                                     knn_k=config["snn.k"], tau=config["snn.tau"])
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(os.path.join(args.out, "snn_report.json"), canonical_json(report.to_dict()))
    atomic_write_text(os.path.join(args.out, "snn_report.csv"), report.to_csv())
    _echo_config(args.out, config)
    _log(f"analyze: {len(hits)} hits across {len(report.deciles)} deciles -> {args.out}")
    return 0


def cmd_export_heatmaps(args) -> int:
    config = load_run_config(args)
    graph = kgmod.load_kg_dir(args.data)
    params, _, meta = trainer.load_checkpoint(args.checkpoint)
    _check_vocab(meta, graph)
    if meta["model"] != "tucker":
        raise ConsistencyError("relation heatmaps need a tucker checkpoint")
    os.makedirs(args.out, exist_ok=True)
    indices = snn.export_relation_heatmaps(params, graph, args.out)
    atomic_write_text(os.path.join(args.out, "asymmetry.json"), canonical_json(indices))
    _echo_config(args.out, config)
    _log(f"export-heatmaps: {len(indices)} relation matrices -> {args.out}")
    return 0


def _config_epilog() -> str:
    lines = ["configuration keys (key=value in --config files or --set):"]
    for key, (_, default, help_text) in CONFIG_KEYS.items():
        if isinstance(default, tuple):
            default = ",".join(str(v) for v in default)
        lines.append(f"  {key} (default {default}): {help_text}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affinitykg",
        description="Surname affinity knowledge graphs: build, train, evaluate, explain.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable; wins over --config)")
        p.add_argument("--seed", type=int, help="override the global seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen-synthetic", help="generate a synthetic population with ground truth")
    common(p)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("build-network", help="records.csv -> affinity triples + report")
    p.add_argument("--records", required=True, help="input records.csv")
    common(p)
    p.set_defaults(func=cmd_build_network)

    p = sub.add_parser("split", help="triples.tsv -> train/valid/test folds")
    p.add_argument("--triples", required=True, help="input triples.tsv")
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a link predictor on a split directory")
    p.add_argument("--data", required=True, help="split directory")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", help="hyperparameter sweep ranked by validation MRR")
    p.add_argument("--data", required=True, help="split directory")
    common(p)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("evaluate", help="ranking metrics for a checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--data", required=True, help="split directory")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="shared-nearest-neighbor explanation of hits")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--data", required=True, help="split directory")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export-heatmaps", help="write per-decile relation matrices as CSV")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--data", required=True, help="split directory")
    common(p)
    p.set_defaults(func=cmd_export_heatmaps)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        _log(f"error: missing input: {err}")
        return 2
    except (ParseError, ValueError) as err:
        # Bad file contents or out-of-range configuration values.
        _log(f"error: {err}")
        return 2
    except ConsistencyError as err:
        _log(f"error: {err}")
        return 3
    except Exception as err:  # noqa: BLE001 - the CLI boundary maps everything to exit 4
        _log(f"error: {type(err).__name__}: {err}")
        return 4


def entrypoint() -> None:
    raise SystemExit(main())
