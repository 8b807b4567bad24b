"""Command line interface for the keyword-spotting experiments.

Subcommands cover the full pipeline: corpus generation, pair ranking,
pruning, training, the architecture comparison, data-fraction sweeps,
information metrics, and the interpretability report. A flat key=value
--config file supplies defaults; explicit flags win. Figures are written
with fixed metadata so reruns are byte-identical; wall-clock timestamps go
only to the run.log sidecar.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import (
    count_synops,
    info_pattern,
    info_rate,
    info_to_csv,
    init_tau_from_lags,
    interpretability_report,
    prune,
    random_prune,
    rank_pairs,
    ranked_from_csv,
    ranked_to_csv,
    select_correlations,
)
from .encoding import (
    Dataset,
    encode_tracks,
    generate_synthetic_dataset,
    load_formant_csv,
    load_raster_file,
    save_formant_csv,
    save_raster_file,
)
from .topology import (
    LIF,
    LIFREC,
    TDE,
    NetworkSpec,
    balance_hidden_size,
    connection_count,
    load_model,
    save_model,
)
from .training import (
    TrainConfig,
    TrainingError,
    collect_events,
    init_parameters,
    run_comparison,
    run_training_fraction_sweep,
    split_dataset,
    train,
)

PLOT_METADATA = {"Software": "tdekws"}
COMPARISON_CSV_HEADER = [
    "arch", "n_l1", "connections", "seed", "top25_acc",
    "spikes_total", "synops_total",
]
SWEEP_CSV_HEADER = ["arch", "n_l1", "fraction", "seed", "top25_acc"]


def _default_threads() -> int:
    env = os.environ.get("TDEKWS_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _log_run(out_dir: str, argv: list[str]) -> None:
    """The only place wall-clock time is recorded."""
    os.makedirs(out_dir, exist_ok=True)
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(os.path.join(out_dir, "run.log"), "a") as f:
        f.write(f"{stamp} tdekws {' '.join(argv)}\n")


def _save_plot(fig, path: str) -> None:
    fig.savefig(path, dpi=120, metadata=PLOT_METADATA)
    plt.close(fig)


def _load_dataset(path: str) -> Dataset:
    if path.endswith(".csv"):
        tracks = load_formant_csv(path)
        return encode_tracks(tracks, provenance=f"formant-csv:{path}")
    return load_raster_file(path)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        p_drop=args.p_drop,
        lam=args.lam,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        test_fraction=args.test_fraction,
    )


def _write_rows(path: str, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(v) if isinstance(v, float) else v for v in
                 (row[k] for k in header)]
            )


# --- subcommands --------------------------------------------------------------


def cmd_gen(args, argv) -> int:
    ds = generate_synthetic_dataset(
        seed=args.seed, reps_per_class=args.reps, n_classes=args.classes
    )
    _log_run(os.path.dirname(os.path.abspath(args.out)), argv)
    save_raster_file(args.out, ds)
    if args.csv:
        save_formant_csv(args.csv, ds.tracks)
    print(f"wrote {len(ds)} samples ({ds.n_classes} classes) to {args.out}")
    return 0


def cmd_rank(args, argv) -> int:
    ds = _load_dataset(args.data)
    ranked = rank_pairs(ds, max_lag=args.max_lag, threads=args.threads)
    _log_run(os.path.dirname(os.path.abspath(args.out)), argv)
    ranked_to_csv(args.out, ranked)
    if args.plot:
        values = [p.value for p in ranked]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(values, bins=40, color="tab:blue")
        ax.set_yscale("log")
        ax.set_xlabel("class-wise correlation peak")
        ax.set_ylabel("channel pairs")
        ax.set_title("pair ranking statistic")
        fig.tight_layout()
        _save_plot(fig, args.plot)
    print(f"ranked {len(ranked)} pairs from {len(ds)} samples -> {args.out}")
    return 0


def cmd_prune(args, argv) -> int:
    ranked = ranked_from_csv(args.ranked)
    if args.random:
        # a full ranking covers every channel, so max id + 1 recovers n_l0
        n_l0 = 1 + max(max(p.fac, p.trig) for p in ranked)
        spec = random_prune(args.keep, seed=args.seed, n_l0=n_l0)
        kept = select_correlations(ranked, spec.tde_pairs)
    else:
        if not 1 <= args.keep <= len(ranked):
            raise ValueError(
                f"--keep must lie in [1, {len(ranked)}], got {args.keep}"
            )
        kept = ranked[: args.keep]
    _log_run(os.path.dirname(os.path.abspath(args.out)), argv)
    ranked_to_csv(args.out, kept)
    mode = "random" if args.random else "top"
    print(f"kept {len(kept)} {mode} pairs -> {args.out}")
    return 0


def _spec_from_args(args, ds: Dataset):
    """(spec, tau_g_init) for the train command."""
    if args.arch == TDE:
        if not args.ranked:
            raise ValueError("--ranked is required for the tde architecture")
        kept = ranked_from_csv(args.ranked)
        spec = prune(kept, len(kept), n_l0=ds.n_neurons, n_l2=ds.n_classes)
        taus = None if args.uniform_tau else init_tau_from_lags(kept, dt=ds.dt)
        return spec, taus
    if not args.n_l1:
        raise ValueError(f"--n-l1 is required for the {args.arch} architecture")
    spec = NetworkSpec(kind=args.arch, n_l1=args.n_l1, n_l0=ds.n_neurons,
                       n_l2=ds.n_classes)
    return spec, None


def cmd_train(args, argv) -> int:
    ds = _load_dataset(args.data)
    spec, taus = _spec_from_args(args, ds)
    cfg = _train_config(args)
    train_set, test_set = split_dataset(
        ds, cfg.test_fraction, args.train_fraction, seed=cfg.seed
    )
    params0 = init_parameters(
        spec, cfg, np.random.default_rng(cfg.seed), tau_g_init=taus
    )
    params, report = train(train_set, test_set, spec, params0, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    _log_run(args.out_dir, argv)
    save_model(os.path.join(args.out_dir, "model.json"), spec, params)
    report.to_json(os.path.join(args.out_dir, "report.json"))
    print(
        f"{spec.kind} n_l1={spec.n_l1} connections={connection_count(spec)}: "
        f"final acc {report.test_acc[-1]:.4f}, top25 {report.top25_acc:.4f} "
        f"({report.n_train} train / {report.n_test} test)"
    )
    return 0


def _comparison_plots(rows: list[dict], out_dir: str) -> None:
    archs = [TDE, LIFREC, LIF]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, key, label in zip(
        axes,
        ("top25_acc", "spikes_total", "synops_total"),
        ("top-25 accuracy", "spikes per keyword", "SynOps per keyword"),
    ):
        means = []
        stds = []
        for arch in archs:
            vals = [r[key] for r in rows if r["arch"] == arch]
            means.append(np.mean(vals))
            stds.append(np.std(vals))
        ax.bar(archs, means, yerr=stds, color=["tab:blue", "tab:orange",
                                               "tab:green"])
        ax.set_ylabel(label)
        if key == "synops_total":
            ax.set_yscale("log")
    fig.tight_layout()
    _save_plot(fig, os.path.join(out_dir, "comparison.png"))


def _pruning_plot(rows: list[dict], out_dir: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, arch, marker in (("informed", TDE, "o"),
                                ("random", "tde_random", "s")):
        sub = [r for r in rows if r["arch"] == arch]
        if not sub:
            continue
        conns = sorted({r["connections"] for r in sub})
        means = [np.mean([r["top25_acc"] for r in sub
                          if r["connections"] == c]) for c in conns]
        stds = [np.std([r["top25_acc"] for r in sub
                        if r["connections"] == c]) for c in conns]
        ax.errorbar(conns, means, yerr=stds, marker=marker, label=label)
    ax.set_xlabel("synaptic connections")
    ax.set_ylabel("top-25 accuracy")
    ax.legend()
    fig.tight_layout()
    _save_plot(fig, os.path.join(out_dir, "pruning.png"))


def cmd_compare(args, argv) -> int:
    ds = _load_dataset(args.data)
    cfg = _train_config(args)
    tde_sizes = [int(s) for s in args.tde_sizes.split(",") if s]
    if not tde_sizes:
        raise ValueError("--tde-sizes needs at least one size")
    ranked = rank_pairs(ds, threads=args.threads)
    triples = []
    for n in tde_sizes:
        target = connection_count(
            prune(ranked, n, n_l0=ds.n_neurons, n_l2=ds.n_classes)
        )
        triples.append((
            n,
            balance_hidden_size(target, LIFREC, n_l0=ds.n_neurons,
                                n_l2=ds.n_classes),
            balance_hidden_size(target, LIF, n_l0=ds.n_neurons,
                                n_l2=ds.n_classes),
        ))
    rows = run_comparison(ds, triples, cfg, n_seeds=args.seeds, ranked=ranked,
                          threads=args.threads)
    if args.random_control:
        for n in tde_sizes:
            for seed in range(args.seeds):
                spec = random_prune(n, seed=1000 + seed, n_l0=ds.n_neurons,
                                    n_l2=ds.n_classes)
                taus = init_tau_from_lags(
                    select_correlations(ranked, spec.tde_pairs), dt=cfg.dt
                )
                run_cfg = replace(cfg, seed=seed)
                tr, te = split_dataset(ds, run_cfg.test_fraction, seed=seed)
                params0 = init_parameters(
                    spec, run_cfg, np.random.default_rng(seed), tau_g_init=taus
                )
                params, report = train(tr, te, spec, params0, run_cfg)
                log = collect_events(spec, params, ds)
                rows.append({
                    "arch": "tde_random",
                    "n_l1": n,
                    "connections": connection_count(spec),
                    "seed": seed,
                    "top25_acc": report.top25_acc,
                    "spikes_total": log.total_spikes() / log.n_samples,
                    "synops_total": count_synops(log).total / log.n_samples,
                })
    os.makedirs(args.out_dir, exist_ok=True)
    _log_run(args.out_dir, argv)
    _write_rows(os.path.join(args.out_dir, "comparison.csv"),
                COMPARISON_CSV_HEADER, rows)
    _comparison_plots([r for r in rows if r["arch"] in (TDE, LIFREC, LIF)],
                      args.out_dir)
    if args.random_control:
        _pruning_plot(rows, args.out_dir)
    for arch in (TDE, LIFREC, LIF, "tde_random"):
        vals = [r["top25_acc"] for r in rows if r["arch"] == arch]
        if vals:
            print(f"{arch}: top25 {np.mean(vals):.4f} (std {np.std(vals):.4f})"
                  f" over {len(vals)} runs")
    return 0


def cmd_sweep(args, argv) -> int:
    ds = _load_dataset(args.data)
    cfg = _train_config(args)
    fractions = tuple(float(s) for s in args.fractions.split(",") if s)
    if not fractions:
        raise ValueError("--fractions needs at least one value")
    ranked = rank_pairs(ds, threads=args.threads)
    tde = prune(ranked, args.tde_n, n_l0=ds.n_neurons, n_l2=ds.n_classes)
    lifrec = NetworkSpec(kind=LIFREC, n_l1=args.lifrec_n, n_l0=ds.n_neurons,
                         n_l2=ds.n_classes)
    taus = init_tau_from_lags(ranked[: args.tde_n], dt=cfg.dt)
    rows, summary = run_training_fraction_sweep(
        ds, [tde, lifrec], cfg, fractions=fractions, n_seeds=args.seeds,
        tau_g_inits=[taus, None], threads=args.threads,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    _log_run(args.out_dir, argv)
    _write_rows(os.path.join(args.out_dir, "sweep.csv"), SWEEP_CSV_HEADER, rows)
    with open(os.path.join(args.out_dir, "sweep_summary.json"), "w") as f:
        json.dump(summary, f, indent=1)
        f.write("\n")
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, stats in summary.items():
        fracs = sorted(stats["mean_by_fraction"])
        ax.plot(fracs, [stats["mean_by_fraction"][f] for f in fracs],
                marker="o", label=key)
    ax.set_xlabel("train fraction")
    ax.set_ylabel("top-25 accuracy")
    ax.legend()
    fig.tight_layout()
    _save_plot(fig, os.path.join(args.out_dir, "sweep.png"))
    print(json.dumps(summary, indent=1))
    return 0


def cmd_info(args, argv) -> int:
    ds = _load_dataset(args.data)
    delta_ts = [float(s) for s in args.delta_ts.split(",") if s]
    if not delta_ts:
        raise ValueError("--delta-ts needs at least one value")
    rate = info_rate(ds, window=args.window, n_shuffles=args.shuffles,
                     seed=args.seed)
    patterns = [
        info_pattern(ds, delta_t=d, window=args.window,
                     n_shuffles=args.shuffles, seed=args.seed)
        for d in delta_ts
    ]
    _log_run(os.path.dirname(os.path.abspath(args.out)), argv)
    info_to_csv(args.out, rate, patterns)
    if args.plot:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.errorbar(delta_ts, [p.mean for p in patterns],
                    yerr=[p.std for p in patterns], marker="o",
                    label="pattern")
        ax.axhline(rate.mean, color="tab:red", linestyle="--", label="rate")
        ax.set_xscale("log")
        ax.set_xlabel("delta_t (s)")
        ax.set_ylabel("information (bits)")
        ax.legend()
        fig.tight_layout()
        _save_plot(fig, args.plot)
    print(f"i_rate mean {rate.mean:.4f} bits; i_pattern mean at finest "
          f"delta_t {patterns[0].mean:.4f} bits -> {args.out}")
    return 0


def cmd_interpret(args, argv) -> int:
    spec, params = load_model(args.model)
    ranked = ranked_from_csv(args.ranked)
    report = interpretability_report(
        spec, params, ranked, top_k=args.top_k,
        coincidence_radius=args.radius,
    )
    _log_run(os.path.dirname(os.path.abspath(args.out)), argv)
    report.to_json(args.out)
    if args.plot:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        for c in report.classes:
            ax1.scatter([cell["fac"] for cell in c["cells"]],
                        [cell["trig"] for cell in c["cells"]],
                        s=14, alpha=0.6)
        ax1.scatter([p["fac"] for p in report.xcorr_top],
                    [p["trig"] for p in report.xcorr_top],
                    marker="x", s=60, color="black",
                    label="top correlation pairs")
        ax1.set_xlabel("facilitatory channel")
        ax1.set_ylabel("trigger channel")
        ax1.legend(loc="upper left", fontsize=8)
        taus = [cell["tau_g"] for c in report.classes for cell in c["cells"]]
        ax2.hist(taus, bins=20, color="tab:purple")
        ax2.set_xlabel("gain tau (s)")
        ax2.set_ylabel("selected cells")
        fig.tight_layout()
        _save_plot(fig, args.plot)
    print(
        f"{report.n_coincident} of {report.top_k * len(report.classes)} "
        f"selected cells within {report.coincidence_radius:g} channels of a "
        f"top correlation pair -> {args.out}"
    )
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="tdekws",
        description="Spiking keyword-spotting experiments on formant-coded "
                    "spike trains.",
    )
    parser.add_argument("--config", help="flat key=value defaults file")
    subs = parser.add_subparsers(dest="command", required=True)
    sub_map = {}

    config_opt = argparse.ArgumentParser(add_help=False)
    config_opt.add_argument("--config", help="flat key=value defaults file")

    train_opts = argparse.ArgumentParser(add_help=False)
    train_opts.add_argument("--epochs", type=int, default=100)
    train_opts.add_argument("--batch-size", type=int, default=16)
    train_opts.add_argument("--learning-rate", type=float, default=0.0015)
    train_opts.add_argument("--weight-decay", type=float, default=0.0001)
    train_opts.add_argument("--p-drop", type=float, default=0.1)
    train_opts.add_argument("--lam", type=float, default=5.0)
    train_opts.add_argument("--seed", type=int, default=0)
    train_opts.add_argument("--test-fraction", type=float, default=0.2)

    threads_opt = argparse.ArgumentParser(add_help=False)
    threads_opt.add_argument("--threads", type=int, default=_default_threads())

    p = subs.add_parser("gen", parents=[config_opt], help="generate the seeded synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=40, help="samples per class")
    p.add_argument("--classes", type=int, default=11)
    p.add_argument("--out", required=True, help="raster file to write")
    p.add_argument("--csv", help="also write the formant tracks as CSV")
    p.set_defaults(fn=cmd_gen)
    sub_map["gen"] = p

    p = subs.add_parser("rank", parents=[config_opt, threads_opt],
                        help="rank channel pairs by class-wise correlation")
    p.add_argument("--data", required=True, help="raster file or formant CSV")
    p.add_argument("--out", required=True, help="ranked pair CSV to write")
    p.add_argument("--max-lag", type=int, default=33)
    p.add_argument("--plot", help="histogram PNG")
    p.set_defaults(fn=cmd_rank)
    sub_map["rank"] = p

    p = subs.add_parser("prune", parents=[config_opt], help="keep the strongest (or random) pairs")
    p.add_argument("--ranked", required=True, help="ranked pair CSV")
    p.add_argument("--keep", type=int, required=True)
    p.add_argument("--random", action="store_true",
                   help="random control instead of the top pairs")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the random control")
    p.add_argument("--out", required=True, help="pruned pair CSV to write")
    p.set_defaults(fn=cmd_prune)
    sub_map["prune"] = p

    p = subs.add_parser("train", parents=[config_opt, train_opts],
                        help="train one architecture")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=[TDE, LIF, LIFREC], required=True)
    p.add_argument("--ranked", help="pair CSV (tde: defines the cells)")
    p.add_argument("--n-l1", type=int, help="hidden size (lif/lifrec)")
    p.add_argument("--train-fraction", type=float, default=1.0)
    p.add_argument("--uniform-tau", action="store_true",
                   help="ignore ranked lags when initializing gain taus")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_train)
    sub_map["train"] = p

    p = subs.add_parser("compare", parents=[config_opt, train_opts, threads_opt],
                        help="three architectures at matched connections")
    p.add_argument("--data", required=True)
    p.add_argument("--tde-sizes", default="540",
                   help="comma-separated TDE cell counts")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--random-control", action="store_true",
                   help="add randomly pruned TDE nets of the same sizes")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_compare)
    sub_map["compare"] = p

    p = subs.add_parser("sweep", parents=[config_opt, train_opts, threads_opt],
                        help="accuracy under reduced training data")
    p.add_argument("--data", required=True)
    p.add_argument("--tde-n", type=int, default=540)
    p.add_argument("--lifrec-n", type=int, default=65)
    p.add_argument("--fractions", default="1.0,0.75")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_sweep)
    sub_map["sweep"] = p

    p = subs.add_parser("info", parents=[config_opt], help="spike-timing information metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--delta-ts", default="0.015,0.045,0.135,0.405")
    p.add_argument("--window", type=float, default=0.4)
    p.add_argument("--shuffles", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV to write")
    p.add_argument("--plot", help="information-vs-resolution PNG")
    p.set_defaults(fn=cmd_info)
    sub_map["info"] = p

    p = subs.add_parser("interpret", parents=[config_opt],
                        help="per-class strongest cells vs top pairs")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--ranked", required=True, help="ranked pair CSV")
    p.add_argument("--top-k", type=int, default=25)
    p.add_argument("--radius", type=float, default=5.0)
    p.add_argument("--out", required=True, help="report JSON to write")
    p.add_argument("--plot", help="pair scatter and tau histogram PNG")
    p.set_defaults(fn=cmd_interpret)
    sub_map["interpret"] = p

    return parser, sub_map


def _apply_config(parser: argparse.ArgumentParser, sub_map: dict,
                  argv: list[str]) -> None:
    """Read --config key=value lines as defaults of the invoked subcommand."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, rest = probe.parse_known_args(argv)
    if not known.config:
        return
    command = next((a for a in rest if not a.startswith("-")), None)
    if command not in sub_map:
        return
    sub = sub_map[command]
    valid = {a.dest for a in sub._actions}
    defaults = {}
    try:
        with open(known.config) as f:
            lines = f.readlines()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            parser.error(f"config line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        dest = key.strip().replace("-", "_")
        if dest not in valid:
            parser.error(
                f"config line {lineno}: unknown option {key.strip()!r} "
                f"for command {command!r}"
            )
        defaults[dest] = value.strip()
    # re-parse string values through each option's own type
    for action in sub._actions:
        if action.dest in defaults:
            raw = defaults[action.dest]
            if action.const is not None and isinstance(action.const, bool):
                defaults[action.dest] = raw.lower() in ("1", "true", "yes")
            elif action.type is not None:
                try:
                    defaults[action.dest] = action.type(raw)
                except ValueError:
                    parser.error(
                        f"config value for {action.dest!r}: bad literal {raw!r}"
                    )
            if action.required:
                action.required = False
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub_map = build_parser()
    _apply_config(parser, sub_map, argv)
    args = parser.parse_args(argv)
    try:
        return args.fn(args, argv)
    except (ValueError, KeyError, OSError, TrainingError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"tdekws: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
