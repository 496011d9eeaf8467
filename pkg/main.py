#!/usr/bin/env python3
"""
Walsh-Hadamard Autoencoder Lab - Main Script

Reproducible experiment driver: trains Walsh-domain and time-domain channel
autoencoders, simulates BLER curves for them and for a CRC-aided Polar
baseline, extracts threshold SNRs, evaluates finite-blocklength bounds and
reports complexity, power and energy efficiency.
"""
import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed

from comms import autoencoder, channel, evaluate, polar, powermodel
from comms.neural import DegeneratePowerError, TrainingAborted
from utils.file_utils import (
    atomic_write_text,
    create_run_structure,
    ensure_dir,
    get_basename,
    get_version,
    normalize_path,
    write_key_values,
)
from utils.progress import ProgressTracker, StepProgress
from utils.validation import (
    expand_sweep,
    parse_snr_grid,
    validate_config,
    validate_config_file,
)

OUTPUT_ROOT_ENV = "WHAE_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNBRACKETED = 2
EXIT_ABORTED = 3

SUMMARY_COLUMNS = ["threshold_snr", "ops", "params", "ee"]


class CommandError(Exception):
    """User-facing failure carrying the exit code to return"""

    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


# Config -> domain objects


def model_config_from(exp):
    return autoencoder.ModelConfig(
        n=exp["model.n"],
        k=exp["model.k"],
        q=exp["model.q"],
        v=exp["model.v"],
        activation=exp["model.activation"],
        leaky_slope=exp["model.leaky_slope"],
        batch_norm=exp["model.batch_norm"],
        dropout=exp["model.dropout"],
        l2=exp["model.l2"],
        domain=exp["model.domain"],
        scaling=exp["model.scaling"],
    )


def train_config_from(exp):
    return autoencoder.TrainConfig(
        s_db=exp["train.s_db"],
        delta_db=exp["train.delta_db"],
        batch=exp["train.batch"],
        t_enc=exp["train.t_enc"],
        t_dec=exp["train.t_dec"],
        epochs=exp["train.epochs"],
        lr=exp["train.lr"],
        patience=exp["train.patience"],
        lr_floor=exp["train.lr_floor"],
        validation_size=exp["train.validation_size"],
        seed=exp["seed"],
    )


def stop_rule_from(exp):
    return evaluate.StopRule(
        min_block_errors=exp["eval.min_errors"],
        max_blocks=exp["eval.max_blocks"],
        batch=exp["eval.batch"],
    )


def power_config_from(exp, n):
    return powermodel.PowerConfig(
        eta=exp["power.eta"],
        fs=exp["power.fs"],
        n=n,
        polar_energy=exp.polar_energies(),
        polar_reference_n=exp["power.polar_reference_n"],
        polar_provenance=exp["power.polar_provenance"],
    )


def polar_config_from(exp, list_size=None):
    return polar.construct(
        exp["polar.n"],
        exp["polar.k_info"],
        crc_len=exp["polar.crc_len"],
        list_size=list_size or exp["polar.list_size"],
        construction=exp["polar.construction"],
        design_snr_db=exp["polar.design_snr_db"],
    )


def snr_grid_from(exp):
    _, _, grid = parse_snr_grid(exp["eval.snr_grid"])
    return grid


# Plumbing


def resolve_output_root():
    return os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT)


def prepare_run_dir(args, command):
    """
    Artifact directory for a command

    An explicit --out is used as-is (reruns overwrite their own artifacts);
    otherwise a unique `<command>-<config name>` directory under the output root.
    """
    if getattr(args, "out", None):
        run_dir = ensure_dir(normalize_path(args.out))
        return {
            "run": run_dir,
            "config": os.path.join(run_dir, "config.cfg"),
            "meta": os.path.join(run_dir, "run_meta.cfg"),
        }
    name = command
    if getattr(args, "config", None):
        name = f"{command}-{get_basename(args.config)}"
    return create_run_structure(resolve_output_root(), name)


def write_run_metadata(dirs, exp, command):
    atomic_write_text(dirs["config"], exp.echo())
    write_key_values(
        dirs["meta"],
        {"seed": exp["seed"], "command": command, "version": get_version()},
    )


def load_experiment(args):
    """
    Load --config (or defaults) and apply --seed

    Returns:
        ExperimentConfig
    """
    if getattr(args, "config", None):
        is_valid, message, exp = validate_config_file(args.config)
    else:
        is_valid, message, exp = validate_config({})
    if not is_valid:
        raise CommandError(message)
    if getattr(args, "seed", None) is not None:
        is_valid, message, seeded = exp.with_overrides({"seed": args.seed})
        if not is_valid:
            raise CommandError(message)
        seeded.sweep = exp.sweep
        exp = seeded
    return exp


def say(args, text):
    if not args.quiet:
        print(text)


# Subcommands


def cmd_train(args):
    exp = load_experiment(args)
    cfg = model_config_from(exp)
    tcfg = train_config_from(exp)
    dirs = prepare_run_dir(args, "train")
    verbose = not args.quiet

    progress = StepProgress(["Train autoencoder", "Write artifacts"], enabled=verbose)
    progress.start()
    progress.start_step()
    say(args, f"Training {cfg.domain} autoencoder n={cfg.n} k={cfg.k} Q={cfg.q} V={cfg.v}")
    try:
        model, log = autoencoder.train(cfg, tcfg, verbose=verbose)
    except (TrainingAborted, DegeneratePowerError) as e:
        raise CommandError(f"Training aborted: {e}", EXIT_ABORTED)
    progress.end_step()

    progress.start_step()
    write_run_metadata(dirs, exp, "train")
    autoencoder.save_model(os.path.join(dirs["run"], "model.ckpt"), model)
    atomic_write_text(os.path.join(dirs["run"], "train_log.csv"), log.to_csv())
    progress.end_step()
    progress.finish()

    last = log.records[-1]
    say(args, f"Stopped after {len(log)} epochs ({log.stop_reason})")
    say(args, f"val_loss={last.val_loss:.6g} val_acc={last.val_acc:.6f}")
    say(args, f"Output directory: {dirs['run']}")
    return EXIT_OK


def cmd_evaluate(args):
    exp = load_experiment(args)
    if not os.path.isfile(args.checkpoint):
        raise CommandError(f"Checkpoint does not exist: {args.checkpoint}")
    try:
        model = autoencoder.load_model(args.checkpoint)
    except ValueError as e:
        raise CommandError(f"Cannot load checkpoint: {e}")
    dirs = prepare_run_dir(args, "evaluate")

    system = autoencoder.AutoencoderSystem(model, name=get_basename(args.checkpoint))
    curve = evaluate.bler_curve(
        system,
        snr_grid_from(exp),
        stop_rule_from(exp),
        exp["seed"],
        metadata={"model": system.name, "domain": model.cfg.domain},
        workers=args.workers,
        verbose=not args.quiet,
    )
    write_run_metadata(dirs, exp, "evaluate")
    path = os.path.join(dirs["run"], "bler.csv")
    atomic_write_text(path, curve.to_csv())
    say(args, f"BLER curve written to {path}")
    return EXIT_OK


def cmd_threshold(args):
    if not os.path.isfile(args.bler_csv):
        raise CommandError(f"BLER CSV does not exist: {args.bler_csv}")
    target = args.target
    if target is None:
        target = load_experiment(args)["eval.target_bler"]
    with open(args.bler_csv, "r", encoding="utf-8") as f:
        try:
            curve = evaluate.BlerCurve.from_csv(f.read())
        except ValueError as e:
            raise CommandError(f"Malformed BLER CSV: {e}")
    try:
        snr = evaluate.threshold_snr(curve, target)
    except evaluate.UnbracketedError as e:
        raise CommandError(str(e), EXIT_UNBRACKETED)
    print(f"threshold_snr_db={snr:.4f}")
    return EXIT_OK


def cmd_bound(args):
    if args.n < 1 or not 0.0 < args.pe < 1.0:
        raise CommandError("--n must be >= 1 and --pe in (0, 1)")
    rates = [args.rate] if args.rates is None else args.rates
    if any(r <= 0 for r in rates):
        raise CommandError("Rates must be positive")
    if len(rates) == 1:
        rate = rates[0]
        print(f"shannon_snr_db={channel.shannon_snr_db(rate):.3f}")
        print(f"fbl_threshold_snr_db={channel.fbl_threshold_snr_db(rate, args.pe, args.n):.3f}")
        return EXIT_OK
    print("rate,shannon_snr_db,fbl_threshold_snr_db")
    for rate, shannon, fbl in channel.rate_threshold_table(rates, args.pe, args.n):
        print(f"{rate:g},{shannon:.4f},{fbl:.4f}")
    return EXIT_OK


def power_report_for(exp, kind, list_size=None):
    if kind == "polar":
        pcfg = power_config_from(exp, exp["polar.n"])
        size = list_size or exp["polar.list_size"]
        try:
            return powermodel.polar_power(pcfg, size, k=exp["polar.k_info"])
        except powermodel.MissingEnergyEntryError as e:
            raise CommandError(str(e.args[0]))
    cfg = model_config_from(exp)
    pcfg = power_config_from(exp, cfg.n)
    return powermodel.autoencoder_power(cfg, pcfg, kind)


def cmd_power(args):
    exp = load_experiment(args)
    kind = args.kind or exp["power.converters"]
    report = power_report_for(exp, kind, args.list_size)
    if kind != "polar":
        complexity = powermodel.model_complexity(model_config_from(exp))
        print(f"ops={complexity.ops}")
        print(f"params={complexity.params}")
    print(f"converters={report.converters}")
    print(f"p_bb_w={report.p_bb:.6g}")
    print(f"p_dac_w={report.p_dac:.6g}")
    print(f"p_adc_w={report.p_adc:.6g}")
    print(f"p_sys_w={report.p_sys:.6g}")
    print(f"throughput_bps={report.throughput:.6g}")
    print(f"ee_bit_per_joule={report.ee:.6g}")
    if report.provenance:
        print(f"energy_scaling={report.energy_scaling:g}")
        print(f"provenance={report.provenance}")
    if args.out:
        dirs = prepare_run_dir(args, "power")
        write_run_metadata(dirs, exp, "power")
        powermodel.write_power_csv(os.path.join(dirs["run"], "power.csv"), report)
    return EXIT_OK


def run_sweep_point(task):
    """
    Train, evaluate and cost one sweep point (runs in a worker process)

    Returns:
        tuple: (label, summary row dict)
    """
    label, source, point_dir = task
    is_valid, message, exp = validate_config(source)
    if not is_valid:
        raise CommandError(f"{label}: {message}")
    cfg = model_config_from(exp)
    dirs = create_run_structure(os.path.dirname(point_dir), os.path.basename(point_dir), False)
    model, log = autoencoder.train(cfg, train_config_from(exp))
    autoencoder.save_model(os.path.join(dirs["run"], "model.ckpt"), model)
    atomic_write_text(os.path.join(dirs["run"], "train_log.csv"), log.to_csv())

    curve = evaluate.bler_curve(
        autoencoder.AutoencoderSystem(model, name=label),
        snr_grid_from(exp),
        stop_rule_from(exp),
        exp["seed"],
        metadata={"model": label, "domain": cfg.domain},
    )
    atomic_write_text(os.path.join(dirs["run"], "bler.csv"), curve.to_csv())
    atomic_write_text(dirs["config"], exp.echo())
    try:
        threshold = evaluate.threshold_snr(curve, exp["eval.target_bler"])
    except evaluate.UnbracketedError:
        threshold = float("nan")

    complexity = powermodel.model_complexity(cfg)
    report = powermodel.autoencoder_power(cfg, power_config_from(exp, cfg.n))
    return label, {
        "threshold_snr": threshold,
        "ops": complexity.ops,
        "params": complexity.params,
        "ee": report.ee,
    }


def cmd_sweep(args):
    exp = load_experiment(args)
    if not exp.sweep:
        raise CommandError("Sweep config lists no sweep.<key> entries")
    dirs = prepare_run_dir(args, "sweep")
    write_run_metadata(dirs, exp, "sweep")

    points = expand_sweep(exp)
    tasks = []
    for label, overrides in points:
        is_valid, message, point_exp = exp.with_overrides(overrides)
        if not is_valid:
            raise CommandError(f"{label}: {message}")
        tasks.append((label, point_exp.source, os.path.join(dirs["run"], label)))

    rows = {}
    tracker = ProgressTracker(len(tasks), "Sweep points", enabled=not args.quiet)
    tracker.start()
    try:
        if args.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as executor:
                futures = [executor.submit(run_sweep_point, task) for task in tasks]
                for future in as_completed(futures):
                    label, row = future.result()
                    rows[label] = row
                    tracker.update(len(rows), status=label)
        else:
            for task in tasks:
                label, row = run_sweep_point(task)
                rows[label] = row
                tracker.update(len(rows), status=label)
    except (TrainingAborted, DegeneratePowerError) as e:
        raise CommandError(f"Training aborted: {e}", EXIT_ABORTED)
    tracker.finish()

    axes = sorted(exp.sweep)
    lines = [",".join(["point"] + axes + SUMMARY_COLUMNS)]
    for label, overrides in points:
        row = rows[label]
        lines.append(
            ",".join(
                [label]
                + [overrides[axis] for axis in axes]
                + [
                    f"{row['threshold_snr']:.12g}",
                    str(row["ops"]),
                    str(row["params"]),
                    f"{row['ee']:.12g}",
                ]
            )
        )
    path = os.path.join(dirs["run"], "summary.csv")
    atomic_write_text(path, "\n".join(lines) + "\n")
    say(args, f"Sweep summary written to {path}")
    return EXIT_OK


def cmd_polar_sim(args):
    exp = load_experiment(args)
    try:
        pcfg = polar_config_from(exp, args.list_size)
    except polar.PolarConfigError as e:
        raise CommandError(str(e))
    dirs = prepare_run_dir(args, "polar-sim")
    system = polar.PolarSystem(pcfg)
    say(
        args,
        f"Polar N={pcfg.n_code} K={pcfg.k_info} CRC-{pcfg.crc_len} L={pcfg.list_size} "
        f"({pcfg.construction})",
    )
    curve = evaluate.bler_curve(
        system,
        snr_grid_from(exp),
        stop_rule_from(exp),
        exp["seed"],
        metadata={"model": system.name, "construction": pcfg.construction},
        workers=args.workers,
        verbose=not args.quiet,
    )
    write_run_metadata(dirs, exp, "polar-sim")
    path = os.path.join(dirs["run"], "bler.csv")
    atomic_write_text(path, curve.to_csv())
    try:
        snr = evaluate.threshold_snr(curve, exp["eval.target_bler"])
        say(args, f"threshold_snr_db={snr:.4f}")
    except evaluate.UnbracketedError as e:
        say(args, f"Threshold not bracketed: {e}")
    say(args, f"BLER curve written to {path}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "threshold": cmd_threshold,
    "bound": cmd_bound,
    "power": cmd_power,
    "sweep": cmd_sweep,
    "polar-sim": cmd_polar_sim,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="main.py", description="Walsh-Hadamard autoencoder lab"
    )
    parser.add_argument("--quiet", action="store_true", help="Suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="key=value config file")
        p.add_argument("--seed", type=int, help="Override the config seed")
        p.add_argument("--out", help=f"Artifact directory (default under ${OUTPUT_ROOT_ENV})")

    def workers(p):
        p.add_argument(
            "--workers", type=int, default=os.cpu_count() or 1, help="Worker processes"
        )

    p = sub.add_parser("train", help="Train an autoencoder")
    common(p, config_required=True)

    p = sub.add_parser("evaluate", help="BLER curve of a trained checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True, help="model.ckpt written by train")
    workers(p)

    p = sub.add_parser("threshold", help="Threshold SNR from a BLER CSV")
    p.add_argument("--bler-csv", required=True, help="CSV written by evaluate/polar-sim")
    p.add_argument("--target", type=float, help="Target BLER (default eval.target_bler)")
    p.add_argument("--config", help="Config providing eval.target_bler")
    p.add_argument("--seed", type=int, help=argparse.SUPPRESS)

    p = sub.add_parser("bound", help="Shannon and finite-blocklength threshold SNR")
    p.add_argument("--rate", type=float, default=0.5, help="Rate in bits per channel use")
    p.add_argument(
        "--rates",
        type=lambda text: [float(v) for v in text.split(",")],
        help="Comma-separated rates for a threshold table",
    )
    p.add_argument("--n", type=int, default=32, help="Block length")
    p.add_argument("--pe", type=float, default=1e-3, help="Target block error probability")

    p = sub.add_parser("power", help="Complexity, power and energy efficiency")
    common(p)
    p.add_argument("--kind", choices=["walsh", "ti", "polar"], help="Converter/system kind")
    p.add_argument("--list-size", type=int, help="SCL list size for --kind polar")

    p = sub.add_parser("sweep", help="Hyperparameter sweep over sweep.<key> entries")
    common(p, config_required=True)
    workers(p)

    p = sub.add_parser("polar-sim", help="BLER curve of the Polar/SCL baseline")
    common(p)
    p.add_argument("--list-size", type=int, help="Override polar.list_size")
    workers(p)
    return parser


def run(argv):
    """
    Parse arguments and run one subcommand

    Returns:
        int: Exit code (0 ok, 1 config error, 2 unbracketed threshold,
        3 training aborted)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except CommandError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.code
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
