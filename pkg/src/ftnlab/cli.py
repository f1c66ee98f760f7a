"""Command-line entry point: ``ftnlab {train,eval,sweep,taps,mac-report,gradcheck}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

from . import dsp, harness
from . import receivers as rx
from .config import Config, load_config
from .errors import ConfigError, FormatError, MissingArtifactError, NumericalError, ParameterError
from .neural import Model, load_model, mac_count, save_model, train
from .neural.gradcheck import default_suite

log = logging.getLogger("ftnlab")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_MISSING = 0, 2, 3, 4
SNAPSHOT = "config.resolved.cfg"


def model_filename(kind: str, tau: float) -> str:
    return f"{kind}_tau{tau:.2f}.ftnm"


def _config(args) -> Config:
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.config is None:
        cfg = Config().apply_overrides(overrides)
    else:
        cfg = load_config(args.config, overrides)
    cfg.link()  # validate early
    return cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_model(cfg: Config, kind: str) -> Model:
    link = cfg.link()
    arch = cfg.cnn_arch() if kind == "cnn" else cfg.dnn_arch()
    l_in = link.n_s + 2 * link.n_pad
    shape = (l_in, 2) if kind == "cnn" else (1, 2 * l_in)
    meta = {"kind": kind, "tau": link.tau, "l_i": link.span, "n_s": link.n_s, "n_pad": link.n_pad, "m": link.m}
    return Model(cfg.model_specs(kind), shape, seed=arch.init_seed, meta=meta)


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out(args)
    cfg.write(out / SNAPSHOT)
    link, tcfg = cfg.link(), cfg.train_config(args.model)
    model = build_model(cfg, args.model)
    if args.dump_init:
        save_model(model, out / ("init_" + model_filename(args.model, link.tau)))
    sampler = rx.BlockSampler(link.taps(), link.n_s, link.n_pad, tcfg.esn0_range_db, link.m)
    gen = sampler.cnn_batch if args.model == "cnn" else sampler.dnn_batch
    start = time.time()

    def progress(epoch, loss, lr):
        if epoch % max(1, args.log_every) == 0:
            log.info("epoch %d loss %.5f lr %g (%.0f s)", epoch, loss, lr, time.time() - start)

    res = train(model, gen, tcfg, progress=progress)
    path = out / model_filename(args.model, link.tau)
    save_model(res.model, path)
    with (out / f"{args.model}_tau{link.tau:.2f}_history.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "lr"])
        for i, (loss, lr) in enumerate(zip(res.history, res.lr_history)):
            w.writerow([i, repr(loss), repr(lr)])
    print(f"{path}: best loss {res.best_loss:.6g} at epoch {res.best_epoch}, {len(res.history)} epochs")
    return EXIT_OK


def _load_models(cfg: Config, receivers, model_dir) -> dict:
    link = cfg.link()
    models = {}
    for kind in receivers:
        if kind not in ("cnn", "dnn"):
            continue
        path = Path(model_dir) / model_filename(kind, link.tau)
        if not path.is_file():
            raise MissingArtifactError(f"no {kind} model for tau={link.tau:.2f}: expected {path}")
        models[kind] = load_model(path)
    return models


def _model_dir(args, cfg):
    return args.model_dir or cfg.get("paths.model_dir") or args.out


def _run_sweep(args, theory: bool) -> int:
    cfg = _config(args)
    out = _out(args)
    cfg.write(out / SNAPSHOT)
    link = cfg.link()
    receivers = list(args.receivers.split(",")) if args.receivers else list(link.receivers)
    models = _load_models(cfg, receivers, _model_dir(args, cfg))

    def progress(r):
        log.info("%s %.2f dB: BER %.3g BLER %.3g (%d blocks)", r.receiver, r.ebn0_db, r.ber, r.bler, r.blocks)

    rows = harness.run_sweep(link, receivers, models, threads=args.threads, theory=theory, progress=progress)
    name = "sweep.csv" if theory else "eval.csv"
    harness.write_csv(rows, out / name)
    for r in rows:
        print(f"{r.receiver:12s} {r.ebn0_db:6.2f} dB  BER {r.ber:.4e}  BLER {r.bler:.4e}  TP {r.throughput_bps / 1e6:.3f} Mbps")
    return EXIT_OK


def cmd_sweep(args) -> int:
    return _run_sweep(args, theory=True)


def cmd_eval(args) -> int:
    return _run_sweep(args, theory=False)


def cmd_taps(args) -> int:
    cfg = _config(args)
    out = _out(args)
    cfg.write(out / SNAPSHOT)
    link = cfg.link()
    taps = link.taps()
    path = out / f"taps_tau{link.tau:.2f}.csv"
    taps.to_csv(path)
    print(f"tau={link.tau} L_I={taps.l_i}")
    for lag, g in zip(range(-taps.l_i, taps.l_i + 1), taps.taps):
        if lag >= 0:
            print(f"{lag:4d} {g: .8f}")
    return EXIT_OK


def cmd_mac_report(args) -> int:
    cfg = _config(args)
    out = _out(args)
    cfg.write(out / SNAPSHOT)
    n_s = cfg.link().n_s
    rows = []
    for kind in ("cnn", "dnn"):
        model = build_model(cfg, kind)
        macs = mac_count(model)
        rows.append((kind, macs, macs / n_s, model.n_params()))
    with (out / "mac_report.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "macs", "macs_per_symbol", "parameters"])
        w.writerows(rows)
    for kind, macs, per, params in rows:
        print(f"{kind}: {macs} MACs per block, {per:.1f} per symbol, {params} parameters")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = default_suite(args.precision, seed=args.seed or 0)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name:10s} max rel error {r.max_rel_error:.3e} (threshold {r.threshold:g})")
    if failed:
        print("gradient check failed for: " + ", ".join(r.name for r in failed), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="set a config value; KEY is section.key or an unqualified key (repeatable)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="master seed (sets every seed key)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; 1 is bit-reproducible")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ftnlab", description="FTN link-level simulator with neural receivers")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", parents=[common], help="train a CNN or DNN receiver")
    p.add_argument("--model", choices=("cnn", "dnn"), default="cnn")
    p.add_argument("--dump-init", action="store_true", help="also write the untrained model")
    p.add_argument("--log-every", type=int, default=50)
    p.set_defaults(func=cmd_train, needs_config=True)

    for verb, func, text in (("eval", cmd_eval, "receiver BER/BLER over the grid"),
                             ("sweep", cmd_sweep, "full sweep with AWGN reference rows")):
        p = sub.add_parser(verb, parents=[common], help=text)
        p.add_argument("--receivers", help="comma-separated subset of med,fde,dnn,cnn")
        p.add_argument("--model-dir", help="directory holding trained model files")
        p.set_defaults(func=func, needs_config=True)

    p = sub.add_parser("taps", parents=[common], help="write the ISI taps for the configured tau")
    p.set_defaults(func=cmd_taps, needs_config=False)
    p = sub.add_parser("mac-report", parents=[common], help="MAC counts of the CNN and DNN")
    p.set_defaults(func=cmd_mac_report, needs_config=False)
    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of every layer")
    p.add_argument("--precision", choices=("standard", "high"), default="standard")
    p.set_defaults(func=cmd_gradcheck, needs_config=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.needs_config and args.config is None:
        print(f"error: {args.verb} requires --config", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (MissingArtifactError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ParameterError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
