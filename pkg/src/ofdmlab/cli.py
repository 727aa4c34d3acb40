"""Command-line surface: capture, train, eval, curve, info.

Exit codes: 0 success, 2 configuration error, 3 file-format error,
4 numeric error.
"""

import argparse
import dataclasses
import json
import sys

from . import channel as chan
from . import dataset as ds
from . import evaluate as ev
from . import rx_neural
from .errors import ConfigError, FormatError, NumericError, OfdmLabError, ParameterError
from .frame import Numerology, PilotReference

EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4


def _build_from_dict(cls, data: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in section {section!r}: {sorted(unknown)}")
    tuple_fields = {f.name for f in dataclasses.fields(cls)
                    if f.type in ("tuple", tuple) or "tuple" in str(f.type)}
    kwargs = {k: tuple(v) if k in tuple_fields and isinstance(v, list) else v
              for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ParameterError) as exc:
        raise ConfigError(f"invalid section {section!r}: {exc}") from exc


def load_config(path):
    """JSON config with sections numerology, scenario, net, train; unknown
    keys are rejected."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {"numerology", "scenario", "net", "train", "pilot_seed", "channel_mode"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    scenario_raw = dict(raw.get("scenario", {}))
    if scenario_raw.pop("mixture", False):
        scenario_raw["model"] = "mixture"
    return {
        "numerology": _build_from_dict(Numerology, raw.get("numerology", {}), "numerology"),
        "scenario": _build_from_dict(chan.ChannelScenario, scenario_raw, "scenario"),
        "net": _build_from_dict(rx_neural.NetConfig, raw.get("net", {}), "net"),
        "train": _build_from_dict(rx_neural.TrainConfig, raw.get("train", {}), "train"),
        "pilot_seed": raw.get("pilot_seed", 0),
        "channel_mode": raw.get("channel_mode", "tdl"),
    }


def _cmd_capture(args):
    cfg = load_config(args.config)
    header, manifest = ds.capture(
        cfg["scenario"], args.n_tti, args.seed, args.out,
        num=cfg["numerology"], pilot_seed=cfg["pilot_seed"],
        channel_mode=cfg["channel_mode"],
        progress=lambda i, n: print(f"captured {i}/{n}", file=sys.stderr))
    print(f"wrote {header.n_tti} TTIs to {args.out} "
          f"({len(manifest['skipped'])} skipped)")
    return 0


def _cmd_train(args):
    cfg = load_config(args.config)
    train_cfg = cfg["train"]
    if args.iters is not None:
        train_cfg = dataclasses.replace(train_cfg, max_iterations=args.iters)
    val_records = None
    if args.val is not None:
        with ds.read_dataset(args.val) as reader:
            val_records = [(r.grid, r.bits, r.sinr_db) for r in reader]
    result = rx_neural.train(
        cfg["net"], train_cfg, cfg["scenario"], num=cfg["numerology"],
        pilots=PilotReference.from_seed(cfg["pilot_seed"], cfg["numerology"]),
        val_records=val_records, checkpoint_path=str(args.out) + ".ckpt",
        progress=lambda it, loss: print(f"iter {it}: loss {loss:.4f}", file=sys.stderr))
    opt = None
    rx_neural.save_model(args.out, cfg["net"], result.net, opt)
    trace = {"train_loss": result.train_loss, "val_loss": result.val_loss,
             "snr_weighting": train_cfg.snr_weighting, "seed": train_cfg.seed,
             "worker_count": 1}
    with open(str(args.out) + ".trace.json", "w") as fh:
        json.dump(trace, fh)
    print(f"trained {train_cfg.max_iterations} iterations -> {args.out}")
    return 0


def _cmd_eval(args):
    points = ev.evaluate(args.dataset, args.receiver, model_path=args.model,
                         out_csv=args.out)
    for p in points:
        flag = " (low confidence)" if p.low_confidence else ""
        print(f"{p.receiver} @ {p.sinr_bin_db:g} dB: ber {p.ber:.3e} "
              f"({p.n_errors}/{p.n_bits}){flag}")
    return 0


def _cmd_curve(args):
    ev.curve(args.inputs, args.out, out_csv=args.merged_csv)
    print(f"wrote {args.out}")
    return 0


def _cmd_info(args):
    with ds.read_dataset(args.dataset) as reader:
        h = reader.header
        print(f"n_tti: {h.n_tti}")
        print(f"flags: {h.flags} (waveform: {h.has_waveform})")
        print(f"seed: {h.seed}")
        print(f"numerology: {h.numerology}")
        print(f"scenario: {json.dumps(h.scenario, sort_keys=True)}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ofdmlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", help="generate a simulated capture dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--n-tti", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_capture)

    p = sub.add_parser("train", help="train the neural receiver")
    p.add_argument("--config", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="BER-vs-SINR evaluation on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--receiver", required=True, choices=["classic", "neural", "genie"])
    p.add_argument("--model", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("curve", help="merge result CSVs into a BER curve plot")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--merged-csv", default=None)
    p.set_defaults(fn=_cmd_curve)

    p = sub.add_parser("info", help="print dataset header")
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=_cmd_info)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OfdmLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
