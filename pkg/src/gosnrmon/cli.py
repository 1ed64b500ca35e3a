"""Command-line interface: ``gosnrmon {simulate,estimate,run,preset}``.

Exit codes: 0 ok, 2 configuration error, 3 runtime error, 4 completed with
flagged points (clamped or invalid gOSNR values, unreliable decisions).
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from ._validation import InvalidArgumentError, InvalidConfigError
from .scenario import PRESETS, load_config, preset, run, simulate
from .waveform import decode_fpwv, encode_fpwv

log = logging.getLogger("gosnrmon")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_FLAGGED = 0, 2, 3, 4


def _add_scenario_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="scenario config (JSON)")
    src.add_argument("--preset", choices=PRESETS, help="named preset")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--blocks", type=int, help="number of blocks (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--pin", type=float, help="preset: launch power in dBm")
    p.add_argument("--set-snr", type=float, help="preset: set-SNR in dB")
    p.add_argument("--injection-span", type=int, default=4, help="preset fig2a/fig2b: injection span")
    p.add_argument("--neighbor-power", type=float, default=8.0, help="preset xpm: neighbour power in dBm")
    p.add_argument("--no-point-loss", action="store_true", help="preset pointloss: baseline without the loss")


def _scenario(args):
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config: {exc}", str(args.config)) from None
        cfg = load_config(text)
    else:
        cfg = preset(args.preset, pin_dbm=args.pin, set_snr_db=args.set_snr,
                     injection_span=args.injection_span, neighbor_power_dbm=args.neighbor_power,
                     point_loss=not args.no_point_loss)
    cfg = cfg.with_overrides(seed=args.seed, blocks=args.blocks,
                             outputs=None if args.out is None else str(args.out))
    if cfg.outputs is None:
        raise InvalidConfigError("no output directory (set outputs or pass --out)", "outputs")
    return cfg


def _out_dir(cfg):
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_result(result, out):
    paths = {}
    for name, text in result.artifacts.items():
        (out / name).write_text(text)
        paths[name] = str(out / name)
    manifest = dict(result.manifest, artifact_paths=paths)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for d in result.config.deviations:
        log.info("deviation: %s", d)
    print(f"wrote {len(paths)} artifacts + manifest.json to {out}")
    print(f"span gOSNR (dB): {', '.join('nan' if g is None else f'{g:.2f}' for g in manifest['span_gosnr_db'])}")
    if result.flagged:
        print(f"{result.manifest['flagged_points']} flagged grid points; flags: {result.manifest['flags']}")
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_run(args):
    cfg = _scenario(args)
    out = _out_dir(cfg)
    return _write_result(run(cfg, workers=args.workers, svg=args.svg), out)


def cmd_simulate(args):
    cfg = _scenario(args)
    out = _out_dir(cfg)
    files = []
    for b, w in simulate(cfg):
        name = f"block_{b:03d}.fpwv"
        (out / name).write_bytes(encode_fpwv(w))
        files.append(name)
        log.info("block %d written", b)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(files)} waveform files + config.json to {out}")
    return EXIT_OK


def cmd_estimate(args):
    cfg = _scenario(args)
    inputs = sorted(args.input.glob("block_*.fpwv")) if args.input.is_dir() else [args.input]
    if not inputs:
        raise InvalidConfigError("no block_*.fpwv files found", str(args.input))
    waves = [decode_fpwv(p.read_bytes()) for p in inputs]
    out = _out_dir(cfg)
    return _write_result(run(cfg, svg=args.svg, waveforms=waves), out)


def cmd_preset(args):
    if args.action == "list":
        for name in PRESETS:
            print(name)
        return EXIT_OK
    if args.name is None:
        raise InvalidConfigError("preset show needs a name", "preset")
    print(json.dumps(preset(args.name).to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gosnrmon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate, receive and estimate end to end")
    _add_scenario_args(p)
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    p.add_argument("--workers", type=int, default=1, help="processes for block fan-out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="propagate blocks and write FPWV waveform files")
    _add_scenario_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate profiles from FPWV waveform files")
    _add_scenario_args(p)
    p.add_argument("--in", dest="input", type=Path, required=True,
                   help="FPWV file or directory of block_*.fpwv files")
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("preset", help="list presets or show one as JSON")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?", choices=PRESETS)
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidArgumentError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
