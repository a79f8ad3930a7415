"""``skelmap`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classify import evaluate, train_pipeline
from .config import RunConfig, load_config
from .errors import (ConfigError, DegenerateSkeleton, MalformedFile, ModelFormatError, ParseError,
                     SkelmapError, StreamError, ValidationError)
from .modelfile import load_model, save_model
from .segment import StreamState
from .skeleton import (FrameLayout, dataset_hash, default_topology, load_dataset, load_topology,
                       parse_jsonl_stream, split_dataset)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
DATA_ERRORS = (MalformedFile, ParseError, StreamError, DegenerateSkeleton, ValidationError,
               ModelFormatError, OSError, json.JSONDecodeError, KeyError, UnicodeDecodeError)

log = logging.getLogger("skelmap")


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(_parse_overrides(args.set))


def _layout(cfg: RunConfig) -> FrameLayout:
    return FrameLayout.real_and_screen() if cfg.data.layout == "msr40" else FrameLayout()


def _topology(cfg: RunConfig):
    return load_topology(cfg.data.topology) if cfg.data.topology else default_topology()


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_train(args) -> int:
    try:
        cfg = _run_config(args)
        topology = _topology(cfg)
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, f"config error: {exc}") from None
    except DATA_ERRORS as exc:
        raise _Fail(EXIT_CONFIG, f"config error: cannot load topology: {exc}") from None
    try:
        ds = load_dataset(args.data, topology, _layout(cfg))
        train, test = split_dataset(ds, cfg.split.train_fraction, cfg.split.seed)
        model = train_pipeline(train, cfg, topology)
    except DATA_ERRORS as exc:
        raise _Fail(EXIT_DATA, f"data error: {exc}") from None
    report = {"train": model.report, "n_sequences": len(ds), "n_test": len(test),
              "dataset_hash": dataset_hash(args.data)}
    if len(test):
        ev = evaluate(model, test)
        report.update(accuracy=ev["accuracy"], evaluation=ev)
    else:
        report["accuracy"] = None
    meta = {"dataset_hash": report["dataset_hash"], "skelmap_version": __version__,
            "seeds": {"split": cfg.split.seed, "first_map": cfg.first_map.seed,
                      "second_map": cfg.second_map.seed, "output": cfg.output.seed}}
    save_model(model, args.out, meta)
    _write_json(report, args.report or str(args.out) + ".report.json")
    log.info("model written to %s (test accuracy %s)", args.out, report["accuracy"])
    return EXIT_OK


def _load(args):
    try:
        return load_model(args.model)[0]
    except ModelFormatError as exc:
        raise _Fail(EXIT_DATA, f"model error: {exc}") from None


def cmd_eval(args) -> int:
    model = _load(args)
    try:
        ds = load_dataset(args.data, model.topology, _layout(model.config))
        report = evaluate(model, ds)
    except DATA_ERRORS as exc:
        raise _Fail(EXIT_DATA, f"data error: {exc}") from None
    _write_json(report, args.out)
    return EXIT_OK


def cmd_stream(args) -> int:
    model = _load(args)
    state = StreamState(model)
    out = sys.stdout
    try:
        opened = (contextlib.nullcontext(sys.stdin) if args.input in (None, "-")
                  else open(args.input, encoding="utf-8"))
        with opened as fh:
            for rec in parse_jsonl_stream(fh, model.topology.n_joints):
                ev = state.push(rec.frame, rec.index)
                if ev is not None:
                    out.write(json.dumps(ev.to_dict()) + "\n")
                    out.flush()
        for ev in state.flush():
            out.write(json.dumps(ev.to_dict()) + "\n")
    except DATA_ERRORS as exc:
        raise _Fail(EXIT_DATA, f"stream error: {exc}") from None
    return EXIT_OK


def umatrix(lattice) -> np.ndarray:
    """Mean weight distance from each neuron to its direct lattice neighbors."""
    w = lattice.weights
    total = np.zeros(lattice.shape)
    count = np.zeros(lattice.shape)
    d = np.linalg.norm(w[1:] - w[:-1], axis=2)
    total[1:] += d
    total[:-1] += d
    count[1:] += 1
    count[:-1] += 1
    d = np.linalg.norm(w[:, 1:] - w[:, :-1], axis=2)
    total[:, 1:] += d
    total[:, :-1] += d
    count[:, 1:] += 1
    count[:, :-1] += 1
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)


def cmd_inspect(args) -> int:
    model = _load(args)
    lattice = model.first_map if args.map == "first" else model.second_map
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out, lineterminator="\n")
        if args.what == "weights":
            writer.writerow(["row", "col"] + [f"w{k}" for k in range(lattice.dim)])
            for (i, j), v in zip(lattice.positions.astype(int), lattice.flat):
                writer.writerow([i, j] + [repr(float(x)) for x in v])
        elif args.what == "umatrix":
            writer.writerow(["row", "col", "value"])
            u = umatrix(lattice)
            for i in range(lattice.rows):
                for j in range(lattice.cols):
                    writer.writerow([i, j, repr(float(u[i, j]))])
        else:
            if not args.data:
                raise _Fail(EXIT_CONFIG, "inspect patterns needs --data")
            try:
                ds = load_dataset(args.data, model.topology, _layout(model.config))
                rows = [(s.source_id, s.label, model.pattern(s)) for s in ds]
            except DATA_ERRORS as exc:
                raise _Fail(EXIT_DATA, f"data error: {exc}") from None
            k = model.k
            writer.writerow(["source", "label"] + [f"{a}{n}" for n in range(k) for a in ("r", "c")])
            for sid, label, p in rows:
                writer.writerow([sid, label if label is not None else ""] + [repr(float(x)) for x in p])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import generate_dataset, write_dataset

    try:
        ds = generate_dataset(args.classes, args.per_class, args.seed, args.noise,
                              smoothing=args.smoothing)
    except ValidationError as exc:
        raise _Fail(EXIT_CONFIG, f"config error: {exc}") from None
    write_dataset(ds, args.out)
    log.info("wrote %d sequences to %s", len(ds), args.out)
    return EXIT_OK


def cmd_config(args) -> int:
    try:
        cfg = _run_config(args)
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, f"config error: {exc}") from None
    _write_json(cfg.to_dict(), None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skelmap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"skelmap {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp):
        sp.add_argument("--config", help="JSON run configuration (defaults if omitted)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value, e.g. first_map.kind=gg (repeatable)")

    sp = sub.add_parser("train", help="train a model on a dataset directory")
    config_args(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--report", help="training report path (default: <out>.report.json)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a model on a labeled dataset")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", help="evaluation JSON path (default: stdout)")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("stream", help="recognize actions in a JSON-lines frame stream")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", help="JSON-lines file (default: stdin)")
    sp.set_defaults(func=cmd_stream)

    sp = sub.add_parser("inspect", help="dump map data as CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("what", choices=("weights", "patterns", "umatrix"))
    sp.add_argument("--map", choices=("first", "second"), default="first")
    sp.add_argument("--data", help="dataset directory (patterns only)")
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("synth", help="write a synthetic skeleton dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--classes", type=int, default=5)
    sp.add_argument("--per-class", type=int, default=40)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=0.005, help="joint noise std in meters")
    sp.add_argument("--smoothing", type=float, default=2.0, help="temporal noise correlation in frames")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("config", help="print the effective configuration")
    config_args(sp)
    sp.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"skelmap: {exc}", file=sys.stderr)
        return exc.code
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except SkelmapError as exc:
        print(f"skelmap: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("unhandled", exc_info=True)
        print(f"skelmap: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
