"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input-data error, 3 training did
not converge, 4 I/O error (missing files, unreadable or corrupt models,
refusing to overwrite), 5 netlist self-check failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codes import AmbiguousCodebookError
from .config import ConfigError, load_config
from .evolution import StageError, train
from .harness import (
    EvalReport, ModelFormatError, dumps_model, evaluate, fault_sweep, load_model, sweep_csv,
)
from .imaging import GlyphError, export_glyphs, load_glyphs
from .netlist import SelfCheckError, parse_netlist, self_check, to_netlist

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_IO, EXIT_SELFCHECK = 0, 2, 3, 4, 5

log = logging.getLogger("memnet")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class OutputDir:
    """Collects files written by one command and records them in a manifest."""

    def __init__(self, path, force: bool, command: list[str]):
        self.path = Path(path)
        self.force = force
        self.command = command
        self.files: dict[str, str] = {}
        self.path.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        target = self.path / name
        if target.exists() and not self.force:
            raise CliError(EXIT_IO, f"{target} exists (use --force to overwrite)")
        target.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        return target

    def close(self, **meta):
        manifest = {"memnet": __version__, "command": self.command, "files": self.files, **meta}
        target = self.path / "manifest.json"
        if target.exists() and not self.force:
            raise CliError(EXIT_IO, f"{target} exists (use --force to overwrite)")
        target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_model(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        raise CliError(EXIT_IO, f"model file {path} not found") from None
    except ModelFormatError as exc:
        raise CliError(EXIT_IO, f"{path}: {exc}") from None


def _load_config(path):
    try:
        return load_config(path)
    except FileNotFoundError:
        raise CliError(EXIT_IO, f"config file {path} not found") from None
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"config error at {exc}") from None


def _glyphs(source):
    try:
        return load_glyphs(source)
    except GlyphError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out = OutputDir(args.out, args.force, sys.argv)
    glyphs = _glyphs(cfg.glyphs)
    try:
        model = train(cfg.arch, glyphs, seed, cfg.selection, cfg.genetic, cfg.refine, cfg.value_range)
    except StageError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    out.write("train.log", "\n".join(model.log) + "\n")
    out.write("model.txt", dumps_model(model))
    out.close(seed=seed, converged=model.converged, final_abe=model.final_abe,
              min_spacing=model.min_spacing, iterations=model.iterations)
    print(f"converged={model.converged} final_abe={model.final_abe:.4f} "
          f"min_spacing={model.min_spacing} iterations={model.iterations}")
    return EXIT_OK if model.converged else EXIT_NOT_CONVERGED


def _print_report(rep: EvalReport):
    print(f"accuracy={rep.accuracy:.6f} abe={rep.abe:.6f} max_bit_error={rep.max_bit_error} "
          f"rejects={rep.rejects} samples={rep.n_samples}")


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    cfg = _load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    protocol = cfg.test
    if args.n_sets:
        protocol = type(protocol)(protocol.dist, args.n_sets)
    out = OutputDir(args.out, args.force, sys.argv)
    try:
        rep = evaluate(model, _glyphs(cfg.glyphs), protocol, seed, workers=args.threads)
    except AmbiguousCodebookError as exc:
        raise CliError(EXIT_CONFIG, f"{args.model}: {exc}") from None
    out.write("report.txt", rep.to_text())
    out.write("report.csv", rep.to_csv())
    out.close(seed=seed, accuracy=rep.accuracy, abe=rep.abe, max_bit_error=rep.max_bit_error)
    _print_report(rep)
    return EXIT_OK


def _parse_rates(text: str) -> list[float]:
    try:
        rates = [float(r) for r in text.split(",") if r.strip()]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"bad --rates list {text!r}") from None
    if not rates or any(b < a for a, b in zip(rates, rates[1:])):
        raise CliError(EXIT_CONFIG, "--rates must be a nonempty ascending list")
    if any(not 0 <= r <= 1 for r in rates):
        raise CliError(EXIT_CONFIG, "--rates must lie in [0, 1]")
    return rates


def cmd_fault_sweep(args) -> int:
    rates = _parse_rates(args.rates)
    model = _load_model(args.model)
    cfg = _load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    protocol = cfg.test
    if args.n_sets:
        protocol = type(protocol)(protocol.dist, args.n_sets)
    out = OutputDir(args.out, args.force, sys.argv)
    try:
        rows = fault_sweep(model, _glyphs(cfg.glyphs), protocol, rates, args.reps, seed,
                           kind=args.kind or cfg.fault_kind, workers=args.threads)
    except AmbiguousCodebookError as exc:
        raise CliError(EXIT_CONFIG, f"{args.model}: {exc}") from None
    text = sweep_csv(rows)
    out.write("fault_sweep.csv", text)
    out.close(seed=seed)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_export_netlist(args) -> int:
    model = _load_model(args.model)
    net = model.network
    nl = to_netlist(net)
    text = nl.to_text()
    # Self-check the emitted text, not the in-memory object.
    parsed = parse_netlist(text)
    rng = np.random.default_rng(args.seed)
    inputs = rng.integers(0, 2, size=(args.check_inputs, model.arch.n_inputs))
    try:
        worst = self_check(parsed, net, inputs)
    except SelfCheckError as exc:
        raise CliError(EXIT_SELFCHECK, f"netlist self-check failed: {exc}") from None
    out = OutputDir(args.out, args.force, sys.argv)
    out.write("netlist.cir", text)
    out.close(resistors=len(nl.resistors), inverters=len(nl.inverters),
              self_check_inputs=args.check_inputs, self_check_max_rel_err=worst)
    print(f"resistors={len(nl.resistors)} inverters={len(nl.inverters)} "
          f"self_check_max_rel_err={worst:.3g}")
    return EXIT_OK


def cmd_glyphs(args) -> int:
    if args.export:
        paths = export_glyphs(load_glyphs("builtin"), args.export)
        print(f"wrote {len(paths)} glyphs to {args.export}")
        return EXIT_OK
    if not Path(args.validate).is_dir():
        raise CliError(EXIT_IO, f"{args.validate} is not a directory")
    g = _glyphs(args.validate)
    print(f"ok: {len(g)} glyphs, {g.shape[1]}x{g.shape[0]}, binary")
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = _load_model(args.model)
    a = model.arch
    print(f"arch        {a.n_inputs} inputs, fan-ins {list(a.fan_ins)}, {a.n_outputs} outputs")
    print(f"genes       {len(model.rset)}")
    print(f"seed        {model.seed}")
    print(f"converged   {model.converged} after {model.iterations} iterations")
    print(f"final ABE   {model.final_abe:.4f}")
    print(f"min spacing {model.min_spacing}")
    sys.stdout.write(model.codebook.to_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1, help="worker cap; never changes results")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
            sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    t = sub.add_parser("train", help="run the evolutionary training")
    t.add_argument("config")
    common(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a model under the test protocol")
    e.add_argument("model")
    e.add_argument("config")
    e.add_argument("--n-sets", type=int, default=None)
    common(e)
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("fault-sweep", help="accuracy versus resistor fault rate")
    f.add_argument("model")
    f.add_argument("--config", required=True)
    f.add_argument("--rates", required=True, help="ascending comma-separated list")
    f.add_argument("--reps", type=int, default=10)
    f.add_argument("--kind", choices=("open", "short", "random"), default=None)
    f.add_argument("--n-sets", type=int, default=None)
    common(f)
    f.set_defaults(func=cmd_fault_sweep)

    n = sub.add_parser("export-netlist", help="write a SPICE-like netlist and self-check it")
    n.add_argument("model")
    n.add_argument("--check-inputs", type=int, default=100)
    common(n)
    n.set_defaults(func=cmd_export_netlist, seed=0)

    g = sub.add_parser("glyphs", help="export or validate a glyph directory")
    grp = g.add_mutually_exclusive_group(required=True)
    grp.add_argument("--export", metavar="DIR")
    grp.add_argument("--validate", metavar="DIR")
    g.set_defaults(func=cmd_glyphs)

    i = sub.add_parser("inspect", help="summarise a model file")
    i.add_argument("model")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"memnet: error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"memnet: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
