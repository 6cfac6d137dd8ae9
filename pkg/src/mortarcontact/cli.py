"""Command-line entry point.

Exit codes: 0 on success, 1 when a solve fails, 2 for unreadable or invalid
input and unwritable output.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .contact import ContactInfeasible
from .geometry import GeometryError
from .solver import SolverError

EXIT_OK, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("mortarcontact")


def _triple(text: str):
    try:
        v = tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a,b,c integers, got {text!r}") from exc
    if len(v) != 3 or min(v) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers, got {text!r}")
    return v


def _common(p: argparse.ArgumentParser, default_out: Optional[str]):
    p.add_argument("--out", default=default_out, help="output directory")
    p.add_argument("--seq", action="store_true",
                   help="deterministic sequential mode (no timings in written files)")
    p.add_argument("--dry-run", action="store_true", help="validate and print the resolved configuration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mortarcontact", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve a scene file")
    p.add_argument("scene")
    _common(p, None)

    p = sub.add_parser("patch-test", help="stacked-block stress transfer test")
    p.add_argument("--kappa", type=float, default=1e6)
    p.add_argument("--div-bottom", type=_triple, default=(5, 5, 2))
    p.add_argument("--div-top", type=_triple, default=(4, 4, 2))
    p.add_argument("--pressure", type=float, default=10.0)
    p.add_argument("--load-steps", type=int, default=1)
    _common(p, "out/patch")

    p = sub.add_parser("hertz", help="sphere-on-block Hertz comparison")
    p.add_argument("--refine", type=float, default=1.0)
    p.add_argument("--load-steps", type=int, default=10)
    p.add_argument("--kappa", type=float, default=None)
    _common(p, "out/hertz")

    p = sub.add_parser("embed", help="replay surface frames on a visual mesh")
    p.add_argument("rest")
    p.add_argument("visual")
    p.add_argument("frames", nargs="+")
    p.add_argument("--refinement-study", action="store_true",
                   help="also report the bending-field refinement error ratios")
    _common(p, "out/embed")
    return ap


def _print_items(items):
    for k, v in items:
        print(f"{k}={v}")


def _cmd_run(args):
    from .bench.runner import run_scene
    from .bench.scene import parse_scene
    cfg = parse_scene(args.scene)
    if args.dry_run:
        print(cfg.to_text(), end="")
        return EXIT_OK
    run = run_scene(cfg, out_dir=args.out, seq=args.seq)
    last = run.steps[-1]
    _print_items([("steps", len(run.steps)), ("total_iterations", sum(r.iterations for r in run.steps)),
                  ("final_residual", last.residual), ("output", args.out or cfg.output["dir"])])
    return EXIT_OK


def _cmd_patch(args):
    from .bench.patch import patch_config, report_lines, run_patch_test
    if tuple(args.div_bottom) == tuple(args.div_top):
        raise ValueError("--div-bottom and --div-top must differ (non-matching interface)")
    if args.dry_run:
        cfg = patch_config(args.kappa, args.div_bottom, args.div_top, args.pressure, args.load_steps, args.out)
        print(cfg.to_text(), end="")
        return EXIT_OK
    rep, _ = run_patch_test(args.kappa, args.div_bottom, args.div_top, args.pressure, args.load_steps,
                            out_dir=args.out, seq=args.seq)
    _print_items(report_lines(rep))
    return EXIT_OK


def _cmd_hertz(args):
    from .bench.hertz import KAPPA, hertz_config, run_hertz
    kappa = KAPPA if args.kappa is None else args.kappa
    if args.dry_run:
        print(hertz_config(args.refine, args.load_steps, kappa, args.out).to_text(), end="")
        return EXIT_OK
    summ, _ = run_hertz(args.refine, args.load_steps, kappa, out_dir=args.out, seq=args.seq)
    _print_items(summ.items())
    return EXIT_OK


def _cmd_embed(args):
    from .bench.embed import run_embed
    from .meshio import read_obj
    if args.dry_run:
        for path in [args.rest, args.visual, *args.frames]:
            read_obj(path)
        _print_items([("rest", args.rest), ("visual", args.visual), ("frames", ",".join(args.frames)),
                      ("out", args.out)])
        return EXIT_OK
    extra = []
    if args.refinement_study:
        from .mapper import refinement_study
        h, err, ratio = refinement_study()
        extra = [("refinement.h", ",".join(repr(float(t)) for t in h)),
                 ("refinement.errors", ",".join(repr(float(t)) for t in err)),
                 ("refinement.ratios", ",".join(repr(float(t)) for t in ratio))]
    rep = run_embed(args.rest, args.visual, args.frames, out_dir=args.out, extra_items=extra)
    _print_items(rep.items() + extra)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "patch-test": _cmd_patch, "hertz": _cmd_hertz, "embed": _cmd_embed}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SolverError, ContactInfeasible) as exc:
        print(f"error: solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
