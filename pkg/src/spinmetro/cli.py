"""Command-line entry point: ``spinmetro {evolve,squeeze,fisher,husimi,validate}``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 identity validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, pipeline
from .config import load_config
from .errors import ConfigError, SpinMetroError
from .squeezing import FAMILIES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment JSON file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const="exact", help="exact expectation values (default)")
    mode.add_argument("--sampled", dest="mode", action="store_const", const="sampled", help="shot-sampled estimates")
    common.add_argument(
        "--family", action="append", choices=sorted(FAMILIES), help="operator family; repeat for several"
    )
    common.add_argument("--workers", type=int, help="thread-pool size (default: available cores)")

    p = argparse.ArgumentParser(prog="spinmetro", description="Collective-spin metrology simulations.")
    p.add_argument("--version", action="version", version=f"spinmetro {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("evolve", parents=[common], help="mean spin and QFI along the trajectory")
    sub.add_parser("squeeze", parents=[common], help="squeezing parameters per family")
    sub.add_parser("fisher", parents=[common], help="Hellinger-distance Fisher information")
    sub.add_parser("husimi", parents=[common], help="Husimi Q function on a sphere grid")
    v = sub.add_parser("validate", parents=[common], help="check moment-reconstruction identities")
    v.add_argument("--n-list", type=int, nargs="+", help="qubit numbers to test")
    v.add_argument("--trials", type=int, help="random states per qubit number")
    return p


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "mode": args.mode,
        "families": args.family,
        "workers": args.workers,
    }


def _validate(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config, _overrides(args))
        n_list, trials, seed = cfg.validate["n_list"], cfg.validate["trials"], cfg.seed
        out = Path(args.out) if args.out else Path(cfg.output_dir)
        header = pipeline.header_line(cfg)
    else:
        n_list, trials, seed = [2, 3, 4, 5, 6], 50, 0
        seed = args.seed if args.seed is not None else seed
        out = Path(args.out) if args.out else Path("out")
        header = f"# spinmetro {__version__} seed={seed} mode=exact\n"
    n_list = args.n_list or n_list
    trials = args.trials or trials
    if any(n < 1 for n in n_list) or trials < 1:
        raise ConfigError("validate", "n_list entries and trials must be positive")
    out.mkdir(parents=True, exist_ok=True)
    res = pipeline.validate_identities(n_list, trials, seed, out_path=out / "identities.csv", header=header)
    bad = {k: r for k, r in res.items() if not (np.isfinite(r) and r <= pipeline.IDENTITY_TOL)}
    print(f"{len(res) - len(bad)}/{len(res)} identities within {pipeline.IDENTITY_TOL:g}  ({out / 'identities.csv'})")
    for name, r in sorted(bad.items()):
        print(f"FAIL {name}: max residual {r:.3e}", file=sys.stderr)
    return EXIT_VALIDATION if bad else EXIT_OK


_RUNNERS = {
    "evolve": pipeline.run_evolve,
    "squeeze": pipeline.run_squeezing,
    "fisher": pipeline.run_fisher,
    "husimi": pipeline.run_husimi,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _validate(args)
        if args.config is None:
            raise ConfigError("--config", f"required for '{args.command}'")
        cfg = load_config(args.config, _overrides(args))
        result = _RUNNERS[args.command](cfg, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpinMetroError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    paths = result if isinstance(result, list) else [result]
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
