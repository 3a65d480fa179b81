"""Command-line entry point: one argparse subcommand per experiment."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any

from mwgkernels import __version__
from mwgkernels.config import EXPERIMENTS, load_config
from mwgkernels.errors import ConfigError, MwgError
from mwgkernels.experiments import run_experiment

# ---------------------------------------------------------------------------
# Colours (ANSI, auto-disabled when not a tty)
# ---------------------------------------------------------------------------

_IS_TTY = hasattr(sys.stdout, "isatty") and sys.stdout.isatty()


def _c(code: str, text: str) -> str:
    if not _IS_TTY:
        return text
    return f"\033[{code}m{text}\033[0m"


def _green(t: str) -> str:
    return _c("32", t)

def _yellow(t: str) -> str:
    return _c("33", t)

def _red(t: str) -> str:
    return _c("31", t)

def _bold(t: str) -> str:
    return _c("1", t)

def _dim(t: str) -> str:
    return _c("2", t)


# ---------------------------------------------------------------------------
# Pretty-print a run summary
# ---------------------------------------------------------------------------

def _rate_style(rate: float) -> str:
    color_fn = _green if 0.15 <= rate <= 0.6 else _yellow
    return color_fn(f"{rate:.3f}")


def _print_summary(summary: dict[str, Any], output_dir: str) -> None:
    print()
    print(_bold(f"{summary['experiment']} (seed {summary['seed']})"))
    print(_dim("─" * 50))

    parameters = summary.get("parameters", {})
    if parameters:
        header = f"{'parameter':<12} {'mean':>12} {'sd':>10} {'95% interval':>26} {'ess':>8}"
        print(f"  {_bold(header)}")
        for name, stats in parameters.items():
            interval = f"[{stats['q025']:.4f}, {stats['q975']:.4f}]"
            print(
                f"  {name:<12} {stats['mean']:>12.4f} {stats['sd']:>10.4f} {interval:>26} {stats['ess']:>8.0f}"
            )
        print()

    rates = summary.get("acceptance_rates")
    if rates:
        print(f"  {_bold('acceptance')}")
        for slot, rate in rates.items():
            print(f"    {slot:<20} {_rate_style(rate)}")
        print()
    if "acceptance_rate" in summary:
        print(f"  {_bold('acceptance')} {_rate_style(summary['acceptance_rate'])}")
        print()

    for name, test in summary.get("ks", {}).items():
        verdict = _green("pass") if test["pvalue"] >= 0.01 else _red("fail")
        print(f"  KS {name:<10} D={test['statistic']:.4f}  p={test['pvalue']:.3f}  {verdict}")
    for name, inside in summary.get("truth_in_ci", {}).items():
        print(f"  truth {name:<8} {_green('inside 95% CI') if inside else _red('outside 95% CI')}")
    if "attack_rate" in summary:
        attack = ", ".join(f"{r:.2f}" for r in summary["attack_rate"])
        print(f"  attack rate by population: {attack}")
    for name, value in summary.get("rhat", {}).items():
        print(f"  R-hat {name:<10} {value:.3f}")

    if "wall_time" in summary:
        print(_dim(f"\n  wall time {summary['wall_time']:.1f}s"))
    print(_dim(f"  artifacts in {output_dir}"))
    print(_dim("─" * 50))


# ---------------------------------------------------------------------------
# Subcommand handler
# ---------------------------------------------------------------------------

def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _cmd_run(args: argparse.Namespace) -> int:
    """Resolve the config, run one experiment and print its summary."""
    try:
        cfg = load_config(
            config_path=args.config,
            cli_experiment=args.command,
            cli_seed=args.seed,
            cli_num_samples=args.num_samples,
            cli_output_dir=args.output_dir,
            cli_chains=args.chains,
        )
    except ConfigError as exc:
        print(_red(f"Error: {exc}"), file=sys.stderr)
        return 1

    errors = cfg.validate()
    if errors:
        for e in errors:
            print(_red(f"Error: {e}"), file=sys.stderr)
        return 1

    try:
        summary = run_experiment(cfg)
    except ConfigError as exc:
        print(_red(f"Error: {exc}"), file=sys.stderr)
        return 1
    except (MwgError, OSError) as exc:
        print(_red(f"Error: {exc}"), file=sys.stderr)
        return 2

    _print_summary(summary, cfg.output_dir)
    return 0


# ---------------------------------------------------------------------------
# Argument parser
# ---------------------------------------------------------------------------

_HELP = {
    "gaussian-mwg": "Two-stage Metropolis-within-Gibbs on a 2-D Gaussian mean",
    "metropolis-demo": "Full-space uniform Metropolis on the same Gaussian target",
    "sir-simulate": "Simulate a meta-population SIR epidemic",
    "sir-fit": "Fit infection rates and latent infection times from removals",
}


def _add_run_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", "-c", help="Config file (.json or .toml)")
    sub.add_argument("--seed", type=int, help="Root seed (unsigned 64-bit)")
    sub.add_argument("--num-samples", "-n", type=int, help="Number of MCMC iterations")
    sub.add_argument("--output-dir", "-o", help="Artifact directory (default: ./mwg-output)")
    sub.add_argument("--chains", type=int, help="Independent chains to run on worker threads")
    sub.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logs")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwg-kernels",
        description="Composable Metropolis-within-Gibbs samplers and their experiments",
    )
    parser.add_argument("-V", "--version", action="version", version=f"mwg-kernels {__version__}")

    subparsers = parser.add_subparsers(dest="command")
    for name in EXPERIMENTS:
        _add_run_options(subparsers.add_parser(name, help=_HELP[name]))

    return parser


# ---------------------------------------------------------------------------
# Main
# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> None:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors share the config-error exit code
        sys.exit(1 if exc.code else 0)

    if not args.command:
        parser.print_help()
        sys.exit(0)

    _configure_logging(args.verbose)
    sys.exit(_cmd_run(args))
