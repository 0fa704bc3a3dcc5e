"""Command line entry point: ``mnomarket <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config
from .energy import ConvergenceError, InfeasibleLoadError
from .market import clearinghouse_round, pmd_match, welfare_oracle
from .reference import (ProbeReport, misreport_probe, pmd_scan_reference, random_book,
                        random_market)

log = logging.getLogger("mnomarket")


def _loads(text: str):
    out = []
    for part in text.split(","):
        part = part.strip()
        out.append(float(part[:-1]) / 100.0 if part.endswith("%") else float(part))
    return tuple(out)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(delta_l=args.delta_l, e_tr=args.e_tr, mno_count=args.mnos,
                              loads=args.loads)


def _emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_cost_curve(args):
    cfg = _config(args)
    _emit(ex.run_cost_curve(cfg), args.out or cfg.output_path)


def cmd_sweep(args):
    cfg = _config(args)
    _emit(ex.run_equal_load_sweep(cfg).to_csv(), args.out or cfg.output_path)


def cmd_scenario(args):
    cfg = _config(args)
    if not cfg.loads:
        raise ConfigError("loads: scenario needs --loads or a 'loads' key")
    result, outcome = ex.run_scenario(cfg)
    text = result.to_csv() + "\n" + ex.outcome_csv(outcome, dict(enumerate(cfg.loads)))
    _emit(text, args.out or cfg.output_path)


def cmd_rounds(args):
    cfg = _config(args)
    if args.trace:
        with open(args.trace, encoding="utf-8") as fh:
            trace = ex.read_trace_csv(fh.read())
    else:
        trace = ex.sinusoidal_trace(cfg.mno_count, cfg.rounds)
    _emit(ex.run_rounds(cfg, trace).to_csv(), args.out or cfg.output_path)


def run_selftest(seed: int = 0, n_books: int = 1000, n_markets: int = 200):
    """Randomized mechanism checks; returns ``(name, passed, detail)`` triples."""
    rng = np.random.default_rng(seed)
    mismatches = deficits = irrational = 0
    probe = ProbeReport()
    for k in range(n_books):
        bids, asks = random_book(rng, quantum=0.5 if k % 3 == 0 else None)
        res = pmd_match(bids, asks)
        if res != pmd_scan_reference(bids, asks):
            mismatches += 1
        if res.auctioneer_surplus < -1e-12:
            deficits += 1
        if any(o.value < res.buyer_price for o in res.winning_bids) or any(
                o.value > res.seller_price for o in res.winning_asks):
            irrational += 1
        misreport_probe(bids, asks, step=0.5, report=probe)
    above = negative = 0
    gap = total = 0.0
    for _ in range(n_markets):
        states = random_market(rng)
        ch, best = clearinghouse_round(states), welfare_oracle(states)
        above += ch.welfare > best.welfare + 1e-9
        negative += ch.welfare < -1e-9
        gap += best.welfare - ch.welfare
        total += best.welfare
    return [
        ("pmd matches scan reference", mismatches == 0, f"{mismatches}/{n_books} differ"),
        ("budget balance", deficits == 0, f"{deficits} deficits"),
        ("individual rationality", irrational == 0, f"{irrational} violations"),
        ("misreport probes", probe.strict_gains == 0,
         f"{probe.strict_gains}/{probe.probes} strict gains"),
        ("clearinghouse <= oracle", above == 0, f"{above} above oracle"),
        ("clearinghouse >= 0", negative == 0, f"{negative} negative"),
        ("mean welfare gap <= 10%", total == 0 or gap <= 0.1 * total,
         f"gap {gap / max(total, 1e-300):.2%} of oracle welfare"),
    ]


def cmd_selftest(args):
    results = run_selftest(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if not all(ok for _, ok, _ in results):
        raise SelftestFailure("one or more property checks failed")


class SelftestFailure(RuntimeError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mnomarket",
                                     description="Inter-operator energy-saving market simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out", help="write CSV here instead of stdout")
    common.add_argument("--delta-l", type=float, help="tradable load unit")
    common.add_argument("--e-tr", type=float, help="per-unit transfer energy (W)")
    common.add_argument("--mnos", type=int, help="number of operators")
    common.add_argument("--loads", type=_loads, help="comma separated loads, e.g. 0.9,85%%")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized probes")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in [
        ("cost-curve", cmd_cost_curve, "energy versus load table"),
        ("sweep", cmd_sweep, "equal-load savings sweep"),
        ("scenario", cmd_scenario, "single round at given loads"),
        ("rounds", cmd_rounds, "repeated rounds along a load trace"),
        ("selftest", cmd_selftest, "randomized mechanism property checks"),
    ]:
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.set_defaults(func=func)
        if name == "rounds":
            p.add_argument("--trace", help="CSV of per-round loads, one column per operator")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (InfeasibleLoadError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 3
    except (ConvergenceError, ArithmeticError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 5
    except SelftestFailure as e:
        print(f"selftest failure: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
