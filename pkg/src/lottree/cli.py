"""Command-line front end.

Exit status: 0 when every expectation is met, 1 when a property that
should hold is violated, 2 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

from . import cpt as cptmod
from .lottery import PiParams, lottery_values, parse_rescaling
from .mechanisms import MechanismSpec
from .oracles import PROPERTIES, TreeFamily, run_suite
from .sim import campaign, metrics
from .tree import TreeError, read_tree

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    # None means "use the default" (or the config file's value for simulate)
    p.add_argument("--pi-beta", type=float)
    p.add_argument("--pi-delta", type=float)
    p.add_argument("--cpt-alpha", type=float)
    p.add_argument("--cpt-gamma", type=float)
    p.add_argument("--budget", type=float, action="append")
    p.add_argument("--k", type=int, action="append")
    p.add_argument("--strategy", choices="ABCD", action="append")
    p.add_argument("--rescaling", choices=("none", "structure", "time", "first-is-root"), default="first-is-root")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lottree", description="Incentive-tree mechanisms: lotteries, property checks, CPT sweeps, simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lottery", help="lottery values for a tree file")
    p.add_argument("tree")
    _common(p)

    p = sub.add_parser("verify", help="run the property checks over all small trees")
    p.add_argument("--max-nodes", type=int, default=6)
    p.add_argument("--contributions", default="1,2,5,10")
    p.add_argument("--mechanism", choices=("1-pachira", "k-pachira", "sharing-pachira"), action="append")
    p.add_argument("--property", choices=PROPERTIES, action="append")
    _common(p)

    p = sub.add_parser("cpt-sweep", help="perceived reward against lottery value")
    p.add_argument("--step", type=float, default=0.01)
    _common(p)

    p = sub.add_parser("simulate", help="solicitations needed against participants required")
    p.add_argument("config", nargs="?")
    p.add_argument("--n-min", type=int, default=5)
    p.add_argument("--n-max", type=int, default=50)
    _common(p)

    p = sub.add_parser("metrics", help="participation metrics from raw records")
    p.add_argument("records")
    p.add_argument("--find-bonus", action="store_true")
    _common(p)
    return parser


DEFAULTS = {"pi_beta": 0.5, "pi_delta": 0.08, "cpt_alpha": 0.88, "cpt_gamma": 0.61}


def _opt(args, name):
    value = getattr(args, name)
    return DEFAULTS[name] if value is None else value


def _pi(args) -> PiParams:
    try:
        return PiParams(_opt(args, "pi_beta"), _opt(args, "pi_delta"))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_lottery(args) -> int:
    tree = read_tree(args.tree)
    strategy = parse_rescaling(args.rescaling)
    profile = strategy.apply(lottery_values(tree, _pi(args)), tree)
    _write(args, profile.to_text())
    return EXIT_OK


def expected_to_pass(spec: MechanismSpec) -> bool:
    return spec.rescaling.name == "first-is-root" and (spec.kind != "k-pachira" or spec.selection in ("C", "D"))


def cmd_verify(args) -> int:
    try:
        grid = tuple(float(x) for x in args.contributions.split(","))
    except ValueError:
        raise InputError(f"bad contribution list {args.contributions!r}") from None
    family = TreeFamily(args.max_nodes, grid)
    pi = _pi(args)
    rescaling = parse_rescaling(args.rescaling)
    budget = (args.budget or [1000.0])[0]
    mechanisms = args.mechanism or ["1-pachira", "k-pachira", "sharing-pachira"]
    specs = []
    for mech in mechanisms:
        if mech == "k-pachira":
            for k in args.k or [2]:
                for s in args.strategy or ["C", "D"]:
                    specs.append(MechanismSpec.k_pachira(k, s, budget, pi=pi, rescaling=rescaling))
        elif mech == "1-pachira":
            specs.append(MechanismSpec.one_pachira(budget, pi=pi, rescaling=rescaling))
        else:
            specs.append(MechanismSpec.sharing(budget, pi=pi, rescaling=rescaling))
    props = tuple(args.property or PROPERTIES)
    verdicts = run_suite(family, specs, props)
    status = EXIT_OK
    out = []
    for v, spec in zip(verdicts, [s for s in specs for _ in props]):
        out.append(v.to_text())
        if not v.holds and expected_to_pass(spec):
            status = EXIT_VIOLATION
    _write(args, "\n".join(out))
    return status


def cmd_cpt_sweep(args) -> int:
    try:
        params = cptmod.CptParams(_opt(args, "cpt_alpha"), _opt(args, "cpt_gamma"))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    ks = tuple(args.k or [5, 10])
    steps = int(round(1 / args.step))
    grid = [i / steps for i in range(1, steps)]
    chunks = []
    for B in args.budget or [100.0, 1000.0]:
        rows = cptmod.sweep(B, ks, grid, params)
        crit = cptmod.critical_lottery_value(B, params)
        chunks.append(f"# B={B:g} critical_lottery_value={crit!r}\n" + cptmod.format_sweep(rows, ks))
    _write(args, "\n".join(chunks))
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = campaign.load_config(args.config) if args.config else campaign.SimConfig()
    overrides = {"seed": args.seed}
    for flag, key in (("pi_beta", "beta"), ("pi_delta", "delta"), ("cpt_alpha", "alpha"), ("cpt_gamma", "gamma")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    config = replace(config, **overrides)
    if args.k:
        config = replace(config, K=args.k[0])
    budgets = args.budget or [1000.0, 5000.0]
    rows = campaign.solicitation_experiment(config, budgets, n_values=range(args.n_min, args.n_max + 1), repetitions=args.reps)
    if args.out:
        campaign.write_csv(rows, args.out, append=True)
    means = campaign.mean_solicitations(rows)
    for B in budgets:
        lot, share = means.get(("1-pachira", B)), means.get(("sharing-pachira", B))
        if lot and share:
            print(f"B={B:g} crossover_N={campaign.crossover(lot, share)}")
    if not args.out:
        w = csv.writer(sys.stdout)
        w.writerow(campaign.CSV_COLUMNS)
        for r in rows:
            w.writerow([r.mechanism, f"{r.B:g}", r.N, r.repetition, r.seed, r.solicitations, r.participants, repr(r.tcp), repr(r.acp)])
    return EXIT_OK


def cmd_metrics(args) -> int:
    """Records: CSV with user,active,participated,duration_minutes,distance_meters,found."""
    with open(args.records, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"user", "active", "participated", "duration_minutes", "distance_meters", "found"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InputError(f"{args.records}:1: header must contain {', '.join(sorted(need))}")
        active = participants = 0
        scores = []
        for lineno, row in enumerate(reader, start=2):
            try:
                is_active = row["active"].strip() in ("1", "true", "yes")
                joined = row["participated"].strip() in ("1", "true", "yes")
                found = row["found"].strip() in ("1", "true", "yes")
                if joined:
                    scores.append(
                        metrics.treasure_contribution(
                            float(row["duration_minutes"]), float(row["distance_meters"]), found, args.find_bonus
                        )
                    )
            except ValueError as exc:
                raise InputError(f"{args.records}:{lineno}: {exc}") from None
            active += is_active or joined
            participants += joined
    text = f"participants {participants}\nactive {active}\n"
    try:
        text += f"rpr {metrics.rpr(participants, active)!r}\n"
    except ValueError:
        text += "rpr undefined\n"
    text += f"tcp {metrics.tcp(scores)!r}\nacp {metrics.acp(scores)!r}\n"
    _write(args, text)
    return EXIT_OK


COMMANDS = {
    "lottery": cmd_lottery,
    "verify": cmd_verify,
    "cpt-sweep": cmd_cpt_sweep,
    "simulate": cmd_simulate,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, TreeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
