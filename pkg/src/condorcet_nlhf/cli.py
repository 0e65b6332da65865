"""Command-line front end.

Every subcommand takes ``--seed``, ``--threads``, ``--out``, ``--format``
and ``--config``.  A config file is a flat JSON object whose keys are
option names (dashes or underscores); explicit flags win over it.
Outputs carry a metadata block with the package version, the seed and
the parameters, and never depend on ``--threads``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .errors import CondorcetError, InputError
from .montecarlo import (CSV_FIELDS, DEFAULT_GRID, MIN_FIT_HITS, estimate_cycle_and_winner,
                         estimate_simplex_cyclic, estimate_winner_rate)
from .nash import solve_nash_lp
from .nlhf import RULES, GIBBS, NlhfProblem, RejectionConfig, TrainReport, reward_comparison_grid, train_nash_rs
from .prefcore import (PreferenceMatrix, RankingProfile, check_seed, preference_matrix_from_btl,
                       preference_matrix_from_profile, profile_from_permutation_sampler,
                       profile_from_score_sampler)
from .tournament import (construct_reward, digraph_from_matrix, find_condorcet_cycle,
                         find_condorcet_winner, winning_set_decomposition)

EXIT_OK, EXIT_INPUT, EXIT_FAILURE = 0, 2, 3
# options describing where output goes rather than what is computed
_PLUMBING = {"command", "config", "out", "threads", "format", "policy_out", "handler"}


# --------------------------------------------------------------------------
# argument types


def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except (TypeError, ValueError):
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return parse


def _positive_float(text):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return v


def _seed(text):
    try:
        return check_seed(int(text))
    except (ValueError, InputError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    if isinstance(text, (list, tuple)):
        vals = text
    else:
        vals = [v for v in str(text).split(",") if v.strip()]
    try:
        return [int(v) for v in vals]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# --------------------------------------------------------------------------
# output helpers


def _metadata(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _PLUMBING and k != "seed"}
    return {"version": __version__, "command": args.command, "seed": args.seed, "params": params}


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _csv_text(meta: dict, header, rows) -> str:
    buf = io.StringIO()
    for key in ("version", "command", "seed"):
        buf.write(f"# {key}: {meta[key]}\n")
    buf.write(f"# params: {json.dumps(meta['params'], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}")


def _load_matrix(path) -> PreferenceMatrix:
    """Preference-matrix JSON, or a ranking-profile JSON converted with exact counts."""
    data = _read_json(path)
    if isinstance(data, dict) and "rankings" in data:
        return preference_matrix_from_profile(RankingProfile.from_json(data))
    if not isinstance(data, dict):
        raise InputError("preference matrix JSON must be an object")
    return PreferenceMatrix.from_json(data)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise InputError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _require_json(args):
    if args.format != "json":
        raise InputError(f"{args.command} only writes JSON")


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_profile(args):
    _need(args, "m", "n")
    _require_json(args)
    if args.sampler == "permutation":
        profile = profile_from_permutation_sampler(args.m, args.n, args.seed)
        extra = {}
    else:
        profile, scores = profile_from_score_sampler(args.m, args.n, args.seed)
        extra = {"scores": scores.scores.tolist()}
    _emit(_json_text({"metadata": _metadata(args), **profile.to_json(), **extra}), args.out)


def cmd_pref_matrix(args):
    _require_json(args)
    if (args.input is None) == (args.rewards is None):
        raise InputError("pass exactly one of --input (ranking profile) or --rewards (BTL)")
    if args.input is not None:
        pm = preference_matrix_from_profile(RankingProfile.from_json(_read_json(args.input)))
    else:
        pm = preference_matrix_from_btl(args.rewards)
    _emit(_json_text({"metadata": _metadata(args), **pm.to_json()}), args.out)


def cmd_analyze(args):
    _need(args, "input")
    _require_json(args)
    pm = _load_matrix(args.input)
    g = digraph_from_matrix(pm, args.tie_tolerance)
    cycle = find_condorcet_cycle(g)
    winner = find_condorcet_winner(g)
    decomposition = reward = None
    if g.is_tournament:
        decomposition = [list(map(int, b)) for b in winning_set_decomposition(g)]
        built = construct_reward(g)
        if built.ok:
            reward = built.reward.tolist()
    out = {"metadata": _metadata(args), "tournament": bool(g.is_tournament),
           "cycle": None if cycle is None else list(map(int, cycle)),
           "winner": None if winner is None else int(winner),
           "decomposition": decomposition, "reward": reward}
    _emit(_json_text(out), args.out)


def cmd_solve_nash(args):
    _need(args, "input")
    _require_json(args)
    sol = solve_nash_lp(_load_matrix(args.input), tolerance=args.tolerance)
    _emit(_json_text({"metadata": _metadata(args), **sol.to_json()}), args.out)


def cmd_estimate(args):
    _need(args, "m", "n")
    row = estimate_cycle_and_winner(args.m, args.n, args.trials, args.seed, args.threads)
    meta = _metadata(args)
    if args.format == "csv":
        _emit(_csv_text(meta, CSV_FIELDS, [row.csv_values()]), args.out)
    else:
        _emit(_json_text({"metadata": meta, **row.to_json()}), args.out)


def cmd_estimate_rate(args):
    _need(args, "m")
    fit = estimate_winner_rate(args.m, args.n_grid, args.trials, args.seed, args.threads, args.min_hits)
    meta = _metadata(args)
    if args.format == "csv":
        _emit(_csv_text(meta, CSV_FIELDS, [r.csv_values() for r in fit.rows]), args.out)
    else:
        _emit(_json_text({"metadata": meta, **fit.to_json()}), args.out)


def cmd_simplex_cyclic(args):
    p, se = estimate_simplex_cyclic(args.trials, args.seed)
    meta = _metadata(args)
    if args.format == "csv":
        _emit(_csv_text(meta, ("trials", "p_cyclic", "se"), [(args.trials, p, se)]), args.out)
    else:
        _emit(_json_text({"metadata": meta, "trials": args.trials, "p_cyclic": p, "se": se}), args.out)


def cmd_train_nashrs(args):
    _need(args, "input")
    data = _read_json(args.input)
    if not isinstance(data, dict):
        raise InputError("problem JSON must be an object")
    if args.tau is not None:
        data = {**data, "tau": args.tau}
    problem = NlhfProblem.from_json(data)
    config = RejectionConfig(B1=args.B1, B2=args.B2, max_proposals=args.max_proposals, rule=args.rule)
    report, policy = train_nash_rs(problem, steps=args.steps, lr=args.lr, mode=args.mode,
                                   config=config, seed=args.seed)
    meta = _metadata(args)
    policy_doc = {"metadata": meta, **policy.to_json()}
    if args.format == "csv":
        _emit(_csv_text(meta, TrainReport.CSV_FIELDS, report.rows()), args.out)
        if args.policy_out is not None:
            _emit(_json_text(policy_doc), args.policy_out)
    else:
        _emit(_json_text({**policy_doc, "report": report.to_json()}), args.out)


def cmd_reward_compare(args):
    _need(args, "tau")
    if args.points < 2:
        raise InputError("--points must be at least 2")
    grid = np.linspace(args.a_min, args.a_max, args.points)
    rows = reward_comparison_grid(args.tau, args.pi_ref, grid)
    meta = _metadata(args)
    fields = ("a", "tau", "Z_y1", "Z_y2", "r_y1_over_tau", "r_y2_over_tau")
    if args.format == "csv":
        _emit(_csv_text(meta, fields, [[r[k] for k in fields] for r in rows]), args.out)
    else:
        _emit(_json_text({"metadata": meta, "rows": rows}), args.out)


# --------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, fmt="json"):
    p.add_argument("--seed", type=_seed, default=0, help="64-bit seed (default 0)")
    p.add_argument("--threads", type=_int_at_least(1), default=1, help="worker threads")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=fmt)
    p.add_argument("--config", default=None, help="JSON file with option values; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condorcet-nlhf",
                                     description="Condorcet analysis, Nash solvers and Nash-RS training.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-profile", help="sample an impartial-culture ranking profile")
    _common(p)
    p.add_argument("--m", type=_int_at_least(1))
    p.add_argument("--n", type=_int_at_least(2))
    p.add_argument("--sampler", choices=("permutation", "score"), default="permutation")
    p.set_defaults(handler=cmd_gen_profile)

    p = sub.add_parser("pref-matrix", help="preference matrix from a profile or BTL rewards")
    _common(p)
    p.add_argument("--input", help="ranking profile JSON")
    p.add_argument("--rewards", type=_float_list, help="comma-separated BTL rewards")
    p.set_defaults(handler=cmd_pref_matrix)

    p = sub.add_parser("analyze", help="cycle, winner, decomposition and reward of a matrix")
    _common(p)
    p.add_argument("--input", help="preference matrix or ranking profile JSON")
    p.add_argument("--tie-tolerance", type=float, default=0.0)
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("solve-nash", help="maximin strategy of the preference game")
    _common(p)
    p.add_argument("--input", help="preference matrix or ranking profile JSON")
    p.add_argument("--tolerance", type=_positive_float, default=1e-9)
    p.set_defaults(handler=cmd_solve_nash)

    p = sub.add_parser("estimate", help="Monte Carlo cycle and winner probabilities")
    _common(p, "csv")
    p.add_argument("--m", type=_int_at_least(1))
    p.add_argument("--n", type=_int_at_least(2))
    p.add_argument("--trials", type=_int_at_least(1), default=100_000)
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("estimate-rate", help="log-log slope of the winner probability")
    _common(p)
    p.add_argument("--m", type=_int_at_least(3))
    p.add_argument("--n-grid", type=_int_list, default=list(DEFAULT_GRID))
    p.add_argument("--trials", type=_int_at_least(1), default=100_000)
    p.add_argument("--min-hits", type=_int_at_least(1), default=MIN_FIT_HITS)
    p.set_defaults(handler=cmd_estimate_rate)

    p = sub.add_parser("simplex-cyclic", help="share of cyclic points on the 6-ranking simplex")
    _common(p)
    p.add_argument("--trials", type=_int_at_least(1), default=1_000_000)
    p.set_defaults(handler=cmd_simplex_cyclic)

    p = sub.add_parser("train-nashrs", help="train a tabular policy by Nash rejection sampling")
    _common(p, "csv")
    p.add_argument("--input", help="problem JSON")
    p.add_argument("--tau", type=_positive_float, default=None, help="override the problem's tau")
    p.add_argument("--steps", type=_int_at_least(1), default=2000)
    p.add_argument("--lr", type=_positive_float, default=0.1)
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--rule", choices=RULES, default=GIBBS)
    p.add_argument("--B1", type=_int_at_least(1), default=32)
    p.add_argument("--B2", type=_int_at_least(1), default=1)
    p.add_argument("--max-proposals", type=_int_at_least(1), default=1_000_000)
    p.add_argument("--policy-out", default=None, help="final policy JSON (csv format only)")
    p.set_defaults(handler=cmd_train_nashrs)

    p = sub.add_parser("reward-compare", help="single-response policy reward versus BTL reward")
    _common(p, "csv")
    p.add_argument("--tau", type=_positive_float)
    p.add_argument("--pi-ref", type=_float_list, default=[0.5, 0.5])
    p.add_argument("--a-min", type=float, default=0.01)
    p.add_argument("--a-max", type=float, default=0.99)
    p.add_argument("--points", type=int, default=99)
    p.set_defaults(handler=cmd_reward_compare)
    return parser


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _apply_config(parser, argv, args):
    """Re-parse with config values as defaults so explicit flags still win."""
    data = _read_json(args.config)
    if not isinstance(data, dict):
        raise InputError("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest in ("command", "config", "handler") or dest not in known:
            raise InputError(f"unknown config key {key!r} for {args.command}")
        action = known[dest]
        if action.type is not None and value is not None:
            try:
                value = action.type(value if isinstance(value, (list, tuple)) else str(value))
            except argparse.ArgumentTypeError as exc:
                raise InputError(f"config key {key!r}: {exc}")
        if action.choices is not None and value not in action.choices:
            raise InputError(f"config key {key!r} must be one of {list(action.choices)}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _make_parser():
    parser = build_parser()
    parser.__class__ = _Parser
    for sp in parser._subparsers._group_actions[0].choices.values():
        sp.__class__ = _Parser
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
        if args.config is not None:
            args = _apply_config(parser, argv, args)
        args.handler(args)
    except _ArgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CondorcetError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


run = main
