"""Command-line interface: ``overtaking <command> ...``.

Exit status is 0 on success, 1 when an input is invalid or unreadable (or a
computation refuses it), and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import blackwell, casebook, evaluate, horizon, mdp as mdp_mod, spectral, strategy

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    """Invalid input; the message names the file and the place of the fault."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _load_mdp(args) -> mdp_mod.Mdp:
    try:
        model = mdp_mod.load_mdp(args.mdp)
    except mdp_mod.MdpFormatError as exc:
        raise InputError(str(exc)) from exc
    if getattr(args, "objective", None):
        model = model.with_objective(args.objective)
    return model


def _load_strategy(path: str):
    text = _read(path)
    try:
        return strategy.load_strategy(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: invalid JSON ({exc.msg})") from exc
    except (strategy.StrategyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _stationary(path: str) -> strategy.StationaryStrategy:
    s = _load_strategy(path)
    if not isinstance(s, strategy.StationaryStrategy):
        raise InputError(f"{path}: a stationary strategy is required")
    return s


def _emit(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2)


def _window(text: str) -> tuple[int, int]:
    try:
        t0, t1 = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like T0:T1, got {text!r}") from None
    if t0 < 1 or t1 < t0:
        raise argparse.ArgumentTypeError(f"window needs 1 <= T0 <= T1, got {text!r}")
    return t0, t1


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    model = _load_mdp(args)
    report = mdp_mod.validate(model)
    _emit(args, _json({
        "ok": report.ok,
        "issues": [{"location": loc, "message": msg} for loc, msg in report.issues],
        "deterministic": report.determinism,
        "positive": report.positivity,
    }))
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_curve(args) -> int:
    model = _load_mdp(args)
    plan = _load_strategy(args.strategy)
    curve = evaluate.reach_curve(model, plan, args.from_state, args.horizon)
    _emit(args, evaluate.curve_to_csv(curve))
    return EXIT_OK


def cmd_compare(args) -> int:
    model = _load_mdp(args)
    t0, t1 = args.window
    ca = evaluate.reach_curve(model, _load_strategy(args.a), args.from_state, t1)
    cb = evaluate.reach_curve(model, _load_strategy(args.b), args.from_state, t1)
    verdict = evaluate.compare(ca, cb, (t0, t1), model.objective, eq_tol=args.eq_tol)
    _emit(args, _json(verdict.to_json()))
    return EXIT_OK


def cmd_spectral(args) -> int:
    model = _load_mdp(args)
    report = spectral.genericity_check(model, args.gap_tol, args.initial)
    _emit(args, report.to_csv())
    return EXIT_OK


def cmd_best(args) -> int:
    model = _load_mdp(args)
    best, report = spectral.best_pure_stationary(model, args.gap_tol, args.initial)
    _emit(args, _json({
        "strategy": best.to_json(),
        "strategy_index": report.selected,
        "lambda2": report.entries[report.selected].lambda2,
        "generic": report.generic,
        "min_gap": report.min_gap if report.min_gap != float("inf") else None,
    }))
    return EXIT_OK


def cmd_horizon(args) -> int:
    model = _load_mdp(args)
    cert = horizon.certified_horizon(model, _stationary(args.a), _stationary(args.b), args.initial)
    _emit(args, _json(cert.to_json()))
    return EXIT_OK


def cmd_blackwell(args) -> int:
    model = mdp_mod.normalize(_load_mdp(args))
    avg = blackwell.to_average_mdp(model)
    if args.loops:
        _emit(args, blackwell.loop_report(avg).to_csv())
        return EXIT_OK
    policy = blackwell.blackwell_optimal(avg)
    _emit(args, _json({"objective": model.objective.value, "policy": policy.to_json()}))
    return EXIT_OK


def cmd_casebook(args) -> int:
    results = casebook.check_claims(args.horizon, args.p, args.q, args.seed)
    _emit(args, _json([r.to_json() for r in results]))
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.deterministic:
        model = mdp_mod.sample_deterministic(args.states, args.actions, args.seed, args.objective or "reach")
    else:
        model = mdp_mod.sample_generic(args.states, args.actions, args.seed, args.concentration)
        if args.objective:
            model = model.with_objective(args.objective)
    _emit(args, mdp_mod.dump_mdp(model))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overtaking",
        description="Overtaking comparisons of strategies in finite MDPs with a target state.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output to this file instead of stdout")

    model = argparse.ArgumentParser(add_help=False, parents=[common])
    model.add_argument("mdp", help="MDP JSON file")
    model.add_argument("--objective", choices=["reach", "safety"], help="override the file's objective")

    rates = argparse.ArgumentParser(add_help=False)
    rates.add_argument("--gap-tol", type=_positive_float, default=spectral.DEFAULT_GAP_TOL)
    rates.add_argument("--initial", help="initial state fixing the reachable scope (default: first non-target state)")

    p = sub.add_parser("validate", parents=[model], help="check an MDP file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("curve", parents=[model], help="reach curve as CSV")
    p.add_argument("--strategy", required=True)
    p.add_argument("--from", dest="from_state", required=True)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("compare", parents=[model], help="overtaking verdict on a window")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--from", dest="from_state", required=True)
    p.add_argument("--window", type=_window, required=True)
    p.add_argument("--eq-tol", type=_positive_float, default=1e-10)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("spectral", parents=[model, rates], help="absorption rates of all pure stationary strategies")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("best", parents=[model, rates], help="best pure stationary strategy by absorption rate")
    p.set_defaults(func=cmd_best)

    p = sub.add_parser("horizon", parents=[model], help="certified dominance horizon")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--initial")
    p.set_defaults(func=cmd_horizon)

    p = sub.add_parser("blackwell", parents=[model], help="Blackwell-optimal policy of a deterministic MDP")
    p.add_argument("--loops", action="store_true", help="emit the loop report CSV instead")
    p.set_defaults(func=cmd_blackwell)

    p = sub.add_parser("casebook", parents=[common], help="check the worked examples")
    p.add_argument("--horizon", type=_positive_int, default=300)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--q", type=float, default=0.11)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_casebook)

    p = sub.add_parser("sample", parents=[common], help="seeded random MDP as JSON")
    p.add_argument("--states", type=_positive_int, required=True)
    p.add_argument("--actions", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--concentration", type=_positive_float, default=1.0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--objective", choices=["reach", "safety"])
    p.set_defaults(func=cmd_sample)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, mdp_mod.MdpError, strategy.StrategyError, evaluate.EvaluationError,
            spectral.SpectralError, blackwell.BlackwellError, horizon.HorizonError,
            casebook.PlanError, ValueError) as exc:
        print(f"overtaking {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"overtaking {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
