"""Command line entry point. Every command prints one JSON document on stdout."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import BadArgument, InvalidInstance, PandoraError
from .forest import ForestSolver
from .harness import POLICIES, compare_policies, monte_carlo_eval
from .model import Instance, generate_instance, validate_instance
from .oracle import best_na_value, best_pa_value, brute_force_optimal
from .static import best_line_half_approx, truncate_lines

TRACE_SCHEMA = {
    "trace": "list of {line, box, grv, observed, x_after, cost_so_far}",
    "payoff": "max observed reward (0 if nothing opened) minus total cost",
}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, default=_json_default, allow_nan=False) + "\n")


def load_instance(path: str) -> Instance:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise BadArgument(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise InvalidInstance(f"{path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise InvalidInstance("top-level JSON value must be an object")
    return validate_instance(raw)


def shape_of(instance: Instance) -> str:
    if any(len(instance.children(b)) > 1 for b in instance.ids):
        return "forest"
    return "line" if len(instance.forest.roots) == 1 else "multiline"


def cmd_validate(args):
    inst = load_instance(args.file)
    return {
        "valid": True,
        "n": inst.n,
        "k": inst.k,
        "shape": shape_of(inst),
        "static_transition": inst.static_transition,
    }


def cmd_solve(args):
    inst = load_instance(args.file)
    solver = ForestSolver(inst)
    out = {
        "expected_payoff": solver.expected_payoff() if inst.n else 0.0,
        "root_grv": {r: solver.grv(r, None) for r in inst.forest.roots},
        "policy_trace_schema": TRACE_SCHEMA,
    }
    if args.debug_contractions:
        out["contractions"] = [s.to_dict() for s in solver.synthetics]
    return out


def cmd_oracle(args):
    inst = load_instance(args.file)
    if args.mode == "fa":
        return {"value": brute_force_optimal(inst), "witness": None}
    value, witness = best_pa_value(inst) if args.mode == "pa" else best_na_value(inst)
    return {"value": float(value), "witness": list(witness)}


def cmd_simulate(args):
    inst = load_instance(args.file)
    return monte_carlo_eval(inst, args.policy, args.trials, args.seed, args.delta).to_dict()


def cmd_truncate(args):
    inst = load_instance(args.file)
    return truncate_lines(inst, _delta(args.delta)).to_dict()


def cmd_approx_line(args):
    inst = load_instance(args.file)
    return best_line_half_approx(inst, _delta(args.delta)).to_dict()


def cmd_compare(args):
    inst = load_instance(args.file)
    return compare_policies(inst, args.trials, args.seed, _delta(args.delta))


def cmd_gen(args):
    return generate_instance(args.shape, args.boxes, args.values, args.seed, args.static).to_dict()


def _delta(d: float) -> float:
    if not 0.0 < d < 1.0:
        raise BadArgument("--delta must lie in (0, 1)")
    return d


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pandora", description="Markov-correlated Pandora's box solver")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check an instance file")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", help="exact expected payoff of the optimal policy")
    s.add_argument("file")
    s.add_argument("--debug-contractions", action="store_true")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("oracle", help="brute-force value of a strategy class")
    s.add_argument("file")
    s.add_argument("--mode", choices=("fa", "pa", "na"), required=True)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("simulate", help="Monte Carlo estimate of a policy")
    s.add_argument("file")
    s.add_argument("--policy", choices=POLICIES, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--delta", type=float, default=0.05)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("truncate", help="cut every line to its truncation horizon")
    s.add_argument("file")
    s.add_argument("--delta", type=float, required=True)
    s.set_defaults(func=cmd_truncate)

    s = sub.add_parser("approx-line", help="best single root path (static forests)")
    s.add_argument("file")
    s.add_argument("--delta", type=float, required=True)
    s.set_defaults(func=cmd_approx_line)

    s = sub.add_parser("compare", help="index policy versus oracle strategy classes")
    s.add_argument("file")
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--delta", type=float, default=0.05)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("gen", help="generate a random instance")
    s.add_argument("--shape", choices=("line", "multiline", "forest"), required=True)
    s.add_argument("--boxes", type=int, required=True)
    s.add_argument("--values", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--static", action="store_true")
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        emit(args.func(args))
    except PandoraError as e:
        emit({"error": e.code, "detail": e.detail})
        return 1
    except ValueError as e:
        emit({"error": "BadArgument", "detail": str(e)})
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
