"""Command-line front end.

Four subcommands, all reading a model file and writing to stdout or --out:

    check      regularity checks; exit 0 only if A0-A2 and the stochastic
               ordering all hold
    verify     one of the three verification suites; exit 1 on a measured
               discrepancy
    transform  derive a relabeled model file
    grid       dump one evaluated field as CSV

Exit codes are uniform: 0 success, 1 honest negative finding (a failed
regularity check, a discrepancy verdict, a relabeling that cannot be
built), 2 unusable input (unreadable or malformed file, a model whose
evaluations abort, bad flags).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import (
    ConstructionError,
    EvaluationError,
    IntegrabilityError,
    LoadError,
    SelfCheckError,
)
from .model_core import GridSpec, validate_model
from .modelfile import dumps, load
from .propositions import verify_prop1, verify_prop2, verify_prop3
from .regularity import FIELD_NAMES, compute_field, regularity_report
from .transforms import (
    RELABELING_KINDS,
    TransformedModel,
    apply_relabeling,
    make_relabeling,
    transform_section,
)

__all__ = ["main"]


def _fail(message: str, code: int) -> int:
    print(f"seqscreen: error: {message}", file=sys.stderr)
    return code


def _emit(text: str, out: str | None) -> int:
    if out is None:
        sys.stdout.write(text)
        return 0
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        return _fail(f"cannot write {out!r}: {exc}", 2)
    return 0


def _parse_grid_flag(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(
            f"grid must look like 129x129, got {text!r}")
    try:
        nv, nV = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must look like 129x129, got {text!r}") from None
    if nv < 2 or nV < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points per axis")
    return nv, nV


def _load_model(args):
    """Read the model file and fold CLI overrides into its grid/tolerances."""
    model, grid, tol = load(args.modelfile)
    if getattr(args, "grid", None) is not None:
        nv, nV = args.grid
        grid = dataclasses.replace(grid, v_points=nv, V_points=nV)
    if getattr(args, "slack", None) is not None:
        if args.slack < 0:
            raise LoadError("--slack must be nonnegative")
        tol = dataclasses.replace(tol, monotonicity_slack=args.slack)
    return model, grid, tol


def _cmd_check(args) -> int:
    try:
        model, grid, tol = _load_model(args)
        validation = validate_model(model, grid, tol)
        if not validation.passed:
            issues = "; ".join(validation.issues())
            return _fail(f"model failed validation: {issues}", 2)
        report = regularity_report(model, grid, tol)
    except LoadError as exc:
        return _fail(str(exc), 2)
    except EvaluationError as exc:
        return _fail(str(exc), 2)
    rc = _emit(report.to_json() + "\n", args.out)
    if rc:
        return rc
    return 0 if (report.classic_regular and report.fosd_ok) else 1


def _cmd_verify(args) -> int:
    try:
        model, grid, tol = _load_model(args)
        if args.prop == 1:
            payload = verify_prop1(model, grid, tol).to_dict()
            verdicts = [payload["verdict"]]
        elif args.prop == 2:
            payload = verify_prop2(model, grid, tol).to_dict()
            verdicts = [payload["verdict"]]
        else:
            fwd = verify_prop3(model, "forward", grid, tol)
            conv = verify_prop3(model, "converse", grid, tol)
            payload = {"forward": fwd.to_dict(), "converse": conv.to_dict()}
            verdicts = [fwd.verdict, conv.verdict]
    except LoadError as exc:
        return _fail(str(exc), 2)
    except EvaluationError as exc:
        return _fail(str(exc), 2)
    rc = _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if rc:
        return rc
    return 1 if "discrepancy" in verdicts else 0


def _cmd_transform(args) -> int:
    try:
        model, grid, tol = _load_model(args)
    except LoadError as exc:
        return _fail(str(exc), 2)
    if isinstance(model, TransformedModel):
        return _fail(
            "the model file already carries a transform section; "
            "derive from the base file instead", 2)
    kwargs = {}
    if args.w_lo is not None:
        kwargs["w_lo"] = args.w_lo
    if args.slope is not None:
        kwargs["slope"] = args.slope
    if args.intercept is not None:
        kwargs["intercept"] = args.intercept
    try:
        rel = make_relabeling(model, args.kind, **kwargs)
        tm = apply_relabeling(model, rel)
    except (IntegrabilityError, ConstructionError, SelfCheckError) as exc:
        return _fail(str(exc), 1)
    text = dumps(model, grid, tol, transform_section=transform_section(tm))
    return _emit(text, args.out)


def _cmd_grid(args) -> int:
    try:
        model, grid, tol = _load_model(args)
        field = compute_field(model, args.what, grid, tol)
    except LoadError as exc:
        return _fail(str(exc), 2)
    except EvaluationError as exc:
        return _fail(str(exc), 2)
    lines = ["v,V,value"]
    for i, v in enumerate(field.v):
        for j, V in enumerate(field.V):
            lines.append("%.17g,%.17g,%.17g" % (v, V, field.values[i, j]))
    return _emit("\n".join(lines) + "\n", args.out)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqscreen",
        description="screening-model regularity checks and verification")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("modelfile", help="path to a model file")
        p.add_argument("--grid", type=_parse_grid_flag, default=None,
                       metavar="NxM",
                       help="evaluation lattice size, e.g. 129x129")
        p.add_argument("--slack", type=float, default=None, metavar="FLOAT",
                       help="monotonicity slack override")
        p.add_argument("--out", default=None, metavar="PATH",
                       help="write output here instead of stdout")

    p = sub.add_parser("check", help="run the regularity checks")
    common(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("verify", help="run one verification suite")
    common(p)
    p.add_argument("--prop", type=int, choices=(1, 2, 3), required=True,
                   help="which claim to verify")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("transform", help="derive a relabeled model file")
    common(p)
    p.add_argument("--kind", choices=RELABELING_KINDS, required=True,
                   help="relabeling to apply")
    p.add_argument("--w-lo", type=float, default=None, dest="w_lo",
                   metavar="FLOAT", help="relabeled axis origin")
    p.add_argument("--slope", type=float, default=None, metavar="FLOAT",
                   help="affine slope (affine kind only)")
    p.add_argument("--intercept", type=float, default=None, metavar="FLOAT",
                   help="affine intercept (affine kind only)")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("grid", help="dump one field on the lattice as CSV")
    common(p)
    p.add_argument("--what", choices=FIELD_NAMES, required=True,
                   help="which field to evaluate")
    p.set_defaults(func=_cmd_grid)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)
