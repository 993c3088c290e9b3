"""Command-line interface.

Exit codes: 0 success, 1 computation error, 2 usage error, 3 reproduction
mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from typing import Sequence

from . import mpnum
from .errors import GaussentError
from .lattice import RegionSpec, build_region_cm, mass_rule
from .mpnum import PrecisionContext

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2, 3
MIN_PRECISION = 32

FLOW_COMMANDS = {"sep-flow", "soe", "soe-scan"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- argument parsing


def parse_seps(text: str) -> list[int]:
    """Parse ``"0,5,10"`` or ``"start:stop[:step]"`` (stop exclusive), or a mix."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(x) for x in part.split(":")]
            if len(bits) not in (2, 3):
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            out += list(range(*bits))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty separation list")
    return out


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_region(p: argparse.ArgumentParser, multi: bool = False) -> None:
    p.add_argument("--d", type=int, required=True, help="sites per region")
    if multi:
        p.add_argument("--seps", type=parse_seps, required=True, help="separations, e.g. 0:98 or 0,5,10")
    else:
        p.add_argument("--sep", type=int, required=True, help="empty sites between the regions")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mass", help="lattice mass (decimal or fraction)")
    g.add_argument("--mass-rule", action="store_true", help="use m = 3e-3/d")


def _add_common(p: argparse.ArgumentParser, workers: bool = False) -> None:
    p.add_argument("--precision", type=int, default=None,
                   help="decimal digits (default: GAUSSENT_PRECISION, else 64 or 320 for flow commands)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="write to this file instead of stdout")
    if workers:
        p.add_argument("--workers", type=int, default=1, help="parallel rows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vacuum-cm", help="two-region vacuum covariance matrix")
    _add_region(p)
    _add_common(p)

    p = sub.add_parser("negativity", help="log-negativity and PT spectrum")
    p.add_argument("--d", type=int, required=True)
    sep = p.add_mutually_exclusive_group(required=True)
    sep.add_argument("--sep", type=int)
    sep.add_argument("--seps", type=parse_seps)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mass")
    g.add_argument("--mass-rule", action="store_true")
    p.add_argument("--fixed-precision", action="store_true", help="disable automatic precision raising in scans")
    _add_common(p, workers=True)

    p = sub.add_parser("consolidate", help="negativity-consolidating local transformation")
    _add_region(p)
    p.add_argument("--route", choices=("gh", "iomega"), default="gh")
    _add_common(p)

    p = sub.add_parser("sep-flow", help="Gaussian separability flow")
    p.add_argument("--input", help="JSON file with a 'matrix' entry (and optional 'cut')")
    p.add_argument("--d", type=int)
    p.add_argument("--sep", type=int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--mass")
    g.add_argument("--mass-rule", action="store_true")
    p.add_argument("--cut", type=_int_list, help="side-A modes, e.g. 0,1 (default: region A)")
    p.add_argument("--max-depth", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("soe", help="obscured-entanglement report for one region pair")
    _add_region(p)
    _add_common(p)

    p = sub.add_parser("soe-scan", help="obscured-entanglement table over separations")
    _add_region(p, multi=True)
    _add_common(p, workers=True)
    p.add_argument("--plateaus", action="store_true",
                   help="print runs of constant core size (in r_tilde/d) instead of rows")

    from .reproduce import TABLES

    p = sub.add_parser("reproduce", help="compare against a bundled reference fixture")
    p.add_argument("--table", choices=TABLES, required=True)
    p.add_argument("--rows", type=parse_seps, help="restrict table rows to these separations")
    _add_common(p, workers=True)

    p = sub.add_parser("isotropic", help="two-qubit isotropic state convexity demo")
    p.add_argument("--eta", required=True, help="mixing parameter (exact rational, e.g. 1/3)")
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--output")
    return parser


def resolve_precision(args) -> PrecisionContext:
    default = mpnum.FLOW_DIGITS if args.command in FLOW_COMMANDS or getattr(args, "table", None) in (
        "s2", "s3", "s4", "appF", "appG") else mpnum.DEFAULT_DIGITS
    if args.precision is not None:
        digits = args.precision
    else:
        env = os.environ.get("GAUSSENT_PRECISION")
        try:
            digits = int(env) if env else default
        except ValueError:
            raise UsageError(f"GAUSSENT_PRECISION must be an integer, got {env!r}")
    if digits < MIN_PRECISION:
        raise UsageError(f"precision must be at least {MIN_PRECISION} digits, got {digits}")
    return PrecisionContext(digits)


def _mass(args, d: int):
    if getattr(args, "mass_rule", False):
        return mass_rule(d)
    if args.mass is None:
        raise UsageError("one of --mass or --mass-rule is required")
    try:
        return Fraction(args.mass)
    except ValueError:
        raise UsageError(f"invalid mass {args.mass!r}")


def _spec(args) -> RegionSpec:
    try:
        return RegionSpec(args.d, args.sep, _mass(args, args.d))
    except ValueError as exc:
        raise UsageError(str(exc))


# ---------------------------------------------------------------- serialization


def _s(x, digits: int) -> str:
    return mpnum.decimal_string(x, digits)


def _mat(M, digits: int) -> list[list[str]]:
    return mpnum.matrix_strings(M, digits)


def _spec_json(spec: RegionSpec) -> dict:
    return {"d": spec.d, "sep": spec.sep, "mass": str(spec.mass)}


def _matrix_csv(M, digits: int) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(_mat(M, digits))
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------- commands


def cmd_vacuum_cm(args, ctx: PrecisionContext) -> tuple[str, int]:
    from .symplectic import check_bonafide

    spec = _spec(args)
    sigma = build_region_cm(spec, ctx)
    digits = ctx.decimal_digits
    if args.format == "csv":
        return _matrix_csv(sigma.matrix, digits), EXIT_OK
    ok, margin = check_bonafide(sigma, ctx)
    return _dump({
        "spec": _spec_json(spec), "digits": digits,
        "modes_a": list(sigma.modes_a), "modes_b": list(sigma.modes_b),
        "bonafide": ok, "bonafide_margin": _s(margin, digits),
        "matrix": _mat(sigma.matrix, digits),
    }), EXIT_OK


def cmd_negativity(args, ctx: PrecisionContext) -> tuple[str, int]:
    from .negativity import log_negativity, negativity_scan, scan_csv

    digits = ctx.decimal_digits
    if args.seps is not None:
        mass = _mass(args, args.d)
        rows = negativity_scan(args.d, args.seps, mass, ctx, workers=args.workers,
                               auto_precision=not args.fixed_precision)
        if args.format == "csv":
            text = scan_csv(rows)
        else:
            text = _dump([{
                "spec": _spec_json(r.spec), "digits": r.digits, "error": r.error,
                "N": _s(r.total, r.digits), "contributions": [_s(c, r.digits) for c in r.contributions],
            } for r in rows])
        return text, EXIT_COMPUTE if any(r.error for r in rows) else EXIT_OK
    spec = _spec(args)
    sigma = build_region_cm(spec, ctx)
    N, spectrum = log_negativity(sigma, None, ctx)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["d", "m", "r_tilde", "j", "nu_pt", "N_j"])
        for j, (nu, c) in enumerate(zip(spectrum.eigenvalues, spectrum.contributions), start=1):
            w.writerow([spec.d, str(spec.mass), spec.sep, j, _s(nu, digits), _s(c, digits)])
        return buf.getvalue(), EXIT_OK
    return _dump({
        "spec": _spec_json(spec), "digits": digits, "N": _s(N, digits),
        "pt_symplectic_eigenvalues": [_s(x, digits) for x in spectrum.eigenvalues],
        "contributions": [_s(x, digits) for x in spectrum.contributions],
        "sub_precision": spectrum.sub_precision,
    }), EXIT_OK


def cmd_consolidate(args, ctx: PrecisionContext) -> tuple[str, int]:
    from .consolidate import consolidate
    from .symplectic import raw

    spec = _spec(args)
    cons = consolidate(build_region_cm(spec, ctx), ctx, route=args.route)
    digits = ctx.decimal_digits
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "mode_a", "mode_b", "N_pair"])
        for j, ((a, b), n) in enumerate(zip(cons.layout.pairs, cons.pair_negativities), start=1):
            w.writerow([j, a, b, _s(n, digits)])
        return buf.getvalue(), EXIT_OK
    return _dump({
        "spec": _spec_json(spec), "digits": digits, "route": args.route,
        "n_c": cons.layout.n_c, "pairs": [list(p) for p in cons.layout.pairs],
        "pair_negativities": [_s(x, digits) for x in cons.pair_negativities],
        "max_pair_deviation": _s(cons.max_pair_deviation, 6),
        "seed": _mat(cons.seed.matrix(), digits),
        "S_A": _mat(cons.S_A, digits), "S": _mat(cons.S.matrix, digits),
        "sigma_prime": _mat(raw(cons.sigma_prime), digits),
    }), EXIT_OK


def cmd_sep_flow(args, ctx: PrecisionContext) -> tuple[str, int]:
    from .separability import DEFAULT_MAX_DEPTH, flow_decide
    from .symplectic import raw

    if args.input:
        try:
            with open(args.input) as fh:
                data = json.load(fh)
            sigma = mpnum.matrix(data["matrix"], ctx)
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"cannot read matrix from {args.input}: {exc}")
        cut = args.cut or data.get("cut")
        if cut is None:
            raise UsageError("--cut is required with --input")
        spec_json = None
    else:
        if args.d is None or args.sep is None:
            raise UsageError("give --input, or --d, --sep and a mass")
        spec = _spec(args)
        sigma = build_region_cm(spec, ctx)
        cut = args.cut or list(sigma.modes_a)
        spec_json = _spec_json(spec)
    try:
        verdict = flow_decide(raw(sigma), cut, ctx, max_depth=args.max_depth or DEFAULT_MAX_DEPTH)
    except ValueError as exc:
        raise UsageError(str(exc))
    digits = ctx.decimal_digits
    out = {
        "spec": spec_json, "digits": digits, "cut": list(cut),
        "verdict": verdict.verdict.value, "depth": verdict.depth,
        "margins": [[_s(a, 12), _s(b, 12)] for a, b in verdict.margins],
        "witness": None if verdict.witness is None else _s(verdict.witness, 12),
    }
    dec = verdict.decomposition
    if dec is not None:
        out["matrices"] = {
            "sigma_a": _mat(dec.sigma_a, digits), "sigma_b": _mat(dec.sigma_b, digits), "Y": _mat(dec.Y, digits),
        }
        out["decomposition_residual"] = _s(dec.residual, 6)
        out["decomposition_margins"] = {k: _s(v, 12) for k, v in dec.margins.items()}
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "separable_margin", "physical_margin"])
        for k, (a, b) in enumerate(out["margins"], start=1):
            w.writerow([k, a, b])
        w.writerow(["verdict", out["verdict"], out["depth"]])
        return buf.getvalue(), EXIT_OK
    return _dump(out), EXIT_OK


def _soe_json(rep, digits: int, details: bool) -> dict:
    def opt(x):
        return None if x is None else _s(x, digits)

    out = {
        "spec": _spec_json(rep.spec), "digits": rep.digits, "status": rep.status, "message": rep.message,
        "n_c": rep.n_c, "N_total": opt(rep.N_total), "N_halo": opt(rep.N_halo),
        "N_haloA_rest": opt(rep.N_haloA_vs_rest),
        "yprime_eigenvalues": [_s(x, digits) for x in rep.yprime_eigenvalues],
        "flow_depths": rep.flow_depths,
    }
    if details:
        mats = {}
        for name in ("sigma_c", "sigma_h", "Y", "sigma_c_pure", "sigma_h_pure", "Y_pure",
                     "halo_side_pure", "Y_h_pure", "Yprime"):
            M = getattr(rep.details, name)
            if M is not None:
                mats[name] = _mat(M, digits)
        out["matrices"] = mats
    return out


def cmd_soe(args, ctx: PrecisionContext) -> tuple[str, int]:
    from .soe import scan_csv, soe_quantify

    rep = soe_quantify(_spec(args), ctx)
    code = EXIT_COMPUTE if rep.status == "undecided" else EXIT_OK
    if args.format == "csv":
        return scan_csv([rep], ctx.decimal_digits), code
    return _dump(_soe_json(rep, ctx.decimal_digits, True)), code


def cmd_soe_scan(args, ctx: PrecisionContext) -> tuple[str, int]:
    from .soe import core_plateaus, scan_csv, soe_scan

    mass = _mass(args, args.d)
    reps = soe_scan(args.d, args.seps, ctx, workers=args.workers, mass=mass)
    code = EXIT_COMPUTE if any(r.status in ("error", "undecided") for r in reps) else EXIT_OK
    if args.plateaus:
        return _dump(core_plateaus(reps)), code
    if args.format == "csv":
        return scan_csv(reps, ctx.decimal_digits), code
    return _dump([_soe_json(r, ctx.decimal_digits, False) for r in reps]), code


def cmd_reproduce(args, ctx: PrecisionContext) -> tuple[str, int]:
    from .reproduce import reproduce

    checks = reproduce(args.table, ctx, args.rows, workers=args.workers)
    failed = [c for c in checks if not c.ok]
    code = EXIT_MISMATCH if failed or not checks else EXIT_OK
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "computed", "expected", "ok"])
        for c in checks:
            w.writerow([c.name, c.computed, c.expected, c.ok])
        return buf.getvalue(), code
    lines = [c.line() for c in checks]
    lines.append(f"{args.table}: {len(checks) - len(failed)}/{len(checks)} checks passed")
    return "\n".join(lines) + "\n", code


def cmd_isotropic(args) -> tuple[str, int]:
    import sympy

    from .separability import isotropic_qubit_demo

    try:
        eta = sympy.Rational(args.eta)
    except (TypeError, ValueError, sympy.SympifyError):
        raise UsageError(f"invalid eta {args.eta!r}")
    if not 0 <= eta <= 1:
        raise UsageError("eta must lie in [0, 1]")
    rep = isotropic_qubit_demo(eta)
    return _dump({
        "eta": str(rep.eta), "negativity": str(rep.negativity), "convex": rep.convex,
        "pt_eigenvalues": [str(x) for x in rep.pt_eigenvalues],
        "weights": {str(k): str(v) for k, v in rep.weights.items()},
        "reconstruction_exact": rep.reconstruction_exact,
    }), EXIT_OK


COMMANDS = {
    "vacuum-cm": cmd_vacuum_cm,
    "negativity": cmd_negativity,
    "consolidate": cmd_consolidate,
    "sep-flow": cmd_sep_flow,
    "soe": cmd_soe,
    "soe-scan": cmd_soe_scan,
    "reproduce": cmd_reproduce,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the command and write its output.

    Returns
    -------
    int
        Exit status.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "isotropic":
            text, code = cmd_isotropic(args)
        else:
            ctx = resolve_precision(args)
            text, code = COMMANDS[args.command](args, ctx)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gaussent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GaussentError as exc:
        print(f"gaussent: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
