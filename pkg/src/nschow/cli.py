"""Command-line interface.

Exit codes: 0 ok, 2 usage or parse error, 3 numeric failure, 4 not certified.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .brackets import (
    BoundBracket,
    BracketSyntaxError,
    ConventionError,
    analyze,
    parse_field_bracket,
    parse_formal_bracket,
    required_regularity,
)
from .controllability import (
    ArityError,
    CertificateMissing,
    CertifyConfig,
    SteerConfig,
    TargetTooFar,
    TooFewConverged,
    UniquenessHypothesisError,
    certify_bracket_generating,
    fit_holder_exponent,
    reachable_cloud,
    steer,
    verify_gdq_inequality,
)
from .fields import DomainError, ExpressionSyntaxError, UnknownSystem, builtin_system, load_field_file
from .flow import FlowConfig, FlowError
from .lie_bracket import InsufficientSamples, SamplingConfig, set_valued_bracket
from .multiflow import FAMILIES, bracket_family, verify_asymptotic_estimate

DEFAULT_FAMILY = {"example-r4": "default5", "heisenberg": "heisenberg3", "translations-r2": "translations2"}


class UsageError(Exception):
    pass


# --- argument types ----------------------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _binding(text: str) -> dict[int, int]:
    out = {}
    for part in text.split(","):
        try:
            var, fld = part.split("=")
            out[int(var)] = int(fld)
        except ValueError:
            raise argparse.ArgumentTypeError(f"binding entries look like VAR=FIELD, got {part!r}") from None
    return out


# --- parser ---------------------------------------------------------------------------------


def _common(sampling_radii_flag: str = "--radii") -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=_positive_int, default=None, help="worker processes (default: all cores)")
    g.add_argument("--json", action="store_true", help="print the full JSON document")
    g.add_argument("--out", type=Path, help="write the result (JSON, or CSV for .csv paths)")
    g.add_argument("--flow-step", type=_positive_float, default=1e-3)
    g.add_argument("--flow-tol", type=_positive_float, default=1e-10)
    g.add_argument(sampling_radii_flag, dest="sampling_radii", type=_floats, default=None, help="bracket sampling radii, decreasing")
    g.add_argument("--samples-per-radius", type=_positive_int, default=200)
    return p


def _system_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--system", help="builtin system: example-r4, heisenberg, translations-r2")
    src.add_argument("--field-file", type=Path)
    p.add_argument("--point", type=_floats, default=None, help="base point (default: origin)")


def _family_args(p: argparse.ArgumentParser) -> None:
    fam = p.add_mutually_exclusive_group()
    fam.add_argument("--family", choices=sorted(FAMILIES))
    fam.add_argument("--brackets", help="semicolon-separated brackets in field notation, e.g. 'X1;X2;[X1,X2]'")


def _bracket_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bracket", required=True, help="bracket text; field notation unless --bind is given")
    p.add_argument("--bind", type=_binding, help="variable-to-field binding, e.g. 1=1,2=1,3=2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nschow", description="Set-valued Lie brackets and nonsmooth controllability.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    br = sub.add_parser("bracket", help="formal and set-valued brackets")
    brsub = br.add_subparsers(dest="bracket_command", required=True)
    an = brsub.add_parser("analyze", parents=[common], help="combinatorial analysis of a formal bracket")
    an.add_argument("text")
    an.add_argument("--class-k", type=int, default=None, help="also report the per-variable class for C^{B+k}")
    an.add_argument("--no-lipschitz", action="store_true", help="with --class-k, ask for C^{B+k} rather than C^{B+k-1,1}")
    bs = brsub.add_parser("set", parents=[common], help="estimate a set-valued bracket")
    _system_args(bs)
    _bracket_args(bs)

    ce = sub.add_parser("certify", parents=[common], help="certify the bracket-generating condition")
    _system_args(ce)
    _family_args(ce)
    ce.add_argument("--starts", type=_positive_int, default=50)

    st = sub.add_parser("steer", parents=[common], help="steer to a nearby target")
    _system_args(st)
    _family_args(st)
    st.add_argument("--target", type=_floats, required=True)
    st.add_argument("--tol", type=_positive_float, default=1e-5)
    st.add_argument("--max-iter", type=_positive_int, default=200)
    st.add_argument("--max-distance", type=_positive_float, default=1.0, help="largest allowed target distance")

    ho = sub.add_parser("holder", parents=[_common("--bracket-radii")], help="fit the minimum-time Hölder exponent")
    _system_args(ho)
    _family_args(ho)
    ho.add_argument("--radii", type=_floats, default=(1e-2, 3e-3, 1e-3, 3e-4), help="target distances")
    ho.add_argument("--samples", type=_positive_int, default=40)
    ho.add_argument("--tol", type=_positive_float, default=1e-5)

    re_ = sub.add_parser("reach", parents=[common], help="Monte Carlo reachable cloud")
    _system_args(re_)
    re_.add_argument("--budget", type=float, required=True)
    re_.add_argument("--words", type=_positive_int, default=500)
    re_.add_argument("--max-segments", type=_positive_int, default=8)

    va = sub.add_parser("verify-asymptotic", parents=[common], help="residuals of the multi-flow asymptotic estimate")
    _system_args(va)
    _bracket_args(va)
    va.add_argument("--tgrid", type=_floats, default=(1e-1, 1e-2, 1e-3, 1e-4))

    vg = sub.add_parser("verify-gdq", parents=[common], help="residuals of the GDQ inequality")
    _system_args(vg)
    _bracket_args(vg)
    vg.add_argument("--scales", type=_floats, default=(1e-1, 1e-2, 1e-3, 1e-4))
    vg.add_argument("--points-per-scale", type=_positive_int, default=8)
    return parser


# --- helpers ------------------------------------------------------------------------------------


def _load_system(args):
    if args.system is not None:
        return builtin_system(args.system)
    return load_field_file(args.field_file)


def _point(args, dim: int) -> np.ndarray:
    if args.point is None:
        return np.zeros(dim)
    if len(args.point) != dim:
        raise UsageError(f"--point has {len(args.point)} coordinates, system has dimension {dim}")
    return np.array(args.point)


def _workers(args) -> int:
    return args.threads or os.cpu_count() or 1


def _sampling(args) -> SamplingConfig:
    kw = {"samples_per_radius": args.samples_per_radius, "seed": args.seed, "workers": _workers(args)}
    if args.sampling_radii is not None:
        kw["radii"] = args.sampling_radii
    try:
        return SamplingConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _flow(args) -> FlowConfig:
    return FlowConfig(base_step=args.flow_step, error_target=args.flow_tol)


def _bound(args) -> BoundBracket:
    if args.bind is None:
        return parse_field_bracket(args.bracket)
    try:
        return BoundBracket.from_map(parse_formal_bracket(args.bracket), args.bind)
    except ValueError as exc:
        if isinstance(exc, (BracketSyntaxError, ConventionError)):
            raise
        raise UsageError(str(exc)) from None


def _family(args):
    if getattr(args, "brackets", None):
        return bracket_family(t.strip() for t in args.brackets.split(";") if t.strip())
    name = args.family or DEFAULT_FAMILY.get(args.system or "")
    if name is None:
        raise UsageError("--family or --brackets is required for this system")
    return bracket_family(name)


def _check_fields(bound_list, system) -> None:
    for b in bound_list:
        for j in b.fields:
            if not 1 <= j <= len(system):
                raise UsageError(f"bracket {b} uses field {j}, system has {len(system)} fields")


# --- commands ----------------------------------------------------------------------------------


def cmd_bracket_analyze(args):
    b = parse_formal_bracket(args.text)
    out = analyze(b).to_dict()
    if args.class_k is not None:
        try:
            req = required_regularity(b, args.class_k, lipschitz=not args.no_lipschitz)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        out["class_query"] = {"k": args.class_k, "lipschitz": not args.no_lipschitz, "regularity": {str(j): str(c) for j, c in req.items()}}
    summary = f"{out['bracket']}: length {out['length']}, diff-degree {out['diff_degree']}, n(B) {out['n_of_b']}"
    return out, summary, 0


def cmd_bracket_set(args):
    system = _load_system(args)
    bound = _bound(args)
    _check_fields([bound], system)
    poly = set_valued_bracket(bound, system, _point(args, system.dim), _sampling(args))
    out = poly.to_dict()
    out["bracket"] = bound.field_text()
    summary = f"{bound.field_text()}: {len(poly.vertices)} vertices, uncertainty {poly.uncertainty:.3g}\n" + "\n".join(
        "  " + " ".join(f"{c:.6g}" for c in v) for v in poly.vertices
    )
    return out, summary, 0


def _certificate(args, system):
    fam = _family(args)
    _check_fields(fam, system)
    cfg = CertifyConfig(starts=getattr(args, "starts", 50), seed=args.seed)
    return certify_bracket_generating(fam, system, _point(args, system.dim), _sampling(args), cfg)


def cmd_certify(args):
    system = _load_system(args)
    cert = _certificate(args, system)
    code = 0 if cert.certified else 4
    summary = f"{cert.status}: min sigma {cert.min_sigma:.6g}, uncertainty bound {cert.beta:.3g}, margin {cert.margin:.6g}"
    return cert.to_dict(), summary, code


def cmd_steer(args):
    system = _load_system(args)
    cert = _certificate(args, system)
    if not cert.certified:
        return cert.to_dict(), f"cannot steer: certificate {cert.status}", 4
    target = np.array(args.target)
    if target.size != system.dim:
        raise UsageError(f"--target has {target.size} coordinates, system has dimension {system.dim}")
    cfg = SteerConfig(tol=args.tol, max_iter=args.max_iter, max_target_distance=args.max_distance)
    res = steer(cert, system, target, cfg, _flow(args))
    code = 0 if res.converged else 3
    summary = f"{'converged' if res.converged else 'NOT converged'} in {res.iterations} iterations: tau {res.tau:.6g}, error {res.error_norm:.3g}, {len(res.word)} segments"
    return res.to_dict(), summary, code


def cmd_holder(args):
    system = _load_system(args)
    cert = _certificate(args, system)
    if not cert.certified:
        return cert.to_dict(), f"cannot fit: certificate {cert.status}", 4
    cfg = SteerConfig(tol=args.tol, workers=_workers(args))
    fit = fit_holder_exponent(cert, system, args.radii, args.samples, cfg, _flow(args), seed=args.seed)
    out = fit.to_dict()
    out["slope_ci"] = [float(v) for v in out["slope_ci"]]
    summary = f"slope {fit.slope:.4f} (95% CI {fit.slope_ci[0]:.4f}..{fit.slope_ci[1]:.4f}), expected {fit.expected:.4f}"
    return out, summary, 0


def cmd_reach(args):
    system = _load_system(args)
    pts, skipped = reachable_cloud(system, _point(args, system.dim), args.budget, args.words, args.max_segments, _flow(args), seed=args.seed)
    out = {"points": pts.tolist(), "skipped": skipped}
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    summary = f"{len(pts)} points, {skipped} skipped; box {lo.tolist()} .. {hi.tolist()}"
    return out, summary, 0


def cmd_verify_asymptotic(args):
    system = _load_system(args)
    bound = _bound(args)
    _check_fields([bound], system)
    x = _point(args, system.dim)
    poly = set_valued_bracket(bound, system, x, _sampling(args))
    rep = verify_asymptotic_estimate(bound, system, x, args.tgrid, poly, _flow(args))
    out = rep.to_dict()
    out["polytope"] = poly.to_dict()
    summary = "t, e(t)\n" + "\n".join(f"{t:.3g}, {e:.6g}" for t, e in rep.rows)
    return out, summary, 0


def cmd_verify_gdq(args):
    system = _load_system(args)
    bound = _bound(args)
    _check_fields([bound], system)
    x = _point(args, system.dim)
    poly = set_valued_bracket(bound, system, x, _sampling(args))
    rows = verify_gdq_inequality(bound, system, x, poly, args.scales, args.points_per_scale, _flow(args), seed=args.seed)
    out = {"bracket": bound.field_text(), "rows": rows, "polytope": poly.to_dict()}
    summary = "scale, max residual\n" + "\n".join(f"{r['scale']:.3g}, {r['max_residual']:.6g}" for r in rows)
    return out, summary, 0


COMMANDS = {
    "analyze": cmd_bracket_analyze,
    "set": cmd_bracket_set,
    "certify": cmd_certify,
    "steer": cmd_steer,
    "holder": cmd_holder,
    "reach": cmd_reach,
    "verify-asymptotic": cmd_verify_asymptotic,
    "verify-gdq": cmd_verify_gdq,
}


def _command_name(args) -> str:
    return f"bracket {args.bracket_command}" if args.command == "bracket" else args.command


def _params(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k in ("json", "out", "command", "bracket_command"):
            continue
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _to_csv(command: str, result: dict) -> str:
    if command == "reach":
        return "".join(",".join(repr(c) for c in p) + "\n" for p in result["points"])
    if command == "verify-asymptotic":
        return "t,e\n" + "".join(f"{r['t']!r},{r['e']!r}\n" for r in result["rows"])
    if command == "verify-gdq":
        return "scale,max_residual,mean_residual\n" + "".join(
            f"{r['scale']!r},{r['max_residual']!r},{r['mean_residual']!r}\n" for r in result["rows"]
        )
    raise UsageError(f"{command} has no CSV output")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    name = _command_name(args)
    handler = COMMANDS[args.bracket_command if args.command == "bracket" else args.command]
    start = time.perf_counter()
    try:
        result, summary, code = handler(args)
    except (BracketSyntaxError, ConventionError, ExpressionSyntaxError, UnknownSystem, ArityError, UniquenessHypothesisError, UsageError, TargetTooFar, KeyError) as exc:
        print(f"nschow: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"nschow: error: {exc}", file=sys.stderr)
        return 2
    except (InsufficientSamples, FlowError, DomainError, TooFewConverged, CertificateMissing, np.linalg.LinAlgError) as exc:
        print(f"nschow: numeric failure: {exc}", file=sys.stderr)
        return 3
    manifest = {
        "command": name,
        "params": _params(args),
        "seed": args.seed,
        "version": __version__,
        "wall_time": time.perf_counter() - start,
    }
    doc = {"manifest": manifest, "result": result}
    if args.out is not None:
        try:
            if args.out.suffix == ".csv":
                args.out.write_text(_to_csv(name, result))
                args.out.with_suffix(".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
            else:
                args.out.write_text(json.dumps(doc, indent=2) + "\n")
        except UsageError as exc:
            print(f"nschow: error: {exc}", file=sys.stderr)
            return 2
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        print(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
