"""Command-line front end: load instances, run analyses, emit reports.

Commands: entropy | simplex | phase | state-eval | wold | verify | ground.
Outputs are deterministic JSON (default) or CSV; every report embeds the
instance hash and the tolerance set.  Exit codes: 0 ok, 2 validation error,
3 membership/convergence error, 4 cap exceeded.
"""

import argparse
import json
import math
import re
import sys

import numpy as np

from . import equilibrium, fock, model, simplex
from .entropy import entropy_report, mfl_entropy
from .errors import (
    CapExceeded,
    ConvergenceError,
    KmsPhaseError,
    MembershipError,
    NotKMSError,
    PathError,
    ValidationError,
)
from .paths import parse_path
from .util import parse_subset

EXIT_VALIDATION = 2
EXIT_MEMBERSHIP = 3
EXIT_CAP = 4

_BETA_RE = re.compile(
    r"^\s*(?:(?P<coef>[0-9.]+)\s*\*\s*)?log\(\s*(?P<arg>[0-9.]+)\s*\)\s*$"
)


def parse_beta(text):
    """Parse a beta literal or the symbolic forms 'log(x)' and 'c*log(x)'."""
    m = _BETA_RE.match(text)
    if m:
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        return coef * math.log(float(m.group("arg")))
    return float(text)


def _header(instance, args):
    return {
        "instance_sha256": instance.sha256(),
        "tolerances": {
            "snap": args.snap_tol,
            "residual": args.tol,
            "certificate_margin": simplex.CERT_MARGIN,
        },
    }


def _emit(payload, args):
    out = json.dumps(payload, sort_keys=True, indent=2)
    print(out)


def _load_lattice(instance, path):
    if path is None:
        return None
    if path == "cnp":
        return model.compute_cnp_ideals(instance)
    if path == "zero":
        return model.zero_lattice(instance.N)
    with open(path, "r", encoding="utf-8") as fh:
        return model.IdealLattice.from_json_dict(instance, json.load(fh))


def cmd_entropy(args):
    instance = model.load_instance(args.instance)
    if instance.kind == "mfl" and args.k_max:
        est, table, converged = mfl_entropy(instance.spec, k_max=args.k_max)
        if args.format == "csv":
            print("# " + json.dumps(_header(instance, args), sort_keys=True))
            print("k,count,slope")
            for k, count, slope in table:
                print(f"{k},{count},{'' if slope is None else repr(slope)}")
            return 0
        payload = _header(instance, args)
        payload.update(
            {
                "estimate": est,
                "converged": converged,
                "slopes": [
                    {"k": k, "count": count, "slope": slope}
                    for k, count, slope in table
                ],
            }
        )
        _emit(payload, args)
        return 0
    report = entropy_report(instance)
    payload = _header(instance, args)
    payload.update(report.to_json_dict())
    if args.log2:
        for key in ("per_color", "per_subset", "h_s_per_subset", "tracial"):
            payload[key] = {
                k: (None if v is None else v / math.log(2))
                for k, v in payload[key].items()
            }
        payload["h_s"] = None if payload["h_s"] is None else payload["h_s"] / math.log(2)
        payload["h_X"] = payload["h_X"] / math.log(2)
    _emit(payload, args)
    return 0


def cmd_simplex(args):
    instance = model.load_instance(args.instance)
    lattice = _load_lattice(instance, args.ideals)
    beta = parse_beta(args.beta)
    if args.F is not None:
        F = parse_subset(args.F)
        res = simplex.f_trace_set(
            instance, beta, F, lattice, snap_tol=args.snap_tol, resid_tol=args.tol
        ) if F != frozenset(range(1, instance.N + 1)) else simplex.finite_trace_set(
            instance, beta, lattice
        )
        payload = _header(instance, args)
        payload.update(res.to_json_dict())
        _emit(payload, args)
        return 0
    results = simplex.full_simplex(instance, beta, lattice, snap_tol=args.snap_tol)
    payload = _header(instance, args)
    payload["parts"] = [r.to_json_dict() for _F, r in sorted(results.items(), key=lambda kv: sorted(kv[0]))]
    _emit(payload, args)
    return 0


def cmd_phase(args):
    instance = model.load_instance(args.instance)
    lattice = _load_lattice(instance, args.ideals)
    diagram = simplex.phase_diagram(
        instance,
        parse_beta(args.beta_min),
        parse_beta(args.beta_max),
        args.steps,
        lattice,
        jobs=args.jobs,
    )
    if args.format == "csv":
        print("# " + json.dumps(_header(instance, args), sort_keys=True))
        print("beta,F_bitmask,dim")
        for beta, mask, dim in diagram.csv_rows():
            print(f"{beta!r},{mask},{dim}")
        return 0
    payload = _header(instance, args)
    payload.update(diagram.to_json_dict())
    _emit(payload, args)
    return 0


def _load_handle(instance, path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    comps = [
        (frozenset(c["F"]), np.asarray(c["tau"], dtype=float), float(c["w"]))
        for c in data["components"]
    ]
    return equilibrium.build_state(instance, float(data["beta"]), comps)


def cmd_state_eval(args):
    instance = model.load_instance(args.instance)
    handle = _load_handle(instance, args.handle)
    with open(args.query, "r", encoding="utf-8") as fh:
        qdata = json.load(fh)
    if qdata.get("type") == "diag":
        a = qdata["a"]
        if isinstance(a, dict):
            vec = np.zeros(instance.dim_A)
            for label, val in a.items():
                vec[instance.vertex_index(label)] = float(val)
        else:
            vec = np.asarray(a, dtype=float)
        query = equilibrium.MonomialQuery.diag(vec)
    else:
        query = equilibrium.MonomialQuery.monomial(
            parse_path(instance, qdata["mu"]), parse_path(instance, qdata["nu"])
        )
    value = equilibrium.evaluate_state(handle, query)
    payload = _header(instance, args)
    payload["value"] = value
    _emit(payload, args)
    return 0


def cmd_wold(args):
    instance = model.load_instance(args.instance)
    beta = parse_beta(args.beta)
    tau = np.asarray([float(x) for x in args.tau.split(",")], dtype=float)
    decomposition = equilibrium.wold_decompose(instance, beta, tau, tol=args.tol)
    payload = _header(instance, args)
    payload.update(decomposition.to_json_dict(instance))
    _emit(payload, args)
    return 0


def cmd_verify(args):
    instance = model.load_instance(args.instance)
    f = fock.build_fock(instance, args.K)
    report = fock.check_identities(f)
    payload = _header(instance, args)
    payload.update(report.to_json_dict())
    if args.dump_ops:
        import os

        os.makedirs(args.dump_ops, exist_ok=True)
        for (color, gen), mat in f.creation.items():
            coo = mat.tocoo()
            fname = os.path.join(args.dump_ops, f"creation_{color}_{gen}.txt")
            with open(fname, "w", encoding="utf-8") as fh:
                for r, c, v in zip(coo.row, coo.col, coo.data):
                    fh.write(f"{r} {c} {v}\n")
        payload["dumped_to"] = args.dump_ops
    _emit(payload, args)
    return 0 if report.all_passed else 1


def cmd_ground(args):
    instance = model.load_instance(args.instance)
    lattice = _load_lattice(instance, args.ideals)
    desc = equilibrium.ground_states(instance, lattice)
    payload = _header(instance, args)
    payload.update(desc.to_json_dict())
    _emit(payload, args)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kms-phase",
        description="Equilibrium-state structure of finite-rank instances over Z+^N",
    )
    parser.add_argument("--tol", type=float, default=simplex.RESID_TOL)
    parser.add_argument("--snap-tol", type=float, default=simplex.SNAP_TOL)
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument("--jobs", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="entropy report or slope table")
    p.add_argument("instance")
    p.add_argument("--k-max", type=int, default=0)
    p.add_argument("--log2", action="store_true")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("simplex", help="trace sets at one beta")
    p.add_argument("instance")
    p.add_argument("--beta", required=True)
    p.add_argument("--F", default=None)
    p.add_argument("--ideals", default=None)
    p.set_defaults(func=cmd_simplex)

    p = sub.add_parser("phase", help="phase diagram over a beta range")
    p.add_argument("instance")
    p.add_argument("--beta-min", required=True)
    p.add_argument("--beta-max", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--ideals", default=None)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("state-eval", help="evaluate a state on a query")
    p.add_argument("instance")
    p.add_argument("handle")
    p.add_argument("query")
    p.set_defaults(func=cmd_state_eval)

    p = sub.add_parser("wold", help="decompose an equilibrium trace")
    p.add_argument("instance")
    p.add_argument("--beta", required=True)
    p.add_argument("--tau", required=True)
    p.set_defaults(func=cmd_wold)

    p = sub.add_parser("verify", help="truncated Fock identity report")
    p.add_argument("instance")
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--dump-ops", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ground", help="ground/limit state simplex")
    p.add_argument("instance")
    p.add_argument("--ideals", default=None)
    p.set_defaults(func=cmd_ground)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (MembershipError, ConvergenceError, NotKMSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MEMBERSHIP
    except CapExceeded as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CAP
    except PathError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KmsPhaseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
