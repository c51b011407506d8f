"""qflab command line.

Exit codes: 0 pass, 1 verdict mismatch or failed check, 2 usage/input
error, 3 numeric failure.  Family parameters are given as ``--name value``
after the subcommand options, e.g. ``classify --family P11a --w 2``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import betten_catalog as bc
from . import differentiable_loops as dl
from . import linalg_core as lc
from . import spread_sets as ss
from . import structure_analysis as sa
from ._roots import ConvergenceError
from .section_model import (InvalidSectionError, NumericPolicy, QuasifieldLoop,
                            SharpTransitivityError, left_divide, multiply,
                            right_divide_arrays, section_matrices,
                            verify_sharp_transitivity)

log = logging.getLogger("qflab")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
INT_PARAMS = {"m", "n"}
VERDICT_KEYS = ("decomposable", "quasi_simple", "contains_so2", "kernel_is_diagonal", "proper")


class UsageError(Exception):
    pass


# --- helpers ------------------------------------------------------------------------

def _dump(obj):
    return json.dumps(sa._jsonable(obj), sort_keys=True, indent=2) + "\n"


def _emit(text, out=None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def parse_family_params(extra):
    """['--w', '2', '--c=0'] -> {'w': 2.0, 'c': 0.0}."""
    params = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise UsageError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, val = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for {tok}")
            key, val = tok[2:], extra[i + 1]
            i += 2
        try:
            if key == "coeffs":
                params[key] = tuple(float(v) for v in val.split(","))
            elif key in INT_PARAMS:
                params[key] = int(val)
            else:
                params[key] = float(val)
        except ValueError:
            raise UsageError(f"cannot parse value {val!r} for --{key}") from None
    return params


def parse_vec(text):
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"not a vector: {text!r}") from None
    if len(parts) != 2:
        raise UsageError(f"expected two comma-separated reals, got {text!r}")
    return np.array(parts)


def fmt_num(x):
    x = float(x)
    if abs(x) < 1e-12:
        x = 0.0
    return f"{x:.15g}"


def fmt_vec(v):
    return ",".join(fmt_num(x) for x in v)


def _policy(args):
    try:
        pol = NumericPolicy.from_env()
    except ValueError as e:
        raise UsageError(f"bad QFLAB_TOL: {e}") from None
    if getattr(args, "tol", None) is not None:
        pol = replace(pol, rtol=args.tol, identity_rtol=args.tol)
    return pol


def _instance(args, extra):
    params = parse_family_params(extra)
    spec = bc.FamilySpec(args.family, params)
    try:
        return bc.instantiate(spec)
    except bc.UnknownFamilyError:
        raise UsageError(f"unknown family {args.family!r}") from None
    except bc.ParameterError as e:
        raise UsageError(str(e)) from None


def _load_sample(path):
    try:
        return ss.SpreadSample.from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read spread file {path}: {e}") from None


def _one_source(args):
    if bool(getattr(args, "family", None)) == bool(getattr(args, "spread", None)):
        raise UsageError("give exactly one of --family or --spread")


# --- family -------------------------------------------------------------------------

def _family_info(fid):
    d = bc.family_def(fid)
    return {"id": fid, "summary": d.summary, "defaults": d.defaults,
            "constraints": [c.text for c in d.constraints], "expected": d.expected(dict(d.defaults))}


def cmd_family(args, extra):
    if args.action == "list":
        if extra:
            raise UsageError("family list takes no parameters")
        _emit(_dump([_family_info(fid) for fid in bc.FAMILY_IDS]), args.out)
        return EXIT_OK
    if not args.id:
        raise UsageError(f"family {args.action} needs a family id")
    try:
        info = _family_info(args.id)
    except bc.UnknownFamilyError:
        raise UsageError(f"unknown family {args.id!r}") from None
    if args.action == "show":
        _emit(_dump(info), args.out)
        return EXIT_OK
    args.family = args.id
    inst = _instance(args, extra)
    if args.format == "csv":
        return _export_csv(inst, _policy(args), args.out)
    sample = ss.sample_family(inst.spread)
    _emit(json.dumps(sa._jsonable(sample.to_json()), sort_keys=True) + "\n", args.out)
    return EXIT_OK


# --- classify -----------------------------------------------------------------------

def _sample_policy(base, urange):
    lo, hi = urange
    us = tuple(np.geomspace(lo, hi, 33))
    return replace(base, u_grid=us)


def cmd_classify(args, extra):
    _one_source(args)
    pol = _policy(args)
    if args.family:
        inst = _instance(args, extra)
        rep = sa.classify(inst.section, pol)
        expected = inst.expected
    else:
        if extra:
            raise UsageError("family parameters only apply with --family")
        sample = _load_sample(args.spread)
        sec, urange = ss.section_from_sample(sample)
        rep = sa.classify(sec, _sample_policy(pol, urange))
        expected = None
    d = rep.to_dict()
    d["seed"] = args.seed
    code = EXIT_OK
    if expected is not None:
        got = rep.verdicts()
        mism = sorted(k for k in VERDICT_KEYS if expected.get(k) is not None and expected[k] != got[k])
        d["expected"] = expected
        d["mismatches"] = mism
        code = EXIT_MISMATCH if mism else EXIT_OK
    if rep.internal_errors:
        code = EXIT_NUMERIC
    _emit(_dump(d), args.out)
    return code


# --- loop operations ----------------------------------------------------------------

def _section(args, extra):
    _one_source(args)
    if args.family:
        return _instance(args, extra).section
    if extra:
        raise UsageError("family parameters only apply with --family")
    return ss.section_from_sample(_load_sample(args.spread))[0]


def cmd_op(args, extra):
    pol = _policy(args)
    sec = _section(args, extra)
    try:
        L = QuasifieldLoop(sec, pol)
    except InvalidSectionError as e:
        raise UsageError(str(e)) from None
    x, y = parse_vec(args.lhs), parse_vec(args.rhs)
    if args.cmd == "mul":
        print(fmt_vec(multiply(L, x, y)))
    elif args.cmd == "ldiv":
        if np.hypot(*x) == 0:
            raise UsageError("left operand of ldiv must be non-zero")
        print(fmt_vec(left_divide(L, x, y)))
    else:
        # lhs / rhs: p with p * rhs = lhs
        if np.hypot(*x) == 0 or np.hypot(*y) == 0:
            raise UsageError("rdiv needs non-zero operands")
        p, res = right_divide_arrays(L, y[None], x[None])
        back = multiply(L, p[0], y)
        print(fmt_vec(p[0]))
        print(f"residual {float(np.hypot(*(back - x)) / np.hypot(*x)):.3e}")
    return EXIT_OK


# --- verify -------------------------------------------------------------------------

def cmd_verify(args, extra):
    pol = _policy(args)
    out = {"what": args.what, "seed": args.seed}
    if args.what == "spread":
        _one_source(args)
        if args.family:
            inst = _instance(args, extra)
            sample = ss.sample_family(inst.spread)
            m2 = ss.check_M2(inst.spread, [[1.0, 0.0], [0.0, 1.0]], ss.m2_targets())
            out["M2"] = {"coverage": m2.coverage, "n_targets": m2.n_targets, "uncovered": m2.uncovered}
        else:
            sample = _load_sample(args.spread)
        m1 = ss.check_M1(sample)
        out["M1"] = {"ok": m1.ok, "min_abs_det": m1.min_abs_det, "n_pairs": m1.n_pairs, "violations": m1.violations}
        ok = m1.ok and out.get("M2", {"coverage": 1.0})["coverage"] >= 0.99
    elif args.what == "section":
        sec = _section(args, extra)
        L = QuasifieldLoop(sec, pol)
        rep = verify_sharp_transitivity(L, n_samples=args.samples, seed=args.seed)
        out["sharp_transitivity"] = {"n_samples": rep.n_samples, "failures": rep.failures,
                                     "max_residual": rep.max_residual}
        ok = rep.ok
    else:
        if args.profile:
            if args.family:
                raise UsageError("give exactly one of --profile or --family")
            try:
                prof = dl.profile_from_json(Path(args.profile).read_text(encoding="utf-8"))
            except (OSError, ValueError) as e:
                raise UsageError(f"cannot read profile {args.profile}: {e}") from None
        elif args.family:
            prof = dl.profile_from_section(_instance(args, extra).section, args.u)
        else:
            raise UsageError("verify c1 needs --profile or --family")
        c1 = dl.c1_inequality_check(prof)
        bb = dl.b_bound_check(prof)
        out["c1"] = c1.to_dict()
        out["b_bound"] = bb.to_dict()
        t = dl.grid()[1:-1]
        if np.all(np.abs(prof.b_u(t)) <= dl.PERIODIC_TOL):
            out["exp_band"] = dl.exp_band_check(prof).to_dict()
        out["periodic_endpoints"] = prof.periodic
        ok = c1.ok
    out["ok"] = bool(ok)
    _emit(_dump(out), args.out)
    return EXIT_OK if ok else EXIT_MISMATCH


# --- export -------------------------------------------------------------------------

def _export_csv(inst, pol, out):
    sec = inst.section
    U, T = np.meshgrid(pol.us, pol.ts, indexing="ij")
    a, b = sec.ab(U, T)
    M = section_matrices(sec, U, T)
    keys = sorted(k for k in sec.params)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["family"] + keys + ["r", "t", "a", "b", "m11", "m12", "m21", "m22"])
    pv = [",".join(map(str, v)) if isinstance(v, tuple) else repr(v) for v in (sec.params[k] for k in keys)]
    for idx in np.ndindex(U.shape):
        m = M[idx]
        w.writerow([inst.spec.family_id] + pv + [repr(float(x)) for x in
                                                  (U[idx], T[idx], a[idx], b[idx], m[0, 0], m[0, 1], m[1, 0], m[1, 1])])
    _emit(buf.getvalue(), out)
    return EXIT_OK


def cmd_export(args, extra):
    inst = _instance(args, extra)
    pol = _policy(args)
    if args.format == "csv":
        return _export_csv(inst, pol, args.out)
    sec = inst.section
    U, T = np.meshgrid(pol.us, pol.ts, indexing="ij")
    a, b = sec.ab(U, T)
    M = section_matrices(sec, U, T)
    rows = [{"r": float(U[i]), "t": float(T[i]), "a": float(a[i]), "b": float(b[i]), "m": M[i].tolist()}
            for i in np.ndindex(U.shape)]
    _emit(json.dumps({"family": inst.spec.family_id, "params": sa._jsonable(sec.params), "translations": rows},
                     sort_keys=True) + "\n", args.out)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="qflab", description="Loop sections, spread sets and structural checks for planar quasifields.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, source=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=None, help="identity tolerance (overrides QFLAB_TOL)")
        sp.add_argument("--out", default=None)
        if source:
            sp.add_argument("--family", default=None)
            sp.add_argument("--spread", default=None, help="SpreadSample JSON file")

    f = sub.add_parser("family", help="list, show or export catalog families")
    f.add_argument("action", choices=("list", "show", "export"))
    f.add_argument("id", nargs="?")
    f.add_argument("--format", choices=("json", "csv"), default="json")
    common(f, source=False)

    c = sub.add_parser("classify", help="structural classification")
    common(c)

    for name in ("mul", "ldiv", "rdiv"):
        o = sub.add_parser(name, help=f"loop operation {name}")
        o.add_argument("--lhs", required=True)
        o.add_argument("--rhs", required=True)
        common(o)

    v = sub.add_parser("verify", help="spread axioms, sharp transitivity or C1 conditions")
    v.add_argument("what", choices=("spread", "section", "c1"))
    v.add_argument("--samples", type=int, default=100)
    v.add_argument("--profile", default=None, help="JSON {t, a, b} profile for c1")
    v.add_argument("--u", type=float, default=1.0)
    common(v)

    e = sub.add_parser("export-translations", help="translation matrices on the grid")
    e.add_argument("--format", choices=("json", "csv"), default="csv")
    common(e, source=False)
    e.add_argument("--family", required=True)
    return p


HANDLERS = {"family": cmd_family, "classify": cmd_classify, "mul": cmd_op, "ldiv": cmd_op, "rdiv": cmd_op,
            "verify": cmd_verify, "export-translations": cmd_export}


def main(argv=None):
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return HANDLERS[args.cmd](args, extra)
    except UsageError as e:
        print(f"qflab: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, SharpTransitivityError, InvalidSectionError, lc.DomainError,
            FloatingPointError, dl.GridTooCoarseError) as e:
        print(f"qflab: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
