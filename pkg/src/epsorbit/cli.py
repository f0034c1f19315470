"""Command line front end: ``epsorbit <command> [options]``.

Exit status: 0 on success (an indeterminate order is a success carrying a
flag), 2 on data errors, 1 on usage errors.  Errors go to stderr as
``error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import DataError, EpsOrbitError
from .estimator import Thresholds, box_dimension, critical_order, plot_data
from .expr import parse
from .neighborhood import EpsilonProfile, profile
from .orbit import DEFAULT_N_MAX, DEFAULT_X_MIN, LazyOrbit, auto_x0, generate, import_csv
from .poincare import lazy_poincare_orbit, load_field, poincare_orbit
from .scales import load_scale


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    """Make values JSON-safe and deterministic (no NaN, numpy scalars as floats)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _dump(obj, out):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args):
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _expr(args):
    return parse(args.f, args.d)


def _x0(args, f):
    return args.x0 if args.x0 is not None else auto_x0(f, args.x_min)


def _thresholds(args):
    return Thresholds(args.r_band, args.tau, args.factor)


def _profile_from(args):
    """Profile from --profile, --orbit or --f (in that order of precedence)."""
    if getattr(args, "profile", None):
        p = Path(args.profile)
        return EpsilonProfile.from_json(p) if p.suffix == ".json" else EpsilonProfile.from_csv(p)
    if getattr(args, "orbit", None):
        return profile(import_csv(args.orbit), args.eps_max, args.eps_min, args.ppd)
    if getattr(args, "field", None):
        fld, sec = load_field(args.field)
        x0 = args.x0 if args.x0 is not None else 0.4
        lazy = lazy_poincare_orbit(fld, sec, x0, args.n_max, tol=args.tol)
        return profile(lazy, args.eps_max, args.eps_min, args.ppd)
    if getattr(args, "f", None):
        f = _expr(args)
        lazy = LazyOrbit.from_map(f, _x0(args, f), args.n_max)
        return profile(lazy, args.eps_max, args.eps_min, args.ppd)
    raise UsageError("one of --profile, --orbit, --field or --f is required")


# -- commands -------------------------------------------------------------------

def cmd_orbit(args):
    if not args.f:
        raise UsageError("--f is required")
    f = _expr(args)
    orb = generate(f, _x0(args, f), args.x_min, args.n_max)
    _write_orbit(orb, args.out)
    sys.stderr.write(f"{len(orb)} points, {orb.truncation}\n")


def _write_orbit(orb, out):
    if out:
        orb.to_csv(out)
    else:
        sys.stdout.write("".join(f"{x!r}\n" for x in orb.points.tolist()))


def cmd_profile(args):
    prof = _profile_from(args)
    if args.out and args.out.endswith(".json"):
        prof.to_json(args.out)
    elif args.out:
        prof.to_csv(args.out)
    else:
        _dump(dict(prof.to_dict(), config=_config(args)), None)


def cmd_order(args):
    prof = _profile_from(args)
    rep = critical_order(prof, load_scale(args.scale), _thresholds(args))
    d = rep.to_dict()
    for v in d["verdicts"]:
        v.pop("ratios", None)
    _dump({"config": _config(args), "report": d}, args.out)


def cmd_boxdim(args):
    prof = _profile_from(args)
    dim, se = box_dimension(prof)
    _dump({"config": _config(args), "dim": dim, "stderr": se}, args.out)


def cmd_simulate(args):
    if not args.field:
        raise UsageError("--field is required")
    fld, sec = load_field(args.field)
    x0 = args.x0 if args.x0 is not None else 0.4
    orb = poincare_orbit(fld, sec, x0, args.n_max, args.x_min, tol=args.tol)
    _write_orbit(orb, args.out)
    sys.stderr.write(f"{len(orb)} crossings, {orb.truncation}\n")


def cmd_report(args):
    if not (args.f or args.field):
        raise UsageError("one of --f or --field is required")
    prof = _profile_from(args)
    scale = load_scale(args.scale)
    rep = critical_order(prof, scale, _thresholds(args))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    prof.to_csv(out / "profile.csv")
    plot_data(prof, scale, out / "plot.csv")
    d = rep.to_dict()
    for v in d["verdicts"]:
        v.pop("ratios", None)
    _dump({"config": _config(args), "report": d, "profile": "profile.csv",
           "plot_data": "plot.csv"}, out / "report.json")
    sys.stderr.write(f"m = {rep.m} ({', '.join(rep.flags) or 'no flags'}); written to {out}\n")


# -- argument parsing -------------------------------------------------------------

def build_parser():
    p = _Parser(prog="epsorbit", description="Multiplicity estimates from epsilon-neighborhoods of orbits.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, grid=True, scale=False, source=True):
        sp.add_argument("--config", help="JSON file whose keys override the flags")
        sp.add_argument("--f", help="displacement f in g = id - f, e.g. 'x^2*(-log(x))'")
        sp.add_argument("--d", type=float, default=None, help="domain bound of f")
        sp.add_argument("--x0", type=float, default=None)
        sp.add_argument("--x-min", type=float, default=DEFAULT_X_MIN)
        sp.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=1e-10)
        if source:
            sp.add_argument("--orbit", help="orbit CSV")
            sp.add_argument("--profile", help="profile CSV or JSON")
            sp.add_argument("--field", help="field name or JSON file")
        if grid:
            sp.add_argument("--eps-max", type=float, default=1e-2)
            sp.add_argument("--eps-min", type=float, default=1e-9)
            sp.add_argument("--ppd", type=int, default=8)
        if scale:
            sp.add_argument("--scale", default="power", help="scale name or JSON file")
            sp.add_argument("--r-band", type=float, default=Thresholds.r_band)
            sp.add_argument("--tau", type=float, default=Thresholds.tau)
            sp.add_argument("--factor", type=float, default=Thresholds.factor)

    for name, func, kw in (
        ("orbit", cmd_orbit, dict(grid=False, source=False)),
        ("profile", cmd_profile, {}),
        ("order", cmd_order, dict(scale=True)),
        ("boxdim", cmd_boxdim, {}),
        ("simulate", cmd_simulate, dict(grid=False)),
        ("report", cmd_report, dict(scale=True)),
    ):
        sp = sub.add_parser(name)
        common(sp, **kw)
        sp.set_defaults(func=func)
    return p


def _apply_config(args, parser):
    with open(args.config) as fh:
        conf = json.load(fh)
    if not isinstance(conf, dict):
        raise UsageError("--config must hold a JSON object")
    known = vars(args)
    for key, val in conf.items():
        attr = key.replace("-", "_")
        if attr in ("command", "func"):
            continue
        if attr not in known:
            raise UsageError(f"unknown config key {key!r}")
        setattr(args, attr, val)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a command is required: " + ", ".join(
                ["orbit", "profile", "order", "boxdim", "simulate", "report"]))
        if getattr(args, "config", None):
            _apply_config(args, parser)
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"error[usage]: {exc}\n")
        return 1
    except EpsOrbitError as exc:
        sys.stderr.write(f"error[{exc.code}]: {exc}\n")
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error[{DataError.code}]: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
