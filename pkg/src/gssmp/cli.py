"""Command-line front end.

Subcommands: ``simulate``, ``lamperti``, ``canonicalize``, ``verify``,
``tgroup`` and ``frag``.  Models are read from JSON files; every run is
seeded (default 0).  Reports go to ``--report`` (JSON, stdout by default)
and trajectories or samples to ``--out`` (CSV).

Exit status: 0 when every check in the report passed, 1 when a check
failed, 2 on a configuration error.
"""
import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .io import SPEC_VERSION, ConfigError, components_from_doc, dumps, load, read_json, validate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_RUN_KEYS = {"seed", "n_paths", "horizon", "out", "report", "tol"}


def _fmt(x):
    return repr(float(x))


def _emit_csv(path, header, rows):
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _emit_report(args, report):
    text = dumps(report)
    if args.report in (None, "-"):
        print(text)
    else:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")


def _mc(samples):
    from .stats import summarize

    return summarize(samples).to_dict()


# -- subcommands ---------------------------------------------------------------------


def cmd_simulate(args):
    from .levy import as_seed_sequence, child_seed, simulate
    from .paths import write_csv

    model = load(args.model, "model")
    ss = as_seed_sequence(args.seed)
    buf = io.StringIO()
    ends = []
    for i in range(args.n_paths):
        seed = args.seed if args.n_paths == 1 else child_seed(ss, i)
        p = simulate(model, args.horizon, seed)
        ends.append(np.nan if p.killed else p.end_value)
        part = io.StringIO()
        write_csv(p, part)
        lines = part.getvalue().splitlines()
        if args.n_paths == 1:
            buf.write("\n".join(lines) + "\n")
        else:
            if i == 0:
                buf.write("path," + lines[0] + "\n")
            buf.write("".join(f"{i},{ln}\n" for ln in lines[1:]))
    if args.out in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
    ends = np.array(ends, dtype=float).reshape(args.n_paths, model.dim)
    alive = np.all(np.isfinite(ends), axis=1)
    report = {"subcommand": "simulate", "seed": args.seed, "n_paths": args.n_paths, "horizon": args.horizon,
              "killed": int((~alive).sum()), "passed": True}
    if alive.sum() > 1:
        report["end_value"] = [_mc(ends[alive, k]) for k in range(model.dim)]
    if args.report is not None:
        _emit_report(args, report)
    return EXIT_OK


def cmd_lamperti(args):
    from .lamperti import build_trajectory, lifetime_law_sample, self_similarity_check
    from .paths import write_csv

    spec = load(args.spec, "spec")
    report = {"subcommand": "lamperti", "seed": args.seed, "passed": True}
    if args.lifetime:
        samples, excluded = lifetime_law_sample(spec, args.lifetime, args.seed)
        report["lifetime"] = {"n": int(samples.size), "excluded": excluded,
                              "summary": _mc(samples) if samples.size else None}
        if args.out:
            _emit_csv(args.out, ["zeta"], [[v] for v in samples])
    elif args.check_y is not None:
        res = self_similarity_check(spec, args.check_y, args.horizon, args.n_paths, args.seed)
        report["self_similarity"] = res
        report["passed"] = res["passed"]
    else:
        traj = build_trajectory(spec, args.horizon, args.seed, substeps=args.substeps)
        report.update({"status": traj.status, "lifetime": traj.lifetime.value,
                       "lifetime_status": traj.lifetime.status.value, "end": traj.path.end})
        fh = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
        try:
            write_csv(traj.path, fh)
        finally:
            if fh is not sys.stdout:
                fh.close()
        if args.report is None:
            return EXIT_OK
    _emit_report(args, report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _components(args):
    if args.config_doc is not None and "component" in args.config_doc:
        doc = {k: v for k, v in args.config_doc.items() if k in ("component", "params", "spec_version")}
        return components_from_doc(doc)
    if args.component is None:
        raise ConfigError("--component is required")
    params = {}
    for key in ("alpha", "beta", "group_beta", "eps", "dim"):
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    if args.rate is not None:
        params["rate"] = args.rate
    name = args.component if args.psi is None else f"{args.component}@{args.psi}"
    return components_from_doc({"component": name, "params": params})


def cmd_canonicalize(args):
    from .canonical import (CanonicalMap, alpha_consistency, canonicalize, path_independence, to_report,
                            verify_homomorphism)

    comp = _components(args)
    g = canonicalize(comp, quad_tol=args.quad_tol)
    hom = verify_homomorphism(g, comp, grid_size=args.grid)
    pi = path_independence(g)
    report = {"subcommand": "canonicalize", "component": comp.name, "params": comp.params, **to_report(g),
              "homomorphism_residual": hom, "path_independence": pi,
              "alpha_consistency": alpha_consistency(g)}
    report["passed"] = bool(hom < args.tol and pi < args.tol)
    if args.out:
        from .invariance import halton_points

        pts = halton_points(comp.domain, args.grid * args.grid)[:, 0]
        vals = g.evaluate(pts)
        d = comp.dim
        _emit_csv(args.out, [f"y{k + 1}" for k in range(d)] + [f"g{k + 1}" for k in range(d)],
                  [list(p) + list(v) for p, v in zip(pts, vals)])
    _emit_report(args, report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_verify(args):
    from .invariance import check_good, check_group

    comp = _components(args)
    good = check_good(comp, args.grid, args.tol)
    group = check_group(comp, args.grid, args.tol)
    report = {"subcommand": "verify", "component": comp.name, "params": comp.params,
              "good": good.to_dict(), "group": group.to_dict(), "passed": bool(good.passed and group.passed)}
    _emit_report(args, report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_tgroup(args):
    from .tgroup import alpha_M_exact, functionals, recentering_check
    from .levy import as_seed_sequence, child_seed

    model = load(args.model, "model")
    if model.dim != 2:
        raise ConfigError(f"{args.model}: tgroup needs a 2D model")
    res = recentering_check(model, args.M, args.times, args.n_paths, args.seed)
    report = {"subcommand": "tgroup", "M": args.M, "seed": args.seed, "n_paths": args.n_paths,
              "alpha_M": {"estimate": res["alpha_M"], "std_error": res["alpha_M_std_error"]},
              "W_mean": res["W"], "passed": res["passed"]}
    if not model.has_diffusion:
        report["alpha_M"]["exact"] = alpha_M_exact(model, args.M)
    if args.out:
        _, I, D = functionals(model, args.M, args.times, args.n_paths, child_seed(as_seed_sequence(args.seed), 1))
        W = I - res["alpha_M"] * D
        _emit_csv(args.out, [f"W({t})" for t in args.times], W.tolist())
    _emit_report(args, report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_frag(args):
    from . import fragmentation as F

    nu, alpha_doc = load(args.nu, "nu")
    alpha = args.alpha if args.alpha is not None else (alpha_doc if alpha_doc is not None else 0.0)
    report = {"subcommand": "frag", "mode": args.mode, "alpha": alpha, "x0": args.x0, "seed": args.seed,
              "n_paths": args.n_paths, "passed": True}
    if args.mode == "equivalence":
        res = F.equivalence_test(nu, alpha, args.x0, args.t_probe, args.n_paths, args.seed)
        report.update(res)
    elif args.mode == "dissipation":
        samples, capped = F.total_dissipation_samples(nu, alpha, args.x0, args.n_paths, args.seed,
                                                      horizon=args.horizon)
        report["dissipation"] = _mc(samples)
        report["capped"] = int(capped.sum())
        if args.out:
            _emit_csv(args.out, ["dissipated", "capped"], [[s, int(c)] for s, c in zip(samples, capped)])
    else:
        sampler = F.sample_direct if args.mode == "direct" else F.sample_via_levy
        t_end = args.horizon if np.isfinite(args.horizon) else None
        res = sampler(nu, alpha, args.x0, args.n_paths, args.seed, args.t_probe, t_end)
        report["Y"] = _mc(res.y_probe)
        report["Z"] = _mc(res.z_probe)
        report["status"] = res.status_counts()
        if args.out:
            rows = [[y, z, d, F.STATUS_NAMES[int(s)]] for y, z, d, s in
                    zip(res.y_probe, res.z_probe, res.death_time, res.status)]
            _emit_csv(args.out, ["Y", "Z", "death_time", "status"], rows)
    _emit_report(args, report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# -- parser --------------------------------------------------------------------------


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="gssmp", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, n_paths=1, horizon=1.0):
        sp.add_argument("--config", help="JSON file whose keys supply defaults for the flags")
        sp.add_argument("--seed", type=_seed, default=0)
        sp.add_argument("--n-paths", dest="n_paths", type=int, default=n_paths)
        sp.add_argument("--horizon", type=float, default=horizon)
        sp.add_argument("--out", help="CSV output (default stdout when it is the main output)")
        sp.add_argument("--report", help="JSON report output (default stdout)")

    def component_flags(sp, tol):
        sp.add_argument("--component", help="registry name, optionally 'name@psi'")
        sp.add_argument("--psi", help="push the components through a registered psi")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--group-beta", dest="group_beta", type=float)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--rate", type=_floats)
        sp.add_argument("--grid", type=int, default=16)
        sp.add_argument("--tol", type=float, default=tol)

    sp = sub.add_parser("simulate", help="simulate a Lévy model")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("lamperti", help="build a self-similar trajectory from a spec")
    common(sp, n_paths=10 ** 4)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--substeps", type=int, default=0)
    sp.add_argument("--lifetime", type=int, default=0, help="sample this many life times instead")
    sp.add_argument("--check-y", dest="check_y", type=_floats,
                    help="run the self-similarity KS check from this start point at time --horizon")
    sp.set_defaults(func=cmd_lamperti)

    sp = sub.add_parser("canonicalize", help="build the canonical map of invariance components")
    common(sp)
    component_flags(sp, tol=1e-5)
    sp.add_argument("--quad-tol", dest="quad_tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_canonicalize)

    sp = sub.add_parser("verify", help="check the good-component and group axioms")
    common(sp)
    component_flags(sp, tol=1e-7)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("tgroup", help="estimate alpha_M and check the recentered martingale")
    common(sp, n_paths=10 ** 4)
    sp.add_argument("--model", required=True)
    sp.add_argument("--M", type=float, default=1.0)
    sp.add_argument("--times", type=_floats, default=[0.5, 1.0, 2.0])
    sp.set_defaults(func=cmd_tgroup)

    sp = sub.add_parser("frag", help="tagged fragment simulation and route equivalence")
    common(sp, n_paths=10 ** 4, horizon=np.inf)
    sp.add_argument("--nu", required=True)
    sp.add_argument("--mode", choices=["direct", "levy", "equivalence", "dissipation"], default="equivalence")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--x0", type=float, default=1.0)
    sp.add_argument("--t-probe", dest="t_probe", type=float, default=1.0)
    sp.set_defaults(func=cmd_frag)
    return p


def _apply_config(args, parser):
    """Fill flags left at their defaults from a ``--config`` JSON object."""
    args.config_doc = None
    if not args.config:
        return
    doc = read_json(args.config)
    if not isinstance(doc, dict):
        raise ConfigError(f"{args.config}: top level must be an object")
    if "spec_version" in doc:
        validate(doc["spec_version"], {"const": SPEC_VERSION},
                 f"{args.config}: spec_version")
    args.config_doc = doc
    sub = parser._subparsers._group_actions[0].choices[args.subcommand]
    for key, value in doc.items():
        if key in ("spec_version", "component", "params"):
            continue
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"{args.config}: field {key}: unknown option for {args.subcommand}")
        if getattr(args, dest) == sub.get_default(dest):
            setattr(args, dest, value)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _apply_config(args, parser)
        if args.n_paths < 1:
            raise ConfigError("--n-paths must be >= 1")
        return args.func(args)
    except ConfigError as err:
        print(f"gssmp: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as err:
        print(f"gssmp: config error: {err.args[0]}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
