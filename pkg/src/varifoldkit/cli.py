"""Command-line front end.

Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 for
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .example import ExampleConfig, build_example, build_manifest, derive_parameters, tail_bound
from .exceptions import ConfigurationError, VarifoldKitError
from .io import Report, config_hash, load_config, parse_config, thread_count, write_report
from .iso import iso_quotient, iso_quotient_mc, iso_quotient_profile, lebesgue_quotient, profile_sweep
from .profile import DEFAULT_ORDER
from .scaling import QuantityKind, dichotomy_ratio, excess_set_scan, scaling_report
from .shapes import make_canonical
from .varifold import Cube

__all__ = ["main", "main_entry", "run_command", "COMMANDS"]

COMMANDS = ("derive", "build", "report-scaling", "report-iso", "scan-excess", "dichotomy")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

#: Extra levels kept beyond ``i_max`` when the config does not set ``max_level``.
EXTRA_LEVELS = 10


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (see docs/config_schema.json)")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), help="report format")
    common.add_argument("--seed", type=int, help="random seed (u64)")
    common.add_argument("--i-min", type=int, dest="i_min", help="smallest dyadic level")
    common.add_argument("--i-max", type=int, dest="i_max", help="largest dyadic level")
    common.add_argument("--kind", help="quantity for report-scaling")
    common.add_argument("--tolerance", type=float, help="slope tolerance override")
    parser = _Parser(prog="varifoldkit", description="Multiscale varifold example toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "derive": "validate parameters and print the derived scales",
        "build": "assemble the example and print its manifest",
        "report-scaling": "bracketed dyadic profile and slope verdict for one quantity",
        "report-iso": "isoperimetric quotients and profile sweep",
        "scan-excess": "membership of probes in the excess sets B_i",
        "dichotomy": "density-ratio dichotomy experiment",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return parser


def _merge_cli(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    for key in ("seed", "i_min", "i_max", "kind", "tolerance"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    out = dict(cfg.get("output", {}))
    if args.format is not None:
        out["format"] = args.format
    if args.out is not None:
        out["path"] = args.out
    if out:
        cfg["output"] = out
    return parse_config(cfg)


def _example_config(cfg: dict) -> ExampleConfig:
    ex = dict(cfg.get("example", {}))
    if "max_level" not in ex:
        ex["max_level"] = cfg.get("i_max", 8) + EXTRA_LEVELS
    return ExampleConfig.from_dict(ex)


def _provenance(cfg, command, ex=None, scales=None):
    prov = {
        "version": __version__,
        "command": command,
        "config_sha256": config_hash(cfg),
        "seed": int(cfg.get("seed", 0)),
        "quadrature_order": int(cfg.get("quadrature_order", DEFAULT_ORDER)),
    }
    scales = ex.scales if ex is not None else scales
    if scales is not None:
        prov["derived"] = scales.as_dict()
    if ex is not None:
        i_min, i_max = cfg.get("i_min", 2), cfg.get("i_max", 8)
        prov["max_level"] = ex.max_level
        prov["tail_bounds"] = {str(i): tail_bound(ex.scales, i, ex.max_level, ex.order)
                               for i in range(i_min, min(i_max, ex.max_level) + 1)}
    return prov


def _cmd_derive(cfg):
    conf = _example_config(cfg)
    sc = derive_parameters(conf)
    levels = [{"j": j, "log2_rho": str(sc.log2_rho(j)), "log2_sigma": str(sc.log2_sigma(j)),
               "log2_tau": str(sc.log2_tau(j)), "rho": sc.rho(j), "sigma": sc.sigma(j),
               "tau": sc.tau(j), "dyadic": sc.is_dyadic(j)} for j in range(conf.max_level + 1)]
    result = {"config": conf.to_dict(), "derived": sc.as_dict(), "levels": levels}
    summary = f"a={float(sc.a):g} b={float(sc.b):g}"
    return Report("derive", "pass", _provenance(cfg, "derive", scales=sc), result), summary


def _cmd_build(cfg):
    ex = build_example(_example_config(cfg), order=cfg.get("quadrature_order", DEFAULT_ORDER))
    i_min, i_max = cfg.get("i_min", 2), cfg.get("i_max", 8)
    manifest = build_manifest(ex, range(i_min, min(i_max, ex.max_level) + 1))
    header = ("j", "rho", "tau", "y_center", "cells", "cell_mass", "level_mass")
    rows = tuple((lv["j"], lv["rho"], lv["tau"], lv["y_center"], lv["cells"], lv["cell_mass"],
                  lv["level_mass"]) for lv in manifest["levels"])
    return (Report("build", "pass", _provenance(cfg, "build", ex), manifest, header, rows),
            f"levels=0..{ex.max_level}")


def _cmd_scaling(cfg):
    ex = build_example(_example_config(cfg), order=cfg.get("quadrature_order", DEFAULT_ORDER))
    qd = cfg.get("quantity", {})
    kind = QuantityKind(cfg.get("kind", "mass"), q=qd.get("q"), norm=qd.get("norm", "frobenius"),
                        p=qd.get("p"), s=qd.get("s"), r=qd.get("r"))
    kwargs = {}
    if "tail_threshold" in cfg:
        kwargs["tail_threshold"] = cfg["tail_threshold"]
    rep = scaling_report(ex, kind, cfg.get("i_min", 2), cfg.get("i_max", 8),
                         geometry=cfg.get("geometry", "cube"), tolerance=cfg.get("tolerance"),
                         **kwargs)
    rows = tuple((r.i, r.radius, r.lower, r.upper, r.log2_lower, r.log2_upper) for r in rep.rows)
    summary = (f"{rep.kind.label} slope_lower={rep.fit.slope_lower:.6f} "
               f"slope_upper={rep.fit.slope_upper:.6f} predicted={rep.predicted:g} "
               f"tolerance={rep.tolerance:g}")
    return (Report("report-scaling", rep.verdict, _provenance(cfg, "report-scaling", ex),
                   rep.to_dict(), ("i", "radius", "lower", "upper", "log2_lower", "log2_upper"),
                   rows), summary)


def _cmd_iso(cfg):
    iso = cfg.get("iso", {})
    order = cfg.get("quadrature_order", DEFAULT_ORDER)
    seed = int(cfg.get("seed", 0))
    checks = {}
    lebesgue = []
    for n in iso.get("dims", [1, 2, 3]):
        q = iso_quotient(make_canonical("lebesgue_ball", n=n, resolution=8)).quotient
        ref = lebesgue_quotient(n)
        lebesgue.append({"n": n, "quotient": q, "reference": ref})
        checks[f"lebesgue_n{n}"] = abs(q - ref) <= 1e-9
    spheres = []
    for r in iso.get("sphere_radii", [1.0, 7.0]):
        res = iso_quotient(make_canonical("sphere", n=2, radius=r, resolution=16))
        spheres.append({"radius": r, **res.to_dict()})
    if spheres:
        ref = 1 / (2 * math.sqrt(4 * math.pi))
        checks["sphere_closed_form"] = abs(spheres[0]["quotient"] - ref) <= 1e-6
        checks["sphere_dilation"] = all(abs(s["quotient"] - spheres[0]["quotient"]) <= 1e-10
                                        for s in spheres)
    n = iso.get("n", 2)
    grid = iso.get("tau_grid", [round(0.05 * k, 2) for k in range(1, 21)])
    rows, summ = profile_sweep(grid, n, order)
    checks["sweep_finite_positive"] = all(math.isfinite(r.quotient) and r.quotient > 0 for r in rows)
    mc = None
    count = iso.get("mc_count", 200_000)
    if count:
        tau = iso.get("mc_tau", 0.25)
        qq, qm = iso_quotient_profile(tau, n, order).quotient, iso_quotient_mc(tau, n, count, seed).quotient
        mc = {"tau": tau, "count": count, "quadrature": qq, "monte_carlo": qm,
              "relative_error": abs(qm - qq) / qq}
        checks["mc_oracle"] = mc["relative_error"] <= 0.01
    result = {"lebesgue": lebesgue, "spheres": spheres, "checks": checks, "monte_carlo": mc,
              "sweep": [vars(r) for r in rows], "sweep_summary": summ}
    verdict = "pass" if all(checks.values()) else "fail"
    table = tuple((r.tau, r.mass, r.variation, r.quotient) for r in rows)
    return (Report("report-iso", verdict, _provenance(cfg, "report-iso"), result,
                   ("tau", "mass", "variation", "quotient"), table),
            f"max_quotient={summ['max_quotient']:.6f} lebesgue={summ['lebesgue_quotient']:.6f}")


def _parallel_map(fn, items):
    k = thread_count()
    if k == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


def _cmd_scan(cfg):
    ex = build_example(_example_config(cfg), order=cfg.get("quadrature_order", DEFAULT_ORDER))
    sc = cfg.get("scan", {})
    n = ex.n
    probes = sc.get("probes")
    if probes is None:
        probes = [[0.0] * (n + 1), [0.0, 0.25] + [-0.125] * (n - 1), [0.0, -0.375] + [0.25] * (n - 1)]
    probes = np.asarray(probes, dtype=float)
    if probes.ndim != 2 or probes.shape[1] != n + 1:
        raise ConfigurationError(f"probes must have {n + 1} coordinates")
    i_values = sc.get("i_values", list(range(cfg.get("i_min", 2), cfg.get("i_max", 8) + 1)))
    opts = dict(epsilon=sc.get("epsilon"), gamma=sc.get("gamma"), k_max=sc.get("k_max"))
    scans = _parallel_map(
        lambda x: excess_set_scan(ex, [x], i_values, include_plane=sc.get("include_plane", False),
                                  **opts), list(probes))
    membership = [s.membership[0] for s in scans]
    on_T = [bool(x[0] == 0) for x in probes]
    checks = {"on_T_in_every_B_i": all(all(m is True for m in row)
                                       for row, t in zip(membership, on_T) if t),
              "nested": all(s.nested() for s in scans)}
    result = {"probes": probes.tolist(), "i_values": list(i_values), "membership": membership,
              "epsilon": scans[0].epsilon, "radii": list(scans[0].radii)}
    if sc.get("control_plane", True):
        hw = float(ex.window.half_width)
        pw = make_canonical("plane_window", n=n, half_width=hw, resolution=16)
        ctrl = excess_set_scan(pw, probes[np.array(on_T)], i_values,
                               domain=Cube(np.zeros(n + 1), hw), **opts)
        result["control_plane_membership"] = [list(r) for r in ctrl.membership]
        checks["plane_window_in_no_B_i"] = ctrl.none_in()
    result["checks"] = checks
    verdict = "pass" if all(checks.values()) else "fail"
    rows = tuple((k, i, "undetermined" if m is None else ("in" if m else "out"))
                 for k, row in enumerate(membership) for i, m in zip(i_values, row))
    return (Report("scan-excess", verdict, _provenance(cfg, "scan-excess", ex), result,
                   ("probe", "i", "membership"), rows),
            " ".join(f"{k}={v}" for k, v in checks.items()))


def _cmd_dichotomy(cfg):
    ex = build_example(_example_config(cfg), order=cfg.get("quadrature_order", DEFAULT_ORDER))
    d = cfg.get("dichotomy", {})
    n = ex.n
    q = d.get("q", float(1 + ex.scales.kappa / n))
    res = dichotomy_ratio(ex, q, nu=d.get("nu", "complement_of_T"), a=d.get("a"),
                          i_min=cfg.get("i_min", 2), i_max=cfg.get("i_max", 8),
                          s=d.get("s"), r=d.get("r"))
    rows = tuple((i, 2.0 ** -i, bl, bu, cl, cu) for i, bl, bu, cl, cu in
                 zip(res.i_values, res.ball_lower, res.ball_upper, res.cube_lower, res.cube_upper))
    verdict = "pass" if res.passed else "fail"
    return (Report("dichotomy", verdict, _provenance(cfg, "dichotomy", ex), res.to_dict(),
                   ("i", "radius", "ball_lower", "ball_upper", "cube_lower", "cube_upper"), rows),
            f"nq={res.exponent:g} verdict={res.verdict!r} predicted={res.predicted_verdict!r}")


_DISPATCH = {"derive": _cmd_derive, "build": _cmd_build, "report-scaling": _cmd_scaling,
             "report-iso": _cmd_iso, "scan-excess": _cmd_scan, "dichotomy": _cmd_dichotomy}


def main(argv=None) -> int:
    """Run the CLI and return the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"varifoldkit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = _merge_cli(cfg, args)
        thread_count()
        report, summary = _DISPATCH[args.command](cfg)
        out = cfg.get("output", {})
        fmt = out.get("format", "json")
        text = write_report(report, fmt, out.get("path"))
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"varifoldkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VarifoldKitError as exc:
        print(f"varifoldkit {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if out.get("path") is None:
        sys.stdout.write(text)
    print(f"varifoldkit {args.command}: verdict={report.verdict} seed={report.provenance['seed']} "
          f"{summary}", file=sys.stderr)
    return EXIT_PASS if report.verdict in ("pass", "info") else EXIT_FAIL


run_command = main


def main_entry() -> None:  # pragma: no cover
    """Console-script wrapper."""
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
