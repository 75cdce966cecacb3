"""Command line front end.

Subcommands cover the Green sanity check, the critical-point search,
hole-radius sweeps, the disk far-vortex zero table, the structure
matrices, and report generation.  Configuration is TOML with sections
[domain], [vortices], [search], [sweep]; docs/formats.md describes every
key and every output artifact.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__, asymptotics, validate
from .critical import (
    ClassifyThresholds,
    SearchConfig,
    enumerate_critical_points,
)
from .geometry import PuncturedDomain, as_point, diameter, domain_from_config
from .greens import disk_model, green_dump, green_eval, mfs_fit, robin
from .kr import KREvaluator


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    path: str
    domain: object
    lambda1: float
    lambda2: float
    search: SearchConfig
    sweep: dict = field(default_factory=dict)
    type2: dict = field(default_factory=dict)
    matrices: dict = field(default_factory=dict)
    output_dir: str = "."


def load_config(path: str, overrides: argparse.Namespace | None = None) -> RunConfig:
    """Parse and validate a TOML run configuration.

    Raises ConfigError naming the offending path on any missing file,
    parse failure, or absent required section.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}")
    if "domain" not in raw:
        raise ConfigError(f"config {path} is missing the [domain] section")
    try:
        dom = domain_from_config(raw["domain"], base_dir=os.path.dirname(path) or ".")
    except (ValueError, KeyError, OSError) as exc:
        raise ConfigError(f"config {path} has an invalid [domain] section: {exc}")
    vort = raw.get("vortices", {})
    lambda1 = float(vort.get("lambda1", 1.0))
    lambda2 = float(vort.get("lambda2", 1.0))
    if lambda1 <= 0.0 or lambda2 <= 0.0:
        raise ConfigError(f"config {path}: vortex strengths must be positive")

    s = raw.get("search", {})
    try:
        thresholds = ClassifyThresholds(
            delta0=float(s.get("delta0", 0.2)),
            c_lo=float(s.get("c_lo", 0.2)),
            c_hi=float(s.get("c_hi", 5.0)),
        )
        search = SearchConfig(
            grid_res=int(s.get("grid_res", 16)),
            newton_tol=float(s.get("newton_tol", 1e-10)),
            max_iter=int(s.get("max_iter", 60)),
            dedup_radius=float(s.get("dedup_radius", 0.0)),
            deflation=bool(s.get("deflation", False)),
            thresholds=thresholds,
            ring_angles=int(s.get("ring_angles", 24)),
            seed_keep=int(s.get("seed_keep", 48)),
            threads=int(s.get("threads", 1)),
        )
    except ValueError as exc:
        raise ConfigError(f"config {path} has an invalid [search] section: {exc}")
    if overrides is not None:
        if getattr(overrides, "seed_density", None):
            search.grid_res = int(overrides.seed_density)
        if getattr(overrides, "threads", None):
            search.threads = int(overrides.threads)

    out_dir = str(raw.get("output", {}).get("dir", "."))
    return RunConfig(
        path=path,
        domain=dom,
        lambda1=lambda1,
        lambda2=lambda2,
        search=search,
        sweep=raw.get("sweep", {}),
        type2=raw.get("type2", {}),
        matrices=raw.get("matrices", {}),
        output_dir=out_dir,
    )


def _model_for(dom):
    from .geometry import Disk

    if isinstance(dom, Disk):
        return disk_model(dom)
    return mfs_fit(dom)


def _write_json(payload: dict, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(rows: list[dict], cols: list[str], path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# subcommands


def cmd_green_check(rc: RunConfig, args: argparse.Namespace) -> int:
    model = _model_for(rc.domain)
    report = validate.identity_check_report(model, n_nodes=512, n_triples=3,
                                            seed=0)
    print(f"model kind: {model.kind}")
    print(f"fit residual (held out): {model.fit_residual:.3e}")
    print(f"identity max residual @512 nodes: {report['max_residual']:.3e}")
    print(f"identity halving on refinement: {report['halving_ok']}")
    if args.dump_green:
        payload = green_dump(model)
        payload["identity_check"] = report
        _write_json(payload, args.dump_green)
        print(f"wrote {args.dump_green}")
    ok = report["max_residual"] < 1e-6 and report["halving_ok"]
    if args.strict and not ok:
        return 1
    return 0


def _point_rows(points) -> list[dict]:
    rows = []
    for p in points:
        rec = p.as_record()
        rows.append({
            "type": rec["type"],
            "x1": rec["x"][0], "x2": rec["x"][1],
            "y1": rec["y"][0], "y2": rec["y"][1],
            "grad_norm": rec["grad_norm"],
            "morse_index": rec["morse_index"],
            "local_index": rec["local_index"],
            "nondegenerate": rec["nondegenerate"],
            "radial_nondegenerate": rec["radial_nondegenerate"],
            "pair_id": rec["pair_id"],
            "iterations": rec["iterations"],
        })
    return rows


def cmd_find(rc: RunConfig, args: argparse.Namespace) -> int:
    ev = KREvaluator(green=mfs_fit(rc.domain))
    points = enumerate_critical_points(ev, rc.search,
                                       lambda1=rc.lambda1, lambda2=rc.lambda2)
    for p in points:
        print(f"type={p.type:12s} x=({p.x.x1:+.8f},{p.x.x2:+.8f}) "
              f"y=({p.y.x1:+.8f},{p.y.x2:+.8f}) morse={p.morse_index} "
              f"index={p.local_index:+d} nondeg={p.nondegenerate}")
    print(f"{len(points)} critical points")
    base = os.path.join(rc.output_dir, "points")
    if args.format == "csv":
        rows = _point_rows(points)
        cols = list(rows[0].keys()) if rows else [
            "type", "x1", "x2", "y1", "y2", "grad_norm", "morse_index",
            "local_index", "nondegenerate", "radial_nondegenerate",
            "pair_id", "iterations"]
        _write_csv(rows, cols, base + ".csv")
        print(f"wrote {base}.csv")
    else:
        payload = {
            "version": __version__,
            "config": os.path.basename(rc.path),
            "search": _search_record(rc.search),
            "points": [p.as_record() for p in points],
        }
        _write_json(payload, base + ".json")
        print(f"wrote {base}.json")
    if args.strict and any(not p.nondegenerate and not p.radial_nondegenerate
                           for p in points):
        return 1
    return 0


def _search_record(cfg: SearchConfig) -> dict:
    rec = asdict(cfg)
    return rec


def cmd_sweep(rc: RunConfig, args: argparse.Namespace) -> int:
    if not isinstance(rc.domain, PuncturedDomain):
        raise ConfigError(f"config {rc.path}: sweep needs a [domain.hole] table")
    eps_list = rc.sweep.get("eps")
    if not eps_list:
        raise ConfigError(f"config {rc.path}: [sweep] needs an eps list")
    theorem = rc.sweep.get("theorem")
    scenario = str(rc.sweep.get("scenario_id", "sweep"))
    correction = bool(rc.sweep.get("correction", False))
    result = validate.sweep(rc.domain.outer, rc.domain.P, list(eps_list),
                            rc.lambda1, rc.lambda2, cfg=rc.search,
                            theorem_id=theorem, scenario_id=scenario,
                            fit_correction=correction)
    if result.fit_x:
        print(f"exponent(x): {result.fit_x.exponent:.5f} "
              f"band=({result.fit_x.exponent_band[0]:.5f},"
              f"{result.fit_x.exponent_band[1]:.5f}) "
              f"constant: {result.fit_x.constant:.5f} R^2={result.fit_x.rsq:.5f}")
    if result.ratio_limit is not None:
        print(f"ratio |y-P|/|x-P| extrapolated: {result.ratio_limit:.5f}")
    for flag in result.count_flags:
        print(f"flag: {flag}")
    base = os.path.join(rc.output_dir, f"sweep_{scenario}")
    if args.format == "csv":
        validate.write_sweep_csv(result, base + ".csv")
        print(f"wrote {base}.csv")
    else:
        validate.write_sweep_json(result, base + ".json")
        print(f"wrote {base}.json")
    if args.plot:
        _plot_sweep(result.as_record(), base + ".png")
        print(f"wrote {base}.png")
    if args.strict and (result.count_flags
                        or (result.fit_x and result.fit_x.flags)):
        return 1
    return 0


def cmd_disk_type2(rc: RunConfig, args: argparse.Namespace) -> int:
    s_values = rc.type2.get("s")
    if s_values is None:
        raise ConfigError(f"config {rc.path}: [type2] needs s (scalar or list)")
    if isinstance(s_values, (int, float)):
        s_values = [s_values]
    thr = asymptotics.type2_disk_thresholds(rc.lambda1, rc.lambda2)
    print(f"fold s_bar={thr.s_bar:.8f} d1={thr.d1:.8f} d2={thr.d2:.8f}")
    table = []
    for s in s_values:
        sol = asymptotics.type2_disk_solve(float(s), rc.lambda1, rc.lambda2)
        zeros = [{"t": z.t, "slope_sign": z.slope_sign} for z in sol.zeros]
        table.append({"s": float(s), "zeros": zeros, "fold": sol.fold})
        desc = ", ".join(f"t={z.t:.6f} (slope {z.slope_sign:+d})"
                         for z in sol.zeros) or "none"
        print(f"s={float(s):.4f}: {desc}")
    payload = {
        "version": __version__,
        "lambda1": rc.lambda1,
        "lambda2": rc.lambda2,
        "thresholds": {"s_bar": thr.s_bar, "d1": thr.d1, "d2": thr.d2},
        "table": table,
    }
    out = os.path.join(rc.output_dir, "disk_type2.json")
    _write_json(payload, out)
    print(f"wrote {out}")
    return 0


def cmd_matrices(rc: RunConfig, args: argparse.Namespace) -> int:
    dom = rc.domain
    if isinstance(dom, PuncturedDomain):
        P = np.asarray(dom.P)
        outer = dom.outer
    else:
        P = as_point(rc.matrices.get("P", (0.0, 0.0)))
        outer = dom
    model = _model_for(outer)
    rb = robin(model, P)
    tau = rc.lambda1 / rc.lambda2
    payload = {
        "version": __version__,
        "P": P.tolist(),
        "tau": tau,
        "robin": {"R": rb.R, "gradR": rb.gradR.tolist()},
    }
    mt = asymptotics.matrix_Mtilde(rb)
    vals, vecs = asymptotics.eig2(mt)
    payload["Mtilde"] = {"matrix": mt.tolist(), "eigenvalues": vals.tolist(),
                         "eigenvectors": vecs.T.tolist()}
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mbar, m1 = asymptotics.matrix_Mbar_M1(rb, tau,
                                              domain_diameter=diameter(outer))
    for name, mat in (("Mbar", mbar), ("M1", m1)):
        vals, vecs = asymptotics.eig2(mat)
        payload[name] = {"matrix": mat.tolist(), "eigenvalues": vals.tolist(),
                         "eigenvectors": vecs.T.tolist()}
    y0 = rc.matrices.get("y0")
    if y0 is not None:
        from .kr import VortexConfig, kr_hess

        ev = KREvaluator(green=model)
        hess = kr_hess(ev, VortexConfig(x=tuple(P), y=tuple(y0),
                                        lambda1=rc.lambda1, lambda2=rc.lambda2))
        m0 = asymptotics.matrix_M0(hess)
        vals, vecs = asymptotics.eig2(m0)
        payload["M0"] = {"matrix": m0.tolist(), "eigenvalues": vals.tolist(),
                         "eigenvectors": vecs.T.tolist()}
    for name in ("Mtilde", "Mbar", "M1", "M0"):
        if name in payload:
            vals = payload[name]["eigenvalues"]
            print(f"{name}: eigenvalues {vals[0]:+.8e}, {vals[1]:+.8e}")
    out = os.path.join(rc.output_dir, "matrices.json")
    _write_json(payload, out)
    print(f"wrote {out}")
    return 0


def _plot_sweep(record: dict, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    eps, rx, ry = [], [], []
    family = record.get("family", "III")
    for block in record["per_eps"]:
        pts = [p for p in block["points"] if p["type"] == family]
        if not pts:
            continue
        eps.append(block["eps"])
        rx.append(float(np.mean([p["dist_x"] for p in pts])))
        ry.append(float(np.mean([p["dist_y"] for p in pts])))
    if eps:
        ax.loglog(eps, rx, "o", label="|x - P|")
        ax.loglog(eps, ry, "s", label="|y - P|")
        fit = record.get("fit_x")
        if fit:
            ee = np.array(sorted(eps))
            ax.loglog(ee, fit["constant"] * ee ** fit["exponent"], "-",
                      label=f"fit slope {fit['exponent']:.4f}")
    ax.set_xlabel("hole radius")
    ax.set_ylabel("distance to hole center")
    ax.legend(fontsize=8)
    ax.set_title(record.get("scenario_id", "sweep"))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_report(args: argparse.Namespace) -> int:
    src = args.dir
    files = sorted(glob.glob(os.path.join(src, "*.json")))
    if not files:
        print(f"no JSON artifacts under {src}", file=sys.stderr)
        return 1
    rows = []
    made = []
    for path in files:
        with open(path) as fh:
            data = json.load(fh)
        if "per_eps" in data:
            fit = data.get("fit_x") or {}
            rows.append({
                "artifact": os.path.basename(path),
                "scenario": data.get("scenario_id", ""),
                "kind": "sweep",
                "count": sum(b["found_count"] for b in data["per_eps"]),
                "exponent": fit.get("exponent"),
                "constant": fit.get("constant"),
                "rsq": fit.get("rsq"),
                "flags": "; ".join(data.get("count_flags", [])),
            })
            if args.plot:
                png = os.path.join(src, os.path.splitext(
                    os.path.basename(path))[0] + ".png")
                _plot_sweep(data, png)
                made.append(png)
        elif "points" in data:
            rows.append({
                "artifact": os.path.basename(path),
                "scenario": data.get("config", ""),
                "kind": "find",
                "count": len(data["points"]),
                "exponent": None,
                "constant": None,
                "rsq": None,
                "flags": "",
            })
    out_csv = os.path.join(src, "report.csv")
    _write_csv(rows, ["artifact", "scenario", "kind", "count", "exponent",
                      "constant", "rsq", "flags"], out_csv)
    print(f"wrote {out_csv}")
    for png in made:
        print(f"wrote {png}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krpoints",
        description="critical points of the two-vortex interaction energy",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_config: bool = True):
        if with_config:
            p.add_argument("config", help="TOML run configuration")
        p.add_argument("--strict", action="store_true",
                       help="nonzero exit on any flag or degeneracy")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--plot", action="store_true",
                       help="render figures next to the data files")
        p.add_argument("--seed-density", type=int, default=None,
                       help="override search.grid_res")
        p.add_argument("--threads", type=int, default=None,
                       help="override search.threads (default 1)")

    p = sub.add_parser("green-check", help="fit and certify the Green model")
    add_common(p)
    p.add_argument("--dump-green", default=None, metavar="PATH",
                   help="write the model description as JSON")

    for name, hlp in (("find", "enumerate critical points"),
                      ("sweep", "run a hole-radius ladder"),
                      ("disk-type2", "far-vortex zero table on the disk"),
                      ("matrices", "structure matrices and eigen data")):
        p = sub.add_parser(name, help=hlp)
        add_common(p)

    p = sub.add_parser("report", help="merge JSON artifacts into a summary")
    p.add_argument("dir", help="directory holding JSON artifacts")
    p.add_argument("--plot", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args)
        rc = load_config(args.config, overrides=args)
        if args.command == "green-check":
            return cmd_green_check(rc, args)
        if args.command == "find":
            return cmd_find(rc, args)
        if args.command == "sweep":
            return cmd_sweep(rc, args)
        if args.command == "disk-type2":
            return cmd_disk_type2(rc, args)
        if args.command == "matrices":
            return cmd_matrices(rc, args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
