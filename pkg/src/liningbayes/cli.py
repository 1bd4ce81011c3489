"""Command-line entry point: ``liningbayes <verb> [options]``."""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

from . import pipeline
from .scenario import bundled_scenarios, load_scenario


def _common(p: argparse.ArgumentParser):
    p.add_argument("-c", "--config", default="illustration",
                   help="scenario YAML, bundled scenario name, or run manifest")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("-o", "--out", type=Path, help="output root (default: scenario output_dir)")
    p.add_argument("--chains", type=int, help="override the number of chains")
    p.add_argument("--iterations", type=int, help="override the number of generations")
    p.add_argument("--force", dest="force", action="store_true", default=None,
                   help="include the hoop-force reading")
    p.add_argument("--no-force", dest="force", action="store_false",
                   help="drop the hoop-force reading")
    p.add_argument("--overwrite", action="store_true",
                   help="replace an existing output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liningbayes",
        description="Bayesian identification of earth pressure on tunnel linings.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("forward", help="solve the lining under the truth field")
    _common(p)
    p = sub.add_parser("synthesize", help="write noisy observations of the truth")
    _common(p)
    p.add_argument("--noise", type=float, help="override the convergence noise std (mm)")
    p = sub.add_parser("invert", help="Bayesian inversion of one or more cases")
    _common(p)
    p.add_argument("cases", nargs="*", help="case labels (default: all)")
    p.add_argument("--observations", type=Path,
                   help="directory with observations.csv (and force.csv) to invert instead")
    p.add_argument("--prior-only", action="store_true", help="sample the prior alone")
    p = sub.add_parser("baseline", help="deterministic bounded least-squares inversion")
    _common(p)
    p.add_argument("cases", nargs="*")
    p = sub.add_parser("trial-knots", help="increase the knot count until the mean settles")
    _common(p)
    p.add_argument("--counts", type=int, nargs="+")
    p.add_argument("--case")
    p.add_argument("--tolerance", type=float, help="stabilization RMSE tolerance (kPa)")
    p = sub.add_parser("presets", help="noise and soil-spring sensitivity ladders")
    _common(p)
    p = sub.add_parser("report", help="tabulate the scores of finished runs")
    p.add_argument("path", type=Path)
    p.add_argument("--check", action="store_true",
                   help="verify each summary.csv against its samples.csv")
    p = sub.add_parser("replay", help="re-run the operation recorded in a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("scenarios", help="list the bundled scenarios")
    return parser


def _scenario(args):
    sc = load_scenario(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    sampler = {}
    if args.chains is not None:
        sampler["n_chains"] = args.chains
    if args.iterations is not None:
        sampler["iterations"] = args.iterations
    if sampler:
        changes["sampler"] = sampler
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    return sc.with_(**changes) if changes else sc


def _prepare(path: Path, overwrite: bool):
    if path.exists() and any(path.iterdir()):
        if not overwrite:
            raise SystemExit(f"{path} already holds results; pass --overwrite to replace them")
        shutil.rmtree(path)


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _print_rows(rows, cols):
    widths = [max(len(c), *(len(_fmt(r[c])) for r in rows)) for c in cols]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for r in rows:
        print("  ".join(_fmt(r[c]).ljust(w) for c, w in zip(cols, widths)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.verb == "scenarios":
        for name, path in sorted(bundled_scenarios().items()):
            print(f"{name}\t{path}")
        return 0
    if args.verb == "report":
        rows = pipeline.report(args.path)
        if not rows:
            print(f"no runs found below {args.path}")
            return 1
        _print_rows(rows, ["run", "target", "baselines", "force", "IA", "RMSE", "Std",
                           "rhat_max", "converged"])
        if args.check:
            bad = 0
            for row in rows:
                run_dir = args.path / row["run"]
                if not (run_dir / "samples.csv").exists():
                    continue
                tmp = run_dir / ".resummary.csv"
                from . import tables

                tables.write_summary(tmp, pipeline.resummarize(run_dir))
                same = tmp.read_bytes() == (run_dir / "summary.csv").read_bytes()
                tmp.unlink()
                bad += not same
                print(f"{row['run']}: summary {'matches' if same else 'DIFFERS FROM'} samples")
            return 1 if bad else 0
        return 0
    if args.verb == "replay":
        pipeline.replay(args.manifest, args.out)
        print(f"replayed {args.manifest} into {args.out}")
        return 0

    sc = _scenario(args)
    study = pipeline.Study(sc)
    out = sc.output_dir

    if args.verb == "forward":
        _prepare(out / "forward", args.overwrite)
        res = pipeline.run_forward(study, out=out / "forward")
        print(f"wrote {out / 'forward'}; crown hoop force {res['hoop_kN'][0]:.1f} kN")
    elif args.verb == "synthesize":
        _prepare(out / "observations", args.overwrite)
        if args.force is False:
            study = pipeline.Study(sc.with_(observations={"force_angle": None}))
        obs = pipeline.synthesize(study, args.noise, out=out / "observations")
        print(f"wrote {len(obs)} readings to {out / 'observations'}")
    elif args.verb == "invert":
        labels = args.cases or list(sc.cases())
        rows = []
        for label in labels:
            _prepare(out / label, args.overwrite)
            rec = pipeline.run_inversion(study, label, out=out,
                                         observations_path=args.observations,
                                         use_likelihood=not args.prior_only, force=args.force)
            m = rec.primary
            rows.append({"case": label, "IA": m.IA if m else None, "RMSE": m.RMSE if m else None,
                         "Std": m.Std if m else rec.target_summary.std.mean(),
                         "rhat_max": rec.diagnostics["rhat_max"],
                         "seconds": rec.timings.get("total_s")})
        _print_rows(rows, ["case", "IA", "RMSE", "Std", "rhat_max", "seconds"])
    elif args.verb == "baseline":
        labels = args.cases or list(sc.cases())
        rows = []
        for label in labels:
            _prepare(out / label, args.overwrite)
            res = pipeline.deterministic_baseline(study, label, out=out)
            m = res.metrics
            rows.append({"case": label, "misfit": res.misfit, "rms_mm": res.rms_residual,
                         "IA": m.IA if m else None, "RMSE": m.RMSE if m else None,
                         "status": res.message})
        _print_rows(rows, ["case", "misfit", "rms_mm", "IA", "RMSE", "status"])
    elif args.verb == "trial-knots":
        _prepare(out / "trial", args.overwrite)
        rep = pipeline.knot_count_trial(study, args.counts, args.case, out=out,
                                        tolerance=args.tolerance)
        for (a, b), r in zip(zip(rep.counts[:-1], rep.counts[1:]), rep.successive_rmse):
            print(f"n {a:>3} -> {b:>3}: RMSE {r:.2f} kPa")
        if len(rep.counts) < 2:
            print("single knot count: no stabilization verdict")
        elif rep.stabilized_at:
            print(f"stabilized at {rep.stabilized_at[0]} -> {rep.stabilized_at[1]}")
        else:
            print(f"not stabilized within tolerance {rep.tolerance} kPa")
    elif args.verb == "presets":
        _prepare(out / "presets", args.overwrite)
        res = pipeline.sensitivity_presets(study, out=out)
        rows = [dict(zip(["label", "ladder", "noise", "k_f", "IA", "RMSE", "Std"], r))
                for r in res["rows"]]
        _print_rows(rows, ["label", "ladder", "noise", "k_f", "IA", "RMSE", "Std"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
