"""Command line interface: solve, strata, uhs, flow, pipeline."""

import argparse
import os
import sys

import numpy as np

from .config import load_config, load_problem
from .errors import SemicouplingError, StageError
from .pipeline import (run_pipeline, stage_flow, stage_solve, stage_strata,
                       stage_uhs)


def _add_common(p):
    p.add_argument("problem", help="problem file (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resolution", type=int, default=None,
                   help="override grid resolution per axis")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled audits")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="semicoupling",
        description="Optimal semicouplings: dual solve, strata, UHS checks, retraction flows",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the dual max program")
    _add_common(p)
    p.add_argument("--tol-mass", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=500)

    p = sub.add_parser("strata", help="stratify the grid by singularity rank")
    _add_common(p)
    p.add_argument("--audit-resolutions", type=int, nargs="+",
                   default=[128, 256, 512])

    p = sub.add_parser("uhs", help="check Uniform Halfspace conditions on a region")
    _add_common(p)
    p.add_argument("--region", choices=["offdomain", "stratum"], default="offdomain")
    p.add_argument("--stratum", type=int, default=None)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--beta", type=float, default=None)

    p = sub.add_parser("flow", help="integrate blow-up retraction flows")
    _add_common(p)
    p.add_argument("--mode", choices=["offdomain", "cellular"], default="offdomain")
    p.add_argument("--stratum", type=int, default=None)
    p.add_argument("--seeds", default="grid",
                   help="'grid' or a seeds CSV (schema semicoupling/seeds-v1)")
    p.add_argument("--seed-count", type=int, default=100)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--eps-stop", type=float, default=None)
    p.add_argument("--force", action="store_true",
                   help="integrate even if the recorded UHS check failed")

    p = sub.add_parser("pipeline", help="run the configured stage prefix")
    p.add_argument("--config", required=True, help="run configuration file (JSON)")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--seed", type=int, default=None, help="override the audit seed")
    return ap


def _ensure_solution(problem, out_dir, args):
    """Standalone stages solve in-memory when no solution file is present."""
    if not os.path.exists(os.path.join(out_dir, "solution.json")):
        stage_solve(problem, out_dir)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pipeline":
            config = load_config(args.config, out_dir=args.out, seed=args.seed)
            manifest = run_pipeline(config)
            print(f"pipeline ok: {len(manifest['stages'])} stages -> {config.out_dir}")
            return 0

        os.makedirs(args.out, exist_ok=True)
        problem = load_problem(args.problem, resolution=args.resolution)
        rng = np.random.default_rng(args.seed)

        if args.command == "solve":
            _, sol = stage_solve(problem, args.out, tol_mass=args.tol_mass,
                                 max_iters=args.max_iters)
            print(f"solve ok: residual {sol.residual:.3g} in {sol.iterations} iterations")
        elif args.command == "strata":
            _ensure_solution(problem, args.out, args)
            _, field = stage_strata(problem, args.out,
                                    audit_resolutions=tuple(args.audit_resolutions))
            counts = field.counts()
            print("strata ok: " + ", ".join(f"Z_{j}={c}" for j, c in counts.items()))
        elif args.command == "uhs":
            _ensure_solution(problem, args.out, args)
            _, report = stage_uhs(problem, args.out, rng, region=args.region,
                                  stratum=args.stratum, samples=args.samples,
                                  beta=args.beta)
            state = "passed" if report.passed else "FAILED"
            print(f"uhs {state}: minima {report.minima}")
        elif args.command == "flow":
            _ensure_solution(problem, args.out, args)
            _, result = stage_flow(problem, args.out, rng, mode=args.mode,
                                   stratum=args.stratum, seeds=args.seeds,
                                   seed_count=args.seed_count, beta=args.beta,
                                   eps_stop=args.eps_stop, force=args.force)
            n_ok = sum(t == "pole_reached" for t in result.terminations)
            print(f"flow ok: {n_ok}/{len(result.terminations)} pole_reached")
        return 0
    except StageError as exc:
        print(f"error in stage {exc.stage!r}: {exc}", file=sys.stderr)
        return 3
    except SemicouplingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
