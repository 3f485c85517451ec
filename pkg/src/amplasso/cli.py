"""Command-line interface.

Subcommands: ``solve`` (one instance end to end), ``se`` (scalar recursion
and fixed point), ``calibrate`` (threshold <-> regularization mapping),
``phase`` (boundary and level curves), and ``experiment`` (a full protocol
from flags or a JSON spec).  Exit codes: 0 success, 2 malformed request,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import state_evolution as se
from .amp import (NumericalBlowupError, ThresholdPolicy, amp_run, amp_step,
                  effective_lambda, initial_state, ist_run, lasso_kkt_gap)
from .harness import ExperimentSpec, run_experiment, write_csv
from .instances import ENSEMBLES, GAUSSIAN, ModelParams, gen_instance
from .message_passing import reduced_mp_estimate, reduced_mp_step
from .priors import DiscretePrior

EXIT_OK = 0
EXIT_SPEC_ERROR = 2
EXIT_NUMERICAL = 3

DEFAULT_PRIOR = '{"atoms": [-1, 0, 1], "weights": [0.064, 0.872, 0.064]}'


def parse_prior(text: str) -> DiscretePrior:
    """Parse the prior literal: a JSON object with atoms and weights arrays."""
    obj = json.loads(text)
    if not isinstance(obj, dict) or "atoms" not in obj or "weights" not in obj:
        raise ValueError('prior must be JSON like {"atoms": [...], "weights": [...]}')
    return DiscretePrior(tuple(obj["atoms"]), tuple(obj["weights"]))


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=1000, help="signal dimension")
    p.add_argument("--delta", type=float, default=0.64, help="undersampling m/n")
    p.add_argument("--sigma2", type=float, default=0.2, help="noise variance")
    p.add_argument("--prior", type=str, default=DEFAULT_PRIOR,
                   help="JSON object with atoms and weights arrays")
    p.add_argument("--ensemble", choices=ENSEMBLES, default=GAUSSIAN)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--alpha", type=float, default=None,
                   help="threshold multiplier (overrides --lambda)")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="target regularization level")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--engine", choices=("amp", "ist", "mp"), default="amp",
                   help="solver engine; mp replays the per-edge cross-check")
    p.add_argument("--out", type=str, default=None, help="output path stem")


def _params(args) -> ModelParams:
    return ModelParams(delta=args.delta, sigma2=args.sigma2,
                       prior=parse_prior(args.prior))


def _resolve_alpha(args, params: ModelParams) -> float:
    if args.alpha is not None:
        return args.alpha
    if args.lam is not None:
        return se.alpha_of_lambda(args.lam, params)
    return 2.0


def cmd_solve(args) -> int:
    params = _params(args)
    alpha = _resolve_alpha(args, params)
    instance = gen_instance(args.n, params, args.seeds[0], args.ensemble)
    policy = ThresholdPolicy.rms(alpha)
    if args.engine == "ist":
        result = ist_run(instance, ThresholdPolicy.rms(1.8),
                         rescale_opnorm=0.95, max_iter=args.max_iter,
                         tol=args.tol)
    else:
        result = amp_run(instance, policy, max_iter=args.max_iter, tol=args.tol)
    mse = float(np.mean((result.x_hat - instance.x0) ** 2))
    lam_eff = effective_lambda(result.x_hat, result.theta, instance.m)
    gap = lasso_kkt_gap(instance, result.x_hat, lam_eff) if lam_eff > 0 else float("nan")
    print(f"n={args.n} m={instance.m} ensemble={args.ensemble} seed={args.seeds[0]} "
          f"engine={args.engine}")
    print(f"alpha={alpha:.6g} iterations={result.iterations} "
          f"converged={result.converged}")
    print(f"nnz={int(np.count_nonzero(result.x_hat))} mse={mse:.6g} "
          f"tau_hat={result.tau_hat:.6g} theta={result.theta:.6g}")
    print(f"effective_lambda={lam_eff:.6g} kkt_gap={gap:.3e}")
    if args.engine == "mp":
        # cross-check lane: replay the adaptive threshold sequence through
        # the per-edge messages and report the estimate agreement
        if args.n * instance.m > 4_000_000:
            raise ValueError("mp cross-check is desk-scale only (m*n too large)")
        state = initial_state(instance, policy)
        thetas = [state.theta]
        steps = min(args.max_iter, max(result.iterations, 1))
        for _ in range(steps):
            state = amp_step(state, instance, policy)
            thetas.append(state.theta)
        x_msgs = np.zeros((instance.m, instance.n))
        for t in range(steps):
            r_msgs, x_msgs = reduced_mp_step(x_msgs, instance, thetas[t])
        est = reduced_mp_estimate(r_msgs, instance, thetas[steps - 1])
        agreement = float(np.max(np.abs(est - state.x)))
        mp_mse = float(np.mean((est - instance.x0) ** 2))
        print(f"mp_estimate: steps={steps} mse={mp_mse:.6g} "
              f"max_norm_vs_amp={agreement:.6g}")
    if args.out:
        rows = [{"t": p.t, "tau_hat": p.tau_hat, "theta": p.theta, "b": p.b,
                 "mse": p.mse, "kkt_gap": ""} for p in result.trajectory]
        path = write_csv(rows, args.out + ".csv")
        print(f"trajectory -> {path}")
    return EXIT_OK


def cmd_se(args) -> int:
    params = _params(args)
    alpha = _resolve_alpha(args, params)
    traj = se.se_run(params, alpha)
    print(f"alpha={alpha:.6g} tau0^2={traj.tau2_sequence[0]:.9g} "
          f"steps={len(traj.tau2_sequence) - 1} converged={traj.converged}")
    if traj.tau_star is not None:
        print(f"tau_star={traj.tau_star:.12g} "
              f"predicted_mse={params.delta * (traj.tau_star**2 - params.sigma2):.9g}")
    if args.out:
        rows = [{"t": t, "tau2": v, "theta": th}
                for t, (v, th) in enumerate(zip(traj.tau2_sequence,
                                                traj.theta_sequence))]
        path = write_csv(rows, args.out + ".csv")
        print(f"trajectory -> {path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    params = _params(args)
    if args.alpha is not None:
        lam = se.calibrate_lambda(args.alpha, params)
        tau_star = se.se_fixed_point(params, args.alpha)
        print(f"alpha={args.alpha:.6g} lambda={lam:.9g} tau_star={tau_star:.9g}")
    elif args.lam is not None:
        alpha = se.alpha_of_lambda(args.lam, params)
        tau_star = se.se_fixed_point(params, alpha)
        print(f"lambda={args.lam:.6g} alpha={alpha:.9g} tau_star={tau_star:.9g}")
    else:
        raise ValueError("calibrate needs --alpha or --lambda")
    return EXIT_OK


def cmd_phase(args) -> int:
    if args.sweep:
        spec = ExperimentSpec(kind="PHASE_CURVE", grid_points=args.sweep,
                              out=args.out)
        result = run_experiment(spec)
        print(f"boundary points: {len(result.rows)}; "
              f"level grid points: {len(result.extra['mstar_rows'])}")
        if not args.out:
            for row in result.rows:
                print(f"alpha={row['alpha']:.4f} delta={row['delta']:.6f} "
                      f"rho={row['rho']:.6f}")
    else:
        rc = se.rho_c(args.delta)
        alpha = se.boundary_alpha(args.delta)
        print(f"delta={args.delta:.6g} rho_c={rc:.9g} boundary_alpha={alpha:.9g}")
        if args.rho is not None:
            print(f"m_star={se.minimax_risk_star(args.delta, args.rho):.9g}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.spec:
        with open(args.spec) as handle:
            spec = ExperimentSpec.from_dict(json.load(handle))
        if args.out:
            spec = ExperimentSpec.from_dict({**spec.to_dict(), "out": args.out})
    else:
        if args.kind is None:
            raise ValueError("experiment needs --spec FILE or --kind")
        spec = ExperimentSpec(
            kind=args.kind, n=args.n, params=_params(args),
            ensemble=args.ensemble, seeds=tuple(args.seeds), alpha=args.alpha,
            lambdas=tuple(args.lambdas or ()), max_iter=args.max_iter,
            tol=args.tol, t_target=args.t_target,
            nnz_levels=tuple(args.nnz_levels or ()), jobs=args.jobs,
            out=args.out,
        )
    result = run_experiment(spec)
    print(f"kind={spec.kind} rows={len(result.rows)} "
          f"spec_sha256={result.manifest['spec_sha256'][:12]}")
    if spec.out:
        print(f"output stem: {spec.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amplasso",
        description="AMP-based LASSO solver and risk-prediction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one generated instance")
    _add_model_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_se = sub.add_parser("se", help="run the scalar recursion to its fixed point")
    _add_model_flags(p_se)
    p_se.set_defaults(func=cmd_se)

    p_cal = sub.add_parser("calibrate", help="map alpha <-> lambda")
    _add_model_flags(p_cal)
    p_cal.set_defaults(func=cmd_calibrate)

    p_phase = sub.add_parser("phase", help="phase boundary and risk levels")
    p_phase.add_argument("--delta", type=float, default=0.2)
    p_phase.add_argument("--rho", type=float, default=None)
    p_phase.add_argument("--sweep", type=int, default=None,
                         help="emit a boundary sweep with this many points")
    p_phase.add_argument("--out", type=str, default=None)
    p_phase.set_defaults(func=cmd_phase)

    p_exp = sub.add_parser("experiment", help="run a protocol from flags or JSON")
    _add_model_flags(p_exp)
    p_exp.add_argument("--spec", type=str, default=None, help="JSON spec file")
    p_exp.add_argument("--kind", type=str, default=None)
    p_exp.add_argument("--lambdas", type=float, nargs="+", default=None)
    p_exp.add_argument("--nnz-levels", type=int, nargs="+", default=None)
    p_exp.add_argument("--t-target", type=int, default=10)
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalBlowupError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR


if __name__ == "__main__":
    sys.exit(main())
