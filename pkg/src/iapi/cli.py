"""Command-line front end.

    iapi run <config.json> --out <dir>
    iapi verify <config.json> <history.json> --out <dir>
    iapi demo <paper-example | lqr-scalar>

Exit codes: 0 success (run: converged; verify: all checks passed),
2 iteration budget exhausted (run) or some check failed (verify),
1 any error.  Outputs are UTF-8, LF, full-precision floats, and contain
no timestamps, so reruns are byte-identical.  IAPI_THREADS caps the
worker count (0 = auto) without affecting any output bit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import DEMOS, ProblemConfig, load_config
from .errors import IapiError, UnsupportedDimensionError
from .model import ValueFunction
from .numerics import grid_sample
from .policy_iteration import PIHistory, improve_policy, run_pi
from .region_update import boundary_polyline
from .serialize import (
    region_from_descriptor,
    reports_payload,
    to_json,
    write_history_json,
    write_polyline_csv,
    write_weights_csv,
)
from .verify import (
    check_admissible,
    check_invariance,
    check_lyapunov_decrease,
    check_monotone_values,
    check_value_against_cost,
    probe_states,
)


def _write_outputs(history: PIHistory, fingerprint: str, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "history.json", "w", encoding="utf-8", newline="\n") as handle:
        write_history_json(history, fingerprint, handle)
    with open(out_dir / "weights.csv", "w", encoding="utf-8", newline="\n") as handle:
        write_weights_csv(history, handle)
    regions = history.regions()
    for i, region in enumerate(regions):
        try:
            outline = boundary_polyline(region, 360)
        except UnsupportedDimensionError:
            break
        with open(out_dir / f"region_{i}.csv", "w", encoding="utf-8", newline="\n") as handle:
            write_polyline_csv([outline], handle)


def cmd_run(config_path: str, out_dir: str) -> int:
    config = load_config(config_path)
    history = run_pi(config.build())
    _write_outputs(history, config.fingerprint, Path(out_dir))
    return 0 if history.converged else 2


def _rebuild_run(config: ProblemConfig, history_doc: dict):
    """Reconstruct value functions, policies, and regions from a history."""
    pi_config = config.build()
    basis = pi_config.basis
    values = [ValueFunction(basis, np.asarray(rec["weights"], dtype=float)) for rec in history_doc["iterations"]]
    policies = [pi_config.initial_policy]
    for v in values:
        policies.append(improve_policy(pi_config.model, pi_config.cost, v))
    regions = [pi_config.initial_region]
    for rec in history_doc["iterations"]:
        regions.append(region_from_descriptor(rec["region"], basis))
    return pi_config, values, policies, regions


def cmd_verify(config_path: str, history_path: str, out_dir: str) -> int:
    config = load_config(config_path)
    try:
        with open(history_path, "r", encoding="utf-8") as handle:
            history_doc = json.load(handle)
    except FileNotFoundError:
        raise IapiError(f"history file not found: {history_path}") from None
    except json.JSONDecodeError as exc:
        raise IapiError(f"{history_path}: invalid JSON: {exc}") from exc
    if history_doc.get("config_fingerprint") != config.fingerprint:
        raise IapiError("history does not match the config (fingerprint mismatch)")
    if not history_doc.get("iterations"):
        raise IapiError("history contains no iterations")

    pi_config, values, policies, regions = _rebuild_run(config, history_doc)
    model, cost = pi_config.model, pi_config.cost
    tol = pi_config.tolerances
    final_value = values[-1]
    final_policy = policies[-1]
    final_region = regions[-1]

    reports = []
    reports.append(
        check_admissible(
            model, cost, final_policy, final_region,
            n_samples=pi_config.gate_samples,
            integrator=pi_config.integrator, tolerances=tol, value_bound=final_value,
        )
    )
    reports.append(
        check_invariance(
            model, final_policy, final_region,
            n_trajectories=pi_config.boundary_count,
            integrator=pi_config.integrator, tau_inv=tol.tau_inv,
        )
    )
    for i, v in enumerate(values):
        grid = grid_sample(regions[i + 1], pi_config.spacing)
        rep = check_lyapunov_decrease(model, cost, v, policies[i + 1], grid, tol.tau_lyap)
        reports.append(
            type(rep)(f"lyapunov_decrease[i={i}]", rep.passed, rep.tested, rep.witness, rep.details)
        )
    final_grid = grid_sample(final_region, pi_config.spacing)
    reports.append(check_monotone_values(values, final_grid, tol.tau_mono))
    probes = probe_states(final_region, 20)
    reports.append(
        check_value_against_cost(
            model, cost, final_value, final_policy, probes,
            integrator=pi_config.integrator, tau_val=tol.tau_val, tail_rel=tol.tail_rel,
        )
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "reports.json", "w", encoding="utf-8", newline="\n") as handle:
        handle.write(to_json(reports_payload(reports)))
        handle.write("\n")
    for rep in reports:
        print(rep.summary())
    return 0 if all(r.passed for r in reports) else 2


def cmd_demo(name: str) -> int:
    if name not in DEMOS:
        print(f"unknown demo {name!r}; available: {', '.join(sorted(DEMOS))}", file=sys.stderr)
        return 1
    filename, payload = DEMOS[name]
    with open(filename, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(to_json(payload))
        handle.write("\n")
    out_dir = name.replace("-", "_") + "_out"
    code = cmd_run(filename, out_dir)
    if code == 1:
        return 1
    verify_code = cmd_verify(filename, str(Path(out_dir) / "history.json"), out_dir)
    return verify_code if verify_code else code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="iapi",
        description="Policy iteration with invariant admissible region updates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the iteration on a problem config")
    p_run.add_argument("config")
    p_run.add_argument("--out", required=True, help="output directory")

    p_verify = sub.add_parser("verify", help="verify a recorded run by simulation")
    p_verify.add_argument("config")
    p_verify.add_argument("history")
    p_verify.add_argument("--out", required=True, help="output directory")

    p_demo = sub.add_parser("demo", help="write a bundled config, run, and verify it")
    p_demo.add_argument("name")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out)
        if args.command == "verify":
            return cmd_verify(args.config, args.history, args.out)
        return cmd_demo(args.name)
    except IapiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
