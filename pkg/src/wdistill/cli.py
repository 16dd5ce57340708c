"""Command-line front end: verification suite and experiment drivers.

Every experiment emits CSV (12 significant digits, LF line endings, one
header row) so the curves can be plotted with any external tool.  Given the
same flags, output files are byte-identical run to run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments, protocol
from .channels import DEPHASING, DEPOLARIZING, ChannelSpec, mu_for_fidelity, noisy_w

_CHANNELS = (DEPHASING, DEPOLARIZING)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".12g")


def _emit_csv(path: str | None, header: list[str], rows) -> None:
    text = "\n".join([",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _grid(args) -> np.ndarray:
    if args.points < 2:
        raise ValueError(f"--points must be >= 2, got {args.points}")
    return np.linspace(args.start, args.stop, args.points)


def _cmd_verify(args) -> int:
    checks = experiments.structural_checks()
    failures = 0
    for check in checks:
        tag = "PASS" if check.passed else "FAIL"
        print(f"[{tag}] {check.name} ({check.detail})")
        failures += 0 if check.passed else 1
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 1


def _cmd_curve(args) -> int:
    rows = experiments.dephasing_curve(_grid(args))
    _emit_csv(args.out, ["F", "F_prime_sim", "F_prime_formula", "p_success"], rows)
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_yield(args) -> int:
    rows = experiments.yield_curve(_grid(args), target_f=args.target)
    _emit_csv(args.out, ["F", "steps", "yield"], rows)
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_threshold(args) -> int:
    result = experiments.retrieval_threshold(
        args.channel, args.resolution, max_steps=args.max_steps,
        target_f=args.target, v_placement=args.v_placement)
    print(f"{result.kind} retrieval threshold: F = {result.f_threshold:.6f} "
          f"(bracket width {result.bracket_width:.6f})")
    if args.out:
        _emit_csv(args.out, ["channel", "F_threshold", "bracket_width"],
                  [(result.kind, result.f_threshold, result.bracket_width)])
    return 0


def _cmd_ppt(args) -> int:
    rows = []
    for f in _grid(args):
        state = noisy_w(ChannelSpec(args.channel, mu_for_fidelity(args.channel, float(f))))
        rows.append((float(f), experiments.ppt_minimum_eigenvalue(state, "A")))
    _emit_csv(args.out, ["F", "min_eigenvalue"], rows)
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_random(args) -> int:
    stats = experiments.random_branch_stats(
        args.f, args.window, args.samples, args.seed,
        max_steps=args.max_steps, target_f=args.target, v_placement=args.v_placement)
    count_rows = [(name, stats.counts[name]) for name in experiments.CLASSIFICATIONS]
    step_rows = [
        (branch, step, mean, std)
        for branch in experiments.CLASSIFICATIONS
        for step, mean, std in stats.mean_fidelity_by_step[branch]
    ]
    steps_path = None
    if args.out:
        p = Path(args.out)
        steps_path = str(p.with_name(p.stem + "_steps" + p.suffix))
    _emit_csv(args.out, ["classification", "count"], count_rows)
    _emit_csv(steps_path, ["branch", "step", "mean_fidelity", "std_fidelity"], step_rows)
    total = stats.n_samples
    summary = ", ".join(f"{name}: {stats.counts[name]}" for name in experiments.CLASSIFICATIONS)
    print(f"{total} samples at F = {args.f} +- {args.window}: {summary}")
    if args.out:
        print(f"wrote {args.out} and {steps_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wdistill",
        description="W-state distillation by complementary stabilizer measurements")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, grid=False, runs=False):
        p.add_argument("--out", help="output CSV path (default: stdout)")
        if grid:
            p.add_argument("--start", type=float, required=True)
            p.add_argument("--stop", type=float, required=True)
            p.add_argument("--points", type=int, required=True)
        if runs:
            p.add_argument("--max-steps", type=int, default=200)
            p.add_argument("--target", type=float, default=0.99)
            p.add_argument("--v-placement", choices=protocol.V_PLACEMENTS,
                           default=protocol.DEFAULT_V_PLACEMENT)

    sub.add_parser("verify", help="run the structural invariant suite")

    p = sub.add_parser("curve", help="dephasing distillation curve vs the closed form")
    add_common(p, grid=True)

    p = sub.add_parser("yield", help="steps and yield to reach the fidelity target")
    add_common(p, grid=True)
    p.add_argument("--target", type=float, default=0.99)

    p = sub.add_parser("threshold", help="bisect the retrieval threshold of a noise family")
    add_common(p, runs=True)
    p.add_argument("--channel", choices=_CHANNELS, required=True)
    p.add_argument("--resolution", type=float, default=0.005)

    p = sub.add_parser("ppt", help="partial-transpose minimum eigenvalue sweep")
    add_common(p, grid=True)
    p.add_argument("--channel", choices=_CHANNELS, default=DEPHASING)

    p = sub.add_parser("random", help="branch statistics over random fixed-fidelity states")
    add_common(p, runs=True)
    p.add_argument("--f", type=float, required=True, help="target initial fidelity")
    p.add_argument("--window", type=float, default=0.01)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    return parser


_COMMANDS = {
    "verify": _cmd_verify,
    "curve": _cmd_curve,
    "yield": _cmd_yield,
    "threshold": _cmd_threshold,
    "ppt": _cmd_ppt,
    "random": _cmd_random,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
