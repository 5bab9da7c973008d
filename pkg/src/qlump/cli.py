"""``qlump`` command-line interface."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .amplitude import DEFAULT_TOLERANCE, TolerancePolicy
from .backend import BACKENDS
from .bench import BENCH_FAMILIES, Workload, build_workload, load_manifest, load_qasm_workload, resolve_steps, run_bench, write_records
from .errors import CapacityError, ConfigError, DimensionError, DomainError, ParseError, QlumpError, RunTimeoutError
from .lumping import D_MAX_DEFAULT, SubspaceSpec, check_bcb, check_fcb, lump_krylov, lump_residual, save_reduced
from .qasm import to_qasm
from .simulate import DEFAULT_TIMEOUT_S, MODES, run_regime, write_trajectory_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_CAPACITY = 3
EXIT_TIMEOUT = 4
EXIT_CONFIG = 5


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors, keeping exit code 2 for QASM parse failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_circuit_args(p: argparse.ArgumentParser, *, allow_qasm: bool = True) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", choices=BENCH_FAMILIES, help="built-in circuit family")
    if allow_qasm:
        src.add_argument("--qasm", type=Path, help="OpenQASM 2 file")
    p.add_argument("-n", type=int, help="number of qubits (families only)")
    p.add_argument("--marked", type=_int_list, help="grover: comma-separated marked indices")
    p.add_argument("--base", type=int, help="order: the base x")
    p.add_argument("--modulus", type=int, help="order: the modulus N")
    p.add_argument("--rng-seed", type=int, default=0, help="seed for random instances (default 0)")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", help="constraint seeds: ket0 | psi | ket1 | indices:i,j | file:path")
    p.add_argument("--tol-rank", type=float, help="linear-dependence cutoff for Krylov vectors")
    p.add_argument("--timeout-s", type=float, default=DEFAULT_TIMEOUT_S, help=f"time budget (default {DEFAULT_TIMEOUT_S:g})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qlump", description="Exact reduction of quantum circuits on invariant subspaces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lump", help="compute a reduced system")
    _add_circuit_args(p)
    _add_run_args(p)
    p.add_argument("--backend", choices=BACKENDS, default="dense")
    p.add_argument("--method", choices=("krylov", "residual"), default="krylov")
    p.add_argument("--d-max", type=int, default=D_MAX_DEFAULT, help=f"cap on the reduced dimension (default {D_MAX_DEFAULT})")
    p.add_argument("--no-check", action="store_true", help="skip the forward/backward residual checks")
    p.add_argument("--out", type=Path, help="write the reduced system here")

    p = sub.add_parser("simulate", help="simulate a circuit in one regime")
    _add_circuit_args(p)
    _add_run_args(p)
    p.add_argument("--mode", choices=MODES, default="reduced-dense")
    p.add_argument("--steps", default="sqrt", help="step count, or sqrt / grover (default sqrt)")
    p.add_argument("--observe", type=_int_list, help="basis indices whose total probability is reported")
    p.add_argument("--every-step", action="store_true", help="write the whole trajectory")
    p.add_argument("--out", type=Path, help="trajectory CSV (default: stdout)")

    p = sub.add_parser("bench", help="run a benchmark manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--reps", type=int, help="repetitions per cell (overrides the manifest)")
    p.add_argument("--timeout-s", type=float, help="per-run time budget (overrides the manifest)")
    p.add_argument("--rng-seed", type=int, help="seed for random instances (overrides the manifest)")
    p.add_argument("--tol-rank", type=float)
    p.add_argument("--out", type=Path, help="CSV output (default: stdout)")

    p = sub.add_parser("generate", help="emit a built-in family as OpenQASM 2")
    _add_circuit_args(p, allow_qasm=False)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    return parser


def _tolerance(args) -> TolerancePolicy:
    if getattr(args, "tol_rank", None) is None:
        return DEFAULT_TOLERANCE
    return TolerancePolicy(eps_rank=args.tol_rank)


def _workload(args) -> Workload:
    if getattr(args, "qasm", None) is not None:
        try:
            return load_qasm_workload(args.qasm)
        except OSError as exc:
            raise ParseError(0, f"cannot read {args.qasm}: {exc.strerror or exc}") from exc
    rng = np.random.default_rng(args.rng_seed)
    return build_workload(args.family, args.n, rng=rng, marked=args.marked, base=args.base, modulus=args.modulus)


def _seed(args, work: Workload) -> SubspaceSpec:
    return SubspaceSpec.parse(args.seed) if args.seed else work.seed


def cmd_lump(args) -> int:
    work = _workload(args)
    c = work.circuit
    spec = _seed(args, work)
    tol = _tolerance(args)
    deadline = time.monotonic() + args.timeout_s
    fn = lump_krylov if args.method == "krylov" else lump_residual
    t0 = time.perf_counter()
    rs = fn(c, spec, tol, args.d_max, backend=args.backend, deadline=deadline)
    reduce_ms = (time.perf_counter() - t0) * 1e3
    print(f"circuit={c.name}")
    print(f"n={c.n}")
    print(f"N={1 << c.n}")
    print(f"d={rs.d}")
    print(f"rr={100.0 * rs.reduction_ratio:.2f}%")
    print(f"reduce_ms={reduce_ms:.3f}")
    if not args.no_check:
        print(f"fcb_residual={check_fcb(rs.basis, c):.3e}")
        print(f"bcb_residual={check_bcb(rs.basis, c):.3e}")
        print(f"unitarity_residual={rs.unitarity_residual():.3e}")
    if args.out is not None:
        save_reduced(rs, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    work = _workload(args)
    c = work.circuit
    steps = resolve_steps(args.steps, c.n)
    observe = args.observe if args.observe is not None else list(work.observe)
    run = run_regime(
        c, _seed(args, work), steps, args.mode, observe=observe, problem=work.problem,
        tol=_tolerance(args), timeout_s=args.timeout_s, every_step=args.every_step,
    )
    summary = sys.stdout if args.out is not None else sys.stderr
    lines = [f"circuit={c.name}", f"mode={run.mode}", f"n={c.n}", f"steps={steps}"]
    if run.d is not None:
        lines.append(f"d={run.d}")
    lines += [f"reduce_ms={run.reduce_ms:.3f}", f"sim_ms={run.sim_ms:.3f}", f"total_ms={run.total_ms:.3f}"]
    lines += [f"{k}={float(v)!r}" for k, v in sorted(run.observables.items())]
    if run.recovery_error is not None:
        lines.append(f"recovery_error={run.recovery_error:.3e}")
    if run.outside_subspace:
        lines.append("warning=initial state has a component outside the lumped subspace")
    print("\n".join(lines), file=summary)
    if args.out is not None:
        write_trajectory_csv(run, args.out)
    else:
        write_trajectory_csv(run, handle=sys.stdout)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_manifest(args.manifest)
    if args.reps is not None:
        if args.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {args.reps}")
        cfg.reps = args.reps
    if args.timeout_s is not None:
        if not args.timeout_s > 0:
            raise ConfigError("timeout must be positive")
        cfg.timeout_s = args.timeout_s
    if args.rng_seed is not None:
        cfg.rng_seed = args.rng_seed
    if args.tol_rank is not None:
        cfg.tol = TolerancePolicy(eps_rank=args.tol_rank)

    def progress(rec):
        print(f"{rec.circuit} n={rec.n} {rec.regime}: {rec.status} d={rec.d} total_ms={rec.total_ms:.1f}", file=sys.stderr)

    records = run_bench(cfg, on_record=progress)
    if args.out is not None:
        with open(args.out, "w", newline="") as fh:
            write_records(records, fh)
    else:
        write_records(records, sys.stdout)
    return EXIT_OK


def cmd_generate(args) -> int:
    work = _workload(args)
    text = to_qasm(work.circuit)
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {"lump": cmd_lump, "simulate": cmd_simulate, "bench": cmd_bench, "generate": cmd_generate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CapacityError as exc:
        suffix = "" if exc.partial_d is None else f" (partial d={exc.partial_d})"
        print(f"capacity exceeded: {exc}{suffix}", file=sys.stderr)
        return EXIT_CAPACITY
    except RunTimeoutError as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        if exc.partial:
            print("partial " + " ".join(f"{k}={v}" for k, v in exc.partial.items()), file=sys.stderr)
        return EXIT_TIMEOUT
    except (ConfigError, DomainError, DimensionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QlumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
