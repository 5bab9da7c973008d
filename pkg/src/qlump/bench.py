"""Benchmark harness: lump and simulate circuit sweeps, write CSV records."""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amplitude import DEFAULT_TOLERANCE, TolerancePolicy
from .circuit import (
    FAMILIES,
    Circuit,
    Graph,
    SatFormula,
    family_circuit,
    grover_circuit,
    order_finding_circuit,
    qaoa_problem_step,
    random_graph,
    random_sat_formula,
)
from .errors import CapacityError, ConfigError, DomainError, RunTimeoutError
from .lumping import SubspaceSpec
from .qasm import parse_qasm
from .simulate import DEFAULT_TIMEOUT_S, MODES, run_regime

BENCH_FAMILIES = FAMILIES + ("grover", "sat", "maxcut", "order")
CSV_COLUMNS = ("circuit", "n", "N", "d", "rr_percent", "regime", "reduce_ms", "sim_ms", "total_ms", "status")
DEFAULT_REGIMES = ("reduced-dense", "reduced-dd", "full-dd")
KAPPA_POLICIES = ("sqrt", "grover")


@dataclass
class Workload:
    """A circuit together with the seed and observables that make sense for it."""

    circuit: Circuit
    seed: SubspaceSpec
    observe: tuple[int, ...] = ()
    problem: SatFormula | Graph | None = None


def build_workload(
    family: str,
    n: int | None = None,
    *,
    rng: np.random.Generator | None = None,
    marked=None,
    base: int | None = None,
    modulus: int | None = None,
) -> Workload:
    """Instantiate a named family.

    ``grover`` marks ``marked`` (default: the all-ones index) and seeds at
    ``psi``; ``sat``/``maxcut`` draw a random instance and build one QAOA
    problem step; ``order`` needs ``base`` and ``modulus`` and seeds at ``|1>``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if family == "order":
        if base is None or modulus is None:
            raise DomainError("the order family needs base and modulus")
        return Workload(order_finding_circuit(base, modulus), SubspaceSpec.ket1())
    if n is None or n < 1:
        raise DomainError(f"family {family!r} needs n >= 1")
    if family == "grover":
        marks = tuple(marked) if marked else ((1 << n) - 1,)
        return Workload(grover_circuit(n, marks), SubspaceSpec.psi(), observe=tuple(sorted(set(marks))))
    if family == "sat":
        problem = random_sat_formula(n, rng)
        return Workload(qaoa_problem_step(problem), SubspaceSpec.psi(), problem=problem)
    if family == "maxcut":
        problem = random_graph(n, 1 / 3, rng)
        return Workload(qaoa_problem_step(problem), SubspaceSpec.psi(), problem=problem)
    if family in FAMILIES:
        return Workload(family_circuit(family, n, rng=rng), SubspaceSpec.ket0())
    raise DomainError(f"unknown family {family!r}; choose from {', '.join(BENCH_FAMILIES)}")


def load_qasm_workload(path: str | Path) -> Workload:
    path = Path(path)
    c = parse_qasm(path.read_text(), path.stem)
    return Workload(c, SubspaceSpec.ket0())


def resolve_steps(policy, n: int) -> int:
    """An explicit step count, or ``sqrt`` (ceil sqrt N) / ``grover`` (ceil pi/4 sqrt N)."""
    if isinstance(policy, int):
        if policy < 0:
            raise DomainError("steps must be nonnegative")
        return policy
    text = str(policy).strip()
    if text == "sqrt":
        return math.ceil(math.sqrt(1 << n))
    if text == "grover":
        return math.ceil(math.pi / 4 * math.sqrt(1 << n))
    try:
        return resolve_steps(int(text), n)
    except ValueError:
        raise DomainError(f"bad step policy {policy!r}; use an integer or one of {', '.join(KAPPA_POLICIES)}") from None


# -- records -------------------------------------------------------------------------


@dataclass
class BenchRecord:
    circuit: str
    n: int
    d: int | None
    regime: str
    reduce_ms: float
    sim_ms: float
    status: str = "ok"

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def rr_percent(self) -> float | None:
        if self.d is None:
            return None
        return 100.0 * self.d / self.N

    @property
    def total_ms(self) -> float:
        return self.reduce_ms + self.sim_ms

    def row(self) -> dict[str, str]:
        rr = self.rr_percent
        return {
            "circuit": self.circuit,
            "n": str(self.n),
            "N": str(self.N),
            "d": "" if self.d is None else str(self.d),
            "rr_percent": "" if rr is None else repr(rr),
            "regime": self.regime,
            "reduce_ms": f"{self.reduce_ms:.3f}",
            "sim_ms": f"{self.sim_ms:.3f}",
            "total_ms": f"{self.total_ms:.3f}",
            "status": self.status,
        }


def write_records(records, handle) -> None:
    writer = csv.DictWriter(handle, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())


def read_records(handle) -> list[dict[str, str]]:
    return list(csv.DictReader(handle))


# -- manifest ----------------------------------------------------------------------


@dataclass
class CircuitEntry:
    family: str | None = None
    qasm: Path | None = None
    sizes: tuple[int, ...] = ()
    marked: tuple[int, ...] = ()
    base: int | None = None
    modulus: int | None = None
    seed: str | None = None
    steps: str | None = None
    regimes: tuple[str, ...] | None = None


@dataclass
class RunConfig:
    entries: list[CircuitEntry] = field(default_factory=list)
    regimes: tuple[str, ...] = DEFAULT_REGIMES
    steps: str = "sqrt"
    reps: int = 5
    timeout_s: float = DEFAULT_TIMEOUT_S
    rng_seed: int = 0
    tol: TolerancePolicy = DEFAULT_TOLERANCE
    seed: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not self.timeout_s > 0:
            raise ConfigError("timeout_s must be positive")
        for r in self.regimes:
            if r not in MODES:
                raise ConfigError(f"unknown regime {r!r}; choose from {', '.join(MODES)}")


def _parse_sizes(text: str, lineno: int) -> tuple[int, ...]:
    sizes: list[int] = []
    try:
        for part in text.split(","):
            lo, sep, hi = part.partition("..")
            if sep:
                sizes.extend(range(int(lo), int(hi) + 1))
            else:
                sizes.append(int(part))
    except ValueError:
        raise ConfigError(f"manifest line {lineno}: bad qubit range {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise ConfigError(f"manifest line {lineno}: qubit range {text!r} is empty or nonpositive")
    return tuple(sizes)


def _int_list(text: str, lineno: int, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t)
    except ValueError:
        raise ConfigError(f"manifest line {lineno}: bad {key} list {text!r}") from None


def _regime_list(text: str, lineno: int) -> tuple[str, ...]:
    regimes = tuple(r.strip() for r in text.split(",") if r.strip())
    bad = [r for r in regimes if r not in MODES]
    if bad or not regimes:
        raise ConfigError(f"manifest line {lineno}: unknown regime(s) {bad or text!r}")
    return regimes


_GLOBAL_KEYS = {"regimes", "steps", "reps", "timeout_s", "rng_seed", "tol_rank", "seed"}
_ENTRY_KEYS = {"family", "qasm", "n", "marked", "base", "modulus", "seed", "steps", "regimes"}


def parse_manifest(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse a manifest of whitespace-separated ``key=value`` tokens.

    Lines containing ``family=`` or ``qasm=`` are circuit entries; any other
    non-blank line sets run-wide options.  ``#`` starts a comment.  Example::

        reps=3 timeout_s=60 regimes=reduced-dense,reduced-dd,full-dd
        family=grover n=5..12 steps=sqrt
        family=order base=7 modulus=15
        qasm=circuits/adder.qasm
    """
    base_dir = Path(base_dir)
    settings: dict[str, str] = {}
    raw_entries: list[tuple[int, dict[str, str]]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        kv: dict[str, str] = {}
        for tok in line.split():
            key, sep, value = tok.partition("=")
            if not sep or not key or not value:
                raise ConfigError(f"manifest line {lineno}: expected key=value, got {tok!r}")
            if key in kv:
                raise ConfigError(f"manifest line {lineno}: duplicate key {key!r}")
            kv[key] = value
        if "family" in kv or "qasm" in kv:
            unknown = set(kv) - _ENTRY_KEYS
            if unknown:
                raise ConfigError(f"manifest line {lineno}: unknown circuit key(s) {sorted(unknown)}")
            raw_entries.append((lineno, kv))
        else:
            unknown = set(kv) - _GLOBAL_KEYS
            if unknown:
                raise ConfigError(f"manifest line {lineno}: unknown setting(s) {sorted(unknown)}")
            settings.update(kv)

    entries = []
    for lineno, kv in raw_entries:
        if "family" in kv and "qasm" in kv:
            raise ConfigError(f"manifest line {lineno}: give family or qasm, not both")
        entry = CircuitEntry(seed=kv.get("seed"), steps=kv.get("steps"))
        if "regimes" in kv:
            entry.regimes = _regime_list(kv["regimes"], lineno)
        if "qasm" in kv:
            path = Path(kv["qasm"])
            entry.qasm = path if path.is_absolute() else base_dir / path
        else:
            fam = kv["family"]
            if fam not in BENCH_FAMILIES:
                raise ConfigError(f"manifest line {lineno}: unknown family {fam!r}")
            entry.family = fam
            if fam == "order":
                if "base" not in kv or "modulus" not in kv:
                    raise ConfigError(f"manifest line {lineno}: order needs base= and modulus=")
                entry.base = _int_list(kv["base"], lineno, "base")[0]
                entry.modulus = _int_list(kv["modulus"], lineno, "modulus")[0]
            else:
                if "n" not in kv:
                    raise ConfigError(f"manifest line {lineno}: family {fam!r} needs n=")
                entry.sizes = _parse_sizes(kv["n"], lineno)
            if "marked" in kv:
                entry.marked = _int_list(kv["marked"], lineno, "marked")
        entries.append(entry)
    if not entries:
        raise ConfigError("manifest lists no circuits")

    try:
        cfg = RunConfig(
            entries=entries,
            regimes=_regime_list(settings["regimes"], 0) if "regimes" in settings else DEFAULT_REGIMES,
            steps=settings.get("steps", "sqrt"),
            reps=int(settings.get("reps", 5)),
            timeout_s=float(settings.get("timeout_s", DEFAULT_TIMEOUT_S)),
            rng_seed=int(settings.get("rng_seed", 0)),
            tol=TolerancePolicy(eps_rank=float(settings["tol_rank"])) if "tol_rank" in settings else DEFAULT_TOLERANCE,
            seed=settings.get("seed"),
        )
    except (ValueError, DomainError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad manifest setting: {exc}") from exc
    return cfg


def load_manifest(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    return parse_manifest(text, path.parent)


# -- running -----------------------------------------------------------------------


def bench_cell(work: Workload, regime: str, steps: int, cfg: RunConfig) -> BenchRecord:
    """Average ``cfg.reps`` runs of one (circuit, regime) cell.

    Dimensions must agree across repetitions; only timings may vary.
    """
    c = work.circuit
    reduce_times, sim_times, dims = [], [], set()
    for _ in range(cfg.reps):
        try:
            run = run_regime(
                c, work.seed, steps, regime, observe=work.observe, problem=work.problem,
                tol=cfg.tol, timeout_s=cfg.timeout_s, check_recovery=False,
            )
        except RunTimeoutError:
            return BenchRecord(c.name, c.n, None, regime, 0.0, 0.0, "timeout")
        except CapacityError:
            return BenchRecord(c.name, c.n, None, regime, 0.0, 0.0, "capacity")
        reduce_times.append(run.reduce_ms)
        sim_times.append(run.sim_ms)
        dims.add(run.d)
    if len(dims) != 1:
        raise RuntimeError(f"{c.name}/{regime}: reduced dimension changed across repetitions: {sorted(dims)}")
    return BenchRecord(c.name, c.n, dims.pop(), regime, statistics.fmean(reduce_times), statistics.fmean(sim_times))


def _entry_workloads(entry: CircuitEntry, rng: np.random.Generator):
    if entry.qasm is not None:
        yield load_qasm_workload(entry.qasm)
    elif entry.family == "order":
        yield build_workload("order", base=entry.base, modulus=entry.modulus)
    else:
        for n in entry.sizes:
            yield build_workload(entry.family, n, rng=rng, marked=entry.marked or None)


def run_bench(cfg: RunConfig, on_record=None) -> list[BenchRecord]:
    """Run every entry under every regime.

    Within an entry the qubit sweep is monotone: once a regime times out (or
    hits a capacity cap) it is dropped for the larger sizes of that entry.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    records: list[BenchRecord] = []
    for entry in cfg.entries:
        regimes = list(entry.regimes or cfg.regimes)
        for work in _entry_workloads(entry, rng):
            if not regimes:
                break
            steps = resolve_steps(entry.steps or cfg.steps, work.circuit.n)
            seed_text = entry.seed or cfg.seed
            if seed_text:
                work.seed = SubspaceSpec.parse(seed_text)
            for regime in list(regimes):
                rec = bench_cell(work, regime, steps, cfg)
                records.append(rec)
                if on_record is not None:
                    on_record(rec)
                if rec.status != "ok":
                    regimes.remove(regime)
    return records
