"""
Command-line driver.

    hdma run --data table.csv [--profile p.profile] [--backend sim|mock-remote] [--seed N] [--sinks both]
    hdma emit-circuits --data table.csv [--out-dir DIR]
    hdma simulate circuit.hqc [--shots N] [--seed N]
    hdma report --data table.csv [--seed N]

Exit status: 0 success, 1 workflow failure, 2 usage or configuration error.
The default seed comes from HDMA_SEED when set.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence, TextIO

from . import datastore, distest, qcir, qsim
from .encode import Profile, angle_embed
from .errors import HDMAError
from .orchestra import (
    LocalSimulatorBackend, MockRemoteBackend, ProblemRequest, RegenerationWatcher, Route, Sinks, WorkflowConfig,
    WorkflowFailed, run_workflow,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _default_seed() -> int:
    raw = os.environ.get("HDMA_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"HDMA_SEED must be an integer, got {raw!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdma", description="Assign database rows to clusters with swap-test circuits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_options(p, backend=True):
        p.add_argument("--data", required=True, type=Path, help="table CSV")
        p.add_argument("--profile", type=Path, help="key=value profile file (defaults apply when omitted)")
        if backend:
            p.add_argument("--backend", choices=["sim", "mock-remote"], default="sim")
            p.add_argument("--shots", type=_positive_int, help="overrides the profile's shots")
            p.add_argument("--seed", type=int, help="workflow seed (default: $HDMA_SEED or 0)")
            p.add_argument("--poll-interval", type=_positive_float, default=0.1, help="seconds between status polls")
            p.add_argument("--timeout", type=_positive_float, default=30.0, help="seconds before polling gives up")

    run = sub.add_parser("run", help="run the full workflow")
    data_options(run)
    run.add_argument("--sinks", choices=[s.value for s in Sinks], default=Sinks.APPLICATION.value)
    run.add_argument("--output", type=Path, help="write-back target (default: the --data file)")
    run.add_argument("--watch", action="store_true", help="rerun whenever the table changes")
    run.add_argument("--watch-interval", type=_positive_float, default=1.0)
    run.add_argument("--max-runs", type=_positive_int, help="stop watching after this many runs")

    emit = sub.add_parser("emit-circuits", help="write one .hqc file per (point, centroid) pair")
    data_options(emit, backend=False)
    emit.add_argument("--out-dir", type=Path, default=Path("."))

    sim = sub.add_parser("simulate", help="sample a single .hqc circuit")
    sim.add_argument("circuit", type=Path)
    sim.add_argument("--shots", type=_positive_int, default=1000)
    sim.add_argument("--seed", type=int)

    report = sub.add_parser("report", help="determined vs analytic marked frequencies per pair")
    data_options(report)
    return parser


def _load_profile(path: Path | None) -> Profile:
    if path is None:
        return Profile()
    try:
        return Profile.load(path)
    except OSError as exc:
        raise UsageError(f"--profile: cannot read {path}: {exc.strerror}") from None
    except HDMAError as exc:
        raise UsageError(f"--profile: {exc}") from None


def _load_table(path: Path) -> datastore.Table:
    try:
        return datastore.load(path)
    except OSError as exc:
        raise UsageError(f"--data: cannot read {path}: {exc.strerror}") from None
    except (HDMAError, ValueError) as exc:
        raise UsageError(f"--data: {exc}") from None


def _config(args, sinks: Sinks = Sinks.APPLICATION, output: Path | None = None) -> WorkflowConfig:
    backend = LocalSimulatorBackend() if args.backend == "sim" else MockRemoteBackend(latency_polls=3)
    seed = args.seed if args.seed is not None else _default_seed()
    return WorkflowConfig(
        backend=backend, shots=args.shots, seed=seed, sinks=sinks, output_path=output,
        poll_interval=args.poll_interval, timeout=args.timeout,
    )


def _run_once(args, out: TextIO) -> int:
    _load_table(args.data)
    profile = _load_profile(args.profile)
    sinks = Sinks(args.sinks)
    config = _config(args, sinks, args.output)
    try:
        result = run_workflow(ProblemRequest(args.data, profile=profile), config)
    except WorkflowFailed as exc:
        print(f"workflow failed: {exc}", file=out)
        return EXIT_FAILED
    print(f"route: {result.route.value}", file=out)
    print("messages: " + " ".join(e.kind.value for e in result.trace), file=out)
    if result.route is Route.QUANTUM:
        shots = config.shots or profile.shots
        print(f"shots per pair: {shots}", file=out)
        print("point  centroid  marked", file=out)
        for e in result.estimates:
            print(f"{e.point_id:>5}  {e.centroid_id:>8}  {e.marked_count:>6}", file=out)
    print("assignments:", file=out)
    for a in sorted(result.assignments, key=lambda a: a.point_id):
        print(f"  {a.point_id} -> {a.cluster_label}", file=out)
    if sinks.writes_back:
        print(f"wrote: {args.output or args.data}", file=out)
    return EXIT_OK


def cmd_run(args, out: TextIO) -> int:
    if not args.watch:
        return _run_once(args, out)
    watcher = RegenerationWatcher(args.data)
    status = EXIT_OK

    def rerun():
        nonlocal status
        status = max(status, _run_once(args, out))
        out.flush()

    watcher.watch(rerun, interval=args.watch_interval, max_runs=args.max_runs)
    return status


def cmd_emit(args, out: TextIO) -> int:
    table = _load_table(args.data)
    profile = _load_profile(args.profile)
    try:
        centroids, points = datastore.extract(table, profile)
    except HDMAError as exc:
        raise UsageError(f"--data: {exc}") from None
    args.out_dir.mkdir(parents=True, exist_ok=True)
    profile = distest.fix_id_width(profile, [n.id for n in (*centroids, *points)])
    for pair in distest.pairs_for(points, centroids):
        path = args.out_dir / f"point{pair.point.id}_centroid{pair.centroid.id}.hqc"
        path.write_text(qcir.serialize(distest.build_pair_circuit(pair, profile)), encoding="utf-8")
        print(path, file=out)
    return EXIT_OK


def cmd_simulate(args, out: TextIO) -> int:
    try:
        circuit = qcir.parse(args.circuit.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"circuit: cannot read {args.circuit}: {exc.strerror}") from None
    except qcir.CircuitError as exc:
        raise UsageError(f"circuit: {exc}") from None
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        counts = qsim.sample_counts(circuit, args.shots, seed)
    except qsim.SimulationError as exc:
        raise UsageError(f"circuit: {exc}") from None
    out.write(counts.to_text())
    return EXIT_OK


def cmd_report(args, out: TextIO) -> int:
    table = _load_table(args.data)
    profile = _load_profile(args.profile)
    config = _config(args)
    try:
        result = run_workflow(ProblemRequest(args.data, profile=profile), config)
    except WorkflowFailed as exc:
        print(f"workflow failed: {exc}", file=out)
        return EXIT_FAILED
    if result.route is not Route.QUANTUM:
        print(f"route: {result.route.value} (no quantum estimates)", file=out)
        return EXIT_OK
    shots = config.shots or profile.shots
    width = profile.id_width_for([*(c.id for c in table.centroids), *(p.id for p in table.unassigned)])
    header = ("Centroid", "Data Point ID", f"Bit sequence for c[{width}]=1", "Determined Frequency", "Calculated Frequency")
    rows = []
    for e in result.estimates:
        point, centroid = table[e.point_id], table[e.centroid_id]
        expected = shots * distest.p_one(angle_embed(point.features), angle_embed(centroid.features))
        bits = "1" + format(e.point_id, f"0{width}b") if e.marked_count else "-"
        rows.append((f"{centroid.cluster} ({centroid.id})", str(e.point_id), bits, str(e.marked_count),
                     f"{expected:.3f}"))
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    print(f"shots per pair: {shots}", file=out)
    for r in [header, *rows]:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip(), file=out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "emit-circuits": cmd_emit, "simulate": cmd_simulate, "report": cmd_report}


def execute_command(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(execute_command())


if __name__ == "__main__":
    main()
