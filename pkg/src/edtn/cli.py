"""Command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from edtn.energy_store import capacitance_for
from edtn.link_models import (
    DEFAULT_MODELS,
    PHASE_DESCRIPTIONS,
    DegenerateFit,
    GprsModel,
    InvalidBuffer,
    LinkModels,
    fit_gprs_curve,
    optimal_gprs_buffer,
)
from edtn.scenario import ConfigError, load_scenario, resolve_scenario
from edtn.sim import run
from edtn.trace import fmt6, write_csv

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2


class CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _load(path: str):
    try:
        return load_scenario(resolve_scenario(path))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    except ConfigError as exc:
        raise CliError(EXIT_INVALID, f"{path}: {exc}") from None


def _models_from(args) -> LinkModels:
    return _load(args.scenario).models if getattr(args, "scenario", None) else DEFAULT_MODELS


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    result = run(scenario, seed)
    if args.trace:
        _write(args.trace, write_csv(result.trace))
    _write(args.metrics, result.metrics.to_json(scenario=scenario.name, seed=seed))
    return EXIT_OK


def sweep_rows(b_min: int, b_max: int, gprs: GprsModel) -> list[tuple[int, float, float, float]]:
    rows = []
    for b in range(b_min, b_max + 1):
        seconds, joules = gprs.buffer_cost(b)
        rows.append((b, gprs.energy_per_packet(b), seconds, joules))
    return rows


def cmd_sweep_buffer(args) -> int:
    gprs = _models_from(args).gprs
    try:
        best = optimal_gprs_buffer(args.b_min, args.b_max, gprs)
    except InvalidBuffer as exc:
        raise CliError(EXIT_INVALID, str(exc)) from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["buffer_packets", "energy_per_packet_j", "total_time_s", "total_energy_j"])
    for b, epp, t, e in sweep_rows(args.b_min, args.b_max, gprs):
        w.writerow([b, fmt6(epp), fmt6(t), fmt6(e)])
    _write(args.out, buf.getvalue())
    summary = f"argmin buffer_packets={best} energy_per_packet_j={fmt6(gprs.energy_per_packet(best))}\n"
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(summary)
    return EXIT_OK


def cmd_size_capacitor(args) -> int:
    try:
        c = capacitance_for(args.target_j, args.v_max, args.v_cutoff)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from None
    sys.stdout.write(f"capacitance_f={fmt6(c)}\n")
    return EXIT_OK


def read_samples(path: str) -> list[tuple[float, float]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"buffer_packets", "energy_per_packet_j"} <= set(reader.fieldnames):
        raise CliError(EXIT_INVALID, f"{path}: need columns buffer_packets,energy_per_packet_j")
    samples = []
    for lineno, row in enumerate(reader, start=2):
        try:
            samples.append((float(row["buffer_packets"]), float(row["energy_per_packet_j"])))
        except (TypeError, ValueError):
            raise CliError(EXIT_INVALID, f"{path}: line {lineno}: not a number") from None
    return samples


def cmd_calibrate(args) -> int:
    samples = read_samples(args.samples)
    try:
        fit = fit_gprs_curve(samples)
    except DegenerateFit as exc:
        raise CliError(EXIT_INVALID, f"degenerate fit: {exc}") from None
    b_max = max(args.b_max, int(max(b for b, _ in samples)))
    best = fit.argmin(1, b_max)
    sys.stdout.write(
        f"epp_a={fmt6(fit.epp_a)}\nepp_b={fmt6(fit.epp_b)}\nepp_c={fmt6(fit.epp_c)}\n"
        f"residual={fmt6(fit.residual)}\nargmin_buffer_packets={best}\n"
    )
    if args.out:
        fragment = {"gprs": {"epp_a": fit.epp_a, "epp_b": fit.epp_b, "epp_c": fit.epp_c}}
        _write(args.out, json.dumps(fragment, indent=2) + "\n")
    return EXIT_OK


def cmd_link_table(args) -> int:
    models = _models_from(args)
    out = io.StringIO()
    out.write("# latency anchors\ntech,size_bytes,time_s,active_watts,energy_j\n")
    for tech in sorted(models.anchors, key=str):
        watts = models.active_watts[tech]
        for size, t in models.anchors[tech]:
            size_s = str(int(size)) if float(size).is_integer() else fmt6(size)
            out.write(f"{tech},{size_s},{fmt6(t)},{fmt6(watts)},{fmt6(watts * t)}\n")
    g = models.gprs
    out.write("# gprs\npacket_bytes,epp_a,epp_b,epp_c,t_setup_s,t_per_packet_s,buffer_packets\n")
    out.write(
        f"{g.packet_size},{fmt6(g.epp_a)},{fmt6(g.epp_b)},{fmt6(g.epp_c)},"
        f"{fmt6(g.t_setup)},{fmt6(g.t_per_packet)},{g.buffer_packets}\n"
    )
    out.write("# phase table\nlabel,joules,seconds,description\n")
    for p in models.phase_table:
        out.write(f"{p.label},{fmt6(p.joules)},{fmt6(p.seconds)},{PHASE_DESCRIPTIONS.get(p.label, '')}\n")
    seconds, joules = models.phase_table.totals()
    out.write(f"total,{fmt6(joules)},{fmt6(seconds)},\n")
    _write(None, out.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edtn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario file")
    p.add_argument("scenario", help="scenario JSON path or bundled scenario name")
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed (default 0)")
    p.add_argument("--trace", default=None, help="trace CSV output path")
    p.add_argument("--metrics", default=None, help="metrics JSON output path (default stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-buffer", help="energy per packet across GPRS buffer sizes")
    p.add_argument("b_min", type=int)
    p.add_argument("b_max", type=int)
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p.add_argument("--scenario", default=None, help="take the GPRS model from a scenario")
    p.set_defaults(func=cmd_sweep_buffer)

    p = sub.add_parser("size-capacitor", help="smallest capacitance holding a target energy")
    p.add_argument("--target-j", type=float, required=True)
    p.add_argument("--v-max", type=float, default=5.0)
    p.add_argument("--v-cutoff", type=float, default=2.0)
    p.set_defaults(func=cmd_size_capacitor)

    p = sub.add_parser("calibrate", help="fit the GPRS energy-per-packet curve")
    p.add_argument("samples", help="CSV with buffer_packets,energy_per_packet_j")
    p.add_argument("--out", default=None, help="write a scenario config fragment")
    p.add_argument("--b-max", type=int, default=1000, help="upper end of the argmin scan")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("link-table", help="print the active latency/energy models")
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=cmd_link_table)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"edtn {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
