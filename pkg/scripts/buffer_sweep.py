"""Energy per packet and per-flush cost across GPRS buffer sizes.

Prints CSV plus the argmin, and optionally the whole-chain cost for a few
bundle sizes at the chosen buffer.
"""

import argparse
import sys
from dataclasses import replace

from edtn.link_models import DEFAULT_MODELS, Bundle, bundle_chain_cost, optimal_gprs_buffer
from edtn.trace import fmt6


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--b-min", type=int, default=1)
    ap.add_argument("--b-max", type=int, default=200)
    ap.add_argument("--step", type=int, default=1)
    ap.add_argument("--bundle-bytes", type=int, nargs="*", default=[1600, 3200, 16000])
    args = ap.parse_args(argv)

    gprs = DEFAULT_MODELS.gprs
    print("buffer_packets,energy_per_packet_j,flush_time_s,flush_energy_j")
    for b in range(args.b_min, args.b_max + 1, args.step):
        t, e = gprs.buffer_cost(b)
        print(f"{b},{fmt6(gprs.energy_per_packet(b))},{fmt6(t)},{fmt6(e)}")

    best = optimal_gprs_buffer(args.b_min, args.b_max, gprs)
    print(f"# argmin {best} packets, {fmt6(gprs.energy_per_packet(best))} J/packet", file=sys.stderr)
    table = DEFAULT_MODELS.phase_table
    tuned = replace(gprs, buffer_packets=best)
    for size in args.bundle_bytes:
        seconds, joules = bundle_chain_cost(Bundle(0, size), table, tuned)
        print(f"# chain for {size} B: {fmt6(seconds)} s, {fmt6(joules)} J", file=sys.stderr)


if __name__ == "__main__":
    main()
