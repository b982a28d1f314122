"""How much riding pays for how many single-bundle chains.

For each speed, prints the dynamo power, the ride time needed to harvest one
chain, and the capacitance needed to hold k chains in the default window.
"""

import argparse

from edtn.energy_store import Dynamo, capacitance_for, time_to_harvest
from edtn.link_models import DEFAULT_PHASE_TABLE
from edtn.trace import fmt6


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--speeds", type=float, nargs="*", default=[5, 10, 13, 15, 20])
    ap.add_argument("--chains", type=int, nargs="*", default=[1, 2, 4])
    ap.add_argument("--v-max", type=float, default=5.0)
    ap.add_argument("--v-cutoff", type=float, default=2.0)
    args = ap.parse_args(argv)

    dyn = Dynamo()
    _, chain_j = DEFAULT_PHASE_TABLE.totals()
    print("speed_kmh,power_w,ride_s_per_chain")
    for v in args.speeds:
        print(f"{fmt6(v)},{fmt6(dyn.power(v))},{fmt6(time_to_harvest(chain_j, v, dyn))}")
    print()
    print("chains,energy_j,capacitance_f")
    for k in args.chains:
        e = k * chain_j
        print(f"{k},{fmt6(e)},{fmt6(capacitance_for(e, args.v_max, args.v_cutoff))}")


if __name__ == "__main__":
    main()
