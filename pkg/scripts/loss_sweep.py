"""Delivery, duplicates and energy of the lossy scenario across loss rates.

Each loss rate is averaged over a range of seeds.
"""

import argparse
import statistics

from edtn.scenario import load_scenario, resolve_scenario
from edtn.sim import run
from edtn.trace import fmt6


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="lossy-multi-contact")
    ap.add_argument("--loss", type=float, nargs="*", default=[0.0, 0.1, 0.3, 0.5, 0.7, 0.9])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args(argv)

    base = load_scenario(resolve_scenario(args.scenario))
    print("loss,mean_delivered,min_delivered,mean_duplicates,mean_dm_energy_j,mean_latency_s")
    for p in args.loss:
        base.protocol.loss = p
        ms = [run(base, seed).metrics for seed in range(args.seeds)]
        print(
            f"{fmt6(p)},{fmt6(statistics.fmean(m.bundles_delivered for m in ms))},"
            f"{min(m.bundles_delivered for m in ms)},"
            f"{fmt6(statistics.fmean(m.server_duplicates for m in ms))},"
            f"{fmt6(statistics.fmean(m.dm_energy_j for m in ms))},"
            f"{fmt6(statistics.fmean(m.mean_latency_s for m in ms))}"
        )


if __name__ == "__main__":
    main()
