#!/usr/bin/env python3
"""Regenerate the golden simulation reports under tests/fixtures/.

Run after any intentional change to consensus, gossip, or the workload
generator, then review the diff before committing.
"""

from pathlib import Path

from ratingchain.netsim import load_config, run_simulation

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ["fault_free_4v", "partition_heal", "adversary_spammer"]


def main() -> None:
    for name in SCENARIOS:
        config = load_config(ROOT / "fixtures" / f"{name}.json")
        report = run_simulation(config)
        out = ROOT / "tests" / "fixtures" / f"golden_sim_{name}.json"
        out.write_bytes(report.to_json_bytes() + b"\n")
        d = report.data
        print(f"{name}: converged={d['converged']} forks={d['fork_count']} events={d['events_processed']}")


if __name__ == "__main__":
    main()
