#!/usr/bin/env python3
"""Run every subcommand on the standard P^1 testbed into one output directory.

Produces the full CSV/JSON set the report tool consumes:

    python3 scripts/run_full_experiment.py --out out/p1_default --seed 0
"""

import argparse
import json
import sys
import tempfile

from ckequant import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/p1_default")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--k", type=int, default=4)
    args = ap.parse_args()

    config = {
        "testbed": {"n": 1, "degrees": [1, 1], "k": args.k},
        "seed": args.seed,
        "k_list": [4, 8, 16, 32],
        "flow_t_end": 40.0,
        "radial_nodes": 256,
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        cfg_path = fh.name

    for sub, extra in [
        ("balance", []),
        ("flow", []),
        ("bergman", []),
        ("spectrum", []),
        ("obstruction", []),
        ("almost", ["--set", "k_list=[8,16,32]"]),
        ("cflow", ["--set", "radial_nodes=128", "--set", "flow_t_end=5.0",
                   "--set", "cflow_dt=2e-5"]),
    ]:
        rc = cli.main([sub, "--config", cfg_path, "--out", args.out] + extra)
        if rc != 0:
            print(f"{sub} failed with exit code {rc}", file=sys.stderr)
            return rc
    print(f"all artifacts written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
