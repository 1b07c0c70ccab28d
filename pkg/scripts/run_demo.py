#!/usr/bin/env python3
"""Run the bundled synthetic end-to-end demo.

Generates a strongly biased dataset (planted selection-rate gap 0.4) and a
zero-bias control, pushes both through the experiment and analysis pipeline,
and prints a comparison summary.  Outputs land under --out (default
./demo_out): results.csv, manifest.json, correlation/cluster/sensitivity/
movement artifacts and report.md per run.
"""

import sys

from fairsift.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:]
    if not any(a.startswith("--out") for a in argv):
        argv = ["--out", "demo_out"] + argv
    sys.exit(main(["demo"] + argv))
