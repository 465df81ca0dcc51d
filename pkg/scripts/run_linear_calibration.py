#!/usr/bin/env python3
"""Edwards-Wilkinson / Mullins-Herring runs against their exact mode-sum oracles."""

import argparse
import json

from dipolesim.runner import calibrate_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="directory for calibrate_report.json")
    ap.add_argument("--variants", nargs="+", default=None,
                    choices=["edwards_wilkinson", "mullins_herring"])
    args = ap.parse_args()
    report = calibrate_report(workers=args.workers, out_dir=args.out, variants=args.variants)
    print(json.dumps(report["variants"], indent=1, sort_keys=True))
    print("all passed:", report["passed"])
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
