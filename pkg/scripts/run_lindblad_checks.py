#!/usr/bin/env python3
"""Exact spin-model battery: symmetry algebra, steady state, negative controls."""

import argparse

from dipolesim.runner import lindblad_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None, help="directory for lindblad_report.json")
    args = ap.parse_args()
    report = lindblad_report(out_dir=args.out)
    for section, checks in report["checks"].items():
        for c in checks:
            flag = "PASS" if c["passed"] else "FAIL"
            print(f"[{flag}] {section}: {c['name']} (measured {c['measured']:.3e}, tol {c['tolerance']:g})")
    print("all passed:", report["passed"])
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
