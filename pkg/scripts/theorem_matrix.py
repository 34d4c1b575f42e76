#!/usr/bin/env python3
"""Run the shipped closure matrix through the CLI and print one line per row."""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from heavytail import cli_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", default="5")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    out = args.out or Path(tempfile.mkdtemp(prefix="matrix-"))
    cfg = out / "matrix.json"
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_text(json.dumps({"default": True}))
    code = cli_report.run(["matrix", "--config", str(cfg), "--seed", args.seed, "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    for row in report["rows"]:
        spec = row["spec"]
        label = spec["kind"] + ":" + str(spec.get("class", spec.get("target", "")))
        print(f"{row['id']}  {label:22s} {str(row['theorem_confirmed']):15s} {row['verdict']}")
    print(json.dumps(report["summary"]), f"exit={code}", f"out={out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
