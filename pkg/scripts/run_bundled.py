"""
Run every bundled scenario through the CLI and print a summary of exit codes.

Usage: python scripts/run_bundled.py [--out DIR]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from typer.testing import CliRunner  # noqa: E402

from hj_lab.adapters.cli.main import app  # noqa: E402

# Expected exit codes; anti-burgers asserts a pass the inf-family field cannot give.
BUNDLED = {
    "burgers-shock": (["--assert", "ordering", "--assert", "entropy-pass"], 0),
    "anti-burgers-rarefaction": (["--assert", "entropy-pass"], 1),
    "focusing-quadratic": (["--assert", "ordering"], 0),
    "saddle-2d": (["--assert", "ordering"], 0),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=ROOT / "out")
    args = parser.parse_args()

    runner = CliRunner()
    mismatches = 0
    for name, (flags, expected) in BUNDLED.items():
        config = ROOT / "scenarios" / f"{name}.json"
        result = runner.invoke(app, ["run", str(config), "--out", str(args.out / name), *flags])
        status = "ok" if result.exit_code == expected else "MISMATCH"
        mismatches += result.exit_code != expected
        print(f"{name:<28} exit={result.exit_code} expected={expected} {status}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
