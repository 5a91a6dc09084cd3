"""Run the acceptance criteria and print one PASS/FAIL line each."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import test_acceptance as acc  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("criteria", nargs="*", type=int, default=sorted(acc.CRITERIA))
    args = parser.parse_args()
    failed = 0
    for k in args.criteria:
        ok, _ = acc.run(k)
        failed += not ok
        print(("PASS " if ok else "FAIL ") + acc.RESULTS[k][1], flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
