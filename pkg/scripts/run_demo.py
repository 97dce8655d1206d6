#!/usr/bin/env python3
"""Run the shipped seven-variant suite on the synthetic corpus and print reports.

Usage: python scripts/run_demo.py [seed] [out_dir]
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from peermatch.harness import default_suite_configs, default_synthetic_corpus, run_suite  # noqa: E402
from peermatch.personas import default_cohort  # noqa: E402


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 42
    out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("demo-out")

    corpus = default_synthetic_corpus()
    cohort = default_cohort()
    started = time.monotonic()
    suite = run_suite(default_suite_configs(seed=seed), corpus, cohort, out_dir=out_dir)
    elapsed = time.monotonic() - started

    print(suite.gain_text)
    print((out_dir / "category_table.txt").read_text("utf-8"))
    for result in suite.results:
        if result.selections:
            biased = [s for s in result.selections if s.anchor_subject != 0]
            rate = sum(s.complementary for s in biased) / len(biased)
            print(f"{result.config.name}: complementary-partner rate {rate:.0%} over {len(biased)} selections")
    print(f"\nsuite finished in {elapsed:.1f}s; artifacts in {out_dir}/")


if __name__ == "__main__":
    main()
