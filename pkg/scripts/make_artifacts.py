#!/usr/bin/env python3
"""Regenerate the shipped pulse artifacts from the example configs.

Runs `rydopt optimize` for every config that has a matching artifacts entry.
Optimization is deterministic, so the output is reproducible bit for bit.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

from rydopt.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ["tls_transfer", "fredkin_amp", "fredkin_ampphase", "c2z"]


def run() -> int:
    for name in CONFIGS:
        config = ROOT / "configs" / f"{name}.yaml"
        out = ROOT / "artifacts" / name
        print(f"== {name}: optimizing ({config}) -> {out}")
        t0 = time.perf_counter()
        code = main(["optimize", "--config", str(config), "--out", str(out)])
        print(f"== {name}: done in {time.perf_counter() - t0:.1f} s (exit {code})")
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
