#!/usr/bin/env python3
"""Rebuild the golden pipeline outputs from the committed fixtures.

Runs the command-line pipeline on the mini corpus and copies the files that
the end-to-end regression test compares byte for byte. Rerun after any change
that intentionally alters pipeline output, then review the diff.
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from wikirel.cli import main

FIXTURES = ROOT / "fixtures"
GOLDEN = FIXTURES / "golden"

GOLDEN_FILES = [
    "source_edits.jsonl",
    "timelines.jsonl",
    "features_climate_en.csv",
    "eval_report.json",
]


def run(stage: Path) -> None:
    corpus = str(FIXTURES / "mini_climate_en.jsonl")
    labels = str(FIXTURES / "mini_perennial.csv")
    steps = [
        ["extract", "--corpus", corpus, "--out", str(stage)],
        ["features", "--corpus", corpus, "--labels", labels, "--out", str(stage)],
        [
            "evaluate",
            "--features", str(stage / "features_climate_en.csv"),
            "--out", str(stage),
            "--topic", "climate",
            "--language", "en",
            "--seed", "0",
            "--n-bootstrap", "100",
            "--compare-random",
        ],
    ]
    for argv in steps:
        code = main(argv)
        if code != 0:
            raise SystemExit(f"step {argv[0]} failed with exit code {code}")


def main_script() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        stage = Path(tmp)
        run(stage)
        for name in GOLDEN_FILES:
            shutil.copyfile(stage / name, GOLDEN / name)
    print(f"wrote {len(GOLDEN_FILES)} golden files to {GOLDEN}")


if __name__ == "__main__":
    main_script()
