#!/usr/bin/env python3
"""Regenerate frozen test fixtures: crt draws, prompt texts, the golden trial log.

Everything regenerated here is deterministic, so a rerun is a no-op unless
the implementation intentionally changed. Diff regenerated goldens before
committing them; they are the reference the acceptance tests lock against.

The golden trial replays tests/fixtures/golden_replay_script.json (37
responses against the ten-bin toy device): per-response new-bin deltas
  [1,0,2,0,1,0,0,0,0,0,1,1] + 25 zeros
which forces dialogue restarts before responses 11, 18, 25, and 32 under
the default tolerance, and trips the no-new-bins-in-25 exhaustion rule at
exactly response 37.
"""
from __future__ import annotations

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))
sys.path.insert(0, str(REPO / "tests"))

from covstim.agents import CrtAgent
from covstim.backend import ReplayBackend
from covstim.duts import DUT_KINDS, make_dut
from covstim.prompting import build_initial_query, build_system_message
from covstim.runtime import RunConfig, run_experiment
from toydut import ToyDut

FIXTURES = REPO / "tests" / "fixtures"
GOLDEN_SEED = 2026


def regen_crt_draws() -> None:
    stride = CrtAgent("stride", random.Random(42))
    decoder = CrtAgent("decoder", random.Random(42))
    cpu = CrtAgent("cpu", random.Random(42))
    payload = {
        "stride": [stride.next_stimulus({}) for _ in range(2)],
        "decoder": [decoder.next_stimulus({}) for _ in range(2)],
        "cpu_words": [
            cpu.next_stimulus({"pc": 0})[0][1],
            cpu.next_stimulus({"pc": 24})[0][1],
        ],
    }
    path = FIXTURES / "crt_golden.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


def regen_prompts() -> None:
    out = FIXTURES / "prompts"
    out.mkdir(exist_ok=True)
    formats = {}
    for kind in DUT_KINDS:
        dut = make_dut(kind)
        formats[dut.stimulus_format] = True
        path = out / f"initial_{kind}.txt"
        path.write_text(build_initial_query(dut.plan, "original", dut.stimulus_format))
        print(f"wrote {path}")
    for fmt in formats:
        path = out / f"system_{fmt}.txt"
        path.write_text(build_system_message(fmt))
        print(f"wrote {path}")


def regen_golden_trial() -> None:
    script = json.loads((FIXTURES / "golden_replay_script.json").read_text())
    config = RunConfig(dut="toy", agent="llm", seed=GOLDEN_SEED)
    backend = ReplayBackend(script)
    path = FIXTURES / "golden_trial.jsonl"
    run_experiment(config, backend=backend, dut=ToyDut(), log_path=path)
    print(f"wrote {path}")


if __name__ == "__main__":
    regen_crt_draws()
    regen_prompts()
    regen_golden_trial()
