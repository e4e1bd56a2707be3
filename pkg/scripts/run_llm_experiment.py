#!/usr/bin/env python3
"""Drive a dialogue experiment against a live chat-completion endpoint.

Builds a run config from flags, runs trials until the token budget is spent,
and writes log.jsonl / report.csv / report.txt under --out. Coverage results
depend on whichever model serves the endpoint: treat them as measurements of
that model, not as regression targets. Set the API key (if the server wants
one) in the environment variable named by --api-key-env.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from covstim.backend import BackendConfig, HttpBackend, RecordingBackend
from covstim.duts import DUT_KINDS
from covstim.prompting import (
    BUFFER_RESETS,
    CONTEXT_STRATEGIES,
    MISSED_BIN_METHODS,
    RESTART_PLANS,
    TEMPLATE_VARIANTS,
    StrategyConfig,
)
from covstim.runtime import RunConfig, report_csv, report_text, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dut", required=True, choices=DUT_KINDS)
    parser.add_argument("--endpoint", required=True, help="chat-completions URL")
    parser.add_argument("--model", required=True)
    parser.add_argument("--budget", type=int, default=10_000_000, help="token budget")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/latest", help="output directory")
    parser.add_argument("--template", choices=TEMPLATE_VARIANTS, default="original")
    parser.add_argument("--missed-bin", choices=MISSED_BIN_METHODS, default="pure_random")
    parser.add_argument("--context", choices=CONTEXT_STRATEGIES, default="recent")
    parser.add_argument("--restart", choices=RESTART_PLANS, default="normal")
    parser.add_argument("--buffer-reset", choices=BUFFER_RESETS, default="clear")
    parser.add_argument("--temperature", type=float, default=0.4)
    parser.add_argument("--max-tokens", type=int, default=600)
    parser.add_argument("--api-key-env", default="COVSTIM_API_KEY")
    parser.add_argument(
        "--record", action="store_true", help="also save responses as a replay script"
    )
    args = parser.parse_args()

    config = RunConfig(
        dut=args.dut,
        agent="llm",
        seed=args.seed,
        budget_tokens=args.budget,
        strategy=StrategyConfig(
            template_variant=args.template,
            missed_bin=args.missed_bin,
            context=args.context,
            restart=args.restart,
            buffer_reset=args.buffer_reset,
        ),
        backend=BackendConfig(
            endpoint=args.endpoint,
            model=args.model,
            temperature=args.temperature,
            max_tokens=args.max_tokens,
            api_key_env=args.api_key_env,
        ),
    )
    backend = HttpBackend(config.backend)
    if args.record:
        backend = RecordingBackend(backend)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = run_experiment(config, backend=backend, log_path=out / "log.jsonl")
    (out / "report.csv").write_text(report_csv(report), encoding="utf-8")
    text = report_text(report)
    (out / "report.txt").write_text(text, encoding="utf-8")
    if args.record:
        backend.dump(out / "replay_script.json")
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
