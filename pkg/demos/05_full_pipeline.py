"""Run every pipeline stage end to end in a temporary workspace.

Uses the offline stub backend (endpoint "stub:"), which echoes each request's
question and answer in the expected response grammar, so the whole flow runs
without network access or credentials. The gateway records every exchange to
a replay store; a second run in replay mode reproduces the dataset
byte-for-byte from that store.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from _corpus import write_demo_workspace
from kultur.config import load_config
from kultur.pipeline import FILES, STAGES, run_stage, write_run_manifest
from kultur.records import DatasetRecord, read_records


def main() -> None:
    with tempfile.TemporaryDirectory(prefix="kultur-demo-") as tmp:
        root = Path(tmp)
        config_path = write_demo_workspace(root)
        print(f"workspace: {root}")
        cfg = load_config(config_path)

        reports = []
        for stage in STAGES:
            report = run_stage(stage, cfg)
            reports.append(report)
            shown = "  ".join(f"{k}={v}" for k, v in sorted(report.counts.items()))
            print(f"  {stage:<9} {shown}")
        write_run_manifest(cfg, reports)

        sampled = [r for r in read_records(cfg.workdir / FILES["sampled"])
                   if isinstance(r, DatasetRecord)]
        print(f"\nfinal dataset: {len(sampled)} records")
        for r in sampled[:4]:
            print(f"  [{r.region}/{r.language}/{r.kind}] {r.question}")
            print(f"      -> {r.answer}")

        manifest = json.loads(
            (cfg.workdir / FILES["run_manifest"]).read_text(encoding="utf-8"))
        print("\nrun manifest files:")
        for name, entry in manifest["files"].items():
            print(f"  {name:<16} records={entry['records']:<4} "
                  f"sha256={entry['sha256'][:16]}...")

        store_lines = sum(
            1 for line in (root / "gateway_store.jsonl").open(encoding="utf-8")
            if line.strip())
        print(f"\nreplay store holds {store_lines} recorded exchanges;")
        print("rerun any stage with gateway mode \"replay\" to rebuild offline.")

        print("\nstats table:")
        print((cfg.workdir / FILES["stats_table"]).read_text(encoding="utf-8"))


if __name__ == "__main__":
    main()
