#!/usr/bin/env python3
"""Build the bundled instance library in ifdp/instances/.

Generates seeded benchmark instances for every benchmark topology plus the
example instances carried by the topology registry, and records them in
ifdp/instances/index.json.

Usage:
    python scripts/build_instances.py              # build everything
    python scripts/build_instances.py --force      # rebuild even if index.json exists
    python scripts/build_instances.py --dry-run    # show what would be built
    python scripts/build_instances.py --seeds 5    # seeds per scenario (default 3)
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime, timezone

# Allow imports from the project root
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ifdp.bench import Scenario, generate_instance
from ifdp.guardrails import MAX_WORKERS
from ifdp.serialization import write_instance
from ifdp.topologies import get_by_kind

INSTANCES_DIR = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    "ifdp", "instances",
)
INDEX_PATH = os.path.join(INSTANCES_DIR, "index.json")
FLOW_COUNTS = (5, 10)


def planned_builds(seeds, alpha):
    """Return [(file stem, Scenario)] for every instance to build."""
    builds = []
    for topology in get_by_kind("example"):
        builds.append((topology.name, Scenario(topology.name, len(topology.flows))))
    for topology in get_by_kind("benchmark"):
        for flows in FLOW_COUNTS:
            for seed in range(seeds):
                stem = f"{topology.name}-f{flows}-s{seed}"
                builds.append((stem, Scenario(topology.name, flows, alpha=alpha, seed=seed)))
    return builds


def build_one(stem, scenario):
    """Generate and write one instance. Returns (stem, index entry) or raises."""
    log_prefix = f"[{stem}]"
    print(f"{log_prefix} Generating {scenario.name} seed {scenario.seed}...")
    inst = generate_instance(scenario)
    path = os.path.join(INSTANCES_DIR, f"{stem}.json")
    write_instance(inst, path, description=f"{scenario.name} seed {scenario.seed}")
    print(f"{log_prefix} Wrote {path}")
    return stem, {
        "scenario": scenario.name,
        "topology": scenario.topology,
        "flows": inst.flow_count,
        "seed": scenario.seed,
        "built_at": datetime.now(timezone.utc).isoformat(),
    }


def main():
    parser = argparse.ArgumentParser(description="Build the bundled IFDP instance library.")
    parser.add_argument(
        "--force", action="store_true",
        help="Rebuild even if index.json already exists.",
    )
    parser.add_argument(
        "--dry-run", action="store_true",
        help="Show what would be built without writing anything.",
    )
    parser.add_argument("--seeds", type=int, default=3, help="Seeds per benchmark scenario.")
    parser.add_argument("--alpha", type=float, default=2.0, help="Deadline factor for benchmark scenarios.")
    args = parser.parse_args()

    if os.path.exists(INDEX_PATH) and not args.force:
        print(f"index.json already exists at {INDEX_PATH}")
        print("Use --force to rebuild, or delete the file first.")
        sys.exit(1)

    builds = planned_builds(args.seeds, args.alpha)
    print(f"Building {len(builds)} instance(s):")
    for stem, scenario in builds:
        print(f"  - {stem} ({scenario.name}, seed {scenario.seed})")

    if args.dry_run:
        print(f"\n--dry-run: Would build {len(builds)} instance(s).")
        return

    index = {}
    if os.path.exists(INDEX_PATH):
        # hand-written entries are not regenerated
        with open(INDEX_PATH) as f:
            index = {k: v for k, v in json.load(f).items() if v.get("topology") == "custom"}
    errors = {}
    start_time = time.monotonic()
    os.makedirs(INSTANCES_DIR, exist_ok=True)

    print(f"\nStarting parallel build with {MAX_WORKERS} workers...\n")
    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as executor:
        futures = {executor.submit(build_one, stem, sc): stem for stem, sc in builds}
        for future in as_completed(futures):
            stem = futures[future]
            try:
                name, entry = future.result()
                index[name] = entry
            except Exception as exc:
                errors[stem] = str(exc)
                print(f"\n[{stem}] FAILED: {exc}\n")

    elapsed = time.monotonic() - start_time

    if index:
        with open(INDEX_PATH, "w") as f:
            json.dump(dict(sorted(index.items())), f, indent=2)
        print(f"\nWrote {len(index)} entr(ies) to {INDEX_PATH}")

    print(f"\n{'='*60}")
    print("Build Summary")
    print(f"{'='*60}")
    print(f"  Elapsed: {elapsed:.1f} seconds")
    print(f"  Succeeded: {len(index)}/{len(builds)}")
    if errors:
        print(f"  Failed: {len(errors)}/{len(builds)}")
        for name, err in errors.items():
            print(f"    - {name}: {err[:100]}")

    if errors:
        sys.exit(1)


if __name__ == "__main__":
    main()
