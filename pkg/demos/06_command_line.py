"""
The command line: model files in, deterministic reports out
============================================================

Models and query batches live in JSON files; ``ictmc eval`` runs the batch
and writes a report whose bytes depend only on the inputs and the seed.
This script drives the bundled tutorial pair (see ``demos/tutorial/``) and
picks the results apart.  The same run from a shell:

    ictmc eval --model demos/tutorial/model.json \
               --queries demos/tutorial/queries.json \
               --out /tmp/tutorial-report
"""

import json
import pathlib
import tempfile

from ictmc.cli import main

here = pathlib.Path(__file__).resolve().parent
out = pathlib.Path(tempfile.mkdtemp(prefix="ictmc-tutorial-"))

code = main(["eval",
             "--model", str(here / "tutorial" / "model.json"),
             "--queries", str(here / "tutorial" / "queries.json"),
             "--out", str(out)])
print("exit code                :", code)

report = json.loads((out / "report.json").read_text(encoding="utf-8"))
print("engine settings          :", report["engine"])

# Every query lands in the report with its inputs echoed back; value-style
# queries carry an error estimate, checks carry a verdict.  A transition
# query returns one value per start state, so its entry holds a list.
for entry in report["queries"]:
    verdict = "" if entry["passed"] is None else f"  passed={entry['passed']}"
    value = entry["value"]
    shown = f"{value:.9g}" if isinstance(value, float) else \
        "[" + ", ".join(f"{v:.6g}" for v in value[:3]) + ", ...]"
    print(f"  {entry['name']:<22} {entry['kind']:<10} value={shown}{verdict}")

# Convergence and rate-ladder queries also leave per-level CSV files for
# plotting, and a timing sidecar stays outside the deterministic report.
print("sidecar files            :",
      sorted(p.name for p in out.iterdir() if p.name != "report.json"))
print("reach-three.csv:")
print((out / "reach-three.csv").read_text(encoding="utf-8").strip())
