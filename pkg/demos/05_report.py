"""Full pipeline through the command line entry point, ending in index.html.

``energyreg run`` checks stability, measures, analyses and renders a
static page with inline SVG charts. The same commands work on a real
repository with ``energy_backend: perf-rapl``.
"""

# %%
import json
import tempfile
from pathlib import Path

from energyreg.cli import main
from energyreg.synthetic import write_synthetic_campaign

root = Path(tempfile.mkdtemp(prefix="energyreg-report-"))
means = [100.0] * 10 + [112.0] * 10 + [104.0] * 10
messages = [f"change {i}" for i in range(30)]
messages[20] = "Cache parsed selectors (performance)"
camp = write_synthetic_campaign(root, means, messages=messages, repetitions=15)

# %%
out = root / "out"
code = main(["run", "--config", str(camp.pipeline_config),
             "--analysis-config", str(camp.analysis_config), "--out", str(out)])
print("exit code", code)

# %%
print(json.dumps(json.loads((out / "summary.json").read_text()), indent=1))
print("open", out / "index.html")
