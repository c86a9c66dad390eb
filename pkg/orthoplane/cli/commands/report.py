"""
report: collect metrics.json files of several runs into one table
"""
import json
from pathlib import Path

import pandas as pd

from ...core.exceptions import EmptyInputError
from ...core.logging_config import get_logger

logger = get_logger("cli.report")


def collect(run_dirs) -> pd.DataFrame:
    rows = []
    for run_dir in map(Path, run_dirs):
        path = run_dir / "metrics.json"
        if not path.exists():
            logger.warning(f"⚠️  {run_dir} has no metrics.json; skipped")
            continue
        data = json.loads(path.read_text())
        row = {"run": str(run_dir), "mmp": data.get("mmp")}
        row.update(data.get("depth", {}))
        row.update({f"ground_{k}": v for k, v in data.get("ground", {}).items()})
        rows.append(row)
    if not rows:
        raise EmptyInputError("none of the input directories holds metrics.json", field="in")
    return pd.DataFrame(rows)


def run(out_dir: Path, run_dirs) -> None:
    table = collect(run_dirs)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "report.csv", index=False)
    summary = table.drop(columns=["run"]).mean(numeric_only=True)
    (out_dir / "report.json").write_text(json.dumps({
        "runs": table.to_dict(orient="records"),
        "mean": {k: float(v) for k, v in summary.items()},
    }, indent=2))
    logger.info(f"✅ Report over {len(table)} runs written to {out_dir}")
