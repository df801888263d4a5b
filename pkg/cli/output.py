"""
Single writer for result files: CSV bodies with `#` metadata header lines and
the JSON acceptance report.
"""

import csv
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import bittensor as bt

from cli.scenario_schemas import ScenarioSchemas
from core.errors import ConfigurationError, GapfieldError

SOLVE_COLUMNS = [
    'epsilon', 'delta0', 'grid_shape', 'unknowns', 'nonzeros', 'cg_iters', 'final_residual',
    'max_grad_global', 'max_grad_segment', 'u_sup', 'wall_time_s',
]
THEOREM_COLUMNS = ['epsilon', 'beta_hat', 'scaled_max']
HARNACK_COLUMNS = ['epsilon', 'delta0', 'r', 'oscillation', 'ratio_upper', 'ratio_lower', 'status']
HARNACK_SUMMARY_COLUMNS = ['epsilon', 'delta0', 'sigma_hat', 'max_ratio', 'sigma_from_ratio', 'widened']
LAYERS_COLUMNS = ['l', 'seed', 'grad_ratio', 'y_norm_ratio']
VALIDATE_COLUMNS = ['module', 'property', 'passed', 'measured', 'threshold', 'message']


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


class ResultWriter:
    """All files of one run land in one output directory; metadata never enters a CSV body."""

    def __init__(self, directory: str):
        self.directory = Path(directory)

    def path(self, name: str) -> Path:
        return self.directory / name

    def _ensure_directory(self):
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"cannot create output directory {self.directory}: {e}", keys=['--out']) from e

    def write_csv(self, name: str, columns: Sequence[str], rows: Sequence[Sequence[str]],
                  metadata: Optional[Dict[str, Any]] = None) -> Path:
        self._ensure_directory()
        target = self.path(name)
        metadata = dict(metadata or {})

        with open(target, 'w', newline='') as handle:
            handle.write(f"# generated_at: {timestamp()}\n")
            for key in sorted(metadata):
                handle.write(f"# {key}: {json.dumps(metadata[key], sort_keys=True, default=str)}\n")

            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(columns)
            writer.writerows(rows)

        bt.logging.info(f"💾 Wrote {len(rows)} row(s) to {target}")
        return target

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        target = self.path(name)
        if not target.exists():
            raise GapfieldError(f"{target} does not exist; run the producing subcommand first")

        with open(target, 'r', newline='') as handle:
            body = [line for line in handle if not line.startswith('#')]

        return list(csv.DictReader(body))

    def read_metadata(self, name: str) -> Dict[str, Any]:
        metadata = {}
        with open(self.path(name), 'r') as handle:
            for line in handle:
                if not line.startswith('#'):
                    break

                key, _, value = line[1:].strip().partition(': ')
                try:
                    metadata[key] = json.loads(value)
                except json.JSONDecodeError:
                    metadata[key] = value

        return metadata

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def write_report(self, report: Dict[str, Any], name: str = 'report.json') -> Path:
        is_valid, errors = ScenarioSchemas.validate_structure(report, ScenarioSchemas.REPORT_SCHEMA)
        if not is_valid:
            raise GapfieldError("report does not match its schema: " + "; ".join(errors))

        self._ensure_directory()
        target = self.path(name)
        with open(target, 'w') as handle:
            json.dump(report, handle, indent=2, sort_keys=True)
            handle.write('\n')

        bt.logging.info(f"💾 Wrote acceptance report to {target}")
        return target
