"""
Run report
Collects verification records, Monte Carlo comparisons and tables, then
writes report.txt, results.json and one CSV file per table
"""
import csv
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from dualbench.cli.schemas.common import MCComparisonResponse, TableRow, VerificationRecordResponse
from dualbench.config import config
from dualbench.infra.models import MCComparison, VerificationRecord

logger = logging.getLogger(__name__)


class Report:
    """Single writer for every artifact of one run"""

    def __init__(self, experiment: str, model: str, seed: int):
        self.experiment = experiment
        self.model = model
        self.seed = seed
        self.records: List[VerificationRecordResponse] = []
        self.comparisons: List[MCComparisonResponse] = []
        self.tables: Dict[str, List[TableRow]] = {}
        self.notes: List[str] = []
        self.failures: List[str] = []

    def add_record(self, record: VerificationRecord) -> VerificationRecordResponse:
        response = VerificationRecordResponse.model_validate(record)
        self.records.append(response)
        if not response.passed:
            self.failures.append(response.identity)
        return response

    def add_comparison(self, comparison: MCComparison) -> MCComparisonResponse:
        response = MCComparisonResponse.model_validate(comparison)
        self.comparisons.append(response)
        if not response.passed:
            self.failures.append(response.label)
        return response

    def add_table(self, name: str, rows: List[Dict[str, Any]]) -> None:
        self.tables[name] = [TableRow(values=row) for row in rows]

    def check(self, passed: bool, identity: str) -> None:
        """Plain pass/fail verdict outside the record types"""
        self.notes.append(f"{identity}: {'pass' if passed else 'FAIL'}")
        if not passed:
            self.failures.append(identity)

    def note(self, line: str) -> None:
        self.notes.append(line)

    @property
    def passed(self) -> bool:
        return not self.failures

    def results(self) -> Dict[str, Any]:
        """Machine-readable results; no timestamps so reruns compare byte for byte"""
        return {
            "experiment": self.experiment,
            "model": self.model,
            "seed": self.seed,
            "passed": self.passed,
            "failures": list(self.failures),
            "records": [r.model_dump() for r in self.records],
            "comparisons": [c.model_dump() for c in self.comparisons],
            "tables": {name: [row.values for row in rows] for name, rows in self.tables.items()},
        }

    def text(self, timestamp: Optional[datetime] = None) -> str:
        timestamp = timestamp or datetime.now()
        lines = [
            f"{config.APP_NAME} v{config.APP_VERSION}",
            f"run at {timestamp.isoformat(timespec='seconds')}",
            f"experiment {self.experiment}, model {self.model}, seed {self.seed}",
            "",
        ]
        for record in self.records:
            verdict = "pass" if record.passed else "FAIL"
            line = f"[{verdict}] {record.identity} ({record.sector}) residual = {record.residual}"
            if record.witness:
                line += f" at {record.witness}"
            lines.append(line)
        for c in self.comparisons:
            verdict = "pass" if c.passed else "FAIL"
            line = (f"[{verdict}] {c.label}: lhs {c.lhs:.6g} +- {c.lhs_stderr:.2g}, "
                    f"rhs {c.rhs:.6g} +- {c.rhs_stderr:.2g}, z = {c.z_score:.2f}")
            if c.exact_lhs is not None or c.exact_rhs is not None:
                line += f" (exact {c.exact_lhs}, {c.exact_rhs})"
            lines.append(line)
        lines.extend(self.notes)
        for name, rows in self.tables.items():
            lines.append("")
            lines.append(f"table {name}: {len(rows)} rows ({name}.csv)")
        lines.append("")
        lines.append("PASS" if self.passed else "FAIL: " + ", ".join(self.failures))
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(self.text(), encoding="utf-8")
        with open(out_dir / "results.json", "w", encoding="utf-8") as handle:
            json.dump(self.results(), handle, sort_keys=True, indent=2)
            handle.write("\n")
        for name, rows in self.tables.items():
            header = list(rows[0].values) if rows else []
            with open(out_dir / f"{name}.csv", "w", encoding="utf-8", newline="") as handle:
                writer = csv.DictWriter(handle, fieldnames=header)
                writer.writeheader()
                for row in rows:
                    writer.writerow(row.values)
        logger.info("Artifacts written to %s", out_dir)
        return out_dir
