import json
from enum import IntEnum, StrEnum
from typing import Any

from pydantic import BaseModel, Field

from chsim.utils import canonical


class Status(StrEnum):
    PASS = "pass"
    FAIL = "fail"
    VIOLATION = "violation"
    ERROR = "error"


class ExitCode(IntEnum):
    PASS = 0
    FAIL = 1
    VIOLATION = 2
    VALIDATION = 3
    NUMERIC = 4


def canonical_json(data: Any) -> str:
    """Sorted keys, floats to twelve significant digits; stable under reparsing."""
    return json.dumps(canonical(data), sort_keys=True, indent=2, ensure_ascii=False)


class Report(BaseModel):
    scenario_id: str
    kind: str
    status: Status
    exit_code: ExitCode
    metrics: dict[str, float] = Field(default_factory=dict)
    narratives: list[str] = Field(default_factory=list)
    details: dict[str, Any] = Field(default_factory=dict)

    def to_data(self) -> dict[str, Any]:
        return canonical(self.model_dump(mode="python"))

    def to_json(self) -> str:
        return canonical_json(self.to_data())

    def to_text(self) -> str:
        lines = [
            f"scenario  {self.scenario_id}",
            f"kind      {self.kind}",
            f"status    {self.status} (exit {int(self.exit_code)})",
        ]
        if self.metrics:
            width = max(len(name) for name in self.metrics)
            lines.append("metrics")
            data = self.to_data()["metrics"]
            lines.extend(f"  {name.ljust(width)}  {data[name]!r}" for name in sorted(data))
        if self.narratives:
            lines.append("narratives")
            lines.extend(f"  - {n}" for n in self.narratives)
        return "\n".join(lines)


class BatchReport(BaseModel):
    reports: list[Report]

    @property
    def exit_code(self) -> ExitCode:
        return max((r.exit_code for r in self.reports), default=ExitCode.PASS)

    def counts(self) -> dict[str, int]:
        counts = dict.fromkeys(Status, 0)
        for report in self.reports:
            counts[report.status] += 1
        return {str(status): count for status, count in counts.items()}

    def to_json(self) -> str:
        return canonical_json(
            {
                "scenarios": [r.to_data() for r in self.reports],
                "summary": {**self.counts(), "exit_code": int(self.exit_code)},
            }
        )

    def to_text(self) -> str:
        blocks = [r.to_text() for r in self.reports]
        summary = ", ".join(f"{count} {status}" for status, count in self.counts().items())
        blocks.append(f"{len(self.reports)} scenarios: {summary} (exit {int(self.exit_code)})")
        return "\n\n".join(blocks)
