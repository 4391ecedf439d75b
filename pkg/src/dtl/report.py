"""Validation reports and work-unit budgets shared by the checkers."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Violation:
    world: object
    clause: str
    detail: str = ""

    def to_json(self) -> dict:
        return {"world": self.world, "clause": self.clause, "detail": self.detail}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def add(self, world, clause: str, detail: str = "") -> None:
        self.violations.append(Violation(world, clause, detail))

    def extend(self, other: ValidationReport) -> None:
        self.violations.extend(other.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __iter__(self):
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def clauses(self) -> set[str]:
        return {v.clause for v in self.violations}

    def to_json(self) -> list[dict]:
        return [v.to_json() for v in self.violations]


class ClosureMismatch(ValueError):
    """Two objects built over different closures were combined."""


class BudgetExhausted(Exception):
    pass


class Budget:
    """Counts abstract work units so verdicts do not depend on wall time."""

    def __init__(self, limit: int | None = None):
        self.limit = limit
        self.used = 0

    def spend(self, units: int = 1) -> None:
        self.used += units
        if self.limit is not None and self.used > self.limit:
            raise BudgetExhausted(self.used)

    @property
    def remaining(self) -> int | None:
        return None if self.limit is None else max(0, self.limit - self.used)

    def __repr__(self) -> str:
        return f"Budget(used={self.used}, limit={self.limit})"


