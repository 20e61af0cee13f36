"""Recording gate for data handed into model fits, used by leakage audits.

Every fit in the pipeline obtains its history through :func:`serve`, which
notes the range actually materialized together with the first index the fit
was *allowed* to see.  A clean run has no record whose served range crosses
its boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AccessAudit", "AccessRecord", "serve"]


@dataclass(frozen=True)
class AccessRecord:
    tag: str
    stop: int
    boundary: int

    @property
    def violation(self) -> bool:
        return self.stop > self.boundary


@dataclass
class AccessAudit:
    records: list[AccessRecord] = field(default_factory=list)

    def note(self, tag: str, stop: int, boundary: int) -> None:
        self.records.append(AccessRecord(tag, int(stop), int(boundary)))

    def violations(self) -> list[AccessRecord]:
        return [r for r in self.records if r.violation]

    def tags(self, prefix: str) -> list[AccessRecord]:
        return [r for r in self.records if r.tag.startswith(prefix)]


def serve(audit: AccessAudit | None, tag: str, values, stop: int, boundary: int) -> np.ndarray:
    """Materialize ``values[:stop]`` for a fit, recording the read when audited."""
    if audit is not None:
        audit.note(tag, stop, boundary)
    return np.asarray(values, dtype=np.float64)[:stop]
