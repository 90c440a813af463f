"""Three-valued verdict reports for the numerical condition checkers."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    return v


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    constants: dict = field(default_factory=dict)
    ladder: list = field(default_factory=list)
    provenance: str = "analytic"
    table: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict == PASS

    def to_dict(self):
        return _plain(asdict(self))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)
