"""Scaling metrics and core-time accounting."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .errors import InvalidArgs

log = logging.getLogger(__name__)

SWEEP_FIELDS = ("p", "C", "t_w", "S", "A", "active", "idle", "manage", "estimate", "achieved_error")


@dataclass(frozen=True)
class CoreTimeSplit:
    """Active, idle and managing core-seconds over a run of wall time ``t_w``."""

    active: float
    idle: float
    manage: float
    total_processors: int
    t_w: float

    @property
    def total(self) -> float:
        return self.active + self.idle + self.manage

    def conservation_error(self) -> float:
        """Relative gap between a + i + m and p t_w."""
        ref = self.total_processors * self.t_w
        if ref == 0:
            return abs(self.total)
        return abs(self.total - ref) / ref

    def to_dict(self) -> dict:
        return {"active": self.active, "idle": self.idle, "manage": self.manage}


def efficiency(split: CoreTimeSplit) -> float:
    """A = a / (p t_w)."""
    if not split.t_w > 0 or split.total_processors < 1:
        raise InvalidArgs("efficiency needs t_w > 0 and at least one processor")
    return split.active / (split.total_processors * split.t_w)


def speedup(t_w_base: float, t_w_p: float) -> float:
    if not (t_w_base > 0 and t_w_p > 0):
        raise InvalidArgs("speedup needs positive wall times")
    return t_w_base / t_w_p


def scale_samples(N_star: Sequence[int], C: int) -> list[int]:
    if C < 1:
        raise InvalidArgs("sample multiplier must be at least 1")
    return [int(n) * C for n in N_star]


def error_adjusted_time(t_w: float, achieved_error: float, reference_error: float) -> float:
    """Wall time credited for reaching a smaller (or blamed for a larger) error."""
    if not (achieved_error > 0 and reference_error > 0) or t_w < 0:
        raise InvalidArgs("error_adjusted_time needs positive errors and t_w >= 0")
    if achieved_error < 1e-12 * reference_error:
        log.warning("achieved error %.3g is negligible next to %.3g; adjusted time degenerates",
                    achieved_error, reference_error)
    return t_w * achieved_error / reference_error


@dataclass(frozen=True)
class SweepPoint:
    p: int
    C: int
    t_w: float
    S: float
    A: float
    active: float
    idle: float
    manage: float
    estimate: float
    achieved_error: float | None = None

    def __post_init__(self):
        if not 0 <= self.A <= 1 + 1e-12:
            raise InvalidArgs(f"efficiency {self.A} outside [0, 1]")

    def row(self) -> dict:
        d = asdict(self)
        if d["achieved_error"] is None:
            d["achieved_error"] = ""
        return d


def sweep_csv(points: Iterable[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    w.writeheader()
    for pt in points:
        w.writerow(pt.row())
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        for k in SWEEP_FIELDS:
            v = r.get(k, "")
            r[k] = None if v == "" else (int(v) if k in ("p", "C") else float(v))
    return rows


def relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def is_close(a: float, b: float, rel: float) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0) or a == b
