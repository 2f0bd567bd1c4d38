"""Learning/detection evaluation: trace splitting, reference database
construction, threshold sweeps and the similarity/identification metrics."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import ParameterKind, extract_samples, group_by_device
from .matcher import SimilarityVector, match_many
from .signature import BinningScheme, DeviceSignature, ReferenceDatabase, build_signature
from .trace import CanonicalTrace, DeviceId

logger = logging.getLogger(__name__)

US_PER_S = 1_000_000
DEFAULT_REF_DURATION = 3600 * US_PER_S
DEFAULT_WINDOW = 300 * US_PER_S
DEFAULT_MIN_OBS = 50
DEFAULT_SWEEP_SIZE = 1001

CSV_HEADER = ("T", "tpr", "fpr", "id_ratio", "id_fpr")


class EvaluationError(ValueError):
    """Evaluation cannot run with the given trace and configuration."""


def default_sweep(n: int = DEFAULT_SWEEP_SIZE) -> tuple[float, ...]:
    if n < 1:
        raise ValueError("sweep needs at least one threshold")
    if n == 1:
        return (0.5,)
    return tuple(float(t) for t in np.linspace(0.0, 1.0, n))


@dataclass(frozen=True)
class EvaluationConfig:
    ref_duration: int = DEFAULT_REF_DURATION
    window: int = DEFAULT_WINDOW
    min_obs: int = DEFAULT_MIN_OBS
    sweep: tuple[float, ...] = field(default_factory=default_sweep)

    def __post_init__(self) -> None:
        if self.window <= 0:
            raise ValueError("window must be > 0")
        if self.ref_duration < 0:
            raise ValueError("ref_duration must be >= 0")
        if self.min_obs < 1:
            raise ValueError("min_obs must be >= 1")
        sweep = tuple(float(t) for t in self.sweep)
        if any(not 0.0 <= t <= 1.0 for t in sweep):
            raise ValueError("thresholds must lie in [0, 1]")
        object.__setattr__(self, "sweep", sweep)


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    tpr: float
    fpr: float
    id_ratio: float
    id_fpr: float


@dataclass(frozen=True)
class EvaluationReport:
    points: tuple[CurvePoint, ...]
    auc: float
    n_candidates: int = 0
    n_known: int = 0
    n_windows: int = 0
    n_references: int = 0

    def nearest_id_fpr(self, target: float) -> Optional[CurvePoint]:
        """Sweep point whose id_fpr is closest to ``target`` (ties: higher id_ratio)."""
        if not self.points:
            return None
        return min(self.points, key=lambda p: (abs(p.id_fpr - target), -p.id_ratio, p.threshold))

    def best_id_ratio(self, max_id_fpr: float) -> Optional[CurvePoint]:
        """Point with the highest id_ratio among those with id_fpr <= bound."""
        ok = [p for p in self.points if p.id_fpr <= max_id_fpr]
        if not ok:
            return None
        return max(ok, key=lambda p: (p.id_ratio, -p.id_fpr, -p.threshold))


def windows_of(frames, start: int, window: int, end: int) -> list[list]:
    """Bucket frames with ``start <= t_end <= end`` into half-open windows."""
    n = (end - start) // window + 1
    buckets: list[list] = [[] for _ in range(n)]
    for f in frames:
        buckets[(f.t_end - start) // window].append(f)
    return buckets


def split_trace(trace: CanonicalTrace, cfg: EvaluationConfig) -> tuple[CanonicalTrace, list[CanonicalTrace]]:
    """Reference part ``t_end < ref_duration``; the rest in consecutive
    half-open windows. The trace lasts until its last frame's ``t_end``."""
    if trace.duration <= cfg.ref_duration:
        raise EvaluationError(
            f"trace lasts {trace.duration} us, not longer than the reference duration {cfg.ref_duration} us")
    ref = [f for f in trace.frames if f.t_end < cfg.ref_duration]
    buckets = windows_of(trace.frames[len(ref):], cfg.ref_duration, cfg.window, trace.duration)
    return (CanonicalTrace(tuple(ref), trace.origin),
            [CanonicalTrace(tuple(b), trace.origin) for b in buckets])


def device_signatures(trace: CanonicalTrace, scheme: BinningScheme, min_obs: int) -> list[DeviceSignature]:
    """Signatures of every device in ``trace`` reaching ``min_obs`` samples."""
    out = []
    for samples in group_by_device(extract_samples(trace, scheme.kind)).values():
        sig = build_signature(samples, scheme, min_obs)
        if sig is not None:
            out.append(sig)
    return out


def build_reference_db(trace: CanonicalTrace, kind: ParameterKind, scheme: BinningScheme,
                       min_obs: int = DEFAULT_MIN_OBS) -> ReferenceDatabase:
    if ParameterKind(kind) != scheme.kind:
        raise ValueError(f"scheme is for {scheme.kind}, not {kind}")
    db = ReferenceDatabase(scheme, device_signatures(trace, scheme, min_obs))
    if not len(db):
        logger.warning("no device reached %d observations; reference database is empty", min_obs)
    return db


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def curve_auc(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoid area under (fpr, tpr) points anchored at (0,0) and (1,1)."""
    pts = sorted([(0.0, 0.0), *points, (1.0, 1.0)])
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return min(1.0, max(0.0, area))


@dataclass(frozen=True)
class Outcome:
    """Similarity vector of one candidate in one window."""

    window: int
    vector: SimilarityVector

    @property
    def truth(self) -> DeviceId:
        return self.vector.candidate


def metrics(outcomes: Sequence[Outcome], references: Sequence[DeviceId],
            sweep: Sequence[float]) -> list[CurvePoint]:
    """Pooled metrics over all (window, candidate) pairs for every threshold."""
    refs = list(references)
    ref_pos = {r: j for j, r in enumerate(refs)}
    n = len(outcomes)
    if n == 0 or not refs:
        return [CurvePoint(t, 0.0, 0.0, 0.0, 0.0) for t in sweep]

    S = np.array([[o.vector.as_dict().get(r, 0.0) for r in refs] for o in outcomes])
    own = np.array([ref_pos.get(o.truth, -1) for o in outcomes])
    known = own >= 0
    n_known = int(known.sum())
    own_sim = np.where(known, S[np.arange(n), np.where(known, own, 0)], -np.inf)

    # top-1 with ties going to the smallest MAC, i.e. the first column
    best_col = np.argmax(S, axis=1)
    best_sim = S[np.arange(n), best_col]
    best_is_own = best_col == own

    points = []
    for t in sweep:
        returned = S > t
        n_returned = int(returned.sum())
        own_returned = known & (own_sim > t)
        wrong_returned = n_returned - int(own_returned.sum())
        identified = best_sim > t
        points.append(CurvePoint(
            threshold=float(t),
            tpr=_ratio(int(own_returned.sum()), n_known),
            fpr=_ratio(wrong_returned, n_returned),
            id_ratio=_ratio(int((identified & best_is_own).sum()), n_known),
            id_fpr=_ratio(int((identified & ~best_is_own).sum()), n),
        ))
    return points


def evaluate(trace: CanonicalTrace, cfg: EvaluationConfig, kind: ParameterKind,
             scheme: BinningScheme) -> EvaluationReport:
    ref_trace, windows = split_trace(trace, cfg)
    refdb = build_reference_db(ref_trace, kind, scheme, cfg.min_obs)
    if not len(refdb):
        raise EvaluationError("reference database is empty")
    return evaluate_against(refdb, windows, cfg)


def match_windows(refdb: ReferenceDatabase, windows: Sequence[CanonicalTrace],
                  min_obs: int) -> list[Outcome]:
    outcomes = []
    for w, window in enumerate(windows):
        cands = device_signatures(window, refdb.scheme, min_obs)
        outcomes.extend(Outcome(w, v) for v in match_many(cands, refdb))
    return outcomes


def evaluate_against(refdb: ReferenceDatabase, windows: Sequence[CanonicalTrace],
                     cfg: EvaluationConfig) -> EvaluationReport:
    outcomes = match_windows(refdb, windows, cfg.min_obs)
    points = metrics(outcomes, refdb.devices(), cfg.sweep)
    return EvaluationReport(
        points=tuple(points),
        auc=curve_auc([(p.fpr, p.tpr) for p in points]),
        n_candidates=len(outcomes),
        n_known=sum(1 for o in outcomes if o.truth in refdb),
        n_windows=len(windows),
        n_references=len(refdb),
    )


def report_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in report.points:
        w.writerow([repr(p.threshold), repr(p.tpr), repr(p.fpr), repr(p.id_ratio), repr(p.id_fpr)])
    w.writerow(["AUC", repr(report.auc), "", "", ""])
    return buf.getvalue()


def parse_report_csv(text: str) -> EvaluationReport:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("not a report CSV")
    points, auc = [], None
    for row in rows[1:]:
        if row and row[0] == "AUC":
            auc = float(row[1])
        elif row:
            points.append(CurvePoint(*map(float, row)))
    if auc is None:
        raise ValueError("report CSV has no AUC row")
    return EvaluationReport(points=tuple(points), auc=auc)
