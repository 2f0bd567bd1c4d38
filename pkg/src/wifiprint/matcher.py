"""Candidate-vs-reference matching with weighted cosine similarity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .signature import DeviceSignature, Histogram, ReferenceDatabase, SchemeMismatchError
from .trace import DeviceId


@dataclass(frozen=True)
class SimilarityVector:
    candidate: DeviceId
    entries: tuple[tuple[DeviceId, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def as_dict(self) -> dict[DeviceId, float]:
        return dict(self.entries)

    def get(self, ref: DeviceId, default: float = 0.0) -> float:
        for r, s in self.entries:
            if r == ref:
                return s
        return default

    def ranked(self) -> list[tuple[DeviceId, float]]:
        """Entries by decreasing similarity, ties by ascending MAC."""
        return sorted(self.entries, key=lambda e: (-e[1], e[0]))


def _check_threshold(threshold: float) -> None:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")


def cosine_similarity(h_c: Histogram, h_r: Histogram) -> float:
    """1 for identical shapes, 0 for disjoint support."""
    if h_c.scheme_id != h_r.scheme_id:
        raise SchemeMismatchError("histograms were binned with different schemes")
    if h_c.total == 0 or h_r.total == 0:
        raise ValueError("cosine similarity of an empty histogram")
    p, q = h_c.frequencies, h_r.frequencies
    sim = float(np.dot(p, q) / (np.linalg.norm(p) * np.linalg.norm(q)))
    return min(1.0, max(0.0, sim))


def match_candidate(sig_c: DeviceSignature, refdb: ReferenceDatabase) -> SimilarityVector:
    if sig_c.scheme_id != refdb.scheme.scheme_id or sig_c.kind != refdb.kind:
        raise SchemeMismatchError("candidate and reference database use different schemes")
    sims = {ref: 0.0 for ref in refdb.signatures}
    for ftype, cand in sig_c.entries.items():
        for ref, sig_r in refdb.signatures.items():
            entry = sig_r.entries.get(ftype)
            if entry is None:
                continue
            sims[ref] += entry.weight * cosine_similarity(cand.hist, entry.hist)
    return SimilarityVector(
        sig_c.device,
        tuple((ref, min(1.0, max(0.0, s))) for ref, s in sims.items()),
    )


def similarity_set(v: SimilarityVector, threshold: float) -> set[DeviceId]:
    _check_threshold(threshold)
    return {ref for ref, sim in v.entries if sim > threshold}


def identify(v: SimilarityVector, threshold: float) -> Optional[DeviceId]:
    """Best-matching reference, or None when nothing beats ``threshold``."""
    _check_threshold(threshold)
    if not v.entries:
        return None
    best, best_sim = v.ranked()[0]
    return best if best_sim > threshold else None


def match_many(candidates: list[DeviceSignature], refdb: ReferenceDatabase) -> list[SimilarityVector]:
    """Same result as calling :func:`match_candidate` per candidate, computed
    with one matrix product per frame type."""
    refs = list(refdb.signatures)
    if not candidates:
        return []
    for sig in candidates:
        if sig.scheme_id != refdb.scheme.scheme_id or sig.kind != refdb.kind:
            raise SchemeMismatchError("candidate and reference database use different schemes")
    total = np.zeros((len(candidates), len(refs)))
    ftypes = sorted({ft for sig in candidates for ft in sig.entries})
    for ftype in ftypes:
        ref_rows = [j for j, r in enumerate(refs) if ftype in refdb.signatures[r].entries]
        cand_rows = [i for i, c in enumerate(candidates) if ftype in c.entries]
        if not ref_rows:
            continue
        R = np.array([refdb.signatures[refs[j]].entries[ftype].hist.frequencies for j in ref_rows])
        w = np.array([refdb.signatures[refs[j]].entries[ftype].weight for j in ref_rows])
        C = np.array([candidates[i].entries[ftype].hist.frequencies for i in cand_rows])
        R /= np.linalg.norm(R, axis=1, keepdims=True)
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        cos = np.clip(C @ R.T, 0.0, 1.0)
        total[np.ix_(cand_rows, ref_rows)] += cos * w
    total = np.clip(total, 0.0, 1.0)
    return [
        SimilarityVector(sig.device, tuple(zip(refs, map(float, total[i]))))
        for i, sig in enumerate(candidates)
    ]
