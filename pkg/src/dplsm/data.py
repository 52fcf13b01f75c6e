"""Contact records and per-dyad sufficient statistics.

Contacts are folded into unordered pairs and counted over an observation
window; the contact count is all the likelihood needs.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

CSV_HEADER = ("caller_id", "callee_id", "week")


class DataError(ValueError):
    """Raised for malformed or inconsistent interaction data."""


@dataclass(frozen=True)
class InteractionRecord:
    a: int
    b: int
    week: int

    def __post_init__(self):
        if self.a == self.b:
            raise DataError(f"self-contact record for individual {self.a}")
        if self.week < 0:
            raise DataError(f"negative week {self.week}")


@dataclass(frozen=True)
class ObservationWindow:
    """Half-open week interval ``[start_week, end_week)``."""

    start_week: int
    end_week: int

    def __post_init__(self):
        if self.end_week <= self.start_week:
            raise DataError(
                f"empty window [{self.start_week}, {self.end_week})")

    @property
    def T(self) -> float:
        return float(self.end_week - self.start_week)

    def contains(self, week: int) -> bool:
        return self.start_week <= week < self.end_week


def dyad_key(i: int, j: int) -> tuple[int, int]:
    """Canonical (smaller, larger) key of an undirected dyad."""
    if i == j:
        raise DataError("a dyad needs two distinct individuals")
    return (i, j) if i < j else (j, i)


def n_dyads(n: int) -> int:
    return n * (n - 1) // 2


@dataclass(frozen=True)
class DyadTable:
    """Contact counts for the nonempty dyads of an ``n``-person network.

    Dyads absent from ``nonempty`` had no contacts in ``window``.
    """

    n_individuals: int
    window: ObservationWindow
    nonempty: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_individuals
        if n < 1:
            raise DataError("a network needs at least one individual")
        for (i, j), y in self.nonempty.items():
            if not 0 <= i < j < n:
                raise DataError(f"dyad ({i}, {j}) is not canonical for N={n}")
            if y < 1:
                raise DataError(f"nonempty dyad ({i}, {j}) has count {y}")

    @property
    def n_dyads(self) -> int:
        return n_dyads(self.n_individuals)

    @property
    def n_nonempty(self) -> int:
        return len(self.nonempty)

    @property
    def n_empty(self) -> int:
        return self.n_dyads - self.n_nonempty

    @property
    def T(self) -> float:
        return self.window.T

    def arrays(self):
        """Return ``(i, j, y)`` integer arrays of the nonempty dyads, sorted."""
        if not self.nonempty:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), e.copy()
        keys = sorted(self.nonempty)
        ij = np.array(keys, dtype=np.int64)
        y = np.array([self.nonempty[k] for k in keys], dtype=np.int64)
        return ij[:, 0], ij[:, 1], y

    @classmethod
    def from_arrays(cls, n, window, i, j, y):
        nonempty = {}
        for a, b, c in zip(np.asarray(i).tolist(), np.asarray(j).tolist(),
                           np.asarray(y).tolist()):
            if c > 0:
                nonempty[dyad_key(a, b)] = nonempty.get(dyad_key(a, b), 0) + c
        return cls(n, window, nonempty)

    def adjacency(self):
        """Symmetric CSR matrix of contact counts."""
        from scipy import sparse

        i, j, y = self.arrays()
        n = self.n_individuals
        m = sparse.coo_matrix((np.r_[y, y], (np.r_[i, j], np.r_[j, i])),
                              shape=(n, n))
        return m.tocsr()


def ingest_records(rows: Iterable, *, header: bool = True, known_ids=None):
    """Parse ``(caller, callee, week)`` rows into records with dense ids.

    ``rows`` may be an open text file, a path-free iterable of CSV lines, or
    an iterable of 3-tuples. String ids are remapped to ``0..N-1`` in order of
    first appearance. Self-contacts are dropped and counted.

    ``known_ids`` preloads the population: those ids take indices
    ``0..len-1`` in the given order, so individuals with no contacts are
    still counted. Ids met only in the records are appended after them.

    Returns
    -------
    records : list of InteractionRecord
    n : int
        Number of distinct individuals.
    info : dict
        ``ids`` (original id per dense index) and ``dropped_self``.
    """
    ids: dict[str, int] = {}
    for raw in known_ids or ():
        ids.setdefault(str(raw).strip(), len(ids))
    records = []
    dropped = 0
    seen_any = False

    def index(raw):
        key = str(raw).strip()
        if key not in ids:
            ids[key] = len(ids)
        return ids[key]

    it = iter(rows)
    first = True
    lineno = 0
    for row in _as_rows(it):
        lineno += 1
        if first and header and _looks_like_header(row):
            first = False
            continue
        first = False
        if len(row) == 0 or (len(row) == 1 and not str(row[0]).strip()):
            continue
        if len(row) != 3:
            raise DataError(f"line {lineno}: expected 3 fields, got {len(row)}")
        a_raw, b_raw, w_raw = row
        try:
            week = int(str(w_raw).strip())
        except ValueError:
            raise DataError(f"line {lineno}: bad week {w_raw!r}") from None
        if week < 0:
            raise DataError(f"line {lineno}: negative week {week}")
        if not str(a_raw).strip() or not str(b_raw).strip():
            raise DataError(f"line {lineno}: empty id")
        seen_any = True
        a, b = index(a_raw), index(b_raw)
        if a == b:
            dropped += 1
            continue
        records.append(InteractionRecord(a, b, week))
    if not seen_any:
        raise DataError("no contact records in input")
    if dropped:
        log.warning("dropped %d self-contact records", dropped)
    inverse = [None] * len(ids)
    for k, v in ids.items():
        inverse[v] = k
    return records, len(ids), {"ids": inverse, "dropped_self": dropped}


def _as_rows(it):
    for row in it:
        if isinstance(row, str):
            yield from csv.reader(io.StringIO(row))
        else:
            yield list(row)


def _looks_like_header(row) -> bool:
    return [str(c).strip() for c in row] == list(CSV_HEADER)


def read_records_csv(path, known_ids=None):
    with open(path, newline="", encoding="utf-8") as fh:
        return ingest_records(csv.reader(fh), known_ids=known_ids)


def write_records_csv(path, records, ids=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            a = r.a if ids is None else ids[r.a]
            b = r.b if ids is None else ids[r.b]
            w.writerow((a, b, r.week))


def build_dyad_table(records, n: int, window: ObservationWindow) -> DyadTable:
    """Count contacts per unordered dyad inside ``window``."""
    counts: dict[tuple[int, int], int] = {}
    for r in records:
        if not window.contains(r.week):
            raise DataError(
                f"record week {r.week} outside window "
                f"[{window.start_week}, {window.end_week})")
        if r.a >= n or r.b >= n:
            raise DataError(f"record ({r.a}, {r.b}) refers to id >= N={n}")
        key = dyad_key(r.a, r.b)
        counts[key] = counts.get(key, 0) + 1
    return DyadTable(n, window, counts)


def data_span(records) -> ObservationWindow:
    weeks = [r.week for r in records]
    if not weeks:
        raise DataError("no records")
    return ObservationWindow(0, max(weeks) + 1)


def split_windows(records, n: int, boundary: int, span: ObservationWindow = None):
    """Split records at ``boundary`` into calibration and holdout tables.

    The calibration window is ``[span.start, boundary)`` and the holdout
    window is ``[boundary, span.end)``.
    """
    span = span or data_span(records)
    if not span.start_week < boundary < span.end_week:
        raise DataError(
            f"boundary {boundary} not strictly inside "
            f"[{span.start_week}, {span.end_week})")
    calib_w = ObservationWindow(span.start_week, boundary)
    hold_w = ObservationWindow(boundary, span.end_week)
    calib = [r for r in records if r.week < boundary]
    hold = [r for r in records if r.week >= boundary]
    return (build_dyad_table(calib, n, calib_w),
            build_dyad_table(hold, n, hold_w))


def dyad_transition_counts(calib: DyadTable, holdout: DyadTable):
    """Counts of (nonempty->nonempty, nonempty->empty, empty->nonempty,
    empty->empty) dyads between two windows."""
    if calib.n_individuals != holdout.n_individuals:
        raise DataError("tables cover different populations")
    a = set(calib.nonempty)
    b = set(holdout.nonempty)
    both = len(a & b)
    lost = len(a - b)
    gained = len(b - a)
    rest = calib.n_dyads - both - lost - gained
    return both, lost, gained, rest
