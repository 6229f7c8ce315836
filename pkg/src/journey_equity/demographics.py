"""Rider-survey demographics and their attachment to stops.

Surveys arrive pre-aggregated: rail by station (stop id), bus by route.
A bus stop inherits the respondent-weighted mean of every surveyed route
serving it; a stop with its own station row always uses that row.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .errors import IngestionError, NoDemographics
from .journeys import Reject

__all__ = [
    "PURPOSES",
    "DemographicShares",
    "SurveyTable",
    "load_survey",
    "write_survey",
    "stop_shares",
    "materialize_stop_shares",
    "classify_income",
    "LOW_INCOME_THRESHOLD_DOLLARS",
]

LOW_INCOME_THRESHOLD_DOLLARS = 43_500

PURPOSES = ("home_work", "home_other", "other_nonhome", "home_social", "home_school")

# survey CSV column for each purpose key
PURPOSE_COLUMNS = {
    "home_work": "p_home_work",
    "home_other": "p_home_other",
    "other_nonhome": "p_other",
    "home_social": "p_home_social",
    "home_school": "p_home_school",
}

SHARE_TOL = 1e-6


@dataclass(frozen=True)
class DemographicShares:
    low_income_share: float
    purpose_shares: Mapping[str, float]
    respondent_count: float

    def __post_init__(self):
        object.__setattr__(self, "purpose_shares", MappingProxyType(dict(self.purpose_shares)))

    def __hash__(self):
        return hash((self.low_income_share, tuple(sorted(self.purpose_shares.items())), self.respondent_count))

    @classmethod
    def pooled(cls, rows):
        """Respondent-weighted mean of several rows."""
        rows = list(rows)
        total = math.fsum(r.respondent_count for r in rows)
        w = [r.respondent_count / total for r in rows]
        return cls(
            low_income_share=math.fsum(p * r.low_income_share for p, r in zip(w, rows)),
            purpose_shares={
                k: math.fsum(p * r.purpose_shares[k] for p, r in zip(w, rows)) for k in PURPOSES
            },
            respondent_count=total,
        )


@dataclass(frozen=True)
class SurveyTable:
    rail_rows: Mapping[str, DemographicShares]
    bus_rows: Mapping[str, DemographicShares]
    low_income_threshold_dollars: float = LOW_INCOME_THRESHOLD_DOLLARS
    rejects: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rail_rows", MappingProxyType(dict(self.rail_rows)))
        object.__setattr__(self, "bus_rows", MappingProxyType(dict(self.bus_rows)))


def _parse_row(row, key_col):
    key = row.get(key_col, "")
    try:
        respondents = float(row["respondents"])
        low = float(row["low_income_share"])
        purposes = {k: float(row[col]) for k, col in PURPOSE_COLUMNS.items()}
    except (KeyError, ValueError) as exc:
        return Reject(key, "unparseable", str(exc))
    if not key:
        return Reject(key, "missing_key")
    if not respondents >= 1:
        return Reject(key, "respondents", row["respondents"])
    if not all(0.0 <= v <= 1.0 for v in (low, *purposes.values())):
        return Reject(key, "share_range")
    if abs(math.fsum(purposes.values()) - 1.0) > SHARE_TOL:
        return Reject(key, "purpose_sum", repr(math.fsum(purposes.values())))
    return key, DemographicShares(low, purposes, respondents)


def _load_file(path, key_col):
    columns = (key_col, "respondents", "low_income_share", *PURPOSE_COLUMNS.values())
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise IngestionError(f"cannot open survey file: {exc}", path=path) from exc
    rows, rejects = {}, []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return rows, rejects
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in columns if c not in header]
        if missing:
            raise IngestionError(f"survey file header lacks {missing}", path=path)
        reader.fieldnames = header
        for raw in reader:
            out = _parse_row({k: (v or "").strip() for k, v in raw.items() if k is not None}, key_col)
            if isinstance(out, Reject):
                rejects.append(out)
            elif out[0] in rows:
                rejects.append(Reject(out[0], "duplicate_key"))
            else:
                rows[out[0]] = out[1]
    return rows, rejects


def load_survey(rail_path, bus_path, low_income_threshold_dollars=LOW_INCOME_THRESHOLD_DOLLARS):
    """Load station-level (rail) and route-level (bus) survey aggregates.

    Invalid rows are skipped and kept on ``SurveyTable.rejects`` with reasons
    ``share_range``, ``purpose_sum``, ``respondents``, ``unparseable``,
    ``missing_key`` or ``duplicate_key``.  An empty file yields no rows.
    """
    rail, rail_rej = _load_file(rail_path, "stop_id")
    bus, bus_rej = _load_file(bus_path, "route_id")
    return SurveyTable(rail, bus, low_income_threshold_dollars, tuple(rail_rej + bus_rej))


def write_survey(rows, path, key_col):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([key_col, "respondents", "low_income_share", *PURPOSE_COLUMNS.values()])
        for key, s in rows.items():
            resp = s.respondent_count
            w.writerow(
                [key, int(resp) if float(resp).is_integer() else repr(resp), repr(s.low_income_share)]
                + [repr(s.purpose_shares[k]) for k in PURPOSES]
            )


def stop_shares(survey, network, stop_id):
    """Demographic shares for one stop.

    A station row wins outright; otherwise the respondent-weighted mean over
    every surveyed route with a trip serving the stop.  Raises
    :class:`NoDemographics` when neither exists.
    """
    if stop_id in survey.rail_rows:
        return survey.rail_rows[stop_id]
    routes = sorted(r for r in network.routes_serving(stop_id) if r in survey.bus_rows)
    if not routes:
        raise NoDemographics(f"no survey data covers stop {stop_id!r}")
    if len(routes) == 1:
        return survey.bus_rows[routes[0]]
    return DemographicShares.pooled(survey.bus_rows[r] for r in routes)


def materialize_stop_shares(survey, network, stop_ids=None):
    """Resolve shares for many stops at once.

    Returns ``(shares, missing)``: a stop-id mapping and the sorted list of
    stops with no demographics.
    """
    shares, missing = {}, []
    for sid in sorted(network.stops if stop_ids is None else stop_ids):
        try:
            shares[sid] = stop_shares(survey, network, sid)
        except NoDemographics:
            missing.append(sid)
    return shares, missing


def classify_income(low_income_share, low_cut=0.25, high_cut=0.50):
    """Three-way income label from a low-income ridership share.

    Strictly below ``low_cut`` is ``high_income``, strictly above
    ``high_cut`` is ``low_income``, anything in between (cuts included) is
    ``middle``.
    """
    if not 0.0 <= low_cut < high_cut <= 1.0:
        raise ValueError(f"need 0 <= low_cut < high_cut <= 1, got {low_cut}, {high_cut}")
    if low_income_share < low_cut:
        return "high_income"
    if low_income_share > high_cut:
        return "low_income"
    return "middle"
