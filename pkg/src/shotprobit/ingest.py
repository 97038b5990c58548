"""Shot-event ingestion: CSV parsing, exclusions, covariates and design matrices.

Input files follow a fixed comma-separated schema::

    shot_id,match_id,player_id,opponent_id,x,y,outcome,body_part,is_home,
    half,minute,is_stoppage,goal_diff,keeper_reach,is_penalty,is_own_goal

``keeper_reach``, ``is_penalty``, ``is_own_goal`` and ``minute`` may be
absent as columns; every other column is mandatory. Row order in the file is
taken as the chronological order of the shots.
"""
from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import DesignError, GeometryError, SchemaError
from .geometry import GeometryConfig, PitchLocation, positional_covariates

CSV_COLUMNS = (
    "shot_id", "match_id", "player_id", "opponent_id", "x", "y", "outcome",
    "body_part", "is_home", "half", "minute", "is_stoppage", "goal_diff",
    "keeper_reach", "is_penalty", "is_own_goal",
)
OPTIONAL_COLUMNS = frozenset({"keeper_reach", "is_penalty", "is_own_goal", "minute"})
MANDATORY_COLUMNS = tuple(c for c in CSV_COLUMNS if c not in OPTIONAL_COLUMNS)

BODY_PARTS = {"H": "header", "L": "left_foot", "R": "right_foot", "O": "other"}
BODY_CODES = {v: k for k, v in BODY_PARTS.items()}
GD_STATES = ("trailing", "level", "leading")

HEADER_COLUMNS = (
    "intercept", "log_distance", "cos_angle", "keeper_reach", "opponent_prop",
    "home", "first_half", "gd_level", "gd_leading", "stoppage",
)
OTHER_COLUMNS = HEADER_COLUMNS + ("left_foot", "right_foot")
POSITIONAL_COLUMNS = frozenset({"intercept", "log_distance", "cos_angle", "keeper_reach"})
SUBSET_TAGS = ("headers", "other_shots", "all")


@dataclass(frozen=True)
class ShotRecord:
    """One shot. Covariates are None when missing in the source data."""

    shot_id: str
    match_id: str
    player_id: str
    opponent_id: str
    location: PitchLocation | None
    outcome: int | None
    body_part: str | None
    is_home: int | None
    is_first_half: int | None
    is_stoppage: int | None
    goal_diff_state: str | None
    keeper_reach: float | None = None
    timestamp_order: int = 0
    minute: int | None = None
    is_penalty: int = 0
    is_own_goal: int = 0

    @property
    def is_header(self) -> bool:
        return self.body_part == "header"


@dataclass
class EncodedDesign:
    X: np.ndarray
    Y: np.ndarray
    coords: np.ndarray
    column_names: tuple
    subset_tag: str
    shot_ids: tuple = ()
    player_ids: tuple = ()
    match_ids: tuple = ()

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def locations(self) -> list:
        return [PitchLocation(float(x), float(y)) for x, y in self.coords]

    def take(self, index) -> "EncodedDesign":
        """Row subset, preserving column metadata."""
        index = np.asarray(index)
        pick = lambda seq: tuple(seq[i] for i in index) if seq else ()
        return EncodedDesign(
            self.X[index], self.Y[index], self.coords[index], self.column_names,
            self.subset_tag, pick(self.shot_ids), pick(self.player_ids),
            pick(self.match_ids),
        )


@dataclass
class Reject:
    line: int
    reason: str


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def _binary(text, name):
    if text == "":
        return None
    if text not in ("0", "1"):
        raise ValueError(f"{name} must be 0 or 1, got {text!r}")
    return int(text)


def _float(text, name):
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"{name} is not a number: {text!r}") from None
    if not np.isfinite(value):
        raise ValueError(f"{name} is not finite: {text!r}")
    return value


def _int(text, name):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"{name} is not an integer: {text!r}") from None


def _parse_row(row: dict, order: int) -> ShotRecord:
    ids = {}
    for key in ("shot_id", "match_id", "player_id", "opponent_id"):
        value = row[key].strip()
        if not value:
            raise ValueError(f"empty {key}")
        ids[key] = value

    x = _float(row["x"].strip(), "x")
    y = _float(row["y"].strip(), "y")
    location = None
    if x is not None and y is not None:
        if y < 0:
            raise ValueError(f"y must be >= 0, got {y}")
        location = PitchLocation(x, y)

    code = row["body_part"].strip().upper()
    if code and code not in BODY_PARTS:
        raise ValueError(f"unknown body_part {row['body_part']!r}")

    half = _int(row["half"].strip(), "half")
    if half is not None and half not in (1, 2):
        raise ValueError(f"half must be 1 or 2, got {half}")

    gd = _int(row["goal_diff"].strip(), "goal_diff")
    gd_state = None if gd is None else GD_STATES[int(np.sign(gd)) + 1]

    reach = _float(row.get("keeper_reach", "").strip(), "keeper_reach")
    if reach is not None and reach < 0:
        raise ValueError(f"keeper_reach must be >= 0, got {reach}")

    return ShotRecord(
        location=location,
        outcome=_binary(row["outcome"].strip(), "outcome"),
        body_part=BODY_PARTS[code] if code else None,
        is_home=_binary(row["is_home"].strip(), "is_home"),
        is_first_half=None if half is None else int(half == 1),
        is_stoppage=_binary(row["is_stoppage"].strip(), "is_stoppage"),
        goal_diff_state=gd_state,
        keeper_reach=reach,
        timestamp_order=order,
        minute=_int(row.get("minute", "").strip(), "minute"),
        is_penalty=_binary(row.get("is_penalty", "").strip(), "is_penalty") or 0,
        is_own_goal=_binary(row.get("is_own_goal", "").strip(), "is_own_goal") or 0,
        **ids,
    )


def parse_shots(source) -> tuple[list[ShotRecord], list[Reject]]:
    """Parse a shot CSV.

    Parameters
    ----------
    source : path-like or text stream

    Returns
    -------
    records : list of ShotRecord
        One per valid row, in file order.
    rejects : list of Reject
        Rows that could not be parsed, with 1-based file line numbers
        (the header is line 1).

    Raises
    ------
    SchemaError
        If the header row lacks a mandatory column.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return parse_shots(fh)

    reader = csv.DictReader(source)
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in MANDATORY_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing mandatory column(s): {', '.join(missing)}")
    reader.fieldnames = header

    records, rejects = [], []
    seen = set()
    for order, row in enumerate(reader):
        line = reader.line_num
        if None in row or any(v is None for v in row.values()):
            rejects.append(Reject(line, "wrong number of fields"))
            continue
        row = {k: v for k, v in row.items()}
        for opt in OPTIONAL_COLUMNS:
            row.setdefault(opt, "")
        try:
            rec = _parse_row(row, order)
        except (ValueError, GeometryError) as exc:
            rejects.append(Reject(line, str(exc)))
            continue
        if rec.shot_id in seen:
            rejects.append(Reject(line, f"duplicate shot_id {rec.shot_id}"))
            continue
        seen.add(rec.shot_id)
        records.append(rec)
    return records, rejects


def write_rejects(rejects: Sequence[Reject], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line", "reason"])
        for r in rejects:
            w.writerow([r.line, r.reason])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_shots(records: Iterable[ShotRecord], path_or_stream) -> None:
    """Write records in the input schema (exact float round-trip)."""
    if isinstance(path_or_stream, (str, os.PathLike)):
        with open(path_or_stream, "w", newline="", encoding="utf-8") as fh:
            write_shots(records, fh)
        return
    gd_code = {"trailing": -1, "level": 0, "leading": 1}
    w = csv.writer(path_or_stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        loc = r.location
        w.writerow([
            r.shot_id, r.match_id, r.player_id, r.opponent_id,
            _fmt(None if loc is None else float(loc.x)),
            _fmt(None if loc is None else float(loc.y)),
            _fmt(r.outcome),
            "" if r.body_part is None else BODY_CODES[r.body_part],
            _fmt(r.is_home),
            "" if r.is_first_half is None else (1 if r.is_first_half else 2),
            _fmt(r.minute), _fmt(r.is_stoppage),
            "" if r.goal_diff_state is None else gd_code[r.goal_diff_state],
            _fmt(None if r.keeper_reach is None else float(r.keeper_reach)),
            r.is_penalty, r.is_own_goal,
        ])


def shots_to_csv_text(records: Iterable[ShotRecord]) -> str:
    buf = io.StringIO()
    write_shots(records, buf)
    return buf.getvalue()


# --------------------------------------------------------------------------
# exclusions and covariates
# --------------------------------------------------------------------------

_REQUIRED_FIELDS = (
    "location", "outcome", "body_part", "is_home", "is_first_half",
    "is_stoppage", "goal_diff_state",
)


def apply_exclusions(records, cfg: GeometryConfig = GeometryConfig()):
    """Split records into ``(kept, dropped)``; ``dropped`` holds ``(record, reason)``."""
    kept, dropped = [], []
    for rec in records:
        reason = None
        if rec.is_penalty:
            reason = "penalty"
        elif rec.is_own_goal:
            reason = "own goal"
        else:
            for name in _REQUIRED_FIELDS:
                if getattr(rec, name) is None:
                    reason = f"missing {name}"
                    break
        if reason is None:
            if rec.location.y > cfg.half_line:
                reason = "beyond half line"
            elif rec.location.x == 0 and rec.location.y == 0:
                reason = "zero distance"
        if reason is None:
            kept.append(rec)
        else:
            dropped.append((rec, reason))
    return kept, dropped


def opponent_proportion(records, as_of: int, opponent_id: str, default: float = 0.0) -> float:
    """Conversion rate of shots against ``opponent_id`` taken strictly before ``as_of``."""
    shots = goals = 0
    for rec in records:
        if rec.timestamp_order < as_of and rec.opponent_id == opponent_id:
            shots += 1
            goals += rec.outcome
    return goals / shots if shots else default


def opponent_proportions(records, history=None, default="zero") -> np.ndarray:
    """Opponent conversion rate for every record, from shots earlier in ``history``.

    ``default`` controls the value used when no earlier shot against the same
    opponent exists: ``"zero"``, ``"league_mean"`` (running conversion rate of
    all earlier shots, 0 before the first shot) or a number.
    """
    history = records if history is None else history
    ordered = sorted(history, key=lambda r: r.timestamp_order)
    # (order, opponent) -> rate before that shot
    shots = defaultdict(int)
    goals = defaultdict(int)
    total_shots = total_goals = 0
    before = {}
    for rec in ordered:
        key = rec.opponent_id
        if shots[key]:
            value = goals[key] / shots[key]
        elif default == "zero":
            value = 0.0
        elif default == "league_mean":
            value = total_goals / total_shots if total_shots else 0.0
        else:
            value = float(default)
        before[rec.shot_id] = value
        shots[key] += 1
        goals[key] += rec.outcome
        total_shots += 1
        total_goals += rec.outcome

    out = np.empty(len(records))
    for i, rec in enumerate(records):
        if rec.shot_id in before:
            out[i] = before[rec.shot_id]
        else:
            out[i] = _rate_before(ordered, rec, default)
    return out


def _rate_before(ordered, rec, default):
    earlier = [r for r in ordered if r.timestamp_order < rec.timestamp_order]
    mine = [r for r in earlier if r.opponent_id == rec.opponent_id]
    if mine:
        return sum(r.outcome for r in mine) / len(mine)
    if default == "zero":
        return 0.0
    if default == "league_mean":
        return sum(r.outcome for r in earlier) / len(earlier) if earlier else 0.0
    return float(default)


def feature_columns(records, history=None, cfg: GeometryConfig = GeometryConfig(),
                    opponent_default="zero") -> dict:
    """Every candidate design column, keyed by column name."""
    n = len(records)
    xs = np.array([r.location.x for r in records], dtype=float)
    ys = np.array([r.location.y for r in records], dtype=float)
    reach = np.array(
        [np.nan if r.keeper_reach is None else r.keeper_reach for r in records], dtype=float
    )
    logd, cosa, reach = positional_covariates(xs, ys, reach, cfg)
    as_float = lambda f: np.array([f(r) for r in records], dtype=float)
    return {
        "intercept": np.ones(n),
        "log_distance": logd,
        "cos_angle": cosa,
        "keeper_reach": reach,
        "opponent_prop": opponent_proportions(records, history, opponent_default),
        "home": as_float(lambda r: r.is_home),
        "first_half": as_float(lambda r: r.is_first_half),
        "gd_level": as_float(lambda r: r.goal_diff_state == "level"),
        "gd_leading": as_float(lambda r: r.goal_diff_state == "leading"),
        "stoppage": as_float(lambda r: r.is_stoppage),
        "left_foot": as_float(lambda r: r.body_part == "left_foot"),
        "right_foot": as_float(lambda r: r.body_part == "right_foot"),
        "header": as_float(lambda r: r.body_part == "header"),
    }


def default_columns(subset_tag: str) -> tuple:
    if subset_tag == "other_shots":
        return OTHER_COLUMNS
    if subset_tag in ("headers", "all"):
        return HEADER_COLUMNS
    raise ValueError(f"unknown subset tag {subset_tag!r}")


def select_subset(records, subset_tag: str) -> list:
    if subset_tag == "headers":
        return [r for r in records if r.is_header]
    if subset_tag == "other_shots":
        return [r for r in records if not r.is_header]
    if subset_tag == "all":
        return list(records)
    raise ValueError(f"unknown subset tag {subset_tag!r}")


def build_design(records, subset_tag: str, history=None, columns=None,
                 cfg: GeometryConfig = GeometryConfig(),
                 opponent_default="zero") -> EncodedDesign:
    """Assemble the design matrix for one sub-model.

    Parameters
    ----------
    records : list of ShotRecord
        Exclusion-filtered, duplicate-resolved records. Rows not belonging to
        ``subset_tag`` are ignored.
    subset_tag : {"headers", "other_shots", "all"}
    history : list of ShotRecord, optional
        Shots used for the running opponent conversion rate. Defaults to
        ``records``; pass the full kept data set so that header and non-header
        designs see the same history.
    columns : sequence of str, optional
        Column subset (must start with ``"intercept"``). Defaults to the
        10-column header model or the 12-column model for other shots.
    """
    subset = select_subset(records, subset_tag)
    if not subset:
        raise DesignError(f"subset {subset_tag!r} is empty")
    columns = tuple(columns) if columns is not None else default_columns(subset_tag)
    if columns[0] != "intercept":
        raise DesignError("column 0 must be the intercept")
    history = records if history is None else history
    feats = feature_columns(subset, history, cfg, opponent_default)
    unknown = [c for c in columns if c not in feats]
    if unknown:
        raise DesignError(f"unknown design column(s): {unknown}")
    X = np.column_stack([feats[c] for c in columns])
    return EncodedDesign(
        X=X,
        Y=np.array([r.outcome for r in subset], dtype=float),
        coords=np.array([[r.location.x, r.location.y] for r in subset], dtype=float),
        column_names=columns,
        subset_tag=subset_tag,
        shot_ids=tuple(r.shot_id for r in subset),
        player_ids=tuple(r.player_id for r in subset),
        match_ids=tuple(r.match_id for r in subset),
    )


def design_row(location: PitchLocation, covariates: dict, columns: Sequence[str],
               cfg: GeometryConfig = GeometryConfig()) -> np.ndarray:
    """Covariate row for a single new shot.

    Positional columns are computed from ``location``; ``keeper_reach`` is
    taken from ``covariates`` when present. Every other column must be
    supplied in ``covariates``.
    """
    reach = covariates.get("keeper_reach")
    logd, cosa, kr = positional_covariates(
        [location.x], [location.y], None if reach is None else [reach], cfg
    )
    positional = {"intercept": 1.0, "log_distance": logd[0], "cos_angle": cosa[0],
                  "keeper_reach": kr[0]}
    row = []
    for c in columns:
        if c in positional:
            row.append(positional[c])
        elif c in covariates:
            row.append(float(covariates[c]))
        else:
            raise DesignError(f"covariate {c!r} required by the fitted design is missing")
    return np.array(row)


# --------------------------------------------------------------------------
# duplicates
# --------------------------------------------------------------------------

def duplicate_groups(records) -> list[list[int]]:
    """Index groups of records sharing identical coordinates (size >= 2)."""
    groups = defaultdict(list)
    for i, r in enumerate(records):
        groups[(r.location.x, r.location.y)].append(i)
    return [g for _, g in sorted(groups.items()) if len(g) > 1]


FitPredict = Callable[[list, list], np.ndarray]


def resolve_duplicates(records, mode: str = "random", seed: int = 0,
                       fit_context: FitPredict | None = None) -> list:
    """Keep one shot per exactly coincident location.

    ``mode="random"`` keeps a uniformly chosen member of each group.
    ``mode="refit"`` tries every member of a group in turn: the model is
    trained (via ``fit_context(train, held_out) -> p_hat``) on the data with
    the other members removed, and the member whose fit gives the smallest
    squared prediction error on the removed members is kept. Groups are
    processed in coordinate order; unresolved groups are represented by their
    random pick while another group is evaluated.

    Output preserves input order.
    """
    if mode not in ("random", "refit"):
        raise ValueError(f"unknown duplicate mode {mode!r}")
    if mode == "refit" and fit_context is None:
        raise ValueError("refit duplicate resolution needs a fit_context")
    groups = duplicate_groups(records)
    if not groups:
        return list(records)

    rng = np.random.default_rng(seed)
    chosen = [g[int(rng.integers(len(g)))] for g in groups]

    if mode == "refit":
        for gi, group in enumerate(groups):
            errors = []
            for cand in group:
                keep = _kept_indices(len(records), groups, chosen, gi, cand)
                train = [records[i] for i in keep]
                held = [records[i] for i in group if i != cand]
                p_hat = np.asarray(fit_context(train, held), dtype=float)
                y = np.array([r.outcome for r in held], dtype=float)
                errors.append(float(np.sum((y - p_hat) ** 2)))
            chosen[gi] = group[int(np.argmin(errors))]

    keep = _kept_indices(len(records), groups, chosen)
    return [records[i] for i in keep]


def _kept_indices(n, groups, chosen, override_group=None, override=None):
    drop = set()
    for gi, (group, pick) in enumerate(zip(groups, chosen)):
        if gi == override_group:
            pick = override
        drop.update(i for i in group if i != pick)
    return [i for i in range(n) if i not in drop]


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------

@dataclass
class FactorRow:
    factor: str
    level: str
    goals: int
    misses: int
    shots: int
    rate: float
    share: float


_FACTORS = (
    ("venue", (("Home", lambda r: r.is_home == 1), ("Away", lambda r: r.is_home == 0))),
    ("half", (("First half", lambda r: r.is_first_half == 1),
              ("Second half", lambda r: r.is_first_half == 0))),
    ("body_part", (("Header", lambda r: r.body_part == "header"),
                   ("Left Foot", lambda r: r.body_part == "left_foot"),
                   ("Right Foot", lambda r: r.body_part == "right_foot"),
                   ("Other", lambda r: r.body_part == "other"))),
    ("goal_diff", (("Leading", lambda r: r.goal_diff_state == "leading"),
                   ("Scores level", lambda r: r.goal_diff_state == "level"),
                   ("Trailing", lambda r: r.goal_diff_state == "trailing"))),
    ("time", (("Regulation time", lambda r: r.is_stoppage == 0),
              ("Stoppage time", lambda r: r.is_stoppage == 1))),
)


def factor_summary(records) -> list[FactorRow]:
    """Shots, goals, conversion rate and share of total per factor level."""
    total = len(records)
    rows = []
    for factor, levels in _FACTORS:
        for level, pred in levels:
            sel = [r for r in records if pred(r)]
            goals = sum(r.outcome for r in sel)
            n = len(sel)
            rows.append(FactorRow(
                factor, level, goals, n - goals, n,
                goals / n if n else float("nan"),
                n / total if total else float("nan"),
            ))
    return rows
