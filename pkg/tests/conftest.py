import io

import numpy as np
import pytest

from shotprobit.geometry import PitchLocation
from shotprobit.ingest import CSV_COLUMNS, ShotRecord

HEADER = ",".join(CSV_COLUMNS)


def make_record(i=0, x=1.0, y=12.0, outcome=0, **kw):
    base = dict(
        shot_id=f"s{i}", match_id=f"m{i // 3}", player_id=f"p{i % 4}", opponent_id=f"t{i % 2}",
        location=PitchLocation(float(x), float(y)), outcome=outcome, body_part="right_foot",
        is_home=1, is_first_half=1, is_stoppage=0, goal_diff_state="level",
        keeper_reach=None, timestamp_order=i,
    )
    base.update(kw)
    return ShotRecord(**base)


def csv_row(i, x=1.0, y=12.0, outcome=0, body="R", **kw):
    vals = dict(shot_id=f"s{i}", match_id="m1", player_id="p1", opponent_id="t1", x=x, y=y,
                outcome=outcome, body_part=body, is_home=1, half=1, minute=10, is_stoppage=0,
                goal_diff=0, keeper_reach="", is_penalty=0, is_own_goal=0)
    vals.update(kw)
    return ",".join(str(vals[c]) for c in CSV_COLUMNS)


def csv_text(rows, header=HEADER):
    return io.StringIO(header + "\n" + "\n".join(rows) + "\n")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
