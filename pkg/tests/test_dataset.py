import json
import math
from datetime import datetime, timezone

import pytest

from fundlens.dataset import (
    BaselineFeatures,
    ProjectRecord,
    count_visuals,
    country_groups,
    derive_baseline,
    derive_outcome,
    ingest,
)


def make_record(**overrides):
    base = dict(
        id="p1",
        goal_usd=1000.0,
        pledged_usd=500.0,
        staff_pick=False,
        country="US",
        launched_at=datetime(2017, 3, 1, tzinfo=timezone.utc),
        deadline=datetime(2017, 3, 31, tzinfo=timezone.utc),
        blurb="a blurb",
        full_text="the full text",
    )
    base.update(overrides)
    return ProjectRecord(**base)


def jsonl_row(**overrides):
    row = dict(
        id="p1",
        goal_usd=1000,
        pledged_usd=500,
        staff_pick=False,
        country="US",
        launched_at="2017-03-01T00:00:00Z",
        deadline="2017-03-31T00:00:00Z",
        blurb="b",
        full_text="t",
    )
    row.update(overrides)
    return row


class TestIngest:
    def test_minimal_jsonl_row(self, tmp_path):
        f = tmp_path / "data.jsonl"
        f.write_text(json.dumps(jsonl_row()) + "\n")
        result = ingest(f, "jsonl")
        assert len(result.records) == 1
        assert result.rejects == []
        rec = result.records[0]
        assert rec.description_html is None
        assert rec.n_images is None

    def test_nonpositive_duration_rejected(self, tmp_path):
        f = tmp_path / "data.jsonl"
        f.write_text(
            json.dumps(jsonl_row(deadline="2017-03-01T00:00:00Z")) + "\n"
        )
        result = ingest(f, "jsonl")
        assert result.records == []
        assert len(result.rejects) == 1
        assert "nonpositive duration" in result.rejects[0].reason

    def test_three_valid_two_invalid(self, tmp_path):
        rows = [
            jsonl_row(id="a"),
            jsonl_row(id="b", goal_usd=-5),
            jsonl_row(id="c"),
            jsonl_row(id="d", deadline="2016-01-01T00:00:00Z"),
            jsonl_row(id="e"),
        ]
        f = tmp_path / "data.jsonl"
        f.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        result = ingest(f, "jsonl")
        assert [r.id for r in result.records] == ["a", "c", "e"]
        assert [r.row for r in result.rejects] == [2, 4]

    def test_row_conservation(self, tmp_path):
        rows = [jsonl_row(id=f"p{i}", goal_usd=(i - 2) * 100) for i in range(6)]
        f = tmp_path / "data.jsonl"
        f.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        result = ingest(f, "jsonl")
        assert len(result.records) + len(result.rejects) == 6

    def test_missing_required_column_hard_error(self, tmp_path):
        f = tmp_path / "data.csv"
        f.write_text("id,goal_usd\n1,100\n")
        with pytest.raises(ValueError, match="missing required columns"):
            ingest(f, "csv")

    def test_csv_round(self, tmp_path):
        f = tmp_path / "data.csv"
        f.write_text(
            "id,goal_usd,pledged_usd,staff_pick,country,launched_at,deadline,"
            "blurb,full_text,n_backers,liwc_tone\n"
            'k1,250.5,10,true,us,2015-06-01T12:00:00Z,2015-07-01T12:00:00Z,'
            "hi,text body,42,55.1\n"
        )
        result = ingest(f, "csv")
        rec = result.records[0]
        assert rec.country == "US"
        assert rec.staff_pick is True
        assert rec.n_backers == 42
        assert rec.text_passthrough == {"liwc_tone": 55.1}


class TestCountVisuals:
    def test_explicit_counts_pass_through(self):
        rec = make_record(n_images=7, n_videos=2, description_html="<img><img>")
        assert count_visuals(rec) == (7, 2)

    def test_html_counting(self):
        html = '<p>x</p><img src="a.png"><IMG src="b.png"><video controls></video>'
        rec = make_record(description_html=html)
        assert count_visuals(rec) == (2, 1)

    def test_comment_ignored(self):
        html = '<!-- <img src="hidden.png"> --><img src="real.png">'
        rec = make_record(description_html=html)
        assert count_visuals(rec) == (1, 0)

    def test_empty_html(self):
        rec = make_record(description_html="")
        # empty html string counts as present-but-empty markup
        rec = make_record(description_html="<div></div>")
        assert count_visuals(rec) == (0, 0)

    def test_embedded_players_count_as_videos(self):
        html = (
            '<iframe src="https://www.youtube.com/embed/xyz"></iframe>'
            '<iframe src="https://player.vimeo.com/video/1"></iframe>'
            '<iframe src="https://example.com/embed/nope"></iframe>'
        )
        rec = make_record(description_html=html)
        assert count_visuals(rec) == (0, 2)

    def test_no_source_flagged_missing(self):
        rec = make_record()
        assert count_visuals(rec) == (None, None)


class TestDeriveOutcome:
    def test_zero_pledged(self):
        assert derive_outcome(make_record(pledged_usd=0.0)) == 0.0

    def test_e_minus_one(self):
        assert derive_outcome(make_record(pledged_usd=math.e - 1)) == pytest.approx(1.0)

    def test_monotone(self):
        a = derive_outcome(make_record(pledged_usd=100))
        b = derive_outcome(make_record(pledged_usd=200))
        assert b > a


class TestDeriveBaseline:
    def test_jan_first(self):
        rec = make_record(launched_at=datetime(2016, 1, 1, tzinfo=timezone.utc))
        assert derive_baseline(rec).day_of_year == 1

    def test_unit_goal(self):
        assert derive_baseline(make_record(goal_usd=1.0)).log_goal == 0.0

    def test_duration_calendar_arithmetic(self):
        feats = derive_baseline(make_record())
        assert feats.duration_days == 30
        assert feats.year == 2017
        assert feats.day_of_year == 60  # 2017-03-01

    def test_partial_day_rounds_up(self):
        rec = make_record(
            launched_at=datetime(2017, 3, 1, 12, tzinfo=timezone.utc),
            deadline=datetime(2017, 3, 31, tzinfo=timezone.utc),
        )
        assert derive_baseline(rec).duration_days == 30

    def test_country_pooling(self):
        records = [make_record(id=f"p{i}", country="US") for i in range(99)]
        records.append(make_record(id="rare", country="XX"))
        groups = country_groups(records)
        assert groups == ["US", "XX"]  # 1/100 = 1% meets the cutoff
        records.append(make_record(id="rare2", country="US"))
        groups = country_groups(records)  # XX now 1/101 < 1%
        assert groups == ["US"]
        feats = derive_baseline(records[-2], frequent_countries=groups)
        assert feats.country == "other"
