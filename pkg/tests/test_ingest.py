import io
import json
from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evalplan.category_agg import BENIGN, MALWARE, CategoryStats, NormalizationError
from evalplan.ingest import (
    CountError,
    DateError,
    DuplicateIdError,
    HeaderError,
    LabelError,
    MalformedRowError,
    ProfileError,
    ScoreError,
    format_date,
    parse_date,
    parse_manifest,
    parse_profile,
    parse_scores,
    parse_stats,
    write_manifest,
    write_profile,
    write_scores,
    write_stats,
)
from evalplan.roc_eval import ScoredSample
from evalplan.timedelay_sim import ManifestEntry


def text(s):
    return io.StringIO(s)


class TestScores:
    def test_two_rows(self):
        rows = parse_scores(text("sample_id,label,score\na,1,0.9\nb,0,0.1\n"))
        assert rows == [ScoredSample("a", 1, 0.9), ScoredSample("b", 0, 0.1)]

    def test_crlf_and_optional_columns(self):
        src = "sample_id,label,score,category,first_seen\r\na,1,0.5,trojan,2016-04-11\r\nb,0,-2,,\r\n"
        a, b = parse_scores(text(src))
        assert a.category == "trojan" and a.first_seen == date(2016, 4, 11)
        assert b.category is None and b.first_seen is None

    def test_negate(self):
        (s,) = parse_scores(text("sample_id,label,score\na,1,0.25\n"), negate=True)
        assert s.score == -0.25

    def test_date_round_trip(self):
        (s,) = parse_scores(text("sample_id,label,score,first_seen\na,1,1,2016-04-11\n"))
        assert format_date(s.first_seen) == "2016-04-11"

    @pytest.mark.parametrize(
        "body,exc,line,field",
        [
            ("a,2,0.9\n", LabelError, 2, "label"),
            ("a,1,0.9\nb,x,0.1\n", LabelError, 3, "label"),
            ("a,1,nan\n", ScoreError, 2, "score"),
            ("a,1,inf\n", ScoreError, 2, "score"),
            ("a,1,abc\n", ScoreError, 2, "score"),
            ("a,1,1\na,0,1\n", DuplicateIdError, 3, "sample_id"),
            ("a,1\n", MalformedRowError, 2, None),
            (",1,1\n", MalformedRowError, 2, "sample_id"),
        ],
    )
    def test_row_errors(self, body, exc, line, field):
        with pytest.raises(exc) as info:
            parse_scores(text("sample_id,label,score\n" + body))
        assert info.value.line == line
        assert info.value.field == field
        assert f"line {line}" in str(info.value)

    def test_bad_date(self):
        with pytest.raises(DateError) as info:
            parse_scores(text("sample_id,label,score,first_seen\na,1,1,2016-4-11\n"))
        assert info.value.field == "first_seen"

    @pytest.mark.parametrize(
        "header",
        ["", "id,label,score\n", "sample_id,score,label\n", "sample_id,label,score,first_seen,category\n"],
    )
    def test_header_errors(self, header):
        with pytest.raises(HeaderError):
            parse_scores(text(header + "a,1,1\n"))

    def test_blank_lines_skipped(self):
        assert len(parse_scores(text("sample_id,label,score\n\na,1,1\n\n"))) == 1

    def test_file_path(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("\ufeffsample_id,label,score\na,1,1\n", encoding="utf-8")
        assert parse_scores(path) == [ScoredSample("a", 1, 1.0)]

    def test_canonical_round_trip(self):
        src = "sample_id,label,score,category\na,1,0.9,x\nb,0,-1e-05,\n"
        assert write_scores(parse_scores(text(src))) == src

    def test_large_file(self):
        rows = "".join(f"s{i},{i % 2},{i / 7!r}\n" for i in range(200_000))
        parsed = parse_scores(text("sample_id,label,score\n" + rows))
        assert len(parsed) == 200_000
        assert parsed[-1].score == 199_999 / 7


score_rows = st.lists(
    st.tuples(
        st.integers(0, 1),
        st.floats(allow_nan=False, allow_infinity=False),
        st.one_of(st.none(), st.sampled_from(["a", "b c", "x,y", 'q"t'])),
        st.one_of(st.none(), st.dates(date(1990, 1, 1), date(2100, 1, 1))),
    ),
    max_size=30,
)


@settings(max_examples=100, deadline=None)
@given(score_rows)
def test_score_round_trip(rows):
    samples = [ScoredSample(f"id{i}", y, s, c, d) for i, (y, s, c, d) in enumerate(rows)]
    out = write_scores(samples)
    assert parse_scores(text(out)) == samples
    assert write_scores(parse_scores(text(out))) == out


@settings(max_examples=50, deadline=None)
@given(score_rows, st.randoms(use_true_random=False))
def test_row_order_irrelevant(rows, rnd):
    samples = [ScoredSample(f"id{i}", y, s, c, d) for i, (y, s, c, d) in enumerate(rows)]
    shuffled = samples[:]
    rnd.shuffle(shuffled)
    parsed = parse_scores(text(write_scores(shuffled)))
    assert sorted(parsed, key=lambda s: s.sample_id) == sorted(samples, key=lambda s: s.sample_id)


@settings(max_examples=200, deadline=None)
@given(st.dates(date(1, 1, 1), date(9999, 12, 31)))
def test_date_round_trip(d):
    assert parse_date(format_date(d)) == d
    assert format_date(parse_date(format_date(d))) == format_date(d)


@pytest.mark.parametrize("bad", ["2016-4-11", "2016/04/11", "20160411", "2016-02-30", " 2016-04-11"])
def test_strict_dates(bad):
    with pytest.raises(ValueError):
        parse_date(bad)


class TestManifest:
    def test_parse(self):
        src = (
            "sample_id,first_seen,label,label_date,category,score\n"
            "a,2016-04-11,1,2016-05-20,trojan,0.7\n"
            "b,2016-04-12,0,,,\n"
        )
        a, b = parse_manifest(text(src))
        assert a == ManifestEntry("a", date(2016, 4, 11), 1, date(2016, 5, 20), "trojan", 0.7)
        assert b == ManifestEntry("b", date(2016, 4, 12), 0)

    def test_label_before_seen(self):
        src = "sample_id,first_seen,label,label_date\na,2016-04-11,1,2016-04-10\n"
        with pytest.raises(DateError) as info:
            parse_manifest(text(src))
        assert info.value.field == "label_date"

    def test_missing_first_seen(self):
        with pytest.raises(DateError):
            parse_manifest(text("sample_id,first_seen,label\na,,1\n"))

    def test_round_trip(self):
        entries = [
            ManifestEntry("a", date(2016, 1, 1), 1, date(2016, 2, 1), None, 0.5),
            ManifestEntry("b", date(2016, 1, 2), 0, None, "adware", None),
        ]
        out = write_manifest(entries)
        assert parse_manifest(text(out)) == entries
        assert write_manifest(parse_manifest(text(out))) == out


class TestStats:
    def test_parse(self):
        src = "category,class,n,detected\ncommon,benign,1000,1\ncommon,malware,10,9\n"
        assert parse_stats(text(src)) == [
            CategoryStats("common", BENIGN, 1000, 1),
            CategoryStats("common", MALWARE, 10, 9),
        ]

    @pytest.mark.parametrize(
        "row,exc",
        [
            ("a,evil,10,1", LabelError),
            ("a,benign,0,0", CountError),
            ("a,benign,10,11", CountError),
            ("a,benign,ten,1", CountError),
            ("a,benign,10,-1", CountError),
        ],
    )
    def test_errors(self, row, exc):
        with pytest.raises(exc) as info:
            parse_stats(text("category,class,n,detected\n" + row + "\n"))
        assert info.value.line == 2

    def test_duplicate(self):
        with pytest.raises(DuplicateIdError):
            parse_stats(text("category,class,n,detected\na,benign,1,0\na,benign,2,0\n"))

    def test_round_trip(self):
        src = "category,class,n,detected\ncommon,benign,1000,1\nx,malware,10,9\n"
        assert write_stats(parse_stats(text(src))) == src


class TestProfile:
    def test_one_hot(self):
        p = parse_profile(text('{"benign": {"common": 1.0}, "malware": {"commodity": 1.0}}'))
        assert p.benign_weights == {"common": 1.0}
        assert p.malware_weights == {"commodity": 1.0}
        assert p.name == "profile"

    def test_name_from_file(self, tmp_path):
        path = tmp_path / "enterprise.json"
        path.write_text('{"benign": {"c": 1}, "malware": {"m": 1}}')
        assert parse_profile(path).name == "enterprise"

    def test_sum_reported(self):
        with pytest.raises(NormalizationError, match="0.8"):
            parse_profile(text('{"benign": {"a": 0.5, "b": 0.3}, "malware": {"m": 1}}'))

    def test_normalize_halves(self):
        p = parse_profile(
            text('{"benign": {"a": 1.0, "b": 1.0}, "malware": {"m": 1.5, "n": 0.5}}'), normalize=True
        )
        assert p.benign_weights == {"a": 0.5, "b": 0.5}
        assert p.malware_weights == {"m": 0.75, "n": 0.25}

    @pytest.mark.parametrize(
        "doc",
        [
            '{"benign": {"a": 1}, "malware": {"m": 1}, "extra": 1}',
            '{"benign": {"a": 1}}',
            '{"benign": {"a": "1"}, "malware": {"m": 1}}',
            '{"benign": {"a": true}, "malware": {"m": 1}}',
            '{"benign": [1], "malware": {"m": 1}}',
            '{"benign": {"a": 1, "a": 0}, "malware": {"m": 1}}',
            "[1, 2]",
            "{not json",
        ],
    )
    def test_rejects(self, doc):
        with pytest.raises(ProfileError):
            parse_profile(text(doc))

    def test_round_trip(self):
        p = parse_profile(text('{"name": "e", "benign": {"a": 0.9, "b": 0.1}, "malware": {"m": 1.0}}'))
        assert parse_profile(text(write_profile(p))) == p
        assert json.loads(write_profile(p))["name"] == "e"
