import numpy as np
import pytest

from simkit.distances import dtw, minkowski
from simkit.sessions import (
    SERIES_NAMES,
    SERIES_RANGES,
    SessionRecord,
    describe_session,
    generate_sessions,
    read_sessions_csv,
    session_column_ids,
    session_distance_blocks,
    session_distance_columns,
    write_sessions_csv,
)


def constant_session(value_map, length=10, label=0):
    series = {name: np.full(length, value_map.get(name, 0.5)) for name in SERIES_NAMES}
    series["cqi_avg"] = np.full(length, value_map.get("cqi_avg", 8.0))
    series["sinr_pusch"] = np.full(length, value_map.get("sinr_pusch", 5.0))
    return SessionRecord(series, label, session_id="const")


class TestGeneration:
    def test_deterministic_per_seed(self):
        a = generate_sessions(4, 4, min_len=15, seed=42)
        b = generate_sessions(4, 4, min_len=15, seed=42)
        for s, t in zip(a, b):
            assert s.label == t.label and s.session_id == t.session_id
            for name in SERIES_NAMES:
                assert np.array_equal(s.series[name], t.series[name])

    def test_different_seed_differs(self):
        a = generate_sessions(2, 2, seed=0)
        b = generate_sessions(2, 2, seed=1)
        assert not np.array_equal(a[0].series["cqi_avg"], b[0].series["cqi_avg"])

    def test_counts_and_labels(self):
        sessions = generate_sessions(7, 11, seed=0)
        labels = [s.label for s in sessions]
        assert sum(labels) == 7
        assert len(labels) == 18

    def test_values_within_ranges(self):
        for s in generate_sessions(10, 10, seed=3):
            for name in SERIES_NAMES:
                lo, hi = SERIES_RANGES[name]
                assert np.all(s.series[name] >= lo)
                assert np.all(s.series[name] <= hi)

    def test_lengths_at_least_min(self):
        sessions = generate_sessions(5, 5, min_len=20, seed=1)
        assert all(s.length >= 20 for s in sessions)

    def test_drop_sessions_trend_downward(self):
        sessions = generate_sessions(200, 1, seed=5)
        drops = [s for s in sessions if s.label == 1]
        degraded = sum(
            1
            for s in drops
            if s.series["sinr_pusch"][-3:].mean() < s.series["sinr_pusch"][:3].mean()
        )
        assert degraded >= 0.9 * len(drops)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            generate_sessions(0, 5)
        with pytest.raises(ValueError):
            generate_sessions(5, -1)
        with pytest.raises(ValueError):
            generate_sessions(1, 1, min_len=0)


class TestSessionRecord:
    def test_validation(self):
        series = {name: np.ones(3) for name in SERIES_NAMES}
        with pytest.raises(ValueError):
            SessionRecord({**series, "cqi_avg": np.ones(2)}, 0)  # length mismatch
        with pytest.raises(ValueError):
            SessionRecord({**series, "cqi_avg": np.full(3, 99.0)}, 0)  # out of range
        with pytest.raises(ValueError):
            SessionRecord(series, 2)
        with pytest.raises(ValueError):
            SessionRecord({n: series[n] for n in list(SERIES_NAMES)[:-1]}, 0)


class TestDescribeSession:
    def test_constant_series(self):
        s = constant_session({}, length=8)
        d = describe_session(s)
        assert d.shape == (60,)
        cqi = d[:10]
        assert cqi[0] == cqi[1] == cqi[2] == cqi[3] == 8.0  # min=max=mode=mean
        assert cqi[4] == 0.0  # variance
        assert np.all(cqi[5:] == 0.0)  # gradient stats of a constant series

    def test_gradient_stats_of_ramp(self):
        s = constant_session({}, length=3)
        series = dict(s.series)
        series["cqi_avg"] = np.array([1.0, 2.0, 3.0])
        s2 = SessionRecord(series, 0)
        d = describe_session(s2)
        # cqi block: values [min,max,mode,mean,var, gmin,gmax,gmode,gmean,gvar]
        assert d[0] == 1.0 and d[1] == 3.0
        assert d[2] == 1.0  # mode ties resolve to the smallest rounded value
        assert d[3] == pytest.approx(2.0)
        assert d[8] == pytest.approx(1.0)  # gradient mean
        assert d[9] == pytest.approx(0.0)  # gradient variance

    def test_truncation(self):
        s = constant_session({}, length=10)
        series = dict(s.series)
        series["sinr_pusch"] = np.concatenate([np.full(7, 10.0), np.full(3, -2.0)])
        s2 = SessionRecord(series, 1)
        full = describe_session(s2, truncate_at=0)
        cut = describe_session(s2, truncate_at=3)
        sinr_block = slice(50, 60)
        assert full[sinr_block][0] == -2.0
        assert cut[sinr_block][0] == 10.0
        assert np.array_equal(describe_session(s2), full)

    def test_truncation_errors(self):
        s = constant_session({}, length=5)
        with pytest.raises(ValueError):
            describe_session(s, truncate_at=5)
        with pytest.raises(ValueError):
            describe_session(s, truncate_at=4)  # leaves a single report

    def test_base_stats_permutation_invariant_gradient_not(self):
        sessions = generate_sessions(1, 1, seed=9)
        s = sessions[0]
        rng = np.random.default_rng(0)
        perm = rng.permutation(s.length)
        shuffled = SessionRecord(
            {name: s.series[name][perm] for name in SERIES_NAMES}, s.label
        )
        d1 = describe_session(s)
        d2 = describe_session(shuffled)
        for block in range(6):
            base = slice(block * 10, block * 10 + 5)
            grad = slice(block * 10 + 5, block * 10 + 10)
            assert np.allclose(d1[base], d2[base], atol=1e-12)
        assert not np.allclose(d1, d2)

    def test_mode_uses_reporting_granularity(self):
        s = constant_session({}, length=4)
        series = dict(s.series)
        series["cqi_avg"] = np.array([3.1, 2.9, 7.0, 10.0])  # rounds to 3,3,7,10
        d = describe_session(SessionRecord(series, 0))
        assert d[2] == 3.0


class TestDistanceColumns:
    def test_self_columns_zero(self):
        sessions = generate_sessions(2, 2, seed=11)
        cols = session_distance_columns(sessions[0], [sessions[0], sessions[1]])
        assert np.allclose(cols[:7], 0.0, atol=1e-12)

    def test_column_count_is_seven_per_sample(self):
        sessions = generate_sessions(16, 16, seed=12)
        cols = session_distance_columns(sessions[0], sessions[:30])
        assert cols.shape == (210,)
        assert len(session_column_ids(30)) == 210

    def test_dtw_columns_delegate_to_distances(self):
        sessions = generate_sessions(2, 2, seed=13)
        s, t = sessions[0], sessions[1]
        cols = session_distance_columns(s, [t], truncate_at=2)
        for k, name in enumerate(SERIES_NAMES):
            expected = dtw(s.series[name][: s.length - 2], t.series[name][: t.length - 2])
            assert cols[k] == pytest.approx(expected, abs=1e-12)
        d_desc = minkowski(
            describe_session(s, truncate_at=2), describe_session(t, truncate_at=2), 2
        )
        assert cols[6] == pytest.approx(d_desc, abs=1e-12)

    def test_blocks_thread_count_invariant(self):
        sessions = generate_sessions(6, 6, seed=14)
        refs = sessions[:4]
        a = session_distance_blocks(sessions, refs, truncate_at=1, threads=1)
        b = session_distance_blocks(sessions, refs, truncate_at=1, threads=4)
        assert np.array_equal(a, b)

    def test_modality_subset(self):
        sessions = generate_sessions(3, 3, seed=15)
        blocks = session_distance_blocks(sessions, sessions[:2], modalities=("descriptor",))
        assert blocks.shape == (6, 2, 1)

    def test_empty_sample_error(self):
        sessions = generate_sessions(1, 1, seed=16)
        with pytest.raises(ValueError):
            session_distance_columns(sessions[0], [])


class TestCsvRoundtrip:
    def test_exact_roundtrip(self, tmp_path):
        sessions = generate_sessions(3, 3, min_len=15, seed=17)
        path = tmp_path / "sessions.csv"
        write_sessions_csv(sessions, path)
        loaded = read_sessions_csv(path)
        assert [s.session_id for s in loaded] == [s.session_id for s in sessions]
        for a, b in zip(sessions, loaded):
            assert a.label == b.label
            for name in SERIES_NAMES:
                assert np.array_equal(a.series[name], b.series[name])

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope\n")
        with pytest.raises(ValueError):
            read_sessions_csv(path)

    def test_inconsistent_label(self, tmp_path):
        sessions = generate_sessions(1, 1, seed=18)
        path = tmp_path / "sessions.csv"
        write_sessions_csv(sessions, path)
        lines = path.read_text().splitlines()
        parts = lines[1].split(",")
        parts[-1] = "1" if parts[-1] == "0" else "0"
        other = [line for line in lines[2:] if line.startswith(parts[0] + ",")]
        if other:
            lines[1] = ",".join(parts)
            path.write_text("\n".join(lines) + "\n")
            with pytest.raises(ValueError):
                read_sessions_csv(path)
