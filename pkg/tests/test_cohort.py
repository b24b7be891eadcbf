import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcsibench.cohort import (
    DEFAULT_SYMPTOMS,
    Cohort,
    Participant,
    SymptomRecord,
    VaccinationInfo,
    build_dataset,
    extract_features,
    filter_eligible,
    load_cohort,
    save_cohort,
)
from pcsibench.errors import ConfigurationError, ConsistencyError, DuplicateIdError, SchemaError
from pcsibench.pcsi import PcsiResult, compute_all
from pcsibench.rules import PcsiRules

STATIC = [
    ["p1", "female", "34", "low", "0", "3", "1", "omicron"],
    ["p2", "male", "51", "high", "1", "2", "0", "original"],
    ["p3", "female", "29", "middle", "no", "4", "no", "alpha_delta"],
]
VACC = [["p1", "full", "120"], ["p2", "none", ""], ["p3", "partial", "40"]]


def records_for(pid, offsets, score=2):
    return [[pid, day, s, score] for day in offsets for s in ("headache", "nausea")]


RECORDS = records_for("p1", [-30, 100]) + records_for("p2", [-10, 95]) + records_for("p3", [-8, 150])


def test_valid_fixture_loads_cleanly(cohort_files):
    cohort, report = load_cohort(*cohort_files(STATIC, RECORDS, VACC))
    assert len(cohort) == 3
    assert sum(report.drops.values()) == 0
    assert cohort.vaccinations["p2"].time_to_infection_days is None
    assert [r.day_offset for r in cohort.records_for("p1")] == [-30, 100]
    assert json.loads(report.to_json())["n_participants"] == 3


def test_out_of_range_score_dropped(cohort_files):
    records = RECORDS + [["p1", -30, "dizziness", 7]]
    cohort, report = load_cohort(*cohort_files(STATIC, records, VACC))
    assert report.out_of_range == 1
    assert "dizziness" not in cohort.records_for("p1")[0].scores


def test_duplicate_id_named(cohort_files):
    static = STATIC + [STATIC[1]]
    with pytest.raises(DuplicateIdError, match="p2"):
        load_cohort(*cohort_files(static, RECORDS, VACC))


def test_missing_header_columns_listed(cohort_files):
    header = ("id", "gender", "age", "income", "smoker", "general_health", "variant")
    rows = [r[:6] + r[7:] for r in STATIC]
    with pytest.raises(SchemaError) as err:
        load_cohort(*cohort_files(rows, RECORDS, VACC, static_header=header))
    assert err.value.columns == ["chronic_disease"]


def test_missing_file_is_io_error(tmp_path, cohort_files):
    static, records, vacc = cohort_files(STATIC, RECORDS, VACC)
    with pytest.raises(FileNotFoundError):
        load_cohort(tmp_path / "nope.csv", records, vacc)


def test_invalid_rows_counted_by_reason(cohort_files):
    static = STATIC + [["p4", "other", "40", "low", "0", "3", "0", "omicron"], ["p5", "male", "abc", "low", "0", "3", "0", "omicron"]]
    vacc = VACC + [["p9", "full", "10"], ["p3x", "none", "5"]]
    records = RECORDS + [["ghost", -10, "headache", 2], ["p1", -30, "cough", 2]]
    _, report = load_cohort(*cohort_files(static, records, vacc))
    assert report.drops["invalid_static"] == 1
    assert report.drops["unparseable"] == 1
    assert report.drops["unknown_participant"] == 2
    assert report.drops["invalid_vaccination"] == 1
    assert report.drops["unknown_symptom"] == 1


def test_duplicate_cells_averaged(cohort_files):
    records = RECORDS + [["p1", -30, "headache", 5]]
    cohort, report = load_cohort(*cohort_files(STATIC, records, VACC))
    assert cohort.records_for("p1")[0].scores["headache"] == 3.5
    assert report.duplicate_cells == 1


def test_reload_of_saved_cohort_is_identical(tmp_path, synth_small):
    cohort, _ = synth_small
    paths = save_cohort(cohort, tmp_path / "out")
    again, report = load_cohort(paths["static"], paths["records"], paths["vaccination"])
    assert sum(report.drops.values()) == 0
    assert again == cohort
    paths2 = save_cohort(again, tmp_path / "out2")
    for key in paths:
        assert paths[key].read_bytes() == paths2[key].read_bytes()


def _cohort_with_offsets(offsets_by_pid):
    participants = {pid: Participant(pid, "female", 40, "low", False, 3, False, "omicron") for pid in offsets_by_pid}
    records = {
        pid: tuple(SymptomRecord(pid, d, {"headache": 2.0}) for d in sorted(offs))
        for pid, offs in offsets_by_pid.items()
    }
    vaccinations = {pid: VaccinationInfo(pid, "none") for pid in offsets_by_pid}
    return Cohort(participants, records, vaccinations, DEFAULT_SYMPTOMS)


class TestFilterEligible:
    def test_windows(self):
        cohort = _cohort_with_offsets({"a": [-10, 100], "b": [-3, 100], "c": [-10, 160]})
        kept, report = filter_eligible(cohort)
        assert list(kept.participants) == ["a"]
        assert report.missing_baseline == 1
        assert report.missing_post_window == 1
        assert sorted(report.excluded_ids) == ["b", "c"]

    @given(st.dictionaries(st.text("abcdef", min_size=1, max_size=3),
                           st.lists(st.integers(-200, 250), max_size=6), max_size=12))
    def test_retained_set_matches_brute_force(self, offsets):
        kept, report = filter_eligible(_cohort_with_offsets(offsets))
        expected = {
            pid for pid, offs in offsets.items()
            if any(d <= -7 for d in offs) and any(90 <= d <= 150 for d in offs)
        }
        assert set(kept.participants) == expected
        assert report.n_retained + len(report.excluded_ids) == len(offsets)


class TestBuildDataset:
    def _results(self, ids):
        return {pid: PcsiResult(frozenset(), False, 1.5, "all_symptom_mean") for pid in ids}

    def test_shape_and_groups(self, cohort_files):
        cohort, _ = load_cohort(*cohort_files(STATIC[:2], RECORDS, VACC[:2]))
        data = build_dataset(cohort, self._results(["p1", "p2"]))
        assert data.n == 2
        assert set(data.feature_groups.values()) == {"static", "symptoms", "vaccination"}
        assert set(data.feature_groups) == set(data.feature_names)
        assert sum(g == "symptoms" for g in data.feature_groups.values()) == 10

    def test_constant_column_flagged_and_kept(self, cohort_files):
        static = [STATIC[0], STATIC[2]]
        cohort, _ = load_cohort(*cohort_files(static, RECORDS, [VACC[0], VACC[2]]))
        data = build_dataset(cohort, self._results(["p1", "p3"]))
        assert "gender_female" in data.feature_names
        assert "gender_female" in data.constant_features
        assert "gender_male" in data.constant_features
        assert "age" not in data.constant_features

    def test_symptom_group_selection(self, dataset_small):
        sub = dataset_small.select_group("symptoms")
        assert all(name.startswith("symptom_") for name in sub.feature_names)
        assert sub.p == 10
        np.testing.assert_array_equal(sub.y, dataset_small.y)

    def test_unknown_group_rejected(self, dataset_small):
        with pytest.raises(ConfigurationError):
            dataset_small.select_group("genome")

    def test_unknown_participant(self, cohort_files):
        cohort, _ = load_cohort(*cohort_files(STATIC, RECORDS, VACC))
        with pytest.raises(ConsistencyError):
            build_dataset(cohort, self._results(["p1", "zz"]))

    def test_vaccination_encoding(self, cohort_files):
        cohort, _ = load_cohort(*cohort_files(STATIC, RECORDS, VACC))
        x, names, _ = extract_features(cohort)
        col = {n: x[:, j] for j, n in enumerate(names)}
        np.testing.assert_array_equal(col["vaccine_tti"], [120, 0, 40])
        np.testing.assert_array_equal(col["no_vaccine"], [0, 1, 0])
        np.testing.assert_array_equal(col["vaccine_full"], [1, 0, 0])
        np.testing.assert_array_equal(col["symptom_dizziness"], [1, 1, 1])

    def test_post_window_scores_never_reach_features(self, synth_small):
        cohort, _ = synth_small
        eligible, _ = filter_eligible(cohort)
        results = compute_all(eligible)
        before = build_dataset(eligible, results)
        poisoned = {
            pid: tuple(
                SymptomRecord(r.participant_id, r.day_offset, {s: 5.0 for s in r.scores})
                if r.day_offset > -7 else r
                for r in recs
            )
            for pid, recs in eligible.records.items()
        }
        after = build_dataset(
            Cohort(eligible.participants, poisoned, eligible.vaccinations, eligible.symptom_names),
            results,
        )
        np.testing.assert_array_equal(before.x, after.x)

    def test_custom_baseline_cutoff_respected(self):
        cohort = _cohort_with_offsets({"a": [-20, -10, 100]})
        recs = list(cohort.records["a"])
        recs[1] = SymptomRecord("a", -10, {"headache": 5.0})
        cohort = Cohort(cohort.participants, {"a": tuple(recs)}, cohort.vaccinations, DEFAULT_SYMPTOMS)
        x_default, names, _ = extract_features(cohort)
        x_strict, _, _ = extract_features(cohort, PcsiRules(baseline_cutoff=-15))
        j = names.index("symptom_headache")
        assert x_default[0, j] == 3.5
        assert x_strict[0, j] == 2.0
