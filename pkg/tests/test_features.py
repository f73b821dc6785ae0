import numpy as np
import pytest

from facegrowth.features import (DATA_TYPES, PERIOD_VARIANTS, Scenario, assemble, enumerate_scenarios,
                                 feature_width)

EXPECTED_WIDTHS = {"ceph": (16, 16, 17, 32, 32), "proc": (41, 41, 42, 82, 82), "trans": (41, 41, 42, 82, 82)}


def test_scenario_grid():
    sc = enumerate_scenarios()
    assert len(sc) == 45 and len(set(sc)) == 45
    assert Scenario("ceph", "12-9", "SN-MP") in sc
    assert Scenario.parse("ceph/12-9/SN-MP(18-9)") == Scenario("ceph", "12-9", "SN-MP")


@pytest.mark.parametrize("key", ["ceph/12-9", "foo/9/FA", "ceph/10/FA", "ceph/9/ANB"])
def test_bad_scenario(key):
    with pytest.raises(ValueError):
        Scenario.parse(key)


def test_declared_widths():
    for d in DATA_TYPES:
        assert tuple(feature_width(Scenario(d, p, "FA")) for p in PERIOD_VARIANTS) == EXPECTED_WIDTHS[d]
    widths = [feature_width(s) for s in enumerate_scenarios()]
    assert min(widths) == 16 and max(widths) == 82


def test_built_widths_match_declared(small_prepared):
    for key, tab in small_prepared.tables().items():
        assert tab.width == feature_width(tab.scenario), key
        assert len(tab.feature_names) == tab.width
        assert not tab.excluded


def test_identical_shapes_give_zero_difference(small_prepared):
    prep = small_prepared
    aligned = dict(prep.aligned)
    pid = prep.cohort.series[0].patient_id
    aligned[(pid, 12)] = aligned[(pid, 9)]
    tab = assemble(prep.cohort, aligned, prep.measurements, prep.labels, Scenario("proc", "12-9", "FA"))
    row = tab.X[tab.patient_ids.index(pid)]
    assert np.count_nonzero(row[:40]) == 0


def test_block_consistency(small_prepared):
    prep = small_prepared
    for d in DATA_TYPES:
        t9 = prep.table(f"{d}/9/SN-MP")
        t12 = prep.table(f"{d}/12/SN-MP")
        diff = prep.table(f"{d}/12-9/SN-MP")
        both = prep.table(f"{d}/9,12/SN-MP")
        mixed = prep.table(f"{d}/9,12-9/SN-MP")
        b = t9.width - 1
        assert np.array_equal(mixed.X[:, :b], t9.X[:, :b])
        assert np.array_equal(mixed.X[:, b:2 * b], diff.X[:, :b])
        assert np.array_equal(both.X[:, b:2 * b], t12.X[:, :b])
        assert np.array_equal(diff.X[:, :b], t12.X[:, :b] - t9.X[:, :b])
        assert np.array_equal(mixed.X[:, -2:], both.X[:, -2:])


def test_labels_follow_target(small_prepared):
    tab = small_prepared.table("trans/9/PN-AN")
    lab = small_prepared.labels["PN-AN"]
    assert [lab[p] for p in tab.patient_ids] == tab.y.tolist()


def test_missing_inputs_excluded(small_prepared):
    prep = small_prepared
    pid = prep.cohort.series[1].patient_id
    labels = {t: {k: v for k, v in lab.items() if k != pid} for t, lab in prep.labels.items()}
    tab = assemble(prep.cohort, prep.aligned, prep.measurements, labels, Scenario("ceph", "9", "FA"))
    assert tab.excluded == (pid,) and pid not in tab.patient_ids


def test_csv_output(small_prepared):
    tab = small_prepared.table("ceph/9,12/FA")
    lines = tab.to_csv().splitlines()
    assert lines[0].split(",")[0] == "patient_id" and lines[0].split(",")[-1] == "label"
    assert len(lines) == len(tab.patient_ids) + 1
    first = lines[1].split(",")
    assert [float(v) for v in first[1:-1]] == tab.X[0].tolist()
    assert tab.scenario.slug == "ceph_9+12_FA"


def test_table_is_read_only(small_prepared):
    tab = small_prepared.table("ceph/9/FA")
    with pytest.raises(ValueError):
        tab.X[0, 0] = 1.0
