import json

import pytest

from ltearp import harness
from ltearp.config import scenario_from_dict

BASE = scenario_from_dict({"bandwidth_mhz": 5, "signaling": "short", "b_data": 100})


def test_sweep_validation():
    with pytest.raises(ValueError):
        harness.SweepSpec(BASE, 0.1, 1.0, engines=frozenset()).validate()
    with pytest.raises(ValueError):
        harness.SweepSpec(BASE, 1.0, 0.1).validate()
    with pytest.raises(ValueError):
        harness.SweepSpec(BASE, 0.1, 1.0, points=1).validate()
    with pytest.raises(ValueError):
        harness.SweepSpec(BASE, 0.1, 1.0, seeds=0).validate()


def test_log_spacing():
    rates = harness.SweepSpec(BASE, 0.1, 10.0, points=3).rates()
    assert rates == pytest.approx([0.1, 1.0, 10.0])


def test_csv_complete_sorted_and_rereadable(tmp_path):
    sweep = harness.SweepSpec(
        BASE, 0.5, 6.0, points=3, engines=frozenset({"analytic", "simulation"}), seeds=2, duration=3000
    )
    rows = harness.run_sweep(sweep)
    assert len(rows) == 3 * (1 + 2)
    lams = [r["lambda_i_per_subframe"] for r in rows]
    assert lams == sorted(lams)
    path = tmp_path / "s.csv"
    harness.write_csv(rows, path)
    header = path.read_text().splitlines()[0].split(",")
    assert tuple(header) == harness.CSV_COLUMNS
    back = harness.read_csv(path)
    assert harness.summarize(back) == harness.summarize(rows)
    for r in back:
        if r["engine"] == "simulation":
            assert r["seed"] in (1, 2)
            assert r["p_outage"] == "" and r["outage_fraction_sim"] != ""
        else:
            assert r["seed"] == "" and r["outage_fraction_sim"] == ""


def test_csv_rows_independent_of_input_order():
    rows = harness.run_sweep(harness.SweepSpec(BASE, 0.5, 6.0, points=4))
    assert harness.rows_to_csv(rows) == harness.rows_to_csv(list(reversed(rows)))


def test_breaking_point_bracket_invariant():
    bp = harness.breaking_point(BASE, iterations=20)
    lo, hi = bp.bracket
    assert bp.p_below <= 0.1 < bp.p_above
    assert lo < bp.rate_per_subframe < hi
    assert bp.rate_per_s == pytest.approx(1000 * bp.rate_per_subframe)
    assert bp.iterations == 20


def test_breaking_point_not_bracketed():
    with pytest.raises(harness.BracketNotFound):
        harness.breaking_point(BASE, lo=1e-3, hi=0.5)
    with pytest.raises(harness.BracketNotFound):
        harness.breaking_point(BASE, lo=20.0, hi=50.0)


def test_simulation_breaking_point_records_seeds():
    bp = harness.breaking_point(
        BASE.with_rate(1.0), engine="simulation", lo=0.5, hi=12.0, iterations=2, seeds=[4, 5], duration=2000
    )
    assert bp.seeds == [4, 5]
    assert bp.p_below <= 0.1 < bp.p_above


def test_compare_low_load():
    rows = harness.compare(BASE, [0.2, 0.5], seeds=[1, 2], duration=5000)
    for r in rows:
        assert r.abs_diff < 0.02
        assert r.seeds == [1, 2] and len(r.per_seed) == 2
    again = harness.compare(BASE, [0.2, 0.5], seeds=[1, 2], duration=5000)
    assert harness.comparison_json(BASE, rows) == harness.comparison_json(BASE, again)
    assert json.loads(harness.comparison_json(BASE, rows))["scenario_id"] == BASE.scenario_id


def test_pooled_outage_weights_by_count():
    a = harness.simulate_many([(BASE.with_rate(0.1), 1)], 2000)[0]
    assert harness.pooled_outage([a]) == a.outage_fraction
    assert harness.pooled_outage([]) == 0.0


def test_parallel_matches_serial():
    work = [(BASE.with_rate(2.0), s) for s in (1, 2)]
    assert harness.simulate_many(work, 2000, jobs=2) == harness.simulate_many(work, 2000, jobs=1)


def test_validate_quick_all_pass():
    checks = harness.validate(seed=0, quick=True)
    failed = [c.name for c in checks if not c.passed]
    assert not failed
    assert sum(c.name.startswith("jensen_bound") for c in checks) == 10
