import dataclasses

import pytest
import yaml
from hypothesis import assume, given
from hypothesis import strategies as st

from ltearp.config import (
    BANDWIDTHS,
    CellConfig,
    ScenarioError,
    ScenarioParseError,
    ScenarioSpec,
    SignalingCatalog,
    TrafficConfig,
    dump_scenario,
    load_scenario,
    pdcch_capacity,
    pusch_capacity,
    scenario_from_dict,
)


def test_default_catalog_matches_message_table():
    c = SignalingCatalog()
    assert (c.b_rar, c.b_rb, c.b_req, c.b_conn, c.b_comp) == (8, 36, 7, 38, 20)
    assert (c.b_r_dl, c.b_r_ul, c.b_s_cmd, c.b_s_comp, c.n_frag) == (118, 10, 11, 13, 6)


def test_table_defaults_from_file(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("bandwidth_mhz: 5\ndelta_rao: 5\nd: 54\nm: 9\n")
    spec = load_scenario(p)
    cell = spec.cell
    assert (cell.d, cell.delta_rao, cell.m, cell.w_c) == (54, 5, 9, 20)
    assert (cell.t_rar, cell.t_crt, cell.proc_enb, cell.proc_ue) == (10, 40, 3, 3)
    assert cell.n_cce == 21 and cell.n_ulrb == 25


def test_empty_file_is_default_scenario(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("")
    assert load_scenario(p) == ScenarioSpec()


def test_delta_rao_out_of_range(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("delta_rao: 25\n")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(p)
    assert exc.value.field == "delta_rao"


def test_unknown_key_rejected():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict({"delta_roa": 5})
    assert exc.value.field == "delta_roa"


def test_malformed_yaml(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("bandwidth_mhz: [5\n")
    with pytest.raises(ScenarioParseError):
        load_scenario(p)


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"n_cce": 20}, "n_cce"),
        ({"t_rar": 50}, "t_rar"),
        ({"d": 0}, "d"),
        ({"b_data": 0}, "b_data"),
        ({"lambda_i": 0.0}, "lambda_i"),
        ({"limit_mask": []}, "limit_mask"),
        ({"limit_mask": ["prach", "pucch"]}, "limit_mask"),
        ({"signaling": "long"}, "signaling"),
        ({"bandwidth_mhz": 3}, "bandwidth_mhz"),
        ({"m": 1.5}, "m"),
        ({"lambda_i": 1.0, "rate_per_s": 1000}, "rate_per_s"),
    ],
)
def test_validation_names_field(raw, field):
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(raw)
    assert exc.value.field == field


def test_pdcch_capacity_modes():
    small = scenario_from_dict({"bandwidth_mhz": 1.4}).cell
    assert pdcch_capacity(small) == 3
    assert pdcch_capacity(dataclasses.replace(CellConfig(), pdcch_capacity_mode="raw_cce")) == 21


def test_pdcch_capacity_zero_cces():
    # bypasses validation: the capacity helper itself is total
    cell = CellConfig.__new__(CellConfig)
    object.__setattr__(cell, "n_cce", 0)
    object.__setattr__(cell, "pdcch_capacity_mode", "format1_messages")
    assert pdcch_capacity(cell) == 0


@pytest.mark.parametrize("bw", sorted(BANDWIDTHS))
def test_format1_is_half_of_raw(bw):
    cell = scenario_from_dict({"bandwidth_mhz": bw}).cell
    raw = pdcch_capacity(dataclasses.replace(cell, pdcch_capacity_mode="raw_cce"))
    f1 = pdcch_capacity(dataclasses.replace(cell, pdcch_capacity_mode="format1_messages"))
    assert f1 == raw // 2


def test_pusch_capacity_variants():
    cell = CellConfig()
    assert pusch_capacity(cell) == pytest.approx(25 - 6 / 5)
    assert pusch_capacity(dataclasses.replace(cell, pusch_capacity_mode="verbatim")) == pytest.approx(25 - 60 / 5)


def test_verbatim_pusch_nonpositive_rejected():
    with pytest.raises(ScenarioError):
        scenario_from_dict({"pusch_capacity_mode": "verbatim", "delta_rao": 2})


def test_traffic_from_devices():
    t = TrafficConfig.from_devices(30000, 10.0)
    assert t.lambda_i == pytest.approx(3.0)
    assert t.rate_per_s == pytest.approx(3000.0)
    spec = scenario_from_dict({"n_devices": 30000, "report_interval_s": 10})
    assert spec.traffic.lambda_i == pytest.approx(3.0)


def test_rate_per_s_key():
    assert scenario_from_dict({"rate_per_s": 700}).traffic.lambda_i == pytest.approx(0.7)


def test_bandwidth_defaults():
    cell = scenario_from_dict({"bandwidth_mhz": 1.4}).cell
    assert (cell.n_ulrb, cell.n_dlrb, cell.n_cce, cell.delta_rao) == (6, 6, 6, 20)


scenario_dicts = st.fixed_dictionaries(
    {},
    optional={
        "bandwidth_mhz": st.sampled_from(sorted(BANDWIDTHS)),
        "delta_rao": st.integers(1, 20),
        "m": st.integers(0, 12),
        "w_c": st.integers(1, 40),
        "b_data": st.integers(1, 5000),
        "signaling": st.sampled_from(["short", "full"]),
        "lambda_i": st.floats(1e-4, 50.0),
        "limit_mask": st.sets(st.sampled_from(["prach", "pdcch", "pdsch", "pusch"]), min_size=1).map(sorted),
        "pdcch_capacity_mode": st.sampled_from(["raw_cce", "format1_messages"]),
    },
)


@given(scenario_dicts)
def test_round_trip(raw):
    try:
        spec = scenario_from_dict(raw)
    except ScenarioError:
        assume(False)
    again = scenario_from_dict(yaml.safe_load(dump_scenario(spec)))
    assert again == spec


def test_round_trip_through_file(tmp_path):
    spec = scenario_from_dict({"bandwidth_mhz": 1.4, "signaling": "full", "b_data": 1000, "limit_mask": ["prach"]})
    p = tmp_path / "s.yaml"
    dump_scenario(spec, p)
    assert load_scenario(p) == spec
