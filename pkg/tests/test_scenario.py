import copy
import json

import pytest

from edtn.link_models import Technology
from edtn.scenario import BUNDLED, ConfigError, bundled_path, load_scenario, resolve_scenario, scenario_from_dict


@pytest.fixture
def doc():
    return json.loads(bundled_path("paper-single-bundle").read_text())


def error_key(data):
    with pytest.raises(ConfigError) as info:
        scenario_from_dict(data)
    return info.value.key


def test_bundled_scenarios_load():
    for name in BUNDLED:
        s = load_scenario(bundled_path(name))
        assert s.name == name


def test_defaults_fill_missing_sections(doc):
    s = scenario_from_dict(doc)
    assert s.models.gprs.buffer_packets == 50
    assert s.models.phase_table.totals() == (193.0, 367.0)
    assert s.protocol.channel_quality[Technology.BLUETOOTH] == 0.0
    assert s.seed == 0


def test_unknown_key_rejected(doc):
    doc["capacitor"]["farads"] = 3
    assert error_key(doc) == "capacitor.farads"
    del doc["capacitor"]["farads"]
    doc["surprise"] = 1
    assert error_key(doc) == "surprise"


def test_negative_capacitance_names_the_key(doc):
    doc["capacitor"]["capacitance_f"] = -1
    assert error_key(doc) == "capacitor.capacitance_f"


def test_voltage_order_enforced(doc):
    doc["capacitor"]["v_max"] = 1.5
    with pytest.raises(ConfigError):
        scenario_from_dict(doc)


def test_overlapping_contacts_rejected(doc):
    doc["rides"] = [{"speed_kmh": 0.0, "duration_s": 5000.0}]
    doc["contacts"] = [
        {"start_s": 100.0, "max_duration_s": 600.0},
        {"start_s": 500.0, "max_duration_s": 600.0},
    ]
    assert error_key(doc) == "contacts[1]"


def test_contact_during_moving_ride_rejected(doc):
    doc["contacts"][0]["start_s"] = 1000.0
    assert error_key(doc) == "contacts[0]"


def test_loss_must_be_a_probability(doc):
    doc["loss"] = 1.5
    with pytest.raises(ConfigError):
        scenario_from_dict(doc)


def test_local_links_only_in_links_section(doc):
    doc["links"] = {"gprs": {"active_watts": 1.0}}
    with pytest.raises(ConfigError):
        scenario_from_dict(doc)


def test_duplicate_bundle_ids_rejected(doc):
    doc["workload"].append(copy.deepcopy(doc["workload"][0]))
    assert error_key(doc) == "workload"


def test_non_numeric_value_rejected(doc):
    doc["capacitor"]["v_init"] = "high"
    assert error_key(doc) == "capacitor.v_init"


def test_custom_anchors_and_phase_table(doc):
    doc["links"] = {"wifi": {"anchors": [[0, 1.0], [1000, 2.0]], "active_watts": 2.0}}
    doc["phase_table"] = [{"label": "power_up", "joules": 1.0, "seconds": 1.0}]
    s = scenario_from_dict(doc)
    assert s.models.anchors[Technology.WIFI] == ((0.0, 1.0), (1000.0, 2.0))
    assert s.models.phase_table.totals() == (1.0, 1.0)


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{\n  \"name\": \n}")
    with pytest.raises(ConfigError) as info:
        load_scenario(p)
    assert info.value.key.startswith("line ")


def test_resolve_prefers_bundled_names(tmp_path):
    assert resolve_scenario("lossy-multi-contact") == bundled_path("lossy-multi-contact")
    own = tmp_path / "mine.json"
    assert resolve_scenario(str(own)) == own
