import csv
import io
import json
import subprocess
import sys

import pytest

from edtn.cli import main
from edtn.link_models import gprs_energy_per_packet
from edtn.scenario import bundled_path


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_bundled_scenario(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    code, out, _ = run_cli(capsys, "run", "paper-single-bundle", "--trace", str(trace))
    assert code == 0
    doc = json.loads(out)
    assert doc["seed"] == 0 and doc["scenario"] == "paper-single-bundle"
    assert doc["dm_energy_j"] == 367.0
    assert doc["dm_active_time_s"] == 193.0
    assert trace.read_text().startswith("time_s,node,event,bundle_id,tech,energy_delta_j,cap_voltage_v\n")


def test_run_is_idempotent(capsys, tmp_path):
    outputs = []
    for i in range(2):
        t, m = tmp_path / f"t{i}.csv", tmp_path / f"m{i}.json"
        assert run_cli(capsys, "run", "lossy-multi-contact", "--seed", "7", "--trace", str(t), "--metrics", str(m))[0] == 0
        outputs.append((t.read_bytes(), m.read_bytes()))
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0][1])["seed"] == 7


def test_run_missing_file_exits_1(capsys, tmp_path):
    code, _, err = run_cli(capsys, "run", str(tmp_path / "nope.json"))
    assert code == 1
    assert "nope.json" in err


def test_run_bad_key_exits_2(capsys, tmp_path):
    doc = json.loads(bundled_path("paper-single-bundle").read_text())
    doc["capacitor"]["capacitance_f"] = -1
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    code, _, err = run_cli(capsys, "run", str(p))
    assert code == 2
    assert "capacitor.capacitance_f" in err


def test_run_unwritable_trace_exits_1(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "run", "paper-single-bundle", "--trace", str(tmp_path / "no" / "dir" / "t.csv"))
    assert code == 1


def test_sweep_buffer(capsys):
    code, out, err = run_cli(capsys, "sweep-buffer", "1", "200")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 200
    by_b = {int(r["buffer_packets"]): r for r in rows}
    assert float(by_b[100]["energy_per_packet_j"]) == 0.725
    assert float(by_b[50]["total_time_s"]) == 31.0
    assert float(by_b[50]["total_energy_j"]) == 35.0
    best = min(rows, key=lambda r: float(r["energy_per_packet_j"]))
    assert best["buffer_packets"] == "50"
    assert "argmin buffer_packets=50 energy_per_packet_j=0.7" in err


def test_sweep_buffer_single_row_and_file_output(capsys, tmp_path):
    out_path = tmp_path / "sweep.csv"
    code, out, _ = run_cli(capsys, "sweep-buffer", "50", "50", "--out", str(out_path))
    assert code == 0
    assert "argmin buffer_packets=50" in out
    assert out_path.read_text().splitlines()[1:] == ["50,0.7,31,35"]


def test_sweep_buffer_invalid_range(capsys):
    assert run_cli(capsys, "sweep-buffer", "10", "5")[0] == 2
    assert run_cli(capsys, "sweep-buffer", "0", "5")[0] == 2


def test_size_capacitor(capsys):
    assert run_cli(capsys, "size-capacitor", "--target-j", "367")[1] == "capacitance_f=34.9524\n"
    assert run_cli(capsys, "size-capacitor", "--target-j", "787.5")[1] == "capacitance_f=75\n"
    assert run_cli(capsys, "size-capacitor", "--target-j", "0")[1] == "capacitance_f=0\n"


def test_size_capacitor_invalid(capsys):
    assert run_cli(capsys, "size-capacitor", "--target-j", "10", "--v-max", "2", "--v-cutoff", "5")[0] == 2
    assert run_cli(capsys, "size-capacitor", "--target-j", "-1")[0] == 2


def write_samples(path, buffers, f=gprs_energy_per_packet):
    lines = ["buffer_packets,energy_per_packet_j"] + [f"{b},{f(b)!r}" for b in buffers]
    path.write_text("\n".join(lines) + "\n")


def parse_kv(text):
    return dict(line.split("=", 1) for line in text.splitlines())


def test_calibrate_round_trip(capsys, tmp_path):
    samples, frag = tmp_path / "s.csv", tmp_path / "frag.json"
    write_samples(samples, [1, 5, 20, 50, 100, 200])
    code, out, _ = run_cli(capsys, "calibrate", str(samples), "--out", str(frag))
    assert code == 0
    kv = parse_kv(out)
    assert float(kv["epp_a"]) == pytest.approx(2.5, abs=1e-6)
    assert float(kv["epp_b"]) == pytest.approx(0.6, abs=1e-6)
    assert float(kv["epp_c"]) == pytest.approx(0.001, abs=1e-6)
    assert kv["argmin_buffer_packets"] == "50"
    assert json.loads(frag.read_text())["gprs"]["epp_a"] == pytest.approx(2.5, abs=1e-6)


def test_calibrate_anchor_and_flanks(capsys, tmp_path):
    samples = tmp_path / "s.csv"
    samples.write_text(
        "buffer_packets,energy_per_packet_j\n"
        f"10,{gprs_energy_per_packet(10)!r}\n50,0.7\n150,{gprs_energy_per_packet(150)!r}\n"
    )
    code, out, _ = run_cli(capsys, "calibrate", str(samples))
    assert code == 0
    assert abs(int(parse_kv(out)["argmin_buffer_packets"]) - 50) <= 1


def test_calibrate_rejects_two_rows(capsys, tmp_path):
    samples = tmp_path / "s.csv"
    write_samples(samples, [10, 50])
    assert run_cli(capsys, "calibrate", str(samples))[0] == 2


def test_calibrate_bad_input(capsys, tmp_path):
    assert run_cli(capsys, "calibrate", str(tmp_path / "missing.csv"))[0] == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    assert run_cli(capsys, "calibrate", str(bad))[0] == 2


def test_link_table(capsys):
    code, out, _ = run_cli(capsys, "link-table")
    assert code == 0
    assert "bluetooth,5000,5,0.3,1.5" in out
    assert "wifi,3000000,20," in out
    assert "32,2.5,0.6,0.001,6,0.5,50" in out
    assert out.rstrip().endswith("total,367,193,")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "edtn", "size-capacitor", "--target-j", "787.5"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout == "capacitance_f=75\n"
