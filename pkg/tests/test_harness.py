"""Scenario files, the end-to-end runner, and run reports."""

import pytest

from spacedream.cli import (
    BUILTIN_SCENARIOS,
    Scenario,
    ScenarioError,
    load_scenario,
    main,
    parse_scenario,
    render_report,
    run_scenario,
)
from spacedream.cli.runner import PROCESS_GRAPH, ScenarioRun
from spacedream.procman.config import load_config

SMALL = """
[scenario]
name = small
cycles = 1
duration = 60
"""


# ---------------------------------------------------------------------------
# scenario parsing


def test_empty_scenario_is_valid_nominal():
    scn = parse_scenario("", default_name="blank")
    assert scn.name == "blank"
    assert scn.scale == pytest.approx(1 / 60)
    assert scn.loss == 0.0
    assert scn.faults == ()
    assert scn.checks == ()


def test_full_scenario_roundtrip():
    scn = parse_scenario("""
[scenario]
name = everything
scale = 1/30
duration = 50
cycles = 2
seed = 9
start_delay = 1.5

[channel]
loss = 0.1
corrupt = 0.01
reorder = 4
bandwidth = 2e6
seed = 3

[storage]
fault_a = mount_fail
reformat_works = no

[transfer]
rate = 5e6
resend = 2
media_priority = 7

[recorder]
profile = full
rotate_kib = 64

[faults]
schedule =
    10.0 mission suspend
    5.0 hal joint_stuck 1 1

[expect]
checks =
    reboots 1
    files_accounted
""")
    assert scn.scale == pytest.approx(1 / 30)
    assert scn.cycles == 2
    assert scn.bandwidth_bits == 2e6
    assert scn.fault_a == "mount_fail"
    assert not scn.reformat_works
    assert scn.recorder_profile == "full"
    assert scn.rotate_bytes == 64 * 1024
    # schedule is sorted by time regardless of file order
    assert [a.time for a in scn.faults] == [5.0, 10.0]
    assert scn.faults[0].module == "hal"
    assert scn.checks == (("reboots", 1), ("files_accounted", None))


@pytest.mark.parametrize("text, hint", [
    ("[bogus]\nx = 1\n", "unexpected section"),
    ("[scenario]\nduration = -3\n", "duration"),
    ("[scenario]\nscale = 0\n", "scale"),
    ("[scenario]\nduration = 10\n[faults]\nschedule =\n    20.0 mission suspend\n",
     "outside run duration"),
    ("[faults]\nschedule =\n    1.0 mission explode\n", "suspend|resume"),
    ("[faults]\nschedule =\n    1.0 warp core breach\n", "unknown module"),
    ("[faults]\nschedule =\n    1.0 hal bad_kind 0 1\n", "hal takes"),
    ("[storage]\nfault_a = soggy\n", "storage fault"),
    ("[expect]\nchecks =\n    flawless_victory\n", "unknown check"),
    ("[expect]\nchecks =\n    reboots\n", "integer argument"),
    ("[expect]\nchecks =\n    files_accounted 3\n", "no argument"),
    ("[recorder]\nprofile = vhs\n", "profile"),
])
def test_rejected_scenarios(text, hint):
    with pytest.raises(ScenarioError, match=hint):
        parse_scenario(text)


def test_builtins_all_parse():
    for name, text in BUILTIN_SCENARIOS.items():
        scn = parse_scenario(text, default_name=name)
        assert scn.name == name
        assert scn.checks  # every builtin states its expectations


def test_load_scenario_from_file_and_name(tmp_path):
    path = tmp_path / "mine.scn"
    path.write_text(SMALL)
    assert load_scenario(str(path)).name == "small"
    assert load_scenario("nominal").name == "nominal"
    with pytest.raises(ScenarioError, match="no scenario"):
        load_scenario("does_not_exist")


# ---------------------------------------------------------------------------
# process graph


def test_flight_graph_orders_power_hal_controller():
    graph = load_config(PROCESS_GRAPH)
    order = {name: i for i, name in enumerate(graph.order)}
    assert order["power"] < order["hal"] < order["controller"] < order["mission"]
    for mover in ("camera", "recorder", "downlink"):
        assert order["mission"] < order[mover]


def test_bring_up_reports_all_processes_ready(tmp_path):
    run = ScenarioRun(parse_scenario(SMALL), tmp_path)
    status = run.flight.supervisor.status()
    assert all(st.state.value == "ready" for st in status.values())


# ---------------------------------------------------------------------------
# end-to-end runs


def test_single_cycle_mission_report(tmp_path):
    report = run_scenario(parse_scenario(SMALL), workdir=tmp_path)
    assert report.reboots == 0
    assert report.cycles == 1
    assert report.generations == (0,)
    assert report.events[0].endswith("boot gen=0")
    assert report.motion_commands > 0
    assert report.tracking_error_max > 0
    # one command set on the bus per controller tick, no gaps
    assert report.command_sets == report.controller_ticks
    assert report.recorder_rate_bits > 0
    assert report.files and all(f.complete for f in report.files)
    # the arm spent time in every scripted phase
    for phase in ("interpolator", "manual_impedance", "virtual_fixtures"):
        assert report.mode_seconds.get(phase, 0.0) > 0


def test_fixed_seed_runs_are_identical():
    scn = parse_scenario(SMALL + "[channel]\nloss = 0.05\n")
    a = render_report(run_scenario(scn))
    b = render_report(run_scenario(scn))
    assert a == b


def test_ground_test_scenario_powers_nothing():
    report = run_scenario(load_scenario("ground_test"))
    assert report.passed
    assert report.motion_commands == 0
    assert report.cycles == 0
    # housekeeping still ran: telemetry was recorded and downlinked
    assert report.recorder_bytes > 0
    assert report.files


def test_emmc_fallback_scenario():
    report = run_scenario(load_scenario("emmc_a_dead"))
    assert report.passed, [c for c in report.checks if not c.ok]
    assert any("mount_fail A" in e for e in report.events)
    assert report.reboots == 0


def test_watchdog_hang_scenario_reboots_once_and_resumes():
    report = run_scenario(load_scenario("watchdog_hang"))
    assert report.passed, [c for c in report.checks if not c.ok]
    assert report.reboots == 1
    assert report.generations == (0, 1)
    assert report.hdrm_releases == 1
    # ground kept files from both boots
    assert {f.generation for f in report.files} == {0, 1}
    # the reboot came from the watchdog, not the mission script
    reboot_lines = [e for e in report.events if " reboot " in e]
    assert len(reboot_lines) == 1 and "watchdog" in reboot_lines[0]


def test_unrecoverable_storage_keeps_rebooting():
    scn = parse_scenario("""
[scenario]
name = dead_storage
duration = 3
cycles =

[storage]
fault_a = mount_fail
fault_b = mount_fail
reformat_works = no
""")
    report = run_scenario(scn)
    assert report.reboots >= 2  # boot loop, bounded only by the duration
    assert report.cycles == 0
    assert all(f"gen={g}" in " ".join(report.events) for g in report.generations)


def test_mid_run_hal_fault_skips_torque_phases(tmp_path):
    scn = parse_scenario("""
[scenario]
name = torque_fault
cycles = 1
duration = 60

[faults]
schedule =
    4.0 hal torque_sensor_invalid 2 1
""")
    report = run_scenario(scn, workdir=tmp_path)
    assert report.cycles == 1
    assert report.reboots == 0
    assert any("torque_gate fail" in e for e in report.events)
    assert report.mode_seconds.get("manual_impedance", 0.0) == 0.0
    assert report.mode_seconds.get("virtual_fixtures", 0.0) == 0.0
    assert report.mode_seconds.get("interpolator", 0.0) > 0


def test_out_dir_gets_report_events_and_rx_tree(tmp_path):
    out = tmp_path / "out"
    report = run_scenario(parse_scenario(SMALL), out_dir=out)
    assert (out / "report.txt").read_text() == render_report(report)
    assert (out / "events.log").read_text().splitlines() == list(report.events)
    rx_files = sorted(p.name for p in (out / "rx" / "0").iterdir())
    assert rx_files  # reassembled flight files landed on the ground


def test_wallclock_mode_measures_jitter():
    scn = parse_scenario("""
[scenario]
name = tiny
duration = 0.5
cycles =
start_delay = -1
""")
    report = run_scenario(scn, wallclock=True)
    assert report.ticks == pytest.approx(50, abs=2)
    assert report.jitter_ms_max >= 0.0


# ---------------------------------------------------------------------------
# command line


def test_cli_run_quiet_prints_machine_report(tmp_path, capsys):
    path = tmp_path / "s.scn"
    path.write_text(SMALL)
    rc = main(["run", str(path), "--quiet"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "result=pass" in out
    assert "scenario=small" in out


def test_cli_reports_failing_checks_with_exit_code(tmp_path, capsys):
    path = tmp_path / "s.scn"
    path.write_text(SMALL + "[expect]\nchecks =\n    reboots 7\n")
    rc = main(["run", str(path)])
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAIL" in out


def test_cli_unknown_scenario_is_an_error(capsys):
    rc = main(["run", "warp_drive_test"])
    assert rc == 2
    assert "scenario error" in capsys.readouterr().err


def test_cli_scenarios_list_names_builtins(capsys):
    rc = main(["scenarios", "list"])
    out = capsys.readouterr().out
    assert rc == 0
    for name in BUILTIN_SCENARIOS:
        assert name in out


def test_cli_duration_and_seed_overrides(tmp_path, capsys):
    path = tmp_path / "s.scn"
    path.write_text("[scenario]\nname = t\ncycles =\nstart_delay = -1\n")
    rc = main(["run", str(path), "--quiet", "--duration", "1.0", "--seed", "4"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "seed=4" in out
    assert "ticks=100" in out
