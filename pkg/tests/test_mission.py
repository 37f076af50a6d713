"""Mission building blocks: persistence, events, storage ladder, watchdog,
start handshake, and the health verdict.

Random-pick bound: 200 boots with two healthy cards is Binomial(200, 0.5)
per card; mean 100, sigma = sqrt(200*0.25) = 7.07, so 100 - 3 sigma is
about 78.8. The asserted floor of 60 sits far below it.
"""

import itertools
import math
import random
from collections import Counter

import pytest

from spacedream.halsim.plant import PlantState
from spacedream.halsim.records import FLAG_REFERENCED, JointTelemetry
from spacedream.mission import (
    FAULT_HANG,
    FAULT_MOUNT,
    GROUND_TEST,
    START_MAGIC,
    EmmcBank,
    EmmcDevice,
    EventLog,
    StartGate,
    StateStore,
    Watchdog,
    check_health,
)
from spacedream.clock import SimClock


# -- persistence -----------------------------------------------------------


def test_boot_generation_counts_up(tmp_path):
    store = StateStore(tmp_path / "state")
    assert store.boot_generation == 0
    assert store.bump_boot_generation() == 1
    assert store.bump_boot_generation() == 2
    again = StateStore(tmp_path / "state")  # fresh handle, same files
    assert again.boot_generation == 2


def test_hdrm_flag_is_one_shot_and_persisted(tmp_path):
    store = StateStore(tmp_path / "state")
    assert not store.hdrm_released
    store.mark_hdrm_released()
    assert store.hdrm_released
    assert StateStore(tmp_path / "state").hdrm_released


def test_plant_pose_roundtrip(tmp_path):
    store = StateStore(tmp_path / "state")
    assert store.load_plant() is None
    state = PlantState(q=[0.1, -0.2, 0.3, 0.4], qdot=[0.0, 0.1, 0.0, -0.1])
    store.save_plant(state)
    loaded = store.load_plant()
    assert loaded.q == state.q
    assert loaded.qdot == state.qdot
    assert loaded.persisted


def test_corrupt_generation_file_reads_as_zero(tmp_path):
    store = StateStore(tmp_path / "state")
    (tmp_path / "state" / "boot_generation").write_text("garbage")
    assert store.boot_generation == 0


# -- event log ----------------------------------------------------------------


def test_event_log_must_open_with_boot():
    log = EventLog()
    with pytest.raises(ValueError):
        log.append(0.0, "demo_start")
    log.append(0.0, "boot", "gen=0")
    log.append(0.1, "start_cmd", "flight")
    assert log.count("boot") == 1


def test_event_log_rejects_unknown_kind():
    log = EventLog()
    with pytest.raises(ValueError):
        log.append(0.0, "launch")


def test_same_tick_events_keep_strictly_increasing_stamps():
    log = EventLog()
    log.append(1.0, "boot")
    log.append(1.0, "start_cmd")
    log.append(1.0, "hdrm_release")
    stamps = [e.stamp for e in log]
    assert stamps == sorted(stamps)
    assert len(set(stamps)) == 3


def test_boot_required_again_after_reboot():
    log = EventLog()
    log.append(0.0, "boot")
    log.append(1.0, "reboot", "watchdog")
    with pytest.raises(ValueError):
        log.append(2.0, "demo_start")
    log.append(2.0, "boot", "gen=1")
    assert log.count("boot") == 2


# -- eMMC ladder ---------------------------------------------------------------


@pytest.mark.parametrize("a_fault,b_fault,reformat_works",
                         list(itertools.product([False, True], repeat=3)))
def test_mount_ladder_exhaustive(tmp_path, a_fault, b_fault, reformat_works):
    bank = EmmcBank(tmp_path, reformat_works=reformat_works)
    if a_fault:
        bank.set_fault("A", FAULT_MOUNT)
    if b_fault:
        bank.set_fault("B", FAULT_MOUNT)
    outcome = bank.mount_one(random.Random(3), generation=0)

    if a_fault and b_fault and not reformat_works:
        assert outcome.rebooted and outcome.device is None
        assert outcome.trail[-1] == "reboot"
        return
    assert outcome.ready and not outcome.rebooted
    assert outcome.device.mount_state == "mounted"
    assert outcome.data_root.is_dir()
    if a_fault and not b_fault:
        assert outcome.device.id == "B"
    if b_fault and not a_fault:
        assert outcome.device.id == "A"
    if a_fault and b_fault:
        assert "reformat both" in outcome.trail


def test_fallback_trail_records_both_steps(tmp_path):
    bank = EmmcBank(tmp_path)
    bank.set_fault("A", FAULT_MOUNT)
    rng = random.Random(0)
    while True:  # find a draw that picks A first so the fallback shows
        outcome = bank.mount_one(rng, generation=0)
        if outcome.trail[0] == "pick A":
            break
    assert outcome.trail == ("pick A", "mount_fail A", "mounted B")


def test_random_pick_covers_both_cards(tmp_path):
    bank = EmmcBank(tmp_path)
    rng = random.Random(7)
    counts = Counter(bank.mount_one(rng, generation=g).device.id
                     for g in range(200))
    assert counts["A"] >= 60
    assert counts["B"] >= 60


def test_data_root_unique_per_generation(tmp_path):
    bank = EmmcBank(tmp_path)
    rng = random.Random(1)
    roots = {bank.mount_one(rng, generation=g).data_root for g in range(5)}
    assert len(roots) == 5  # never reuses a folder across boots


def test_hang_fault_still_mounts(tmp_path):
    bank = EmmcBank(tmp_path)
    bank.set_fault("A", FAULT_HANG)
    bank.set_fault("B", FAULT_HANG)
    outcome = bank.mount_one(random.Random(0), generation=0)
    assert outcome.ready  # the wedge shows later, not at mount time
    assert outcome.device.fault == FAULT_HANG


def test_unknown_fault_rejected():
    with pytest.raises(ValueError):
        EmmcDevice("A", fault="sandstorm")


# -- watchdog ---------------------------------------------------------------------


def test_watchdog_fires_exactly_once():
    dog = Watchdog(SimClock(), timeout=5.0)
    dog.arm(0.0)
    assert not dog.check(5.0)  # deadline is strict
    assert dog.check(5.01)
    assert not dog.check(100.0)  # latched until the reboot re-arms


def test_petting_defers_expiry():
    dog = Watchdog(SimClock(), timeout=5.0)
    dog.arm(0.0)
    for t in (1.0, 2.0, 3.0, 4.0, 5.0, 6.0):
        dog.pet(t)
        assert not dog.check(t + 0.1)
    assert dog.check(11.5)


def test_unarmed_watchdog_never_fires():
    dog = Watchdog(SimClock(), timeout=1.0)
    dog.pet(0.0)  # ignored while disarmed
    assert dog.pets == 0
    assert not dog.check(100.0)


def test_expiry_callback_and_rearm():
    fired = []
    dog = Watchdog(SimClock(), timeout=2.0, on_expire=fired.append)
    dog.arm(0.0)
    dog.check(2.5)
    assert fired == [2.5]
    dog.arm(10.0)  # the post-reboot world arms a fresh countdown
    assert not dog.check(11.0)
    assert dog.check(12.5)
    assert fired == [2.5, 12.5]


# -- start handshake --------------------------------------------------------------------


def test_magic_datagram_selects_flight():
    gate = StartGate(timeout=2.0)
    assert gate.poll(0.0) is None
    assert gate.offer(START_MAGIC)
    assert gate.poll(0.5) == "flight"


def test_timeout_falls_back_to_ground_test():
    gate = StartGate(timeout=2.0)
    gate.poll(0.0)
    assert gate.poll(1.99) is None
    assert gate.poll(2.0) == GROUND_TEST


def test_malformed_datagrams_ignored():
    gate = StartGate(timeout=2.0)
    gate.poll(0.0)
    for junk in (b"", b"SDRMGO!", b"SDRMGO!\n\n", b"\x00" * 8, b"sdrmgo!\n"):
        assert not gate.offer(junk)
    assert gate.ignored == 5
    assert gate.poll(1.0) is None
    assert gate.offer(START_MAGIC)
    assert gate.poll(1.0) == "flight"


def test_late_start_cannot_flip_a_ground_test():
    gate = StartGate(timeout=1.0)
    gate.poll(0.0)
    assert gate.poll(1.5) == GROUND_TEST
    gate.offer(START_MAGIC)
    assert gate.poll(2.0) == GROUND_TEST


# -- health verdict -------------------------------------------------------------------------


def frame(q=0.0, tau=1.0, referenced=True, cycle=0):
    flags = FLAG_REFERENCED if referenced else 0
    return [JointTelemetry(j, q, 0.0, tau, flags, cycle) for j in range(4)]


def window(**overrides):
    frames = [frame(cycle=i) for i in range(20)]
    for index, replacement in overrides.items():
        frames[int(index)] = replacement
    return frames


def test_nominal_window_passes():
    report = check_health(window())
    assert report.ok and report.reason == ""


def test_too_few_samples():
    assert check_health([frame()] * 9).reason == "too_few_samples"


def test_position_limits_and_nan():
    bad = window()
    bad[5] = frame(q=3.0, cycle=5)
    assert check_health(bad).reason == "position_out_of_range"
    bad[5] = frame(q=math.nan, cycle=5)
    assert check_health(bad).reason == "position_out_of_range"


def test_torque_sentinel_and_overload_fail_as_skippable():
    bad = window()
    bad[3] = frame(tau=9999.0, cycle=3)
    report = check_health(bad)
    assert report.reason == "torque_out_of_range"
    assert report.skip_torque_phases
    bad[3] = frame(tau=-60.0, cycle=3)
    assert check_health(bad).reason == "torque_out_of_range"


def test_unreferenced_last_frame_fails_hard():
    bad = window()
    bad[19] = frame(referenced=False, cycle=19)
    report = check_health(bad)
    assert report.reason == "not_referenced"
    assert not report.skip_torque_phases


def test_unreferenced_warmup_is_fine():
    frames = [frame(referenced=(i >= 5), cycle=i) for i in range(20)]
    assert check_health(frames).ok


def test_frozen_counters_fail():
    frames = [frame(cycle=7) for _ in range(20)]
    assert check_health(frames).reason == "stale_telemetry"
