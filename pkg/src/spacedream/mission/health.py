"""Pre-motion health verdict over a telemetry window.

The torque check deliberately trips on the sensor-invalid sentinel
(9999.0 is far outside +/-50), so a dead torque sensor shows up as
torque_out_of_range. Only that reason is survivable: the mission then
skips torque-dependent phases. Every other reason means the robot state
cannot be trusted and the policy is to reboot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..halsim.plant import HARD_LIMIT

TORQUE_LIMIT = 50.0  # N*m
MIN_SAMPLES = 10

# reasons that gate torque phases only, everything else reboots
SKIP_REASONS = ("torque_out_of_range",)


@dataclass(frozen=True)
class HealthReport:
    ok: bool
    reason: str = ""

    @property
    def skip_torque_phases(self) -> bool:
        return not self.ok and self.reason in SKIP_REASONS


def check_health(samples, *, position_limit: float = HARD_LIMIT,
                 torque_limit: float = TORQUE_LIMIT,
                 min_samples: int = MIN_SAMPLES) -> HealthReport:
    """samples: telemetry frames (lists of per-joint records), oldest first."""
    if len(samples) < min_samples:
        return HealthReport(False, "too_few_samples")

    for frame in samples:
        for joint in frame:
            if not math.isfinite(joint.position) or abs(joint.position) > position_limit:
                return HealthReport(False, "position_out_of_range")
    for frame in samples:
        for joint in frame:
            if not math.isfinite(joint.torque) or abs(joint.torque) > torque_limit:
                return HealthReport(False, "torque_out_of_range")
    # referencing completes during the window, so only the newest frame counts
    if not all(joint.referenced for joint in samples[-1]):
        return HealthReport(False, "not_referenced")
    first, last = samples[0], samples[-1]
    for j in range(len(first)):
        if last[j].cycle_counter <= first[j].cycle_counter:
            return HealthReport(False, "stale_telemetry")
    return HealthReport(True)
