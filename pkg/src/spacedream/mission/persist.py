"""State that must survive reboots.

Three files in one directory: `boot_generation` (decimal counter),
`hdrm_released` (flag file, content "1"), and `plant.bin` (simulated
robot pose, written by the reboot path). All writes go through a temp
file and rename so a power cut mid-write never leaves a torn value.
"""

from __future__ import annotations

import os
from pathlib import Path

from ..halsim.plant import PlantState, load_plant, save_plant


class StateStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._gen_path = self.root / "boot_generation"
        self._hdrm_path = self.root / "hdrm_released"
        self.plant_path = self.root / "plant.bin"

    def _write_atomic(self, path: Path, text: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)

    # -- boot generation -----------------------------------------------------

    @property
    def boot_generation(self) -> int:
        try:
            return int(self._gen_path.read_text())
        except (FileNotFoundError, ValueError):
            return 0

    def bump_boot_generation(self) -> int:
        """Increment and persist; returns the new generation."""
        new = self.boot_generation + 1
        self._write_atomic(self._gen_path, f"{new}\n")
        return new

    # -- one-shot HDRM flag ----------------------------------------------------

    @property
    def hdrm_released(self) -> bool:
        return self._hdrm_path.exists()

    def mark_hdrm_released(self) -> None:
        self._write_atomic(self._hdrm_path, "1\n")

    # -- plant pose --------------------------------------------------------------

    def save_plant(self, state: PlantState) -> None:
        save_plant(state, str(self.plant_path))

    def load_plant(self) -> PlantState | None:
        """Persisted pose from the previous boot, None on first boot."""
        try:
            return load_plant(str(self.plant_path))
        except FileNotFoundError:
            return None
