"""Desk-scale on-board mission software simulation.

A message bus, process supervisor, simulated robot arm with a 100 Hz
controller, camera server, mission sequencer with watchdog/storage fault
recovery, telemetry recorder, and an acknowledgement-free prioritized
downlink file transfer with a lossy-channel simulator and ground receiver.
"""

__version__ = "0.1.0"
