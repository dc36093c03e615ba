"""Constant-rate live video playout over a shared cellular downlink.

Modules
-------
channel     SINR traces, MCS mapping, per-block rate PMFs
queueing    batch-arrival queue with deterministic service (infinite and finite buffer)
playout     maximum constant playout rate and buffer sizing
allocation  frame-ratio policies (equal experience, max users, two classes)
sim         frame-level simulator for constant and adaptive playout
cli         command-line front end
"""

__version__ = "0.1.0"
