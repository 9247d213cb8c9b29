"""Canonical feature-CSV schema emitted by the adapter.

Column order is a wire contract with the downstream toolkit and must not
change; the downstream golden-file test pins it bit-exactly.
"""

from __future__ import annotations

AU_COLUMNS = (
    "au01", "au02", "au04", "au05", "au06", "au07", "au09", "au10",
    "au12", "au14", "au15", "au17", "au20", "au23", "au25", "au26",
)

JOINT_COLUMNS = (
    "lsho_x", "lsho_y", "lelb_x", "lelb_y", "lwri_x", "lwri_y",
    "rsho_x", "rsho_y", "relb_x", "relb_y", "rwri_x", "rwri_y",
)

CSV_COLUMNS = (
    "frame", "timestamp", "tracking_ok",
    *AU_COLUMNS,
    "head_rx", "head_rz", "mouth_h", "mouth_v",
    *JOINT_COLUMNS,
    "head_height", "mdiff_l", "mdiff_r",
)

N_COLUMNS = len(CSV_COLUMNS)
