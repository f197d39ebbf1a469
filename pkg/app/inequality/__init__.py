from app.inequality.lab import (
    c_shift,
    kappa_c,
    make_config,
    map_ab,
    rc_membership,
    sbp_inequality_check,
    t_value,
)
from app.inequality.regions import region_scan_ab, region_scan_alphabeta

__all__ = [
    "c_shift",
    "kappa_c",
    "make_config",
    "map_ab",
    "rc_membership",
    "region_scan_ab",
    "region_scan_alphabeta",
    "sbp_inequality_check",
    "t_value",
]
