"""Pure numpy implementations of the hot per-step kernels.

Semantics here are the reference; the compiled twin in `_fast.pyx` must
agree bit-for-bit (both operate on float64 / uint8 arrays).
"""

from __future__ import annotations

import numpy as np

KIND_DEPOT = 0
KIND_CUSTOMER = 1
KIND_STATION = 2


def adjacency_matrix(tw_open: np.ndarray, tw_close: np.ndarray,
                     tt: np.ndarray) -> np.ndarray:
    """Binary reachability matrix: a_ij = 1 iff some departure time inside
    i's window arrives inside j's window; self-loops forced to 1."""
    lo = np.maximum(tw_open[:, None], tw_open[None, :] - tt)
    hi = np.minimum(tw_close[:, None], tw_close[None, :] - tt)
    adj = (lo <= hi).astype(np.uint8)
    np.fill_diagonal(adj, 1)
    return adj


def mask_row(kind: np.ndarray, visited: np.ndarray, demands: np.ndarray,
             tw_close: np.ndarray, ec_from_cur: np.ndarray,
             tt_from_cur: np.ndarray, min_onward_ec: np.ndarray,
             rc: float, re: float, clock: float, cur: int,
             prev_was_depot: bool, tw_hard: bool) -> np.ndarray:
    """Infeasibility mask for one vehicle (1 = masked).

    Rules: served customers; demand over remaining cargo; repeat depot
    visit; no recharge point reachable after the move; closed time window
    (customers, when tw_hard); staying in place.
    """
    is_cust = kind == KIND_CUSTOMER
    masked = (is_cust & (visited != 0)) | (demands > rc)
    masked |= re < ec_from_cur + min_onward_ec
    if tw_hard:
        masked |= is_cust & (clock + tt_from_cur > tw_close)
    if prev_was_depot:
        masked |= kind == KIND_DEPOT
    out = masked.astype(np.uint8)
    out[cur] = 1
    return out
