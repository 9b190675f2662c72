"""Model-derived reminder pulses that undo self-discharge.

A resting network forgets; but the forgetting is deterministic, so it can
be inverted from a pre-computed calibration map.  The map is built by
simulating a reference synapse from a grid of starting weights
w_start in {0, 0.1, ..., 1} for 20 000 s and tabulating, at log-spaced
times,

    delta(w_current, t) = w_start - w_current(t),

i.e. the correction a synapse showing weight ``w_current`` after ``t``
seconds of unpowered drift needs to return to where it started.  Because
differential pairs are symmetric, only non-negative starts are required;
negative weights use the odd extension.  For a fixed time the
(w_start -> w_current) relation is strictly monotone under this dynamic,
so the map is single-valued; build_map() verifies that and rejects
non-monotone trajectories outright.

The map is keyed on the *device-normalized* weight w = W / beta (the
quantity bounded to [-1, 1] regardless of the layer's weight scale), which
makes one map valid for every beta.  Applying a reminder reads each
synapse's current state, looks up the delta bilinearly in (|w|, t), and
programs the pair by a single anti-symmetric pulse.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .device import DeviceParams, params_to_dict, step_discharge_array
from .network import Network

_W_TOL = 1e-12

W_START_GRID = np.linspace(0.0, 1.0, 11)


def params_hash(params: DeviceParams) -> str:
    """Stable fingerprint of the device parameters a map was built for."""
    blob = json.dumps(params_to_dict(params), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ReminderMap:
    """Tabulated (current weight, elapsed time) -> weight delta.

    times        (n_t,) seconds, ascending, log-spaced over (0, 20000]
    w_current    (n_t, n_w) normalized weight remaining at each time
    delta        (n_t, n_w) = w_starts - w_current, all >= 0
    w_starts     (n_w,) the starting grid (ascending, in [0, 1])
    device_hash  fingerprint of the device parameters used to build
    """

    times: np.ndarray
    w_current: np.ndarray
    delta: np.ndarray
    w_starts: np.ndarray
    device_hash: str = ""

    @property
    def t_max(self) -> float:
        return float(self.times[-1])


def build_map(
    params: DeviceParams,
    w_starts: np.ndarray = W_START_GRID,
    n_time_samples: int = 600,
    t_min_s: float = 0.1,
    t_max_s: float = 20000.0,
) -> ReminderMap:
    """Simulate the start grid through 20 000 s and assemble the map.

    A synapse at normalized weight w is an anti-symmetric pair at gate
    states -+ w / (2*slope); by symmetry it suffices to integrate one
    device per start.  Sampling is logarithmic (default 600 points from
    0.1 s) because corrections change fastest early on.
    """
    w_starts = np.asarray(w_starts, dtype=float)
    if np.any(w_starts < 0) or np.any(w_starts > 1) or np.any(np.diff(w_starts) <= 0):
        raise ValueError("w_starts must be ascending within [0, 1]")
    if n_time_samples < 200:
        raise ValueError("need at least 200 time samples for a usable map")
    times = np.geomspace(t_min_s, t_max_s, n_time_samples)

    v = w_starts / (2.0 * params.slope)
    w_cur = np.empty((len(times), len(w_starts)))
    t_prev = 0.0
    for i, t in enumerate(times):
        v = step_discharge_array(v, params, t - t_prev)
        t_prev = t
        w_cur[i] = 2.0 * params.slope * v

    # single-valuedness: within each time row weights must keep their order,
    # and along time each trajectory must decay monotonically
    if np.any(np.diff(w_cur, axis=1) <= 0):
        raise RuntimeError("trajectories cross: (w_current -> delta) is not single-valued")
    if np.any(np.diff(np.column_stack([w_starts, w_cur.T]), axis=1) > 0):
        raise RuntimeError("non-monotone discharge trajectory; device model is broken")

    delta = w_starts[None, :] - w_cur
    return ReminderMap(
        times=times,
        w_current=w_cur,
        delta=delta,
        w_starts=w_starts.copy(),
        device_hash=params_hash(params),
    )


def lookup(rmap: ReminderMap, w_current, t_since_s: float):
    """Bilinear delta lookup; odd in w, time clamped to the map's grid.

    ``w_current`` may be a scalar or an array (one shared elapsed time);
    magnitudes beyond 1 are rejected as unphysical.
    """
    w = np.asarray(w_current, dtype=float)
    if np.any(np.abs(w) > 1.0 + _W_TOL):
        raise ValueError("|w_current| must not exceed 1")
    t = float(np.clip(t_since_s, rmap.times[0], rmap.times[-1]))
    hi = int(np.searchsorted(rmap.times, t))
    lo = max(hi - 1, 0)
    hi = min(hi, len(rmap.times) - 1)
    aw = np.abs(w)
    d_lo = np.interp(aw, rmap.w_current[lo], rmap.delta[lo])
    d_hi = np.interp(aw, rmap.w_current[hi], rmap.delta[hi])
    if hi == lo:
        d = d_lo
    else:
        frac = (t - rmap.times[lo]) / (rmap.times[hi] - rmap.times[lo])
        d = (1.0 - frac) * d_lo + frac * d_hi
    return np.sign(w) * d


def apply_reminder(
    network: Network,
    rmap: ReminderMap,
    t_since_s: float,
    read_noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> None:
    """One reminder: measure every synapse, pulse it by its looked-up delta.

    The measurement is noise-free by default; a positive
    ``read_noise_std`` perturbs the measured weights (worst-case study),
    with the measurement clipped back into the map's domain.
    """
    for layer in network.layers:
        slope = layer.params.slope
        w_norm = slope * (layer.neg_v - layer.pos_v)  # = W / beta at g0_ref = g0
        if read_noise_std > 0:
            if rng is None:
                raise ValueError("read noise requested but no rng supplied")
            w_norm = np.clip(w_norm + rng.normal(0.0, read_noise_std, w_norm.shape), -1.0, 1.0)
        d = lookup(rmap, w_norm, t_since_s)
        layer.shift_gates(-d / (2.0 * slope), d / (2.0 * slope))


def save_map(rmap: ReminderMap, path) -> None:
    """Serialize as CSV (t_s, w_current, delta) with a device-hash header."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# device_hash: {rmap.device_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["t_s", "w_current", "delta"])
        for i, t in enumerate(rmap.times):
            for j in range(len(rmap.w_starts)):
                writer.writerow(
                    [f"{t:.12g}", f"{rmap.w_current[i, j]:.12g}", f"{rmap.delta[i, j]:.12g}"]
                )


def load_map(path, expected_params: DeviceParams | None = None) -> ReminderMap:
    """Load a serialized map; optionally verify it matches device params."""
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("# device_hash:"):
            raise ValueError("not a reminder-map file (missing device_hash header)")
        device_hash = header.split(":", 1)[1].strip()
        reader = csv.reader(fh)
        next(reader)  # column names
        rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    if expected_params is not None and params_hash(expected_params) != device_hash:
        raise ValueError("map was built for different device parameters")

    times = sorted({r[0] for r in rows})
    n_w = len(rows) // len(times)
    w_cur = np.array([r[1] for r in rows]).reshape(len(times), n_w)
    delta = np.array([r[2] for r in rows]).reshape(len(times), n_w)
    # the starting grid is recoverable: w_start = w_current + delta
    w_starts = w_cur[0] + delta[0]
    return ReminderMap(
        times=np.array(times),
        w_current=w_cur,
        delta=delta,
        w_starts=w_starts,
        device_hash=device_hash,
    )
