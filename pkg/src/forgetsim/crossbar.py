"""Differential-synapse crossbar layers.

Each synapse pairs two devices; its signed weight is the scaled
conductance difference

    W_ij = beta * (G(pos_ij) - G(neg_ij)) / g0_ref,

so a pair programmed anti-symmetrically to (-v, +v) carries W = 2*beta*
slope*v and the synapse is perfectly symmetric around zero even when a
single device is not.  With the default affine conductance map and
g0_ref = g0, weights are bounded to +-beta.

A layer is an n_in x n_out grid of synapses sharing one set of device
parameters, stored as two gate-state matrices (``pos_v``, ``neg_v``).
Reads are analog: the forward read drives input voltages down the rows and
collects per-column currents (a matrix-vector product in disguise); the
transpose read drives the columns instead, which is what backpropagation
consumes.  Both can inject a per-entry Gaussian read error, freshly
sampled on every read.

Writes are programming pulses: ``apply_update`` moves the two gates of a
synapse in opposite directions so the weight changes by exactly the
requested step until a device saturates at +-v_max.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .device import DeviceParams, clamp_gate, conductance, step_discharge_array

# forward reads expect gamma-scaled voltages; anything larger means a
# scaling bug upstream
V_READ_MAX = 0.1
_V_TOL = 1e-12


@dataclass
class ReadErrorModel:
    """Additive Gaussian error on every weight read, in weight units."""

    std: float = 0.0025
    enabled: bool = False

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("read-error std must be non-negative")

    @property
    def active(self) -> bool:
        return self.enabled and self.std > 0


@dataclass
class CurrentMonitor:
    """Records whether any column current ever exceeded the amplifier range.

    The transimpedance amplifier is sized for the worst case
    I_max = n_in * 0.1 V * G(-v_max), so an exceedance signals a
    configuration error; currents are reported, never clamped.
    """

    max_ratio: float = 0.0
    exceedances: int = 0

    def observe(self, currents: np.ndarray, i_max: float) -> None:
        peak = float(np.max(np.abs(currents))) if currents.size else 0.0
        ratio = peak / i_max
        self.max_ratio = max(self.max_ratio, ratio)
        if ratio > 1.0:
            self.exceedances += 1


def synapse_weight(pos_v, neg_v, beta: float, g0_ref: float, params: DeviceParams):
    """Weight of one synapse (or an array of them) from its two gate states."""
    if not g0_ref > 0:
        raise ValueError("g0_ref must be positive")
    return beta * (conductance(pos_v, params) - conductance(neg_v, params)) / g0_ref


class CrossbarLayer:
    """Grid of differential synapses with a shared weight scale beta >= 1."""

    def __init__(
        self,
        n_in: int,
        n_out: int,
        beta: float = 1.0,
        params: DeviceParams | None = None,
        g0_ref: float | None = None,
    ):
        if n_in <= 0 or n_out <= 0:
            raise ValueError("layer dimensions must be positive")
        if beta < 1.0:
            raise ValueError("weight-scale factor beta must be >= 1")
        self.params = params if params is not None else DeviceParams()
        self.beta = float(beta)
        self.g0_ref = float(g0_ref) if g0_ref is not None else self.params.g0
        if not self.g0_ref > 0:
            raise ValueError("g0_ref must be positive")
        # grid dimensions are fixed for the life of the layer
        self.pos_v = np.zeros((n_in, n_out))
        self.neg_v = np.zeros((n_in, n_out))

    # -- geometry ---------------------------------------------------------

    @property
    def n_in(self) -> int:
        return self.pos_v.shape[0]

    @property
    def n_out(self) -> int:
        return self.pos_v.shape[1]

    @property
    def i_max(self) -> float:
        """Amplifier current range: all inputs at 0.1 V into G(-v_max)."""
        return self.n_in * V_READ_MAX * float(
            conductance(-self.params.v_max, self.params)
        )

    # -- reads ------------------------------------------------------------

    def weights(self) -> np.ndarray:
        """Ideal (noise-free) weight matrix, n_in x n_out."""
        return synapse_weight(self.pos_v, self.neg_v, self.beta, self.g0_ref, self.params)

    def read_weights(
        self, noise: ReadErrorModel | None = None, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """One physical read of the weight matrix; fresh errors every call."""
        w = self.weights()
        if noise is not None and noise.active:
            if rng is None:
                raise ValueError("read noise enabled but no rng supplied")
            w = w + rng.normal(0.0, noise.std, w.shape)
        return w

    def _read_weights_stack(self, n: int, noise, rng) -> np.ndarray:
        """n independent reads, shape (n, n_in, n_out); used for per-point reads."""
        w = self.weights()
        if noise is not None and noise.active:
            if rng is None:
                raise ValueError("read noise enabled but no rng supplied")
            return w[None, :, :] + rng.normal(0.0, noise.std, (n,) + w.shape)
        return np.broadcast_to(w, (n,) + w.shape)

    def forward_read(
        self,
        v_in: np.ndarray,
        noise: ReadErrorModel | None = None,
        rng: np.random.Generator | None = None,
        monitor: CurrentMonitor | None = None,
    ) -> np.ndarray:
        """Analog forward pass: input voltages -> output voltages.

        Accepts a single vector (n_in,) or a batch (N, n_in); a batch is
        read point by point, i.e. with independent read errors per point.
        Output i is beta/g0_ref * sum_j V_j (G+_ji - G-_ji), identically
        (V @ W) in volts.
        """
        v = np.asarray(v_in, dtype=float)
        single = v.ndim == 1
        v2 = v[None, :] if single else v
        if v2.ndim != 2 or v2.shape[1] != self.n_in:
            raise ValueError(f"expected input vectors of length {self.n_in}")
        if np.any(np.abs(v2) > V_READ_MAX + _V_TOL):
            raise ValueError(
                f"input voltage exceeds +-{V_READ_MAX} V; inputs must be gamma-scaled"
            )
        if monitor is not None:
            # per-column currents through each half of the pair, worst polarity
            i_pos = v2 @ conductance(self.pos_v, self.params)
            i_neg = v2 @ conductance(self.neg_v, self.params)
            monitor.observe(np.concatenate([i_pos, i_neg]), self.i_max)
        if noise is not None and noise.active:
            stack = self._read_weights_stack(len(v2), noise, rng)
            out = np.einsum("ni,nio->no", v2, stack)
        else:
            out = v2 @ self.weights()
        return out[0] if single else out

    def transpose_read(
        self,
        deltas: np.ndarray,
        noise: ReadErrorModel | None = None,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Reverse read used by backpropagation: returns deltas @ (beta*W)^T.

        Driven through the same physical conductances as the forward read;
        per-point fresh errors when a batch is supplied.
        """
        d = np.asarray(deltas, dtype=float)
        single = d.ndim == 1
        d2 = d[None, :] if single else d
        if d2.ndim != 2 or d2.shape[1] != self.n_out:
            raise ValueError(f"expected delta vectors of length {self.n_out}")
        if noise is not None and noise.active:
            stack = self._read_weights_stack(len(d2), noise, rng)
            out = self.beta * np.einsum("no,nio->ni", d2, stack)
        else:
            out = d2 @ (self.beta * self.weights()).T
        return out[0] if single else out

    # -- writes -----------------------------------------------------------

    def init_random(self, rng: np.random.Generator, init_std_volts: float = 0.2) -> None:
        """Initialize with random, normally distributed programming pulses.

        Pulse targets are drawn N(0, init_std_volts^2), divided by beta,
        then constrained to the +-v_max programming window; each pair is
        programmed anti-symmetrically (neg = -pos).  The division by beta
        makes the initial weight distribution independent of the weight
        scale (up to clamping).
        """
        if not init_std_volts > 0:
            raise ValueError("init_std_volts must be positive")
        target = rng.normal(0.0, init_std_volts, self.pos_v.shape) / self.beta
        target = clamp_gate(target, self.params)
        self.pos_v = np.array(target)
        self.neg_v = -np.array(target)

    def apply_update(self, signs: np.ndarray, eta: float) -> None:
        """Pulse every synapse once according to a {-1, 0, +1} sign matrix.

        The two gates of a synapse move in opposite directions by
        eta / (2*beta*slope) volts, so the weight changes by exactly
        sign*eta until a device saturates at +-v_max.
        """
        if not eta > 0:
            raise ValueError("eta must be positive")
        s = np.asarray(signs, dtype=float)
        if s.shape != self.pos_v.shape:
            raise ValueError("sign matrix shape must match the layer grid")
        if not np.all(np.isin(s, (-1.0, 0.0, 1.0))):
            raise ValueError("signs must be in {-1, 0, +1}")
        dv = eta / (2.0 * self.beta * self.params.slope)
        self.pos_v = clamp_gate(self.pos_v - s * dv, self.params)
        self.neg_v = clamp_gate(self.neg_v + s * dv, self.params)

    def shift_gates(self, dv_pos, dv_neg) -> None:
        """Apply per-device gate shifts (clamped); used by reminder pulses."""
        self.pos_v = clamp_gate(self.pos_v + dv_pos, self.params)
        self.neg_v = clamp_gate(self.neg_v + dv_neg, self.params)

    def program_weight_targets(self, w: np.ndarray) -> None:
        """Program anti-symmetric pairs realizing the given weight matrix.

        Targets outside the programmable range saturate at |W| =
        beta * slope * 2 * v_max.
        """
        w = np.broadcast_to(np.asarray(w, dtype=float), self.pos_v.shape)
        v = -w / (2.0 * self.beta * self.params.slope)
        v = clamp_gate(v, self.params)
        self.pos_v = np.array(v)
        self.neg_v = -np.array(v)

    def discharge(self, dt: float, max_substep_s: float = 1.0) -> None:
        """Advance every device through `dt` seconds of open circuit."""
        self.pos_v = step_discharge_array(self.pos_v, self.params, dt, max_substep_s)
        self.neg_v = step_discharge_array(self.neg_v, self.params, dt, max_substep_s)

    # -- state snapshots ----------------------------------------------------

    def export_state(self, path) -> None:
        """Write the gate-state table as CSV: row, col, pos_v, neg_v."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "pos_v", "neg_v"])
            for i in range(self.n_in):
                for j in range(self.n_out):
                    writer.writerow(
                        [i, j, f"{self.pos_v[i, j]:.12g}", f"{self.neg_v[i, j]:.12g}"]
                    )

    def import_state(self, path) -> None:
        """Restore gate states from an exported table (dimensions must match)."""
        pos = np.full(self.pos_v.shape, np.nan)
        neg = np.full(self.neg_v.shape, np.nan)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                i, j = int(rec["row"]), int(rec["col"])
                if not (0 <= i < self.n_in and 0 <= j < self.n_out):
                    raise ValueError("snapshot does not match layer dimensions")
                pos[i, j] = float(rec["pos_v"])
                neg[i, j] = float(rec["neg_v"])
        if np.any(np.isnan(pos)) or np.any(np.isnan(neg)):
            raise ValueError("snapshot is missing entries for this layer")
        self.pos_v, self.neg_v = pos, neg
