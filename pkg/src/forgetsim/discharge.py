"""Open-circuit transients of a whole trained network.

Once training stops, every device drifts back toward its equilibrium and
the encoded weights shrink.  :func:`simulate` advances the network through
open-circuit time and probes the loss on a fixed cadence, mirroring how an
experimenter would monitor a resting chip.  The probes are noise-free
side-channel evaluations; they do not disturb the devices.

A reminder policy may ride along: every ``period_s`` of simulated time it
re-programs the network from the calibration map (see the reminder
module), which is how compensated long-term operation is simulated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .network import Network, mse_loss
from .trace import ExperimentTrace
from .training import classification_accuracy


@dataclass
class ReminderPolicy:
    """Apply a reminder from `rmap` every `period_s` of simulated time."""

    rmap: "forgetsim.reminder.ReminderMap"  # noqa: F821 - forward reference
    period_s: float
    read_noise_std: float = 0.0
    rng: np.random.Generator | None = None
    _since_s: float = field(default=0.0, repr=False)

    def tick(self, network: Network, dt: float) -> bool:
        """Advance the policy clock; fire a reminder when the period elapses."""
        from .reminder import apply_reminder

        self._since_s += dt
        if self._since_s + 1e-9 >= self.period_s:
            apply_reminder(
                network,
                self.rmap,
                self._since_s,
                read_noise_std=self.read_noise_std,
                rng=self.rng,
            )
            self._since_s = 0.0
            return True
        return False


def simulate(
    network: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    duration_s: float,
    eval_interval_s: float = 20.0,
    reminder: Optional[ReminderPolicy] = None,
    on_sample: Optional[Callable[[float, Network], None]] = None,
) -> ExperimentTrace:
    """Let the network self-discharge, probing loss/accuracy periodically.

    Records a row at t = 0 and after every ``eval_interval_s`` of
    open-circuit time (reminders, if any, fire before the probe at their
    multiples).  ``on_sample`` is called at every probe and can be used to
    dump weight snapshots.
    """
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    if not 0 < eval_interval_s <= duration_s:
        raise ValueError("eval_interval_s must lie in (0, duration_s]")

    trace = ExperimentTrace(columns=["t_s", "loss", "accuracy"])

    def probe(t: float) -> None:
        outputs, _ = network.infer(inputs)
        trace.add(t, mse_loss(outputs, np.atleast_2d(targets)),
                  classification_accuracy(outputs, targets))
        if on_sample is not None:
            on_sample(t, network)

    probe(0.0)
    n_steps = int(round(duration_s / eval_interval_s))
    for k in range(1, n_steps + 1):
        network.discharge(eval_interval_s)
        if reminder is not None:
            reminder.tick(network, eval_interval_s)
        probe(k * eval_interval_s)
    return trace
