"""On-device Manhattan-Rule training with error backpropagation.

The training signal never leaves the analog domain's algebra: per data
point n the output layer gets

    delta_i(n) = (t_i(n) - y_i(n)) * tanh'(a_i(n)/gamma),
    Delta_ij(n) = x_j(n) * delta_i(n),

and hidden layers receive their deltas through the crossbar's transpose
read,

    delta_l(n) = (delta_{l+1}(n) @ (beta * W_l)^T) * tanh'(a_l(n)/gamma),

with all quantities dimensionless (gamma-rescaled).  The increments are
aggregated over the whole dataset, reduced to their sign (sgn 0 = 0), and
every synapse is pulsed once per epoch by +-eta -- the Manhattan Rule.
Only the update's sign is data-dependent; its magnitude follows the step
scheduler eta0 * decay^floor((1+epoch)/step_epochs) / beta.

Because updates are physical programming pulses, an epoch advances model
wall time; with ``discharge_between_updates`` the devices self-discharge
for ``update_pulse_s`` seconds after every update cycle, which lets
training and forgetting compete.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crossbar import CrossbarLayer, ReadErrorModel
from .network import ForwardTrace, Network, mse_loss
from .trace import ExperimentTrace


@dataclass
class TrainConfig:
    epochs: int = 100
    eta0: float = 0.03
    decay: float = 0.7
    step_epochs: int = 20
    discharge_between_updates: bool = False
    update_pulse_s: float = 0.1
    read_noise: ReadErrorModel = field(default_factory=ReadErrorModel)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must lie in (0, 1]")
        if self.step_epochs < 1:
            raise ValueError("step_epochs must be >= 1")
        if self.update_pulse_s < 0:
            raise ValueError("update_pulse_s must be non-negative")


def lr_schedule(epoch: int, beta: float, cfg: TrainConfig) -> float:
    """Step-decay learning rate; the 1/beta factor keeps gate pulses fixed."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    return cfg.eta0 * cfg.decay ** ((1 + epoch) // cfg.step_epochs) / beta


def classification_accuracy(outputs, targets) -> float:
    """Fraction of points classified correctly under the +-1 coding.

    Multi-output targets are one-hot over classes (argmax readout); a
    single output is read by its sign.
    """
    y = np.atleast_2d(np.asarray(outputs, dtype=float))
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    if y.shape[1] > 1:
        return float(np.mean(np.argmax(y, axis=1) == np.argmax(t, axis=1)))
    return float(np.mean(np.sign(y) == np.sign(t)))


def output_deltas(
    targets: np.ndarray, trace: ForwardTrace, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    """Output-layer deltas and the increment matrix aggregated over the batch."""
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    y = trace.post_v[-1] / gamma  # = tanh(a/gamma), dimensionless
    if y.shape != t.shape:
        raise ValueError(f"targets {t.shape} do not match outputs {y.shape}")
    delta = (t - y) * (1.0 - y * y)
    x = trace.inputs_v[-1] / gamma
    return delta, x.T @ delta


def hidden_deltas(
    delta_next: np.ndarray,
    layer_next: CrossbarLayer,
    trace: ForwardTrace,
    layer_index: int,
    gamma: float,
    noise: ReadErrorModel | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagate one layer through the transpose read.

    ``layer_index`` addresses the upstream layer receiving the deltas;
    ``layer_next`` is the layer whose (beta * W)^T is traversed.  When the
    network appends bias inputs the extra slot has no upstream neuron and
    its component is dropped.
    """
    up = layer_next.transpose_read(delta_next, noise=noise, rng=rng)
    y = trace.post_v[layer_index] / gamma
    n_neurons = y.shape[1]
    delta = up[:, :n_neurons] * (1.0 - y * y)
    x = trace.inputs_v[layer_index] / gamma
    return delta, x.T @ delta


@dataclass
class StepSummary:
    loss: float  # MSE before this epoch's update
    accuracy: float
    signs: list  # per-layer {-1,0,+1} matrices actually pulsed


def manhattan_step(
    network: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    eta: float,
    noise: ReadErrorModel | None = None,
    rng: np.random.Generator | None = None,
) -> StepSummary:
    """One full-dataset epoch: aggregate increments, pulse every synapse once."""
    if len(np.atleast_2d(inputs)) == 0:
        raise ValueError("dataset must be non-empty")
    outputs, trace = network.infer(inputs, noise=noise, rng=rng)
    loss = mse_loss(outputs, np.atleast_2d(targets))
    acc = classification_accuracy(outputs, targets)

    gamma = network.gamma
    delta, agg = output_deltas(targets, trace, gamma)
    signs = [None] * len(network.layers)
    signs[-1] = np.sign(agg)
    for li in range(len(network.layers) - 2, -1, -1):
        delta, agg = hidden_deltas(
            delta, network.layers[li + 1], trace, li, gamma, noise=noise, rng=rng
        )
        signs[li] = np.sign(agg)
    if eta > 0:
        for layer, s in zip(network.layers, signs):
            layer.apply_update(s, eta)
    return StepSummary(loss=loss, accuracy=acc, signs=signs)


def train(
    network: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> ExperimentTrace:
    """Train for cfg.epochs; returns the per-epoch trace.

    Trace columns: epoch, eta, loss (pre-update), accuracy, and the modeled
    wall time consumed by programming pulses so far.
    """
    beta = network.layers[0].beta
    trace = ExperimentTrace(columns=["epoch", "eta", "loss", "accuracy", "wall_time_model_s"])
    for epoch in range(cfg.epochs):
        eta = lr_schedule(epoch, beta, cfg)
        summary = manhattan_step(
            network, inputs, targets, eta, noise=cfg.read_noise, rng=rng
        )
        if cfg.discharge_between_updates and cfg.update_pulse_s > 0:
            network.discharge(cfg.update_pulse_s)
        trace.add(epoch, eta, summary.loss, summary.accuracy, (epoch + 1) * cfg.update_pulse_s)
    return trace
