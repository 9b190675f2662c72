"""Layered analog inference on crossbar layers.

Real-valued inputs in [-1, 1] are encoded as voltages by multiplication
with gamma (default 0.1 V), pushed through the crossbars, and squashed
after every layer -- including the last -- by the scaled activation

    f(x) = gamma * tanh(x / gamma),

which an ideal hardware activation circuit would implement.  The final
activations are divided by gamma again to obtain dimensionless outputs in
(-1, 1).  Pre-activations are recorded per layer because training needs
tanh' at every stage.

Networks optionally append a constant bias input of -1 (i.e. -gamma volts)
in front of every layer; single-layer benchmarks instead carry the bias
inside the dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crossbar import CrossbarLayer, CurrentMonitor, ReadErrorModel

_IN_TOL = 1e-12


def activation(x, gamma: float = 0.1):
    """Scaled tanh, odd, |output| < gamma; input and output in volts."""
    return gamma * np.tanh(np.asarray(x, dtype=float) / gamma)


def mse_loss(outputs, targets) -> float:
    """Plain mean of squared errors over all points and output dimensions."""
    y = np.asarray(outputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    if y.shape != t.shape:
        raise ValueError(f"shape mismatch: outputs {y.shape} vs targets {t.shape}")
    return float(np.mean((t - y) ** 2))


@dataclass
class ForwardTrace:
    """Per-layer record of one inference pass (all entries in volts).

    ``inputs_v[l]`` includes the appended bias column when the network uses
    one; ``pre_v`` are the raw crossbar outputs a, ``post_v`` the activated
    f(a) with |post_v| <= gamma.
    """

    inputs_v: list = field(default_factory=list)
    pre_v: list = field(default_factory=list)
    post_v: list = field(default_factory=list)


class Network:
    """Stack of crossbar layers with gamma scaling and optional bias inputs."""

    def __init__(self, layers: list[CrossbarLayer], gamma: float = 0.1, append_bias: bool = False):
        if not layers:
            raise ValueError("need at least one layer")
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.layers = list(layers)
        self.gamma = float(gamma)
        self.append_bias = bool(append_bias)
        extra = 1 if append_bias else 0
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.n_out + extra != b.n_in:
                raise ValueError(
                    f"layer dimensions do not chain: {a.n_out} outputs "
                    f"(+{extra} bias) vs {b.n_in} inputs"
                )

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in - (1 if self.append_bias else 0)

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def infer(
        self,
        raw_inputs: np.ndarray,
        noise: ReadErrorModel | None = None,
        rng: np.random.Generator | None = None,
        monitor: CurrentMonitor | None = None,
    ) -> tuple[np.ndarray, ForwardTrace]:
        """Run the network on dimensionless inputs in [-1, 1].

        Accepts one vector or a batch of rows; returns dimensionless
        outputs of matching arity plus the forward trace (always batched).
        """
        x = np.asarray(raw_inputs, dtype=float)
        single = x.ndim == 1
        h = (x[None, :] if single else x) * self.gamma
        if h.ndim != 2 or h.shape[1] != self.n_in:
            raise ValueError(f"expected inputs of width {self.n_in}")
        if np.any(np.abs(h) > self.gamma + _IN_TOL):
            raise ValueError("raw inputs must lie in [-1, 1]")
        trace = ForwardTrace()
        for layer in self.layers:
            if self.append_bias:
                h = np.hstack([h, np.full((len(h), 1), -self.gamma)])
            trace.inputs_v.append(h)
            a = layer.forward_read(h, noise=noise, rng=rng, monitor=monitor)
            h = activation(a, self.gamma)
            trace.pre_v.append(a)
            trace.post_v.append(h)
        out = h / self.gamma
        return (out[0] if single else out), trace

    def discharge(self, dt: float, max_substep_s: float = 1.0) -> None:
        """Advance every device in every layer through open-circuit time."""
        for layer in self.layers:
            layer.discharge(dt, max_substep_s)

    def weight_matrices(self) -> list[np.ndarray]:
        return [layer.weights() for layer in self.layers]
