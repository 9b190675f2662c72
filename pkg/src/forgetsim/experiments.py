"""Named experiment pipelines with reproducible file outputs.

Every experiment takes a configuration dictionary (merged over its
defaults), runs the corresponding pipeline, and writes into an output
directory:

* ``trace`` CSVs (losses over epochs or seconds, stable formatting),
* ``manifest.json`` -- the experiment name plus the fully resolved
  configuration; feeding a manifest back via ``--config`` re-executes the
  run and reproduces the CSVs byte for byte,
* ``summary.json`` -- headline numbers of the run,
* SVG plots (loss curves; a 100x100 decision-boundary raster for the
  circle task).

The benchmark settings mirror the two reference networks: the single-layer
z/v/n classifier (beta = 1) and the 2-4-2-1 circle regressor (beta = 2).
The beta-study and read-error-study arms hold the physical programming
pulse fixed across beta (eta0 proportional to beta^2 under the 1/beta
schedule), so differing weight scales see the same gate-voltage steps.
"""

from __future__ import annotations

import copy
import json
from dataclasses import replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "forgetsim"

import matplotlib.pyplot as plt
import numpy as np

from .crossbar import CrossbarLayer, ReadErrorModel
from .datasets import make_circle, make_zvn
from .device import (
    DecayTarget,
    DeviceParams,
    DEFAULT_CALIBRATION_TARGETS,
    calibrate_discharge,
    discharge_solution,
    params_from_dict,
    params_to_dict,
)
from .discharge import ReminderPolicy, simulate
from .network import Network, mse_loss
from .reminder import apply_reminder, build_map, save_map
from .trace import ExperimentTrace
from .training import TrainConfig, train

_ZVN_NETWORK = {
    "sizes": [10, 3],
    "beta": 1.0,
    "gamma": 0.1,
    "append_bias": False,
    "init_std_volts": 0.05,
}
_CIRCLE_NETWORK = {
    "sizes": [2, 4, 2, 1],
    "beta": 2.0,
    "gamma": 0.1,
    "append_bias": True,
    "init_std_volts": 0.7,
}
_CIRCLE_DATASET = {"n_points": 100, "seed": 1}

DEFAULTS: dict[str, dict] = {
    "zvn-train": {
        "device": {},
        "network": dict(_ZVN_NETWORK),
        "train": {"epochs": 10, "eta0": 0.03, "decay": 0.7, "step_epochs": 20},
        "seeds": [0, 1, 2, 3, 4],
    },
    "zvn-discharge": {
        "device": {},
        "network": dict(_ZVN_NETWORK),
        "train": {"epochs": 10, "eta0": 0.03, "decay": 0.7, "step_epochs": 20},
        "seeds": [0, 1, 2, 3, 4],
        "discharge": {"duration_s": 36000.0, "eval_interval_s": 20.0, "oxygen_frac": 1.0},
    },
    "circle-train": {
        "device": {},
        "dataset": dict(_CIRCLE_DATASET),
        "network": dict(_CIRCLE_NETWORK),
        "train": {"epochs": 150, "eta0": 0.12, "decay": 0.7, "step_epochs": 20},
        "seeds": [0, 1, 2, 3, 4],
        "raster_seed": 1,
    },
    "circle-discharge": {
        "device": {},
        "dataset": dict(_CIRCLE_DATASET),
        "network": dict(_CIRCLE_NETWORK),
        "train": {"epochs": 150, "eta0": 0.12, "decay": 0.7, "step_epochs": 20},
        "seed": 1,
        "discharge": {
            "duration_s": 1200.0,
            "eval_interval_s": 20.0,
            "oxygen_fracs": [1.0, 0.1],
        },
    },
    "circle-remind": {
        "device": {},
        "dataset": dict(_CIRCLE_DATASET),
        "network": dict(_CIRCLE_NETWORK),
        "train": {"epochs": 150, "eta0": 0.12, "decay": 0.7, "step_epochs": 20},
        "seed": 1,
        "remind": {
            "free_s": 1200.0,
            "compensated_s": 3600.0,
            "period_s": 100.0,
            "eval_interval_s": 20.0,
            "read_noise_std": 0.0,
        },
        "map": {"n_time_samples": 600, "t_min_s": 0.1, "t_max_s": 20000.0},
    },
    "beta-study": {
        "device": {},
        "dataset": dict(_CIRCLE_DATASET),
        "network": {k: v for k, v in _CIRCLE_NETWORK.items() if k != "beta"},
        "train": {"epochs": 150, "decay": 0.7, "step_epochs": 20, "update_pulse_s": 3.0},
        "arms": [{"beta": 2.0, "eta0": 0.12}, {"beta": 4.0, "eta0": 0.48}],
        "seeds": [0, 1, 2],
    },
    "read-error-study": {
        "device": {},
        "dataset": dict(_CIRCLE_DATASET),
        "network": {k: v for k, v in _CIRCLE_NETWORK.items() if k != "beta"},
        "train": {"epochs": 100, "decay": 0.7, "step_epochs": 20},
        "arms": [{"beta": 2.0, "eta0": 0.12}, {"beta": 4.0, "eta0": 0.48}],
        "init_seed": 1,
        "run_seeds": [0, 1, 2],
        "noise_std": 0.0025,
        "band_window": [40, 60],
    },
    "calibrate-device": {"targets": None},
    "build-map": {
        "device": {},
        "map": {"n_time_samples": 600, "t_min_s": 0.1, "t_max_s": 20000.0},
    },
}


# ---------------------------------------------------------------------------
# plumbing


def _merge(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        out = dict(base)
        for k, v in override.items():
            out[k] = _merge(base[k], v) if k in base else v
        return out
    return copy.deepcopy(override)


def resolve_config(name: str, config: dict | None) -> dict:
    if name not in DEFAULTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(DEFAULTS)}")
    cfg = copy.deepcopy(DEFAULTS[name])
    if config:
        unknown = set(config) - set(cfg)
        if unknown:
            raise ValueError(f"invalid config keys for {name}: {sorted(unknown)}")
        cfg = _merge(cfg, config)
    return cfg


def _device_params(cfg: dict) -> DeviceParams:
    base = params_to_dict(DeviceParams())
    base.update(cfg.get("device", {}))
    return params_from_dict(base)


def _build_network(net_cfg: dict, params: DeviceParams, seed: int) -> Network:
    sizes = list(net_cfg["sizes"])
    bias = bool(net_cfg["append_bias"])
    beta = float(net_cfg["beta"])
    rng = np.random.default_rng(seed)
    layers = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layer = CrossbarLayer(a + (1 if bias else 0), b, beta=beta, params=params)
        layer.init_random(rng, net_cfg["init_std_volts"])
        layers.append(layer)
    return Network(layers, gamma=net_cfg["gamma"], append_bias=bias)


def _train_config(train_cfg: dict, noise: ReadErrorModel | None = None) -> TrainConfig:
    kw = dict(train_cfg)
    if noise is not None:
        kw["read_noise"] = noise
    return TrainConfig(**kw)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, name: str, cfg: dict) -> None:
    _write_json(out / "manifest.json", {"experiment": name, "config": cfg})


def _loss_plot(path: Path, curves: dict, xlabel: str, title: str, logy: bool = True) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in curves.items():
        ax.plot(x, y, label=label, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("MSE loss")
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def decision_grid(network: Network, n: int = 100) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Network output over an n x n grid spanning the input square."""
    axis = np.linspace(-1.0, 1.0, n)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    out, _ = network.infer(pts)
    return xx, yy, out[:, 0].reshape(n, n)


def _raster_plot(path: Path, network: Network, X: np.ndarray, T: np.ndarray) -> None:
    xx, yy, zz = decision_grid(network)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.pcolormesh(xx, yy, zz, cmap="RdBu_r", vmin=-1, vmax=1, shading="auto")
    inside = T[:, 0] > 0
    ax.scatter(X[inside, 0], X[inside, 1], c="darkred", s=12, label="inside")
    ax.scatter(X[~inside, 0], X[~inside, 1], c="navy", s=12, label="outside")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title("decision boundary")
    fig.colorbar(im, ax=ax, label="output")
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _first_epoch_below(trace: ExperimentTrace, threshold: float):
    losses = trace.column("loss")
    hits = np.nonzero(losses <= threshold)[0]
    return int(trace.column("epoch")[hits[0]]) if hits.size else None


def _first_epoch_perfect(trace: ExperimentTrace):
    accs = trace.column("accuracy")
    hits = np.nonzero(accs >= 1.0)[0]
    return int(trace.column("epoch")[hits[0]]) if hits.size else None


# ---------------------------------------------------------------------------
# pipelines


def exp_zvn_train(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    X, T = make_zvn()
    curves, summary = {}, {"first_perfect_epoch": {}, "final_loss": {}}
    for seed in cfg["seeds"]:
        net = _build_network(cfg["network"], params, seed)
        trace = train(net, X, T, _train_config(cfg["train"]))
        trace.to_csv(out / f"train_seed{seed}.csv")
        curves[f"seed {seed}"] = (trace.column("epoch"), trace.column("loss"))
        summary["first_perfect_epoch"][str(seed)] = _first_epoch_perfect(trace)
        summary["final_loss"][str(seed)] = trace.final("loss")
    _loss_plot(out / "loss.svg", curves, "epoch", "letter classification training")
    return summary


def exp_zvn_discharge(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    dis = cfg["discharge"]
    run_params = replace(params, oxygen_frac=dis["oxygen_frac"])
    X, T = make_zvn()
    curves, summary = {}, {"min_accuracy": {}, "loss_start": {}, "loss_end": {}}
    for seed in cfg["seeds"]:
        net = _build_network(cfg["network"], run_params, seed)
        train(net, X, T, _train_config(cfg["train"]))
        trace = simulate(net, X, T, dis["duration_s"], dis["eval_interval_s"])
        trace.to_csv(out / f"discharge_seed{seed}.csv")
        curves[f"seed {seed}"] = (trace.column("t_s") / 3600.0, trace.column("loss"))
        summary["min_accuracy"][str(seed)] = float(trace.column("accuracy").min())
        summary["loss_start"][str(seed)] = trace.rows[0][1]
        summary["loss_end"][str(seed)] = trace.final("loss")
    _loss_plot(out / "loss.svg", curves, "hours at open circuit", "letter network self-discharge")
    return summary


def exp_circle_train(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    X, T = make_circle(cfg["dataset"]["n_points"], cfg["dataset"]["seed"])
    curves, summary = {}, {"first_epoch_at_0.05": {}, "final_loss": {}}
    for seed in cfg["seeds"]:
        net = _build_network(cfg["network"], params, seed)
        trace = train(net, X, T, _train_config(cfg["train"]))
        trace.to_csv(out / f"train_seed{seed}.csv")
        curves[f"seed {seed}"] = (trace.column("epoch"), trace.column("loss"))
        summary["first_epoch_at_0.05"][str(seed)] = _first_epoch_below(trace, 0.05)
        summary["final_loss"][str(seed)] = trace.final("loss")
        if seed == cfg["raster_seed"]:
            _raster_plot(out / "decision_boundary.svg", net, X, T)
    _loss_plot(out / "loss.svg", curves, "epoch", "circle regression training")
    return summary


def _trained_circle_network(cfg: dict, params: DeviceParams, seed: int) -> Network:
    X, T = make_circle(cfg["dataset"]["n_points"], cfg["dataset"]["seed"])
    net = _build_network(cfg["network"], params, seed)
    train(net, X, T, _train_config(cfg["train"]))
    return net


def exp_circle_discharge(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    X, T = make_circle(cfg["dataset"]["n_points"], cfg["dataset"]["seed"])
    trained = _trained_circle_network(cfg, params, cfg["seed"])
    dis = cfg["discharge"]
    curves, summary = {}, {"trained_loss": None, "final_loss": {}}
    for q in dis["oxygen_fracs"]:
        net = copy.deepcopy(trained)
        run_params = replace(params, oxygen_frac=q)
        for layer in net.layers:
            layer.params = run_params
        trace = simulate(net, X, T, dis["duration_s"], dis["eval_interval_s"])
        tag = f"o2_{int(round(100 * q))}"
        trace.to_csv(out / f"discharge_{tag}.csv")
        curves[f"oxygen {q:g}"] = (trace.column("t_s") / 60.0, trace.column("loss"))
        summary["trained_loss"] = trace.rows[0][1]
        summary["final_loss"][f"{q:g}"] = trace.final("loss")
    _loss_plot(out / "loss.svg", curves, "minutes at open circuit", "circle network self-discharge")
    return summary


def exp_circle_remind(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    X, T = make_circle(cfg["dataset"]["n_points"], cfg["dataset"]["seed"])
    net = _trained_circle_network(cfg, params, cfg["seed"])
    rmap = build_map(params, **{k: cfg["map"][k] for k in ("n_time_samples", "t_min_s", "t_max_s")})
    rem = cfg["remind"]
    rng = np.random.default_rng(cfg["seed"]) if rem["read_noise_std"] > 0 else None

    free = simulate(net, X, T, rem["free_s"], rem["eval_interval_s"])
    free.to_csv(out / "remind_free.csv")
    apply_reminder(net, rmap, rem["free_s"], rem["read_noise_std"], rng)
    out0, _ = net.infer(X)
    first_loss = mse_loss(out0, T)

    policy = ReminderPolicy(rmap, rem["period_s"], rem["read_noise_std"], rng)
    comp = simulate(net, X, T, rem["compensated_s"], rem["eval_interval_s"], reminder=policy)
    shifted = ExperimentTrace(columns=comp.columns)
    for row in comp.rows:
        shifted.rows.append((row[0] + rem["free_s"],) + row[1:])
    shifted.to_csv(out / "remind_compensated.csv")

    curves = {
        "free decay": (free.column("t_s") / 60.0, free.column("loss")),
        "reminded": (shifted.column("t_s") / 60.0, shifted.column("loss")),
    }
    _loss_plot(out / "loss.svg", curves, "minutes", "reminder compensation")
    return {
        "loss_before_first_reminder": free.final("loss"),
        "loss_after_first_reminder": first_loss,
        "max_loss_compensated": float(comp.column("loss").max()),
    }


def exp_beta_study(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    X, T = make_circle(cfg["dataset"]["n_points"], cfg["dataset"]["seed"])
    table = ExperimentTrace(columns=["row", "beta", "seed", "ideal_final", "discharged_final"])
    curves = {}
    summary = {"mean_discharged_final": {}, "mean_ideal_final": {}}
    row = 0
    for arm in cfg["arms"]:
        net_cfg = dict(cfg["network"], beta=arm["beta"])
        finals_i, finals_d = [], []
        for seed in cfg["seeds"]:
            ideal_cfg = _train_config(dict(cfg["train"], eta0=arm["eta0"], update_pulse_s=0.0))
            dis_cfg = _train_config(
                dict(cfg["train"], eta0=arm["eta0"], discharge_between_updates=True)
            )
            net_i = _build_network(net_cfg, params, seed)
            tr_i = train(net_i, X, T, ideal_cfg)
            net_d = _build_network(net_cfg, params, seed)
            tr_d = train(net_d, X, T, dis_cfg)
            finals_i.append(tr_i.final("loss"))
            finals_d.append(tr_d.final("loss"))
            table.add(row, arm["beta"], seed, tr_i.final("loss"), tr_d.final("loss"))
            row += 1
            if seed == cfg["seeds"][0]:
                curves[f"beta {arm['beta']:g} ideal"] = (tr_i.column("epoch"), tr_i.column("loss"))
                curves[f"beta {arm['beta']:g} discharged"] = (
                    tr_d.column("epoch"),
                    tr_d.column("loss"),
                )
        summary["mean_ideal_final"][f"{arm['beta']:g}"] = float(np.mean(finals_i))
        summary["mean_discharged_final"][f"{arm['beta']:g}"] = float(np.mean(finals_d))
    table.to_csv(out / "finals.csv")
    _loss_plot(out / "loss.svg", curves, "epoch", "weight scale vs. discharge during training")
    return summary


def exp_read_error_study(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    X, T = make_circle(cfg["dataset"]["n_points"], cfg["dataset"]["seed"])
    noise = ReadErrorModel(std=cfg["noise_std"], enabled=True)
    lo, hi = cfg["band_window"]
    curves = {}
    summary = {"band_width": {}, "final_loss": {}}
    fig, ax = plt.subplots(figsize=(6, 4))
    for arm in cfg["arms"]:
        net_cfg = dict(cfg["network"], beta=arm["beta"])
        runs = []
        for run_seed in cfg["run_seeds"]:
            net = _build_network(net_cfg, params, cfg["init_seed"])
            tr = train(
                net,
                X,
                T,
                _train_config(dict(cfg["train"], eta0=arm["eta0"]), noise),
                rng=np.random.default_rng(run_seed),
            )
            runs.append(tr.column("loss"))
        A = np.vstack(runs)
        epochs = np.arange(A.shape[1])
        band = ExperimentTrace(columns=["epoch", "mean_loss", "min_loss", "max_loss"])
        for e in epochs:
            band.add(int(e), float(A[:, e].mean()), float(A[:, e].min()), float(A[:, e].max()))
        tag = f"beta{arm['beta']:g}"
        band.to_csv(out / f"band_{tag}.csv")
        width = float(np.mean(A.max(axis=0)[lo : hi + 1] - A.min(axis=0)[lo : hi + 1]))
        summary["band_width"][f"{arm['beta']:g}"] = width
        summary["final_loss"][f"{arm['beta']:g}"] = [float(v) for v in A[:, -1]]
        ax.plot(epochs, A.mean(axis=0), lw=1.4, label=f"beta {arm['beta']:g} mean")
        ax.fill_between(epochs, A.min(axis=0), A.max(axis=0), alpha=0.3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE loss")
    ax.set_yscale("log")
    ax.set_title("training under read error (3 runs per beta)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "bands.svg", format="svg", metadata={"Date": None})
    plt.close(fig)
    return summary


def exp_calibrate_device(cfg: dict, out: Path) -> dict:
    if cfg["targets"] is None:
        targets = DEFAULT_CALIBRATION_TARGETS
    else:
        targets = tuple(DecayTarget(**t) for t in cfg["targets"])
    params = calibrate_discharge(targets)
    _write_json(out / "device_params.json", params_to_dict(params))

    trace = ExperimentTrace(columns=["t_s", "v_from_0.5", "v_from_0.25"])
    for t in np.arange(0.0, 600.0 + 1, 20.0):
        trace.add(
            float(t),
            float(discharge_solution(0.5, params, t)),
            float(discharge_solution(0.25, params, t)),
        )
    trace.to_csv(out / "decay_curves.csv")
    curves = {
        "v0 = 0.5 V": (trace.column("t_s"), trace.column("v_from_0.5")),
        "v0 = 0.25 V": (trace.column("t_s"), trace.column("v_from_0.25")),
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in curves.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel("seconds at open circuit")
    ax.set_ylabel("gate state (V)")
    ax.set_title("calibrated self-discharge")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "decay.svg", format="svg", metadata={"Date": None})
    plt.close(fig)
    return {
        "k_shuttle": params.k_shuttle,
        "v_tafel": params.v_tafel,
        "decay_600s_from_0.5": 0.5 - float(discharge_solution(0.5, params, 600.0)),
        "decay_600s_from_0.25": 0.25 - float(discharge_solution(0.25, params, 600.0)),
    }


def exp_build_map(cfg: dict, out: Path) -> dict:
    params = _device_params(cfg)
    rmap = build_map(params, **{k: cfg["map"][k] for k in ("n_time_samples", "t_min_s", "t_max_s")})
    save_map(rmap, out / "reminder_map.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    for t in (10.0, 100.0, 1000.0, 20000.0):
        idx = int(np.searchsorted(rmap.times, t))
        idx = min(idx, len(rmap.times) - 1)
        ax.plot(
            rmap.w_current[idx],
            rmap.delta[idx],
            marker="o",
            ms=3,
            label=f"t = {rmap.times[idx]:.0f} s",
        )
    ax.set_xlabel("current weight")
    ax.set_ylabel("reminder delta")
    ax.set_title("reminder calibration map")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "map.svg", format="svg", metadata={"Date": None})
    plt.close(fig)
    from .reminder import lookup

    return {
        "device_hash": rmap.device_hash,
        "delta_w1_t20000": float(lookup(rmap, 1.0, 20000.0)),
        "n_time_samples": len(rmap.times),
    }


EXPERIMENTS = {
    "zvn-train": exp_zvn_train,
    "zvn-discharge": exp_zvn_discharge,
    "circle-train": exp_circle_train,
    "circle-discharge": exp_circle_discharge,
    "circle-remind": exp_circle_remind,
    "beta-study": exp_beta_study,
    "read-error-study": exp_read_error_study,
    "calibrate-device": exp_calibrate_device,
    "build-map": exp_build_map,
}


def run_experiment(name: str, config: dict | None = None, out_dir=None) -> dict:
    """Execute a named pipeline; returns (and writes) its summary."""
    cfg = resolve_config(name, config)
    out = Path(out_dir) if out_dir is not None else Path("runs") / name
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, name, cfg)
    summary = EXPERIMENTS[name](cfg, out)
    _write_json(out / "summary.json", summary)
    return summary
