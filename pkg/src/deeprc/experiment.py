"""Simulation harness: open-loop initialization, three control arms, exports.

One experiment simulates the same plant under three arms sharing identical
disturbance and noise realizations: the per-period controller, the raw-domain
baseline controller, and a no-control arm that applies zero input throughout.
Controlled arms are driven open loop with white-noise excitation for the
initialization phase and hand over to their controller at the enable
boundary.  Per-period quadratic costs, CSV logs, and overview plots mirror
the report produced for a run.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .controller import (CLDeePCController, DeePRCController, OcpConfig,
                         iteration_cost)
from .hankel import DEFAULT_RANK_TOL
from .lifting import lift_signal
from .plant import LptvPlant, TrajectoryLog

ARM_NAMES = ("deeprc", "baseline", "nocontrol")


def case_study_config_path() -> Path:
    """Path of the bundled case-study configuration."""
    return Path(resources.files("deeprc").joinpath("configs/case_study.json"))


@dataclass
class ControllerSettings:
    """Shared controller parameters, stated in periods and per raw channel."""

    past_periods: int = 1
    horizon_periods: int = 2
    output_weight: float = 100.0
    input_weight: float = 1.0
    input_bound: float | None = 10.0
    output_bound: float | None = 20.0
    slack_penalty: float = 1e6
    policy: str = "full-period"
    rank_tol: float = DEFAULT_RANK_TOL
    max_columns: int | None = None


@dataclass
class ExperimentConfig:
    plant: LptvPlant
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    noise_variance: float = 0.05
    excitation_variance: float = 1.0
    init_periods: int = 1000
    run_periods: int = 100
    seed: int = 0
    noise_enabled: bool = True
    disturbance_scale: float = 1.0
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.init_periods < 1 or self.run_periods < 0:
            raise ValueError(
                f"phase lengths must be positive, got init_periods={self.init_periods}, "
                f"run_periods={self.run_periods}"
            )
        if self.noise_variance < 0 or self.excitation_variance < 0:
            raise ValueError("variances must be nonnegative")
        if self.x0 is None:
            self.x0 = np.zeros(self.plant.n)
        else:
            self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
            if self.x0.shape[0] != self.plant.n:
                raise ValueError(
                    f"x0 has length {self.x0.shape[0]}, expected {self.plant.n}"
                )

    @classmethod
    def from_mapping(cls, config: dict, **overrides) -> "ExperimentConfig":
        plant = LptvPlant.from_config(config)
        ctrl_map = dict(config.get("controller", {}))
        exp_map = dict(config.get("experiment", {}))
        ctrl_over = {k: overrides.pop(k) for k in list(overrides)
                     if k in ControllerSettings.__dataclass_fields__}
        ctrl_map.update(ctrl_over)
        exp_map.update(overrides)
        controller = ControllerSettings(**ctrl_map)
        return cls(plant=plant, controller=controller, **exp_map)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        with open(Path(path), "r", encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh), **overrides)

    @classmethod
    def case_study(cls, **overrides) -> "ExperimentConfig":
        return cls.from_file(case_study_config_path(), **overrides)

    def lifted_weights(self):
        """Per-period cost weights used for the iteration-cost series."""
        P = self.plant.period
        Q = self.controller.output_weight * np.eye(self.plant.l * P)
        R = self.controller.input_weight * np.eye(self.plant.r * P)
        return Q, R


@dataclass
class ArmResult:
    name: str
    log: TrajectoryLog
    iteration_costs: np.ndarray


@dataclass
class RunReport:
    period: int
    enable_index: int
    arms: dict
    metadata: dict

    def arm(self, name: str) -> ArmResult:
        return self.arms[name]


class _PlantSession:
    """Steps one arm's plant against the shared disturbance/noise realizations."""

    def __init__(self, plant: LptvPlant, x0, d_seq, e_seq):
        self.plant = plant
        self.d_seq = d_seq
        self.e_seq = e_seq
        self.k = 0
        self.x = np.asarray(x0, dtype=float).reshape(-1).copy()
        self._x_log = []
        self._u_log = []
        self._y_log = []

    def apply(self, u_samples) -> np.ndarray:
        u_samples = np.atleast_2d(np.asarray(u_samples, dtype=float))
        out = np.empty((u_samples.shape[0], self.plant.l))
        for idx, u in enumerate(u_samples):
            self._x_log.append(self.x.copy())
            self._u_log.append(u.copy())
            self.x, y = self.plant._step(self.x, u, self.d_seq[self.k],
                                         self.e_seq[self.k], self.k)
            self._y_log.append(y)
            out[idx] = y
            self.k += 1
        return out

    def to_log(self) -> TrajectoryLog:
        T = self.k
        return TrajectoryLog(
            start_index=0,
            x=np.asarray(self._x_log),
            u=np.asarray(self._u_log),
            d=self.d_seq[:T].copy(),
            e=self.e_seq[:T].copy(),
            y=np.asarray(self._y_log),
            final_state=self.x.copy(),
        )


def _controller_pair(cfg: ExperimentConfig):
    plant = cfg.plant
    P, r, l = plant.period, plant.r, plant.l
    cs = cfg.controller
    u_lo = None if cs.input_bound is None else -cs.input_bound
    y_lo = None if cs.output_bound is None else -cs.output_bound
    lifted_cfg = OcpConfig(
        dim_u=r * P, dim_y=l * P,
        horizon=cs.horizon_periods, past_window=cs.past_periods,
        Q=cs.output_weight, R=cs.input_weight,
        u_min=u_lo, u_max=cs.input_bound,
        y_min=y_lo, y_max=cs.output_bound,
        slack_penalty=cs.slack_penalty,
    )
    raw_cfg = OcpConfig(
        dim_u=r, dim_y=l,
        horizon=cs.horizon_periods * P, past_window=cs.past_periods * P,
        Q=cs.output_weight, R=cs.input_weight,
        u_min=u_lo, u_max=cs.input_bound,
        y_min=y_lo, y_max=cs.output_bound,
        slack_penalty=cs.slack_penalty,
    )
    deeprc = DeePRCController(P, r, l, lifted_cfg, policy=cs.policy,
                              rank_tol=cs.rank_tol, max_columns=cs.max_columns)
    baseline = CLDeePCController(P, r, l, raw_cfg, rank_tol=cs.rank_tol,
                                 max_columns=cs.max_columns)
    return deeprc, baseline


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Simulate the three arms with shared realizations and collect the report."""
    plant = cfg.plant
    P, r, l, m = plant.period, plant.r, plant.l, plant.m
    t_init = cfg.init_periods * P
    t_run = cfg.run_periods * P
    t_total = t_init + t_run

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    noise_rng = np.random.Generator(np.random.Philox(seeds[0]))
    excitation_rng = np.random.Generator(np.random.Philox(seeds[1]))
    if cfg.noise_enabled and cfg.noise_variance > 0:
        e_seq = noise_rng.normal(0.0, np.sqrt(cfg.noise_variance), (t_total, l))
    else:
        e_seq = np.zeros((t_total, l))
    k_axis = np.arange(t_total)
    d_seq = np.repeat(
        (cfg.disturbance_scale * np.sin(2.0 * np.pi * (k_axis % P) / P))[:, None],
        m, axis=1,
    )
    u_init = excitation_rng.normal(0.0, np.sqrt(cfg.excitation_variance), (t_init, r))

    deeprc_ctrl, baseline_ctrl = _controller_pair(cfg)

    # no-control arm: zero input from the very start
    session = _PlantSession(plant, cfg.x0, d_seq, e_seq)
    session.apply(np.zeros((t_total, r)))
    logs = {"nocontrol": session.to_log()}

    n_columns_at_enable = {}
    for name, ctrl in (("deeprc", deeprc_ctrl), ("baseline", baseline_ctrl)):
        session = _PlantSession(plant, cfg.x0, d_seq, e_seq)
        y_init = session.apply(u_init)
        ctrl.ingest(u_init, y_init)
        n_columns_at_enable[name] = ctrl.data_columns
        while session.k < t_total:
            ctrl.step(session.apply)
        logs[name] = session.to_log()

    Q, R = cfg.lifted_weights()
    arms = {}
    for name in ARM_NAMES:
        log = logs[name]
        u_lifted = lift_signal(log.u, P)
        y_lifted = lift_signal(log.y, P)
        costs = np.array([
            iteration_cost(y_lifted[j], u_lifted[j], Q, R)
            for j in range(u_lifted.shape[0])
        ])
        arms[name] = ArmResult(name=name, log=log, iteration_costs=costs)

    metadata = {
        "seed": cfg.seed,
        "x0": cfg.x0.tolist(),
        "policy": cfg.controller.policy,
        "init_periods": cfg.init_periods,
        "run_periods": cfg.run_periods,
        "noise_enabled": bool(cfg.noise_enabled),
        "noise_variance": cfg.noise_variance,
        "input_bound": cfg.controller.input_bound,
        "output_bound": cfg.controller.output_bound,
        "predictor_columns_at_enable": n_columns_at_enable,
        "rng": "philox (numpy), streams spawned from the run seed",
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    return RunReport(period=P, enable_index=t_init, arms=arms, metadata=metadata)


# -- exports ---------------------------------------------------------------


def _signal_columns(prefix: str, width: int):
    if width == 1:
        return [prefix]
    return [f"{prefix}{i + 1}" for i in range(width)]


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def export_csv(report: RunReport, out_dir) -> list:
    """Write one trajectory CSV per arm plus the iteration-cost CSV.

    Floating-point values carry 17 significant digits so parsing the files
    reproduces the stored doubles exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ARM_NAMES:
        log = report.arm(name).log
        path = out_dir / f"trajectory_{name}.csv"
        header = (["k"] + _signal_columns("u", log.u.shape[1])
                  + _signal_columns("y", log.y.shape[1])
                  + _signal_columns("d", log.d.shape[1])
                  + _signal_columns("e", log.e.shape[1]))
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                for t in range(len(log)):
                    row = [str(log.start_index + t)]
                    row += [_fmt(v) for v in log.u[t]]
                    row += [_fmt(v) for v in log.y[t]]
                    row += [_fmt(v) for v in log.d[t]]
                    row += [_fmt(v) for v in log.e[t]]
                    writer.writerow(row)
        except OSError as exc:
            raise OSError(f"failed to write {path}: {exc}") from exc
        paths.append(path)

    cost_path = out_dir / "iteration_costs.csv"
    costs = {name: report.arm(name).iteration_costs for name in ARM_NAMES}
    n_iter = len(costs["deeprc"])
    try:
        with open(cost_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["j", "cost_deeprc", "cost_baseline", "cost_nocontrol"])
            for j in range(n_iter):
                writer.writerow([str(j), _fmt(costs["deeprc"][j]),
                                 _fmt(costs["baseline"][j]),
                                 _fmt(costs["nocontrol"][j])])
    except OSError as exc:
        raise OSError(f"failed to write {cost_path}: {exc}") from exc
    paths.append(cost_path)

    meta_path = out_dir / "metadata.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(report.metadata, fh, indent=2)
    paths.append(meta_path)
    return paths


def load_trajectory_csv(path) -> dict:
    """Parse a trajectory CSV back into float arrays keyed by column name."""
    with open(Path(path), "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    data = {name: np.array([float(row[i]) for row in rows])
            for i, name in enumerate(header)}
    return data


def emit_plots(report: RunReport, out_dir) -> list:
    """Render the output-trajectory and iteration-cost figures as PNG files."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    colors = {"deeprc": "tab:blue", "baseline": "tab:orange", "nocontrol": "tab:gray"}
    labels = {"deeprc": "DeePRC", "baseline": "CL-DeePC", "nocontrol": "no control"}

    sample_log = report.arm("deeprc").log
    r = sample_log.u.shape[1]
    l = sample_log.y.shape[1]
    meta = report.metadata

    fig, axes = plt.subplots(r + l, 1, figsize=(9, 2.4 * (r + l)), sharex=True)
    axes = np.atleast_1d(axes)
    u_bound = meta.get("input_bound")
    y_bound = meta.get("output_bound")
    for name in ARM_NAMES:
        log = report.arm(name).log
        k = np.arange(len(log))
        for i in range(r):
            axes[i].plot(k, log.u[:, i], lw=0.7, color=colors[name], label=labels[name])
        for i in range(l):
            axes[r + i].plot(k, log.y[:, i], lw=0.7, color=colors[name], label=labels[name])
    for i in range(r):
        axes[i].set_ylabel(f"u{i + 1}" if r > 1 else "u")
        if u_bound is not None:
            axes[i].axhline(u_bound, color="gray", ls="--", lw=0.8)
            axes[i].axhline(-u_bound, color="gray", ls="--", lw=0.8)
    for i in range(l):
        axes[r + i].set_ylabel(f"y{i + 1}")
        if y_bound is not None:
            axes[r + i].axhline(y_bound, color="gray", ls="--", lw=0.8)
            axes[r + i].axhline(-y_bound, color="gray", ls="--", lw=0.8)
    for ax in axes:
        ax.axvline(report.enable_index, color="gray", lw=1.2, alpha=0.7)
    axes[0].legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("sample k")
    fig.tight_layout()
    traj_path = out_dir / "outputs.png"
    fig.savefig(traj_path, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(9, 4))
    for name in ARM_NAMES:
        costs = report.arm(name).iteration_costs
        ax.semilogy(np.arange(len(costs)), np.maximum(costs, 1e-30),
                    lw=0.9, color=colors[name], label=labels[name])
    ax.axvline(report.enable_index / report.period, color="gray", lw=1.2, alpha=0.7)
    ax.set_xlabel("iteration j")
    ax.set_ylabel("per-iteration cost")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    cost_path = out_dir / "iteration_costs.png"
    fig.savefig(cost_path, dpi=150)
    plt.close(fig)
    return [traj_path, cost_path]
