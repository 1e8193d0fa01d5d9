"""Federated averaging over an analog multiple-access channel.

Each round: clients run a few local SGD steps, a scheduler picks who
transmits, and the selected updates are averaged either ideally or
over the air (symbol mapping, superposed transmission, trace-normalized
combining, reconstruction).  Client, scheduling and channel randomness
live in separate keyed substreams, so aggregation variants with the
same seed see identical client updates and selections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .aircomp import PowerLedger, demap, map_to_symbols, transmit_and_combine

AGGREGATIONS = ("ota", "ideal")
SCHEDULES = ("full", "random", "norm")


class DivergenceError(RuntimeError):
    """Raised when the global iterate blows past the divergence guard."""


@dataclass(frozen=True)
class FlConfig:
    rounds: int
    local_steps: int = 1
    eta: float | tuple = 0.05
    batch_size: int = 8
    aggregation: str = "ota"
    scheduling: str = "full"
    num_selected: int | None = None
    subcarriers: int | None = None
    alpha: float | tuple = 1.0
    noise_std: float = 0.0
    surrogate_channel: bool = False
    divergence_limit: float = 1e12

    def __post_init__(self):
        if self.rounds < 1 or self.local_steps < 1 or self.batch_size < 1:
            raise ValueError("rounds, local_steps, batch_size must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.scheduling not in SCHEDULES:
            raise ValueError(f"unknown scheduling {self.scheduling!r}")
        if self.scheduling != "full" and not self.num_selected:
            raise ValueError("partial participation needs num_selected")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def eta_at(self, t):
        return _at(self.eta, t)

    def alpha_at(self, t):
        return _at(self.alpha, t)


def _at(sched, t):
    if np.ndim(sched) == 0:
        return float(sched)
    return float(np.asarray(sched)[t])


@dataclass
class RoundRecord:
    round: int
    loss: float
    dist_sq: float
    test_acc: float
    power_dbm: float
    bound: float = float("nan")


@dataclass
class RunResult:
    records: list
    theta: np.ndarray
    ledger: PowerLedger | None
    max_grad_norm: float


def split_data(labels, num_clients, mode, gen):
    """Partition sample indices across clients.

    iid: a random permutation cut into near-equal pieces.  noniid:
    sort by label and cut contiguous shards, so each client sees as
    few classes as possible (exactly one when num_clients is a
    multiple of the class count).  Shards are disjoint and cover the
    dataset in both modes.
    """
    labels = np.asarray(labels)
    if mode == "iid":
        order = gen.permutation(labels.size)
    elif mode == "noniid":
        order = np.argsort(labels, kind="stable")
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return [np.sort(part) for part in np.array_split(order, num_clients)]


def local_sgd(theta, task, client, eta, local_steps, batch_size, gen,
              grad_norms=None):
    """Run tau local steps from theta; returns the model delta."""
    th = np.array(theta, dtype=np.float64)
    for _ in range(local_steps):
        g = task.stochastic_gradient(client, th, gen, batch_size)
        if grad_norms is not None:
            grad_norms.append(float(np.linalg.norm(g)))
        th -= eta * g
    return th - theta


def select_clients(policy, num_clients, num_selected, gen=None, norms=None):
    """Pick the transmitting set; returned indices are sorted.

    random: uniform without replacement.  norm: the num_selected
    largest update norms, ties toward the lower client index.
    """
    if policy == "full":
        return np.arange(num_clients)
    if not 1 <= num_selected <= num_clients:
        raise ValueError("num_selected must lie in [1, num_clients]")
    if policy == "random":
        return np.sort(gen.choice(num_clients, size=num_selected, replace=False))
    if policy == "norm":
        order = np.argsort(-np.asarray(norms), kind="stable")
        return np.sort(order[:num_selected])
    raise ValueError(f"unknown scheduling policy {policy!r}")


def run(task, config, *, seed, sampler=None, assoc=None, theta0=None):
    """Train for config.rounds rounds; returns records and final model.

    Records hold the state at round t for t = 0..rounds (loss, squared
    distance to the optimum when known, test metric when the task has
    one, running max-client power in dBm for over-the-air runs).
    """
    n = task.num_clients
    d = task.dim
    over_the_air = config.aggregation == "ota"
    if over_the_air and not config.surrogate_channel:
        if sampler is None or assoc is None:
            raise ValueError("over-the-air aggregation needs sampler and assoc")
    subcarriers = config.subcarriers or math.ceil(d / 2)
    transmissions = math.ceil(d / (2 * subcarriers))
    slots_per_round = transmissions * subcarriers

    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=np.float64)
    ledger = PowerLedger(n) if over_the_air else None
    theta_star = getattr(task, "theta_star", None)
    max_grad = 0.0

    def snapshot(t):
        dist = (
            float(((theta - theta_star) ** 2).sum())
            if theta_star is not None
            else float("nan")
        )
        acc = task.test_accuracy(theta)
        power = ledger.max_average_dbm() if ledger is not None else float("nan")
        return RoundRecord(
            round=t,
            loss=task.loss(theta),
            dist_sq=dist,
            test_acc=float("nan") if acc is None else acc,
            power_dbm=power,
        )

    records = [snapshot(0)]
    grad_norms: list = []
    for t in range(config.rounds):
        eta_t = config.eta_at(t)
        alpha_t = config.alpha_at(t)
        updates = np.empty((n, d))
        for client in range(n):
            gen = _rng.substream(seed, _rng.CLIENT, t, client)
            updates[client] = local_sgd(
                theta, task, client, eta_t, config.local_steps,
                config.batch_size, gen, grad_norms,
            )

        if config.scheduling == "random":
            gen = _rng.substream(seed, _rng.SCHEDULE, t)
            part = select_clients("random", n, config.num_selected, gen=gen)
        elif config.scheduling == "norm":
            norms = np.linalg.norm(updates, axis=1)
            part = select_clients("norm", n, config.num_selected, norms=norms)
        else:
            part = np.arange(n)

        if not over_the_air:
            delta = updates[part].sum(axis=0) / part.size
        else:
            transmitted = updates.copy()
            silent = np.setdiff1d(np.arange(n), part)
            transmitted[silent] = 0.0
            frame = map_to_symbols(transmitted, subcarriers)
            ledger.add(frame, alpha_t)
            if config.surrogate_channel:
                # Identity gains, no noise.  Summing float lanes instead of
                # complex cells keeps the reduction kernel the same as in
                # the plain average, so the paths stay bit-identical.
                lanes = frame.symbols[part].view(np.float64)
                grid = (lanes.sum(axis=0) / part.size).view(np.complex128)
                delta = demap(grid, 1.0, d)
            else:
                first = t * slots_per_round
                draw = sampler.draw_slots(range(first, first + slots_per_round))
                result = transmit_and_combine(
                    frame, alpha_t, draw, assoc, config.noise_std,
                    participants=part,
                )
                delta = result.delta_hat

        theta = theta + delta
        if not np.all(np.isfinite(theta)) or (
            float(np.linalg.norm(theta)) > config.divergence_limit
        ):
            raise DivergenceError(f"iterate diverged at round {t}")
        records.append(snapshot(t + 1))

    if grad_norms:
        max_grad = max(grad_norms)
    return RunResult(
        records=records, theta=theta, ledger=ledger, max_grad_norm=max_grad
    )
