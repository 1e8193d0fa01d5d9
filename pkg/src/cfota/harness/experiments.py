"""Experiment drivers: build, run, record.

Outputs per run directory:
  rounds.csv   one row per (repetition, round) in repetition order,
               columns: round, loss, dist_sq, test_acc, power_dbm, bound
  bound.csv    round, contraction, offset, dist_sq_bound, loss_gap_bound
               (only when the bound is enabled)
  summary.json seed, config hash, versions, per-repetition terminals

A fixed spec and seed reproduce these files byte for byte: floats are
written with repr (shortest round-trip) and no timestamps are recorded.
Repetitions share one deployment draw and differ in client, scheduling
and channel streams; changing the seed redraws everything.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os

import numpy as np

from .. import __version__ as _version
from .. import bounds as _bounds
from .. import fl as _fl
from .. import rng as _rng
from .. import verify as _verify
from ..channel import ChannelSampler, with_csi_errors
from ..tasks import LogisticTask, QuadraticTask
from ..topology import associate, build_correlations, place_network
from .config import ConfigError, config_hash, spec_to_dict


@dataclasses.dataclass
class NetworkBundle:
    topology: object
    correlations: object
    assoc: object
    sampler: ChannelSampler


def build_network(network_cfg, csi_cfg, seed):
    """Placement, covariances, clusters and a slot sampler for one seed."""
    topo = place_network(network_cfg, seed)
    corr = build_correlations(topo, seed)
    assoc = associate(topo, corr)
    corr = with_csi_errors(corr, csi_cfg)
    return NetworkBundle(
        topology=topo,
        correlations=corr,
        assoc=assoc,
        sampler=ChannelSampler(corr, seed),
    )


def build_task(task_spec, num_clients, seed):
    gen = _rng.substream(seed, _rng.DATA)
    if task_spec.kind == "quadratic":
        return QuadraticTask.synthetic(
            task_spec.dim,
            num_clients,
            gen,
            center_scale=task_spec.heterogeneity_scale,
            anchor_spread=task_spec.anchor_spread,
            anchors_per_client=task_spec.anchors_per_client,
            curvature_range=(task_spec.curvature_min, task_spec.curvature_max),
        )
    return LogisticTask.synthetic(
        task_spec.dim,
        num_clients,
        task_spec.samples_per_client,
        gen,
        lam=task_spec.lam,
        class_sep=task_spec.class_sep,
        split=task_spec.split,
        holdout=task_spec.holdout,
    )


def _rep_seed(seed, rep):
    return int(_rng.substream(seed, _rng.REP, rep).integers(2**62))


def bound_trajectory_for(spec, task, bundle, theta0):
    """Distance-recursion trajectory matched to the experiment setup."""
    if spec.fl.scheduling != "full":
        raise ConfigError("the bound assumes full participation")
    _bounds.check_step_size(spec.fl.eta, task.mu, spec.fl.local_steps)
    constants = _bounds.compute_constants(bundle.correlations, bundle.assoc)
    start = float(((theta0 - task.theta_star) ** 2).sum())
    radius = spec.grad_bound_margin * math.sqrt(start)
    inputs = _bounds.BoundInputs(
        dim=task.dim,
        num_clients=task.num_clients,
        mu=task.mu,
        smoothness=task.smoothness,
        grad_bound=task.grad_bound(radius),
        heterogeneity=task.heterogeneity,
        local_steps=spec.fl.local_steps,
        eta=spec.fl.eta,
        alpha=spec.fl.alpha,
        noise_std=spec.fl.noise_std,
    )
    traj = _bounds.bound_trajectory(inputs, constants, spec.fl.rounds, start)
    return inputs, constants, traj


def run_experiment(spec, out_dir=None):
    """Run all repetitions; returns (summary dict, per-rep records)."""
    bundle = build_network(spec.network, spec.csi, spec.seed)
    task = build_task(spec.task, spec.network.num_uts, spec.seed)
    theta0 = np.zeros(task.dim)

    traj = None
    bound_rows = None
    if spec.with_bound:
        inputs, constants, traj = bound_trajectory_for(spec, task, bundle, theta0)
        bound_rows = [
            (
                t,
                _bounds.a_coeff(inputs.eta_at(t), inputs.mu, inputs.local_steps),
                _bounds.b_coeff(inputs, constants, t),
                traj[t],
                float(_bounds.loss_gap_bound(traj[t], inputs.smoothness)),
            )
            for t in range(spec.fl.rounds + 1)
        ]

    all_records = []
    terminals = []
    for rep in range(spec.repetitions):
        result = _fl.run(
            task,
            spec.fl,
            seed=_rep_seed(spec.seed, rep),
            sampler=bundle.sampler,
            assoc=bundle.assoc,
            theta0=theta0,
        )
        if traj is not None:
            for rec in result.records:
                rec.bound = float(traj[rec.round])
        all_records.append(result.records)
        last = result.records[-1]
        terminals.append(
            {
                "rep": rep,
                "loss": last.loss,
                "dist_sq": last.dist_sq,
                "test_acc": last.test_acc,
                "power_dbm": last.power_dbm,
            }
        )

    summary = {
        "command": "simulate",
        "config_hash": config_hash(spec),
        "seed": spec.seed,
        "repetitions": spec.repetitions,
        "spec": spec_to_dict(spec),
        "versions": {"cfota": _version, "numpy": np.__version__},
        "terminals": terminals,
        "terminal_loss_mean": float(np.mean([t["loss"] for t in terminals])),
        "terminal_dist_sq_mean": float(
            np.mean([t["dist_sq"] for t in terminals])
        ),
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_rounds_csv(os.path.join(out_dir, "rounds.csv"), all_records)
        if bound_rows is not None:
            write_bound_csv(os.path.join(out_dir, "bound.csv"), bound_rows)
        write_summary(os.path.join(out_dir, "summary.json"), summary)
    return summary, all_records


ROUND_COLUMNS = ("round", "loss", "dist_sq", "test_acc", "power_dbm", "bound")


def write_rounds_csv(path, all_records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUND_COLUMNS)
        for records in all_records:
            for rec in records:
                writer.writerow(
                    [
                        rec.round,
                        repr(rec.loss),
                        repr(rec.dist_sq),
                        repr(rec.test_acc),
                        repr(rec.power_dbm),
                        repr(rec.bound),
                    ]
                )


def write_bound_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("round", "contraction", "offset", "dist_sq_bound", "loss_gap_bound")
        )
        for t, a, b, e, gap in rows:
            # float() strips numpy scalars so repr stays plain and parseable
            writer.writerow(
                [t] + [repr(float(v)) for v in (a, b, e, gap)]
            )


def _jsonable(obj):
    """Map non-finite floats to None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=1, sort_keys=True)
        fh.write("\n")


def compare_cellular(spec, out_dir=None):
    """Same budget head-to-head: user-centric versus one central array.

    The cellular twin concentrates all antennas (L * M of them) at one
    access point in the area center, serving every terminal; seeds,
    task and schedules are shared.
    """
    cf_net = spec.network
    cellular_net = dataclasses.replace(
        cf_net,
        num_aps=1,
        antennas_per_ap=cf_net.num_aps * cf_net.antennas_per_ap,
        cluster_size=1,
        cellular=True,
    )
    total_cf = cf_net.num_aps * cf_net.antennas_per_ap
    total_cell = cellular_net.num_aps * cellular_net.antennas_per_ap
    if total_cf != total_cell:
        raise ConfigError("antenna budgets differ between the two systems")

    cf_summary, cf_records = run_experiment(spec)
    cell_spec = dataclasses.replace(spec, network=cellular_net)
    cell_summary, cell_records = run_experiment(cell_spec)

    wins = sum(
        1
        for a, b in zip(cf_summary["terminals"], cell_summary["terminals"])
        if a["loss"] < b["loss"]
    )
    summary = {
        "command": "compare-cellular",
        "config_hash": config_hash(spec),
        "seed": spec.seed,
        "antennas_total": total_cf,
        "cellfree": cf_summary["terminals"],
        "cellular": cell_summary["terminals"],
        "cellfree_terminal_loss_mean": cf_summary["terminal_loss_mean"],
        "cellular_terminal_loss_mean": cell_summary["terminal_loss_mean"],
        "cellfree_wins": wins,
        "repetitions": spec.repetitions,
        "versions": {"cfota": _version, "numpy": np.__version__},
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_rounds_csv(os.path.join(out_dir, "rounds_cellfree.csv"), cf_records)
        write_rounds_csv(os.path.join(out_dir, "rounds_cellular.csv"), cell_records)
        write_summary(os.path.join(out_dir, "summary.json"), summary)
    return summary


def verify_moments(spec, frames, out_dir=None, tol=0.02):
    """Monte-Carlo check of the combining statistics for this spec."""
    bundle = build_network(spec.network, spec.csi, spec.seed)
    gen = _rng.substream(spec.seed, _rng.DATA)
    dim = spec.task.dim
    updates = gen.normal(size=(spec.network.num_uts, dim))
    subcarriers = spec.fl.subcarriers or math.ceil(dim / 2)
    alpha = spec.fl.alpha_at(0)
    checks, mc = _verify.moment_checks(
        bundle.correlations,
        bundle.assoc,
        updates,
        subcarriers,
        alpha,
        spec.fl.noise_std,
        spec.seed,
        frames,
        tol=tol,
    )
    checks.append(_verify.unbiasedness_check(mc, updates))
    passed = all(c.passed for c in checks)
    summary = {
        "command": "verify-moments",
        "config_hash": config_hash(spec),
        "seed": spec.seed,
        "frames": frames,
        "checks": [dataclasses.asdict(c) for c in checks],
        "passed": passed,
        "versions": {"cfota": _version, "numpy": np.__version__},
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_summary(os.path.join(out_dir, "summary.json"), summary)
    return passed, checks, summary


def sweep(spec, axis, values, out_dir=None):
    """Repeat the experiment along one overridden config axis."""
    from .config import apply_override, build_spec

    rows = []
    for value in values:
        data = spec_to_dict(spec)
        apply_override(data, f"{axis}={value}")
        sub_spec = build_spec(data)
        sub_dir = None
        if out_dir is not None:
            slug = str(value).replace("/", "_")
            sub_dir = os.path.join(out_dir, f"{axis}={slug}")
        summary, _ = run_experiment(sub_spec, out_dir=sub_dir)
        for term in summary["terminals"]:
            rows.append((value, term["rep"], term["loss"], term["dist_sq"],
                         term["power_dbm"]))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow((axis, "rep", "loss", "dist_sq", "power_dbm"))
            for row in rows:
                writer.writerow([row[0], row[1], repr(row[2]), repr(row[3]),
                                 repr(row[4])])
    return rows
