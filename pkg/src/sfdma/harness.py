"""Experiment drivers: SNR sweeps, the end-to-end workflow and policy CDFs."""

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .abg import abg_eval, required_sinr
from .channel import ChannelRealization, broadcast, equalize, sample_rayleigh, sinr, sinr_all
from .errors import InvalidInputError
from .power import PowerProblem, simplex_solve
from .trainer import encode, evaluate_accuracy

PASS_RTOL = 1e-9
POLICIES = ("optimal", "fixed")


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------


def fmt(value):
    """Shortest round-trip text for numbers; everything else via str()."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(header, rows, meta=None):
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, meta=None):
    Path(path).write_text(csv_text(header, rows, meta))


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv` (comment lines skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# accuracy sweep
# ---------------------------------------------------------------------------


def sweep_snr(models, dataset, snr_grid, trials=1, seed=0, fading=True, upper_bound=True):
    """Accuracy per user at each SNR of ``snr_grid`` (dB).

    Each row is ``[snr_db, acc_1..acc_N, stderr_1..stderr_N]`` followed, with
    ``upper_bound``, by the interference-free accuracies on the same draws.
    """
    grid = [float(s) for s in snr_grid]
    if not grid or grid != sorted(grid):
        raise InvalidInputError("SNR grid must be non-empty and sorted")
    n = len(models)
    header = (["snr_db"] + [f"acc_user_{i}" for i in range(1, n + 1)]
              + [f"stderr_user_{i}" for i in range(1, n + 1)])
    if upper_bound:
        header += [f"ub_acc_user_{i}" for i in range(1, n + 1)]
    rows = []
    for k, snr_db in enumerate(grid):
        acc = evaluate_accuracy(models, dataset, snr_db, trials, seed=seed + k, fading=fading)
        row = [snr_db, *acc.value, *acc.stderr]
        if upper_bound:
            ub = evaluate_accuracy(models, dataset, snr_db, trials, seed=seed + k, fading=fading,
                                   interference=False)
            row += list(ub.value)
        rows.append(row)
    return header, rows


# ---------------------------------------------------------------------------
# end-to-end workflow
# ---------------------------------------------------------------------------


@dataclass
class WorkflowRecord:
    powers: list = field(default_factory=list)  # per served draw, (N,)
    sinrs: list = field(default_factory=list)
    thresholds: np.ndarray = None
    predictions: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    gains: list = field(default_factory=list)
    skipped: int = 0

    @property
    def served(self):
        return len(self.powers)

    def accuracy(self):
        if not self.predictions:
            return np.full(len(self.thresholds), np.nan)
        return np.mean(np.array(self.predictions) == np.array(self.labels), axis=0)


def run_workflow(models, datasets, abg_params, etas, draws, seed=0, noise_vars=1.0,
                 policy="optimal", fixed_power=1.0, fading=True):
    """Encode, allocate power, broadcast, equalize and decode, draw by draw.

    Draws whose allocation is infeasible are counted in ``skipped`` and not
    transmitted. ``policy="fixed"`` skips the optimizer and gives every user
    ``fixed_power``.
    """
    if policy not in POLICIES:
        raise InvalidInputError(f"policy must be one of {POLICIES}")
    n_users = len(models)
    if not isinstance(datasets, (list, tuple)):
        datasets = [datasets] * n_users
    noise_vars = np.broadcast_to(np.asarray(noise_vars, dtype=np.float64), (n_users,)).copy()
    thresholds = np.array([required_sinr(p, eta) for p, eta in zip(abg_params, etas)])
    record = WorkflowRecord(thresholds=thresholds)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5FD]))
    for _ in range(draws):
        idx = [int(rng.integers(len(d))) for d in datasets]
        gains = sample_rayleigh(n_users, rng) if fading else np.ones(n_users)
        codes = np.stack([encode(m, d.features[i:i + 1])[0] for m, d, i in zip(models, datasets, idx)])
        if policy == "optimal":
            sol = simplex_solve(PowerProblem(thresholds, gains**2, noise_vars))
            if not sol.optimal:
                record.skipped += 1
                continue
            powers = sol.powers
        else:
            powers = np.full(n_users, float(fixed_power))
        real = ChannelRealization(gains, noise_vars, powers)
        preds = []
        for u, model in enumerate(models):
            y = broadcast(codes, real, u, rng)
            y_bar = equalize(y, gains[u])
            preds.append(int(np.argmax(nn.predict(model.decoder, y_bar))))
        record.powers.append(powers)
        record.sinrs.append(np.array([sinr(real, u) for u in range(n_users)]))
        record.gains.append(gains)
        record.predictions.append(preds)
        record.labels.append([int(d.labels[i]) for d, i in zip(datasets, idx)])
    return record


# ---------------------------------------------------------------------------
# CDF of performance under two allocation policies
# ---------------------------------------------------------------------------


@dataclass
class CdfReport:
    samples: dict  # policy -> (N, draws) performance, each row sorted ascending
    pass_fraction: dict  # policy -> (N,) over all draws
    pass_fraction_feasible: dict  # policy -> (N,) over draws where the optimum exists
    feasible: np.ndarray  # (draws,) bool
    infeasible_count: int
    fixed_power: float
    etas: np.ndarray

    def cdf(self, policy, user):
        x = self.samples[policy][user]
        return x, np.arange(1, x.size + 1) / x.size


def empirical_cdf(samples):
    x = np.sort(np.asarray(samples, dtype=np.float64))
    return x, np.arange(1, x.size + 1) / x.size


def cdf_experiment(abg_params, etas, draws, seed=0, noise_vars=1.0, policies=POLICIES):
    """Paired comparison of optimal and equal-power allocation over fading draws.

    Both policies see the same Rayleigh draws. The fixed policy splits,
    equally, the optimal policy's mean total power over feasible draws; the
    same split is used as fallback on draws where the optimum does not exist.
    """
    if draws < 100:
        raise InvalidInputError("at least 100 draws are required")
    n_users = len(abg_params)
    etas = np.asarray(etas, dtype=np.float64)
    noise_vars = np.broadcast_to(np.asarray(noise_vars, dtype=np.float64), (n_users,)).copy()
    thresholds = np.array([required_sinr(p, eta) for p, eta in zip(abg_params, etas)])
    gains_sq = sample_rayleigh(n_users, np.random.SeedSequence([int(seed), 0xCDF]), size=draws) ** 2

    opt_powers = np.zeros((n_users, draws))
    feasible = np.zeros(draws, dtype=bool)
    for t in range(draws):
        sol = simplex_solve(PowerProblem(thresholds, gains_sq[:, t], noise_vars))
        if sol.optimal:
            feasible[t] = True
            opt_powers[:, t] = sol.powers
    if np.any(feasible):
        budget = float(np.mean(opt_powers[:, feasible].sum(axis=0)))
    else:
        budget = float(n_users)
    fixed_power = budget / n_users
    opt_powers[:, ~feasible] = fixed_power

    perf = {}
    allocations = {"optimal": opt_powers, "fixed": np.full((n_users, draws), fixed_power)}
    for policy in policies:
        s = sinr_all(gains_sq, allocations[policy], noise_vars)
        perf[policy] = np.stack([abg_eval(p, s[u]) for u, p in enumerate(abg_params)])
    need = etas[:, None] * (1.0 - PASS_RTOL * np.sign(etas)[:, None])
    passes = {k: v >= need for k, v in perf.items()}
    frac = {k: v.mean(axis=1) for k, v in passes.items()}
    frac_feasible = {
        k: (v[:, feasible].mean(axis=1) if np.any(feasible) else np.full(n_users, np.nan))
        for k, v in passes.items()
    }
    return CdfReport(
        samples={k: np.sort(v, axis=1) for k, v in perf.items()},
        pass_fraction=frac,
        pass_fraction_feasible=frac_feasible,
        feasible=feasible,
        infeasible_count=int(np.sum(~feasible)),
        fixed_power=fixed_power,
        etas=etas,
    )


def cdf_csv_rows(report):
    policies = list(report.samples)
    n_users, draws = report.samples[policies[0]].shape
    header = ["rank", "cdf"] + [f"phi_{p}_user_{u}" for p in policies for u in range(1, n_users + 1)]
    cdf = np.arange(1, draws + 1) / draws
    rows = []
    for t in range(draws):
        rows.append([t + 1, cdf[t]] + [report.samples[p][u, t] for p in policies for u in range(n_users)])
    return header, rows


def cdf_summary(report):
    return {
        "pass_fraction": {k: [float(x) for x in v] for k, v in report.pass_fraction.items()},
        "pass_fraction_feasible": {k: [float(x) for x in v] for k, v in report.pass_fraction_feasible.items()},
        "infeasible_draws": report.infeasible_count,
        "fixed_power": report.fixed_power,
        "etas": [float(e) for e in report.etas],
    }
