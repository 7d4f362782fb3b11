"""Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.
"""

import argparse
import dataclasses
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import abg, data, harness, power, trainer
from .channel import db_to_linear

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_SWEEP = [-5.0, 0.0, 5.0, 10.0, 20.0]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_help()}")


def load_config(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def resolve_seed(args, cfg):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if "seed" in cfg:
        return int(cfg["seed"])
    if os.environ.get("SFDMA_SEED"):
        return int(os.environ["SFDMA_SEED"])
    return 0


def _train_config(cfg, seed, epochs=None):
    section = dict(cfg.get("train", {}))
    section["data"] = dict(cfg.get("data", {}))
    section["seed"] = seed
    if epochs is not None:
        section["epochs"] = epochs
    try:
        return trainer.TrainConfig(**section)
    except TypeError as exc:
        raise UsageError(f"bad [train]/[data] configuration: {exc}") from None


def _datasets(tc):
    spec = tc.data
    if spec.kind == "synthetic":
        return data.make_split(spec.classes, spec.input_dim, [spec.per_class, spec.test_per_class],
                               spec.spread, tc.seed, spec.scale)
    if spec.kind == "idx":
        train_set = data.load_idx(spec.images, spec.labels, spec.classes)
        test_set = data.load_idx(spec.test_images or spec.images,
                                 spec.test_labels or spec.labels, spec.classes)
        return train_set, test_set
    raise UsageError(f"unknown data kind {spec.kind!r}")


def _model_context(args):
    """Config, seed and test set for commands that consume a trained model."""
    cfg = load_config(args.config)
    if args.config is None:
        saved = Path(args.model) / "config.json"
        if saved.exists():
            cfg = json.loads(saved.read_text())["config"]
    seed = resolve_seed(args, cfg)
    # the test set must come from the training seed, whatever seed drives evaluation
    tc = _train_config(cfg, int(cfg.get("seed", seed)))
    _, test_set = _datasets(tc)
    return cfg, seed, tc, test_set, trainer.load_models(args.model)


def _resolved(cfg, seed, **extra):
    out = dict(cfg)
    out["seed"] = seed
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args):
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    tc = _train_config(cfg, seed, args.epochs)
    train_set, _ = _datasets(tc)
    result = trainer.train(tc, train_set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"seed": seed, "train": {k: v for k, v in tc.to_dict().items() if k not in ("data", "seed")},
                "data": dataclasses.asdict(tc.data)}
    for i, m in enumerate(result.models, start=1):
        for part in ("encoder", "decoder"):
            obj = getattr(m, part).to_dict()
            obj["config"] = resolved
            harness.write_json(out / f"user_{i}_{part}.json", obj)
    header, rows = trainer.history_csv_rows(result.history)
    harness.write_csv(out / "history.csv", header, rows, {"config": resolved})
    harness.write_json(out / "config.json", {"config": resolved})
    print(f"trained {tc.n_users} users for {tc.epochs} epochs -> {out}")


def cmd_eval(args):
    cfg, seed, tc, test_set, models = _model_context(args)
    section = cfg.get("eval", {})
    snr_db = args.snr_db if args.snr_db is not None else section.get("snr_db", tc.train_snr_db)
    trials = args.trials or section.get("trials", 1)
    fading = section.get("fading", True)
    acc = trainer.evaluate_accuracy(models, test_set, snr_db, trials, seed=seed, fading=fading)
    ub = trainer.evaluate_accuracy(models, test_set, snr_db, trials, seed=seed, fading=fading,
                                   interference=False)
    rows = [[i + 1, snr_db, acc.value[i], acc.stderr[i], ub.value[i]] for i in range(len(models))]
    meta = _resolved(cfg, seed, eval={"snr_db": snr_db, "trials": trials, "fading": fading})
    harness.write_csv(args.out, ["user", "snr_db", "accuracy", "stderr", "interference_free"], rows,
                      {"config": meta})


def cmd_report_orth(args):
    cfg, seed, _, test_set, models = _model_context(args)
    report = trainer.orthogonality_report(models, test_set)
    header = ["user_a", "user_b", "cosine", "mean_abs_cosine", "angle_deg"]
    rows = [[r[k] for k in header] for r in report]
    harness.write_csv(args.out, header, rows, {"config": _resolved(cfg, seed)})


def cmd_report_privacy(args):
    cfg, seed, tc, test_set, models = _model_context(args)
    section = cfg.get("privacy", {})
    snr_db = args.snr_db if args.snr_db is not None else section.get("snr_db", 20.0)
    trials = args.trials or section.get("trials", 1)
    rep = trainer.cross_decoding_report(models, test_set, snr_db, trials, seed=seed)
    n = len(models)
    header = ["decoder"] + [f"user_{j}" for j in range(1, n + 1)]
    rows = [[i + 1, *rep.value[i]] for i in range(n)]
    meta = _resolved(cfg, seed, privacy={"snr_db": snr_db, "trials": trials})
    harness.write_csv(args.out, header, rows, {"config": meta, "chance": 1.0 / test_set.n_classes})


def cmd_fit_abg(args):
    rows = harness.read_csv(args.inp)
    try:
        sinr_db = np.array([float(r["sinr_db"]) for r in rows])
        phi = np.array([float(r["phi"]) for r in rows])
    except KeyError as exc:
        raise UsageError(f"{args.inp}: expected columns sinr_db,phi (missing {exc})") from None
    fit = abg.abg_fit(db_to_linear(sinr_db), phi)
    out = fit.to_dict()
    out["config"] = {"input": str(args.inp), "seed": resolve_seed(args, {})}
    harness.write_json(args.out, out)
    print(json.dumps(fit.to_dict(), sort_keys=True))


def _allocate_users(args, cfg):
    if args.inp:
        users = json.loads(Path(args.inp).read_text())["users"]
    elif args.params:
        n = len(args.params)
        etas = _per_user(args.eta, n, "--eta")
        gains = _per_user(args.gain_sq or [1.0], n, "--gain-sq")
        noise = _per_user(args.noise_var or [1.0], n, "--noise-var")
        users = []
        for path, eta, g, s in zip(args.params, etas, gains, noise):
            u = json.loads(Path(path).read_text())
            users.append({**u, "eta": eta, "gain_sq": g, "noise_var": s})
    elif "users" in cfg:
        users = cfg["users"]
    else:
        raise UsageError("allocate needs --in, --params or a [[users]] table in --config")
    return users


def _per_user(values, n, flag):
    if values is None:
        raise UsageError(f"{flag} is required with --params")
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise UsageError(f"{flag} needs 1 or {n} values")
    return values


def cmd_allocate(args):
    cfg = load_config(args.config)
    users = _allocate_users(args, cfg)
    params = [abg.AbgParams.from_dict(u) for u in users]
    problem = power.build_problem(
        params, [float(u["eta"]) for u in users],
        [float(u.get("gain_sq", 1.0)) for u in users], [float(u.get("noise_var", 1.0)) for u in users],
    )
    sol = power.simplex_solve(problem)
    out = sol.to_dict()
    out["thresholds"] = [float(c) for c in problem.thresholds]
    out["config"] = {"users": users, "seed": resolve_seed(args, cfg)}
    if args.out:
        harness.write_json(args.out, out)
    print(f"status={sol.status} total={harness.fmt(sol.total) if sol.optimal else 'n/a'}")
    return 0


def cmd_sweep(args):
    cfg, seed, _, test_set, models = _model_context(args)
    section = cfg.get("sweep", {})
    grid = args.snr_db or section.get("snr_db", DEFAULT_SWEEP)
    trials = args.trials or section.get("trials", 1)
    header, rows = harness.sweep_snr(models, test_set, grid, trials, seed=seed,
                                     fading=section.get("fading", True))
    meta = _resolved(cfg, seed, sweep={"snr_db": list(grid), "trials": trials})
    harness.write_csv(args.out, header, rows, {"config": meta})


def cmd_cdf(args):
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    section = cfg.get("cdf", {})
    users = cfg.get("users") or [dict(abg.TABLE_PARAMS.to_dict(), eta=92.0)] * 2
    params = [abg.AbgParams.from_dict(u) for u in users]
    etas = [float(u["eta"]) for u in users]
    draws = args.draws or section.get("draws", 10_000)
    noise = [float(u.get("noise_var", section.get("noise_var", 1.0))) for u in users]
    report = harness.cdf_experiment(params, etas, draws, seed=seed, noise_vars=noise)
    header, rows = harness.cdf_csv_rows(report)
    summary = harness.cdf_summary(report)
    meta = {"config": _resolved(cfg, seed, users=users, cdf={"draws": draws, "noise_vars": noise}),
            "summary": summary}
    harness.write_csv(args.out, header, rows, meta)
    print(json.dumps(summary, sort_keys=True))


# ---------------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="sfdma", description="SFDMA training, evaluation and power allocation")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_text, model=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", required=name != "allocate", help="output path")
        if model:
            p.add_argument("--model", required=True, help="directory written by 'train'")
        p.set_defaults(func=func)
        return p

    p = add("train", cmd_train, "train encoders and decoders")
    p.add_argument("--epochs", type=int)
    p = add("eval", cmd_eval, "Monte-Carlo accuracy at one SNR", model=True)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--trials", type=int)
    add("report-orth", cmd_report_orth, "pairwise code orthogonality", model=True)
    p = add("report-privacy", cmd_report_privacy, "cross-decoding accuracy matrix", model=True)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--trials", type=int)
    p = add("fit-abg", cmd_fit_abg, "fit the ABG curve to sinr_db,phi samples")
    p.add_argument("--in", dest="inp", required=True)
    p = add("allocate", cmd_allocate, "minimum-power allocation")
    p.add_argument("--in", dest="inp", help="JSON {users: [{alpha,beta,gamma,tau,eta,gain_sq,noise_var}]}")
    p.add_argument("--params", action="append", help="fit-abg output, one per user")
    p.add_argument("--eta", type=float, nargs="+")
    p.add_argument("--gain-sq", type=float, nargs="+")
    p.add_argument("--noise-var", type=float, nargs="+")
    p = add("sweep", cmd_sweep, "accuracy versus SNR", model=True)
    p.add_argument("--snr-db", type=float, nargs="+")
    p.add_argument("--trials", type=int)
    p = add("cdf", cmd_cdf, "performance CDFs of optimal vs equal power allocation")
    p.add_argument("--draws", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit 2
        print(f"sfdma: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
