"""Command-line pipeline: ingest, features, label, train, evaluate,
sweep-threshold, backtest, report.

Every subcommand takes --config plus --section.key value overrides, writes
its artifacts under [run] output_dir, and records a manifest with checksums.
Exit codes: 0 success, 1 validation-class failure, 2 missing prerequisite.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date as Date, datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import (
    BuyHold,
    MaCross,
    ModelSignal,
    backtest_table,
    compare_strategies,
    run_strategy,
    write_equity_csv,
    write_reports_json,
)
from .config import PipelineConfig, write_manifest
from .errors import ConfigError, DependencyError, PipelineError
from .features import (
    class_distribution,
    pearson_correlations,
    write_correlations_csv,
    write_features_csv,
    write_labels_csv,
)
from .fusion import (
    DEFAULT_TAUS,
    confusion,
    load_fusion_model,
    report,
    report_table,
    save_fusion_model,
    sweep_thresholds,
)
from .market_data import write_panel_csv
from .neural.models import load_checkpoint, save_checkpoint
from .neural.training import predict_proba_nn
from .pipeline import (
    SupervisedSet,
    assert_no_test_leakage,
    build_features,
    build_label_sets,
    fusion_probs,
    load_inputs,
    oof_ta_probs,
    read_probs_csv,
    split_sets,
    stack_dataset,
    ta_dataset,
    train_fusion_model,
    train_ta_model,
    train_twitter_model,
    write_probs_csv,
)
from .svm import load_model, predict_proba_batch, save_model

MODEL_IDS = ("ta", "twitter:parallel", "twitter:sequential", "fusion")


def _model_slug(which: str) -> str:
    return which.replace(":", "_")


def _out_dirs(cfg: PipelineConfig) -> tuple[Path, Path, Path]:
    out = cfg.output_dir
    models = out / "models"
    reports = out / "reports"
    for p in (out, models, reports):
        p.mkdir(parents=True, exist_ok=True)
    return out, models, reports


def cmd_ingest(cfg: PipelineConfig) -> int:
    started = datetime.now(timezone.utc)
    out, _, _ = _out_dirs(cfg)
    candles, panel = load_inputs(cfg)
    path = out / "panel.csv"
    write_panel_csv(panel, path)
    write_manifest(cfg, "ingest", [path], out, started)
    print(f"ingested {len(candles)} candles -> {len(panel)} aligned rows: {path}")
    return 0


def cmd_features(cfg: PipelineConfig) -> int:
    started = datetime.now(timezone.utc)
    out, _, _ = _out_dirs(cfg)
    candles, panel = load_inputs(cfg)
    _, features = build_features(cfg, panel)
    labels = build_label_sets(cfg, candles)
    split = cfg.get_date("run", "split_date")

    artifacts = [out / "features.csv", out / "correlations.csv"]
    write_features_csv(features, artifacts[0])
    write_correlations_csv(pearson_correlations(features), artifacts[1])
    for name, label_set in labels.items():
        path = out / f"labels_{name}.csv"
        write_labels_csv(label_set, path)
        artifacts.append(path)
    dist = {}
    for name, label_set in labels.items():
        train_stats = class_distribution(label_set, (None, _prev_day(split)))
        test_stats = class_distribution(label_set, (split, None))
        dist[name] = {
            "train": {"T": train_stats.t, "F": train_stats.f, "true_ratio": train_stats.true_ratio},
            "test": {"T": test_stats.t, "F": test_stats.f, "true_ratio": test_stats.true_ratio},
        }
    dist_path = out / "class_distribution.json"
    dist_path.write_text(json.dumps(dist, sort_keys=True, indent=2), encoding="utf-8")
    artifacts.append(dist_path)
    write_manifest(cfg, "features", artifacts, out, started)
    print(f"features: {len(features)} rows, labels for {len(labels)} tasks -> {out}")
    return 0


def _prev_day(d: Date) -> Date:
    from datetime import timedelta

    return d - timedelta(days=1)


def cmd_label(cfg: PipelineConfig) -> int:
    started = datetime.now(timezone.utc)
    out, _, _ = _out_dirs(cfg)
    candles, _ = load_inputs(cfg)
    artifacts = []
    for name, label_set in build_label_sets(cfg, candles).items():
        path = out / f"labels_{name}.csv"
        write_labels_csv(label_set, path)
        artifacts.append(path)
    write_manifest(cfg, "label", artifacts, out, started)
    print(f"wrote {len(artifacts)} label files -> {out}")
    return 0


def _task_data(cfg: PipelineConfig):
    candles, panel = load_inputs(cfg)
    task = cfg.get("run", "task")
    labels = build_label_sets(cfg, candles)[task]
    return candles, panel, task, labels


def cmd_train(cfg: PipelineConfig, which: str) -> int:
    started = datetime.now(timezone.utc)
    out, models_dir, reports_dir = _out_dirs(cfg)
    candles, panel, task, labels = _task_data(cfg)
    split = cfg.get_date("run", "split_date")
    artifacts: list[Path] = []

    if which == "ta":
        data = ta_dataset(cfg, candles, panel, labels)
        train_set, _ = split_sets(data, split)
        model, cv = train_ta_model(cfg, train_set, split)
        model_path = models_dir / f"svm_{task}.json"
        save_model(model, model_path)
        cv_path = reports_dir / f"cv_{task}.json"
        cv_path.write_text(
            json.dumps(
                {
                    "seed": cv.seed,
                    "best": {
                        "c": cv.best.c,
                        "gamma": cv.best.kernel.gamma,
                        "kernel": cv.best.kernel.kind,
                    },
                    "grid": [
                        {"c": p.c, "gamma": p.gamma, "mean_f1": p.mean_f1, "fold_f1": list(p.fold_f1)}
                        for p in cv.points
                    ],
                },
                sort_keys=True,
                indent=2,
            ),
            encoding="utf-8",
        )
        artifacts += [model_path, cv_path]
        print(
            f"ta svm trained on {len(train_set)} rows; "
            f"best C={cv.best.c:g} gamma={cv.best.kernel.gamma:g} -> {model_path}"
        )
    elif which.startswith("twitter:"):
        arch = which.split(":", 1)[1]
        data = stack_dataset(cfg, candles, labels)
        train_set, _ = split_sets(data, split)
        model, result = train_twitter_model(cfg, arch, train_set, split)
        model_path = models_dir / f"twitter_{arch}_{task}.npz"
        save_checkpoint(model, model_path)
        hist_path = reports_dir / f"twitter_{arch}_{task}_history.json"
        hist_path.write_text(
            json.dumps(
                {
                    "best_epoch": result.best_epoch,
                    "best_val_f1": result.best_val_f1,
                    "epochs": [
                        {"epoch": e.epoch, "train_loss": e.train_loss, "val_f1": e.val_f1}
                        for e in result.history
                    ],
                },
                sort_keys=True,
                indent=2,
            ),
            encoding="utf-8",
        )
        val_idx = result.val_indices
        val_probs = predict_proba_nn(model, train_set.x[val_idx])
        val_path = reports_dir / f"val_probs_{arch}_{task}.csv"
        write_probs_csv(
            val_path,
            [train_set.info_dates[i] for i in val_idx],
            train_set.y[val_idx],
            val_probs,
            label_dates=[train_set.label_dates[i] for i in val_idx],
        )
        artifacts += [model_path, hist_path, val_path]
        print(
            f"twitter {arch} trained on {len(train_set)} stacks; "
            f"best val F1 {result.best_val_f1:.3f} (epoch {result.best_epoch}) -> {model_path}"
        )
    elif which == "fusion":
        arch = cfg.get("fusion", "twitter_arch")
        svm_path = models_dir / f"svm_{task}.json"
        tw_path = models_dir / f"twitter_{arch}_{task}.npz"
        for p, name in ((svm_path, "ta"), (tw_path, f"twitter:{arch}")):
            if not p.exists():
                raise DependencyError(f"train {name} first; missing {p}")
        mode = cfg.get("fusion", "mode")
        data = ta_dataset(cfg, candles, panel, labels)
        train_set, _ = split_sets(data, split)
        assert_no_test_leakage(train_set.label_dates, split)
        cv_path = reports_dir / f"cv_{task}.json"
        if not cv_path.exists():
            raise DependencyError(f"missing CV report {cv_path}")
        cv = json.loads(cv_path.read_text(encoding="utf-8"))
        from .svm import KernelSpec, SvmParams

        best = SvmParams(
            c=float(cv["best"]["c"]),
            kernel=KernelSpec(kind=cv["best"]["kernel"], gamma=cv["best"]["gamma"]),
            tol=cfg.get_float("svm", "tol"),
            max_passes=cfg.get_int("svm", "max_passes"),
        )
        if mode == "out-of-fold":
            ta_probs = oof_ta_probs(cfg, train_set, best)
            val_path = reports_dir / f"val_probs_{arch}_{task}.csv"
            tw_info, tw_label_dates, tw_y, tw_probs = read_probs_csv(val_path, with_label_dates=True)
            ta_by_date = dict(zip(train_set.label_dates, ta_probs))
            y_by_date = dict(zip(train_set.label_dates, train_set.y))
            pairs, ys = [], []
            for d, p_tw in zip(tw_label_dates, tw_probs):
                if d in ta_by_date:
                    pairs.append((p_tw, ta_by_date[d]))
                    ys.append(y_by_date[d])
            if len(pairs) < 4:
                raise DependencyError("too few overlapping validation rows to fit the fusion model")
            pairs = np.array(pairs)
            ys = np.array(ys, dtype=bool)
        elif mode == "in-sample":
            ta_model = load_model(svm_path)
            tw_model = load_checkpoint(tw_path)
            stacks = stack_dataset(cfg, candles, labels)
            tw_train, _ = split_sets(stacks, split)
            ta_by_date = dict(
                zip(train_set.label_dates, predict_proba_batch(ta_model, train_set.x))
            )
            pairs, ys = [], []
            for i, d in enumerate(tw_train.label_dates):
                if d in ta_by_date:
                    pairs.append(
                        (predict_proba_nn(tw_model, tw_train.x[i]), ta_by_date[d])
                    )
                    ys.append(tw_train.y[i])
            pairs = np.array(pairs)
            ys = np.array(ys, dtype=bool)
        else:
            raise ConfigError(f"unknown fusion mode {mode!r}")
        model, kind = train_fusion_model(cfg, pairs, ys, task)
        fusion_path = models_dir / f"fusion_{task}.json"
        save_fusion_model(
            model,
            fusion_path,
            meta={"twitter_arch": arch, "mode": mode, "kind": kind, "task": task},
        )
        artifacts.append(fusion_path)
        print(f"fusion ({kind}) fitted on {len(ys)} pairs -> {fusion_path}")
    else:
        raise ConfigError(f"unknown model {which!r}; expected one of {MODEL_IDS}")

    write_manifest(cfg, f"train:{which}", artifacts, out, started)
    return 0


def _test_probs(cfg: PipelineConfig, which: str):
    """Probabilities of the requested model over the test split."""
    candles, panel, task, labels = _task_data(cfg)
    split = cfg.get_date("run", "split_date")
    _, models_dir, reports_dir = _out_dirs(cfg)

    if which == "ta":
        path = models_dir / f"svm_{task}.json"
        if not path.exists():
            raise DependencyError(f"missing checkpoint {path}")
        model = load_model(path)
        data = ta_dataset(cfg, candles, panel, labels)
        _, test_set = split_sets(data, split)
        return test_set, predict_proba_batch(model, test_set.x)
    if which.startswith("twitter:"):
        arch = which.split(":", 1)[1]
        path = models_dir / f"twitter_{arch}_{task}.npz"
        if not path.exists():
            raise DependencyError(f"missing checkpoint {path}")
        model = load_checkpoint(path)
        data = stack_dataset(cfg, candles, labels)
        _, test_set = split_sets(data, split)
        return test_set, predict_proba_nn(model, test_set.x)
    if which == "fusion":
        path = models_dir / f"fusion_{task}.json"
        if not path.exists():
            raise DependencyError(f"missing checkpoint {path}")
        fusion_model, meta = load_fusion_model(path)
        arch = meta["twitter_arch"]
        ta_set, ta_probs = _test_probs(cfg, "ta")
        tw_set, tw_probs = _test_probs(cfg, f"twitter:{arch}")
        ta_by_date = dict(zip(ta_set.label_dates, zip(ta_set.info_dates, ta_set.y, ta_probs)))
        info_dates, label_dates, ys, p_tw, p_ta = [], [], [], [], []
        for i, d in enumerate(tw_set.label_dates):
            if d in ta_by_date:
                info, y, pt = ta_by_date[d]
                info_dates.append(info)
                label_dates.append(d)
                ys.append(y)
                p_tw.append(tw_probs[i])
                p_ta.append(pt)
        test_set = SupervisedSet(
            info_dates=tuple(info_dates),
            label_dates=tuple(label_dates),
            x=np.zeros((len(ys), 0)),
            y=np.array(ys, dtype=bool),
        )
        return test_set, fusion_probs(fusion_model, np.array(p_tw), np.array(p_ta))
    raise ConfigError(f"unknown model {which!r}; expected one of {MODEL_IDS}")


def cmd_evaluate(cfg: PipelineConfig, which: str, taus=DEFAULT_TAUS) -> int:
    started = datetime.now(timezone.utc)
    out, _, reports_dir = _out_dirs(cfg)
    task = cfg.get("run", "task")
    test_set, probs = _test_probs(cfg, which)
    slug = _model_slug(which)

    probs_path = reports_dir / f"probs_{slug}_{task}.csv"
    write_probs_csv(
        probs_path, test_set.info_dates, test_set.y, probs, label_dates=test_set.label_dates
    )
    sweep = sweep_thresholds(probs, test_set.y, tuple(sorted(taus)))
    base = report(confusion(probs > 0.5, test_set.y))
    payload = {
        "model": which,
        "task": task,
        "n_test": len(test_set),
        "report_at_0.5": base.as_dict(),
        "thresholds": {
            repr(t): {"confusion": cm.as_dict(), "report": rep.as_dict()}
            for t, cm, rep in zip(sweep.taus, sweep.matrices, sweep.reports)
        },
    }
    json_path = reports_dir / f"eval_{slug}_{task}.json"
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    txt_path = reports_dir / f"eval_{slug}_{task}.txt"
    txt_path.write_text(
        report_table([(f"{which} ({task})", base, f"tau=0.50, n={len(test_set)}")]),
        encoding="utf-8",
    )
    write_manifest(cfg, f"evaluate:{which}", [probs_path, json_path, txt_path], out, started)
    print(
        f"{which} on {len(test_set)} test rows: "
        f"F1+ {base.pos.f1:.3f}, acc {base.accuracy * 100:.2f}% -> {json_path}"
    )
    return 0


def cmd_sweep(cfg: PipelineConfig, which: str, taus=DEFAULT_TAUS) -> int:
    started = datetime.now(timezone.utc)
    out, _, reports_dir = _out_dirs(cfg)
    task = cfg.get("run", "task")
    slug = _model_slug(which)
    probs_path = reports_dir / f"probs_{slug}_{task}.csv"
    _, _, labels, probs = read_probs_csv(probs_path, with_label_dates=True)
    sweep = sweep_thresholds(probs, labels, tuple(sorted(taus)))
    payload = {
        repr(t): {"confusion": cm.as_dict(), "report": rep.as_dict()}
        for t, cm, rep in zip(sweep.taus, sweep.matrices, sweep.reports)
    }
    path = reports_dir / f"sweep_{slug}_{task}.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    rows = [
        (f"{which} tau={t:g}", rep, f"positives={cm.positives_predicted}")
        for t, cm, rep in zip(sweep.taus, sweep.matrices, sweep.reports)
    ]
    txt_path = reports_dir / f"sweep_{slug}_{task}.txt"
    txt_path.write_text(report_table(rows), encoding="utf-8")
    write_manifest(cfg, f"sweep:{which}", [path, txt_path], out, started)
    print(f"threshold sweep over {sweep.taus} -> {path}")
    return 0


def _signal_strategy(
    cfg: PipelineConfig, reports_dir: Path, token: str, task: str, window_dates
) -> ModelSignal:
    if "@" in token:
        which, tau_s = token.split("@", 1)
        tau = float(tau_s)
    else:
        which, tau = token, cfg.get_float("backtest", "signal_tau")
    slug = _model_slug(which)
    probs_path = reports_dir / f"probs_{slug}_{task}.csv"
    info_dates, _, _, probs = read_probs_csv(probs_path, with_label_dates=True)
    # signals fire on the info date; those before the window cannot execute
    signals = {d: bool(p > tau) for d, p in zip(info_dates, probs) if d in window_dates}
    return ModelSignal(
        signals=signals,
        hold_through_signals=cfg.get_bool("backtest", "hold_through_signals"),
        name=f"{which}@{tau:g}",
    )


def cmd_backtest(cfg: PipelineConfig, strategies: list[str]) -> int:
    started = datetime.now(timezone.utc)
    out, _, reports_dir = _out_dirs(cfg)
    bt_dir = out / "backtest"
    bt_dir.mkdir(exist_ok=True)
    candles, _, task, _ = _task_data(cfg)
    split = cfg.get_date("run", "split_date")
    window = candles.slice_dates(split, None)
    if len(window) < 3:
        raise DependencyError("test window has too few candles to backtest")

    specs: dict[str, object] = {}
    window_dates = set(window.dates)
    for token in strategies:
        if token == "buy-hold":
            specs["buy_hold"] = BuyHold()
        elif token == "ma-cross":
            specs["ma_cross"] = MaCross()
        else:
            spec = _signal_strategy(cfg, reports_dir, token, task, window_dates)
            specs[spec.name] = spec

    periods: dict[str, tuple[Date | None, Date | None]] = {"full": (split, None)}
    for name, key in (("bull", "bull_days"), ("bear", "bear_days")):
        lo, hi = cfg.get_ints("backtest", key)
        if not 1 <= lo <= hi:
            raise ConfigError(f"backtest.{key} must be 1-based start,end with start <= end")
        if lo <= len(window):
            periods[name] = (window.dates[lo - 1], window.dates[min(hi, len(window)) - 1])

    table = compare_strategies(window, specs, periods)
    artifacts = []
    for period, row in table.items():
        txt = bt_dir / f"backtest_{period}.txt"
        txt.write_text(backtest_table(row, f"[{period}] {periods[period][0]} .. {periods[period][1]}"), encoding="utf-8")
        artifacts.append(txt)
    json_path = bt_dir / "backtest.json"
    write_reports_json(table, json_path)
    artifacts.append(json_path)
    for name, spec in specs.items():
        _, curve, _ = run_strategy(window, spec)
        path = bt_dir / f"equity_{name.replace('@', '_at_').replace(':', '_')}.csv"
        write_equity_csv(curve, path)
        artifacts.append(path)
    write_manifest(cfg, "backtest", artifacts, out, started)
    print(f"backtested {len(specs)} strategies over {len(table)} periods -> {bt_dir}")
    return 0


def cmd_report(cfg: PipelineConfig) -> int:
    started = datetime.now(timezone.utc)
    out, _, reports_dir = _out_dirs(cfg)
    parts: list[str] = [f"# Pipeline report (task {cfg.get('run', 'task')})\n"]
    dist = out / "class_distribution.json"
    if dist.exists():
        parts.append("## Class distribution\n```\n" + dist.read_text(encoding="utf-8") + "\n```\n")
    for txt in sorted(reports_dir.glob("*.txt")):
        parts.append(f"## {txt.stem}\n```\n" + txt.read_text(encoding="utf-8") + "```\n")
    bt_dir = out / "backtest"
    if bt_dir.exists():
        for txt in sorted(bt_dir.glob("*.txt")):
            parts.append(f"## {txt.stem}\n```\n" + txt.read_text(encoding="utf-8") + "```\n")
    path = out / "report.md"
    path.write_text("\n".join(parts), encoding="utf-8")
    write_manifest(cfg, "report", [path], out, started)
    print(f"bundled report -> {path}")
    return 0


def _split_overrides(rest: list[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    i = 0
    while i < len(rest):
        token = rest[i]
        if not token.startswith("--") or "." not in token:
            raise ConfigError(f"unrecognized argument {token!r} (expected --section.key value)")
        if i + 1 >= len(rest):
            raise ConfigError(f"override {token!r} is missing a value")
        overrides[token[2:]] = rest[i + 1]
        i += 2
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xmove",
        description="Extreme-move signal pipeline over daily BTC data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")

    common(sub.add_parser("ingest", help="load, validate and align the input series"))
    common(sub.add_parser("features", help="write features, labels, correlations, distributions"))
    common(sub.add_parser("label", help="write the four label files"))

    p_train = sub.add_parser("train", help="train a model")
    p_train.add_argument("which", choices=MODEL_IDS)
    common(p_train)

    p_eval = sub.add_parser("evaluate", help="score a trained model on the test period")
    p_eval.add_argument("which", choices=MODEL_IDS)
    p_eval.add_argument("--taus", default=None, help="comma-separated thresholds")
    common(p_eval)

    p_sweep = sub.add_parser("sweep-threshold", help="re-score saved probabilities at thresholds")
    p_sweep.add_argument("which", choices=MODEL_IDS)
    p_sweep.add_argument("--taus", default=None, help="comma-separated thresholds")
    common(p_sweep)

    p_bt = sub.add_parser("backtest", help="run strategies over the test period")
    p_bt.add_argument(
        "--strategies",
        default="buy-hold,ma-cross",
        help="comma-separated: buy-hold, ma-cross, or a model id with optional @tau",
    )
    common(p_bt)

    common(sub.add_parser("report", help="bundle emitted tables into report.md"))
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    try:
        overrides = _split_overrides(rest)
        if args.seed is not None:
            overrides["run.seed"] = str(args.seed)
        cfg = PipelineConfig.load(args.config, overrides)
        taus = DEFAULT_TAUS
        if getattr(args, "taus", None):
            taus = tuple(float(t) for t in args.taus.split(","))
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "features":
            return cmd_features(cfg)
        if args.command == "label":
            return cmd_label(cfg)
        if args.command == "train":
            return cmd_train(cfg, args.which)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.which, taus)
        if args.command == "sweep-threshold":
            return cmd_sweep(cfg, args.which, taus)
        if args.command == "backtest":
            return cmd_backtest(cfg, [s.strip() for s in args.strategies.split(",") if s.strip()])
        if args.command == "report":
            return cmd_report(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except DependencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
