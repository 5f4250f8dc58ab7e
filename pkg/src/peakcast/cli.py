"""Command-line pipeline: synth, train, predict, evaluate, simulate, sweep, info.

Exit codes: 0 success, 1 domain error (bad data, bad config), 2 usage
error. All randomness flows from --seed; reports are written with fixed
field order and 4-decimal formatting so identical runs produce
byte-identical files.
"""

import argparse
import sys
import time
from dataclasses import replace
from datetime import date, datetime, timedelta

import numpy as np

from . import baselines, battery, kernels, labeling, metrics, trace as trace_mod
from . import features, model as model_mod, training
from .errors import IoError, PeakcastError, TooShort, VersionMismatch


def _read_text(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None


def emit_report(text, path):
    """Write a report file; output is byte-identical for identical input."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}") from None


def _load_trace(path):
    return trace_mod.parse_trace(_read_text(path))


def _load_calendar(args, tr):
    if getattr(args, "calendar", None):
        return trace_mod.parse_calendar(_read_text(args.calendar))
    years = range(tr.start.year, tr.end.year + 2)
    return trace_mod.default_calendar(years)


def _load_model(path):
    loaded = model_mod.deserialize(_read_bytes(path))
    if loaded.feature_layout_version != features.FEATURE_LAYOUT_VERSION:
        raise VersionMismatch(
            f"{path}: feature layout {loaded.feature_layout_version} != "
            f"supported {features.FEATURE_LAYOUT_VERSION}")
    return loaded


def _parse_date(text, flag):
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise PeakcastError(f"{flag}: expected YYYY-MM-DD, got {text!r}") from None


def _int_list(text):
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text):
    return [float(part) for part in text.split(",") if part.strip()]


# --- subcommands -------------------------------------------------------------

def cmd_synth(args):
    config = trace_mod.SyntheticConfig(
        days=args.days, seed=args.seed,
        start=_parse_date(args.start, "--start"),
        bimodal_probability=args.bimodal_probability)
    overrides = {}
    for name in ("base_kw", "daily_amplitude_kw", "weekly_amplitude_kw",
                 "seasonal_amplitude_kw", "noise_sd_kw", "min_kw", "max_kw"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if overrides:
        config = replace(config, **overrides)
    tr = trace_mod.generate_synthetic(config)
    emit_report(trace_mod.serialize_trace(tr), args.out)
    print(f"wrote {len(tr)} hourly records ({args.days} days) to {args.out}")
    return 0


def _train_config_from_args(args):
    base = training.TrainConfig(seed=args.seed)
    if args.config:
        base = training.parse_train_config(_read_text(args.config), base=base)
    overrides = {}
    for flag, name in (("epochs", "epochs"), ("batch_size", "batch_size"),
                       ("lr_start", "lr_start"), ("lr_end", "lr_end"),
                       ("dropout", "dropout_rate"),
                       ("clip", "grad_clip_norm"), ("patience", "early_stop_patience")):
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    if args.no_shuffle:
        overrides["shuffle"] = False
    config = replace(base, **overrides)
    config.validate()
    return config


def cmd_train(args):
    tr = _load_trace(args.trace)
    if args.end is not None:
        boundary = _parse_date(args.end, "--end")
        tr, _ = trace_mod.split_train_test(tr, boundary)
    calendar = _load_calendar(args, tr)
    params = features.fit_normalizer(tr)
    windows = features.build_windows(tr, calendar, params)

    validation = None
    if args.val_days:
        cut = tr.end.date() - timedelta(days=args.val_days - 1)
        validation = [w for w in windows if w.target_date >= cut]
        windows = [w for w in windows if w.target_date < cut]
        if not windows or not validation:
            raise TooShort(f"--val-days {args.val_days} leaves "
                           f"{len(windows)} train / {len(validation)} val days")

    config = _train_config_from_args(args)
    layer_sizes = tuple(_int_list(args.layers))
    init_rng = np.random.default_rng(np.random.SeedSequence(args.seed).spawn(1)[0])
    seed_model = model_mod.init_model(layer_sizes, init_rng,
                                      normalization=params)

    trained, report = training.train(seed_model, windows, config,
                                     validation=validation)
    blob = model_mod.serialize(trained, precision=args.precision)
    with open(args.out, "wb") as fh:
        fh.write(blob)

    print(f"trained {layer_sizes} on {len(windows)} samples "
          f"({len(report.epoch_losses)} epochs, {report.wall_time_s:.1f}s, "
          f"backend {kernels.BACKEND})")
    print(f"final training loss {report.epoch_losses[-1]:.6f}")
    if report.val_mapes:
        print(f"best validation MAPE {min(report.val_mapes):.4f}%")
    print(f"wrote {len(blob)} bytes to {args.out}")
    if args.history:
        lines = ["epoch,loss" + (",val_mape" if report.val_mapes else "")]
        for i, loss in enumerate(report.epoch_losses):
            row = f"{i},{loss:.6f}"
            if report.val_mapes:
                row += f",{report.val_mapes[i]:.4f}"
            lines.append(row)
        emit_report("\n".join(lines) + "\n", args.history)
    return 0


def cmd_predict(args):
    loaded = _load_model(args.model)
    tr = _load_trace(args.trace)
    calendar = _load_calendar(args, tr)
    if tr.records[-1].timestamp.hour != 23:
        raise TooShort(f"{args.trace}: trace must end at 23:00 to predict "
                       "the next day")
    if len(tr) < features.INPUT_HOURS:
        raise TooShort(f"{args.trace}: need {features.INPUT_HOURS} trailing hours")

    tail = tr.slice(len(tr) - features.INPUT_HOURS, len(tr))
    encoded = features.encode_trace(tail, calendar, loaded.normalization)
    target_day = tr.end.date() + timedelta(days=1)

    if isinstance(loaded, model_mod.ModelParams):
        pred = model_mod.predict_day(loaded, encoded)
    else:
        pred = baselines.predict_linreg(loaded, encoded)

    k_values = _int_list(args.k)
    labelings = {k: labeling.label_day(pred, k) for k in k_values}
    header = "date,hour,predicted_kw," + ",".join(f"label_k{k}" for k in k_values)
    lines = [header]
    for hour in range(24):
        row = [target_day.isoformat(), str(hour), f"{pred[hour]:.4f}"]
        row += [labelings[k].labels[hour] for k in k_values]
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        emit_report(text, args.out)
        print(f"wrote next-day forecast for {target_day} to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _test_windows(tr, calendar, params, start):
    windows = features.build_windows(tr, calendar, params)
    test = [w for w in windows if w.target_date >= start]
    if not test:
        raise TooShort(f"no test days at or after {start}")
    return test


def cmd_evaluate(args):
    model_paths = args.model or []
    if not model_paths and not args.naive:
        raise PeakcastError("nothing to evaluate: pass --model and/or --naive")
    tr = _load_trace(args.trace)
    calendar = _load_calendar(args, tr)
    start = _parse_date(args.start, "--start")

    k_values = list(range(1, 6))
    evaluations = []
    for path in model_paths:
        loaded = _load_model(path)
        test = _test_windows(tr, calendar, loaded.normalization, start)
        name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
        if isinstance(loaded, model_mod.ModelParams):
            fn = lambda s, m=loaded: model_mod.predict_day(m, s.inputs)
        else:
            fn = lambda s, m=loaded: baselines.predict_linreg(m, s.inputs)
        evaluations.append(metrics.evaluate_model(fn, test, k_values, name=name))

    if args.naive:
        params = features.fit_normalizer(tr)
        test = _test_windows(tr, calendar, params, start)
        fn = lambda s: baselines.seasonal_naive_predict(tr, s.target_date)
        evaluations.append(metrics.evaluate_model(fn, test, k_values,
                                                  name="seasonal_naive"))

    emit_report(metrics.results_csv(evaluations, k_values), args.out)
    for ev in evaluations:
        print(f"{ev.model}: MAPE {ev.mape_pct:.4f}% over {ev.day_count} days")
    print(f"wrote accuracy table to {args.out}")
    if args.mape_out:
        lines = ["model,mape_pct"]
        lines += [f"{ev.model},{ev.mape_pct:.4f}" for ev in evaluations]
        emit_report("\n".join(lines) + "\n", args.mape_out)
    return 0


def cmd_simulate(args):
    loaded = _load_model(args.model)
    tr = _load_trace(args.trace)
    calendar = _load_calendar(args, tr)
    spec = battery.BatterySpec(args.capacity, args.max_power,
                               args.unit_cost, args.efficiency)
    tariff = battery.TariffSpec(args.demand_charge)

    windows = features.build_windows(tr, calendar, loaded.normalization)
    by_day = {w.target_date: w for w in windows}
    first_day = min(by_day)
    start = _parse_date(args.start, "--start") if args.start else first_day
    if start < first_day:
        raise PeakcastError(f"--start {start} precedes first predictable "
                            f"day {first_day}")
    sim = tr.slice(tr.index_of(datetime(start.year, start.month, start.day)),
                   len(tr))

    if isinstance(loaded, model_mod.ModelParams):
        predict = lambda s: model_mod.predict_day(loaded, s.inputs)
    else:
        predict = lambda s: baselines.predict_linreg(loaded, s.inputs)

    def predicted_labels(day, _demand):
        return labeling.label_day(predict(by_day[day]), args.k)

    def oracle_labels(_day, demand):
        return labeling.label_day(demand, args.k)

    months_pred, _ = battery.simulate_trace(sim, predicted_labels, spec, tariff)
    months_true, _ = battery.simulate_trace(sim, oracle_labels, spec, tariff)
    if not months_pred:
        raise TooShort("no complete calendar month inside the simulated span")

    lines = ["year,month,raw_peak_kw,net_peak_kw,savings_usd,"
             "oracle_net_peak_kw,oracle_savings_usd"]
    for p, o in zip(months_pred, months_true):
        lines.append(f"{p.year},{p.month},{p.raw_peak_kw:.4f},"
                     f"{p.net_peak_kw:.4f},{p.savings_usd:.4f},"
                     f"{o.net_peak_kw:.4f},{o.savings_usd:.4f}")
    emit_report("\n".join(lines) + "\n", args.out)

    total = sum(m.savings_usd for m in months_pred)
    oracle_total = sum(m.savings_usd for m in months_true)
    print(f"simulated {len(months_pred)} complete months at k={args.k}: "
          f"predicted-label savings ${total:,.2f}, "
          f"oracle-label savings ${oracle_total:,.2f}")
    print(f"wrote monthly results to {args.out}")
    return 0


def cmd_sweep(args):
    accuracies = _float_list(args.accuracies)
    accuracy_by_k = {k: acc for k, acc in enumerate(accuracies, start=1)}
    capacities = _float_list(args.capacities)
    tariff = battery.TariffSpec(args.demand_charge)
    report = battery.savings_sweep(capacities, sorted(accuracy_by_k),
                                   accuracy_by_k, tariff, args.unit_cost)
    emit_report(battery.savings_csv(report), args.out)
    print(f"wrote {len(report.rows)} sweep rows to {args.out}")
    return 0


def cmd_info(args):
    blob = _read_bytes(args.model)
    loaded = _load_model(args.model)
    if isinstance(loaded, model_mod.ModelParams):
        count = sum(a.size for a in model_mod.param_arrays(loaded))
        closed = model_mod.parameter_count(loaded.layer_sizes,
                                           loaded.input_size,
                                           loaded.output_size)
        print(f"model type: lstm, layers {loaded.layer_sizes}")
        print(f"parameter count: {count} (closed form {closed})")
        rng = np.random.default_rng(0)
        inputs = rng.random((features.INPUT_HOURS, loaded.input_size))
        model_mod.predict_day(loaded, inputs)  # warm up
        t0 = time.perf_counter()
        for _ in range(args.latency_runs):
            model_mod.predict_day(loaded, inputs)
        per_run = (time.perf_counter() - t0) / args.latency_runs
        print(f"single-day inference latency: {per_run * 1000:.3f} ms "
              f"(mean of {args.latency_runs} runs, backend {kernels.BACKEND})")
    else:
        count = loaded.weights.size + loaded.intercept.size
        print(f"model type: linear, {loaded.weights.shape[1]} features")
        print(f"parameter count: {count}")
    print(f"serialized size: {len(blob)} bytes")
    print(f"feature layout version: {loaded.feature_layout_version}")
    return 0


# --- parser -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="peakcast",
        description="Peak-hour demand forecasting and battery peak shaving.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic campus-like trace")
    p.add_argument("--days", type=int, default=730)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="2022-01-03")
    p.add_argument("--bimodal-probability", type=float, default=0.25)
    for name in ("base-kw", "daily-amplitude-kw", "weekly-amplitude-kw",
                 "seasonal-amplitude-kw", "noise-sd-kw", "min-kw", "max-kw"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train an LSTM on a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--calendar")
    p.add_argument("--config", help="key = value file mirroring TrainConfig")
    p.add_argument("--end", help="use records strictly before this midnight")
    p.add_argument("--layers", default="100,90,80,70")
    p.add_argument("--val-days", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr-start", type=float, default=None)
    p.add_argument("--lr-end", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--clip", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--precision", choices=("full", "half"), default="full")
    p.add_argument("--history", help="optional per-epoch loss CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="forecast the day after the trace ends")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--calendar")
    p.add_argument("--k", default="1,2,3,4,5")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score models on a test span")
    p.add_argument("--model", action="append")
    p.add_argument("--naive", action="store_true",
                   help="include the seasonal-naive reference")
    p.add_argument("--trace", required=True)
    p.add_argument("--calendar")
    p.add_argument("--start", required=True,
                   help="first test day (YYYY-MM-DD)")
    p.add_argument("--mape-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="dispatch a battery from forecasts")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--calendar")
    p.add_argument("--start")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--capacity", type=float, default=4000.0)
    p.add_argument("--max-power", type=float, default=4000.0)
    p.add_argument("--efficiency", type=float, default=1.0)
    p.add_argument("--unit-cost", type=float, default=200.0)
    p.add_argument("--demand-charge", type=float, default=22.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="closed-form savings/payback grid")
    p.add_argument("--accuracies", required=True,
                   help="capture accuracy per k, e.g. 0.47,0.74,0.89,0.95,1.0")
    p.add_argument("--capacities", default="1000,2000,4000")
    p.add_argument("--demand-charge", type=float, default=22.0)
    p.add_argument("--unit-cost", type=float, default=200.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("info", help="inspect a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--latency-runs", type=int, default=100)
    p.set_defaults(func=cmd_info)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PeakcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
