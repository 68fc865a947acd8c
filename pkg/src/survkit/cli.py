"""Command-line interface.

Exit status: 0 success, 1 runtime failure (divergence, no comparable pairs,
unwritable output), 2 invalid input or configuration.
"""

from __future__ import annotations

import configparser
import functools
import json
import sys
from pathlib import Path

import click

from . import km as km_mod
from .data import load_csv, standardize, fit_scaling, train_test_split, write_csv
from .errors import FitError, InputError, ValidationError
from .metrics import ModelComparisonReport, compare_models
from .models import MODEL_NAMES, ModelOptions, fit_model, load_model, model_name, save_model, scorer
from .mtlr import MTLRModel, weight_matrix
from .ols import MVI_REGRESSORS, fit_ols, format_fit
from .synth import TABLE1_QUERY_TIMES, WeibullConfig, generate_weibull, table1_replica

DEFAULT_SPLIT = 0.7


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            _fail(2, exc)
        except (FitError, OSError, ArithmeticError) as exc:
            _fail(1, exc)
    return wrapper


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _write_text(path, text):
    if path is None or str(path) == "-":
        click.echo(text, nl=not text.endswith("\n"))
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_rows(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in r) for r in rows]
    _write_text(path, "\n".join(lines) + "\n")


def model_options(fn):
    """Hyperparameter flags shared by ``fit``, ``compare`` and ``pipeline``."""
    opts = [
        click.option("--ties", type=click.Choice(["efron", "breslow"]), default="efron", show_default=True,
                     help="Cox tie handling."),
        click.option("--ridge", type=float, default=0.0, show_default=True, help="Cox ridge penalty."),
        click.option("--bins", type=int, default=10, show_default=True,
                     help="MTLR time boundaries (capped at the distinct event count)."),
        click.option("--reg-c", type=float, default=1.0, show_default=True, help="MTLR smoothness weight."),
        click.option("--trees", type=int, default=200, show_default=True, help="RSF tree count."),
        click.option("--mtry", type=int, default=None, help="RSF features per split [default: ceil(sqrt(p))]."),
        click.option("--min-node-events", type=int, default=3, show_default=True, help="RSF minimum node events."),
        click.option("--max-depth", type=int, default=None, help="RSF maximum depth [default: unlimited]."),
        click.option("--hidden", default="16,16", show_default=True,
                     help="DeepSurv hidden widths, comma-separated ('' for a linear model)."),
        click.option("--activation", type=click.Choice(["relu", "tanh"]), default="relu", show_default=True),
        click.option("--lr", type=float, default=1e-2, show_default=True, help="DeepSurv learning rate."),
        click.option("--epochs", type=int, default=2000, show_default=True, help="DeepSurv epochs."),
        click.option("--weight-decay", type=float, default=1e-4, show_default=True),
        click.option("--kernel", type=click.Choice(["rbf", "linear", "polynomial"]), default="rbf",
                     show_default=True, help="Kernel SVM kernel."),
        click.option("--gamma", type=float, default=None, help="RBF width [default: 1/p]."),
        click.option("--degree", type=int, default=3, show_default=True, help="Polynomial kernel degree."),
        click.option("--coef0", type=float, default=1.0, show_default=True, help="Polynomial kernel offset."),
        click.option("--c", "svm_c", type=float, default=1.0, show_default=True, help="Kernel SVM hinge weight."),
        click.option("--svm-epochs", type=int, default=500, show_default=True, help="Kernel SVM max epochs."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


_OPTION_MAP = {
    "ties": "cox_ties", "ridge": "cox_ridge", "bins": "mtlr_bins", "reg_c": "mtlr_reg_c",
    "trees": "rsf_trees", "mtry": "rsf_mtry", "min_node_events": "rsf_min_node_events",
    "max_depth": "rsf_max_depth", "hidden": "ds_hidden", "activation": "ds_activation", "lr": "ds_lr",
    "epochs": "ds_epochs", "weight_decay": "ds_weight_decay", "kernel": "ksvm_kernel",
    "gamma": "ksvm_gamma", "degree": "ksvm_degree", "coef0": "ksvm_coef0", "svm_c": "ksvm_c",
    "svm_epochs": "ksvm_epochs",
}


def _build_options(seed, kw) -> ModelOptions:
    values = {}
    for flag, attr in _OPTION_MAP.items():
        v = kw.pop(flag)
        if flag == "hidden" and isinstance(v, str):
            v = _ints(v)
        values[attr] = v
    return ModelOptions(seed=seed, **values)


def _parse_models(text):
    names = _names(text)
    bad = [n for n in names if n not in MODEL_NAMES]
    if bad or not names:
        raise ValidationError(f"unknown model(s) {bad}; choose from {', '.join(MODEL_NAMES)}")
    return names


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Survival analysis toolkit: KM tables, five hazard models, C-index comparison, MVI regression."""


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Survival CSV.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@handle_errors
def ingest(input_path, fmt):
    """Validate a survival CSV and summarise it."""
    ds = load_csv(input_path)
    X = ds.X
    summary = {
        "rows": len(ds),
        "events": ds.n_events,
        "censored": ds.n_censored,
        "features": list(ds.feature_names),
        "rows_with_missing_covariates": int((X != X).any(axis=1).sum()) if X.size else 0,
        "has_mvi": ds.has_mvi,
    }
    if fmt == "json":
        click.echo(json.dumps(summary, indent=2))
    else:
        for k, v in summary.items():
            click.echo(f"{k}: {', '.join(v) if isinstance(v, list) else v}")


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--times", default=",".join(str(t) for t in TABLE1_QUERY_TIMES), show_default=True,
              help="Comma-separated query times (months).")
@click.option("--level", type=float, default=0.95, show_default=True, help="Confidence level.")
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file [default: stdout].")
@click.option("--plot", type=click.Path(dir_okay=False), default=None, help="Write step-curve CSV here.")
@handle_errors
def km(input_path, times, level, fmt, out, plot):
    """Kaplan-Meier summary table at the query times."""
    ds = load_csv(input_path)
    curve = km_mod.fit_km(ds)
    rows = km_mod.summarize_at(curve, _floats(times), level)
    if fmt == "csv":
        _write_rows(out, ["time", "n_risk", "n_event", "survival", "std_error", "ci_lower", "ci_upper"],
                    _km_rows(rows))
    else:
        _write_text(out, km_mod.format_summary(rows) + "\n")
    if plot:
        emit_km_plot(curve, plot, level)


def _km_rows(rows):
    return [(f"{r.query_time:g}", r.n_risk, r.n_event, repr(r.survival), repr(r.std_error),
             repr(r.ci_lower), repr(r.ci_upper)) for r in rows]


def emit_km_plot(curve, path, level=0.95):
    _write_rows(path, ["time", "survival", "ci_lower", "ci_upper"],
                [(f"{t:g}", repr(s), repr(lo), repr(hi)) for t, s, lo, hi in km_mod.curve_points(curve, level)])


def emit_comparison_plot(report: ModelComparisonReport, path):
    _write_rows(path, ["model", "c_index"], [(name, repr(res.c_index)) for name, res in report.entries])


@cli.command()
@click.argument("model", type=click.Choice(MODEL_NAMES))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Model artifact (JSON).")
@click.option("--seed", type=int, default=0, show_default=True)
@model_options
@handle_errors
def fit(model, input_path, out, seed, **kw):
    """Fit one model on every row of the input (covariates standardized)."""
    ds = load_csv(input_path)
    opts = _build_options(seed, kw)
    scaling = fit_scaling(ds)
    fitted = fit_model(model, scaling.transform(ds), opts)
    save_model(out, fitted, scaling)
    click.echo(f"wrote {model} model to {out}", err=True)


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV of id,risk [default: stdout].")
@handle_errors
def predict(model_path, input_path, out):
    """Risk scores (higher = earlier event) for every row of the input."""
    model, scaling = load_model(model_path)
    ds = load_csv(input_path)
    if scaling is not None:
        ds = scaling.transform(ds)
    scores = scorer(model)(ds.covariates())
    _write_rows(out, ["id", "risk"], [(i, repr(float(s))) for i, s in zip(ds.ids, scores)])


def _split_and_fit(ds, fraction, seed, names, opts):
    train, test = train_test_split(ds, fraction, seed)
    train_s, test_s, scaling = standardize(train, test)
    fitted = [(name, fit_model(name, train_s, opts)) for name in names]
    split = {"seed": seed, "fraction": fraction, "n_train": len(train), "n_test": len(test)}
    report = compare_models([(n, scorer(m)) for n, m in fitted], test_s, split)
    return train, fitted, scaling, report


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--split", "fraction", type=float, default=DEFAULT_SPLIT, show_default=True,
              help="Training fraction.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--models", default=",".join(MODEL_NAMES), show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file [default: stdout].")
@click.option("--plot", type=click.Path(dir_okay=False), default=None, help="Write model,c_index CSV here.")
@model_options
@handle_errors
def compare(input_path, fraction, seed, models, fmt, out, plot, **kw):
    """Split, fit the chosen models on train, and rank them by test C-index."""
    names = _parse_models(models)
    opts = _build_options(seed, kw)
    ds = load_csv(input_path)
    _, _, _, report = _split_and_fit(ds, fraction, seed, names, opts)
    _write_text(out, report.to_json() if fmt == "json" else report.to_text() + "\n")
    if plot:
        emit_comparison_plot(report, plot)


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Fitted MTLR artifact.")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Fit MTLR on this CSV instead of loading an artifact.")
@click.option("--bins", type=int, default=10, show_default=True)
@click.option("--reg-c", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV [default: stdout].")
@handle_errors
def weights(model_path, input_path, bins, reg_c, out):
    """MTLR weight matrix as feature,boundary_time,weight rows (bias last)."""
    if (model_path is None) == (input_path is None):
        raise ValidationError("give exactly one of --model or --input")
    if model_path:
        model, _ = load_model(model_path)
        if not isinstance(model, MTLRModel):
            raise ValidationError(f"{model_path} holds a {model_name(model)} model, not mtlr")
    else:
        ds = load_csv(input_path)
        model = fit_model("mtlr", fit_scaling(ds).transform(ds), ModelOptions(mtlr_bins=bins, mtlr_reg_c=reg_c))
    wm = weight_matrix(model)
    if out:
        wm.to_csv(out)
    else:
        _write_rows(None, ["feature", "boundary_time", "weight"],
                    [(f, repr(float(t)), repr(v)) for f, t, v in wm.rows()])


@cli.command("regress-mvi")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--response", default="mvi", show_default=True)
@click.option("--regressors", default=",".join(MVI_REGRESSORS), show_default=True,
              help="Comma-separated regressors, or 'all' for every covariate.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def regress_mvi(input_path, response, regressors, fmt, out):
    """OLS of the vulnerability index on risk and vulnerability covariates."""
    ds = load_csv(input_path)
    regs = tuple(f for f in ds.feature_names if f != response) if regressors == "all" else _names(regressors)
    res = fit_ols(ds, response, regs)
    if fmt == "json":
        _write_text(out, res.to_json())
    else:
        _write_text(out, format_fit(res, f"{response} ~ {' + '.join(regs)}") + "\n")


@cli.group()
def synth():
    """Write fixture or synthetic cohorts as survival CSV."""


@synth.command("table1")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@handle_errors
def synth_table1(out):
    """The 22-subject cohort reproducing the published Kaplan-Meier table."""
    write_csv(table1_replica(), out)


@synth.command("weibull")
@click.option("--n", type=int, default=300, show_default=True)
@click.option("--beta", default="0.8,-0.5,0.0", show_default=True, help="True coefficients.")
@click.option("--shape", type=float, default=1.5, show_default=True)
@click.option("--scale", type=float, default=100.0, show_default=True)
@click.option("--censor", type=int, default=120, show_default=True, help="Administrative censoring time.")
@click.option("--law", type=click.Choice(["normal", "uniform"]), default="normal", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@handle_errors
def synth_weibull(n, beta, shape, scale, censor, law, seed, out):
    """Weibull proportional-hazards cohort with known coefficients."""
    write_csv(generate_weibull(WeibullConfig(n, _floats(beta), shape, scale, censor, law, seed)), out)


PIPELINE_KEYS = {
    "input": str, "out": str, "split": float, "seed": int, "models": str, "km_times": str,
    **{flag: None for flag in _OPTION_MAP},
}


def read_config(path) -> dict:
    """Flat ``key = value`` pairs from the ``[pipeline]`` section of an INI file."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if not cp.has_section("pipeline"):
        raise ValidationError(f"{path}: missing [pipeline] section")
    out = {}
    for key, value in cp.items("pipeline"):
        key = key.replace("-", "_")
        if key == "c":
            key = "svm_c"
        if key not in PIPELINE_KEYS:
            raise ValidationError(f"{path}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(param: click.Parameter, value: str):
    if value.strip().lower() in ("", "none"):
        return None
    try:
        return param.type_cast_value(click.get_current_context(), value)
    except click.BadParameter as exc:
        raise ValidationError(f"config {param.name}: {exc.message}") from None


@cli.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="INI file with a [pipeline] section; flags override it.")
@click.option("--split", "fraction", type=float, default=DEFAULT_SPLIT, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--models", default=",".join(MODEL_NAMES), show_default=True)
@click.option("--km-times", default=",".join(str(t) for t in TABLE1_QUERY_TIMES), show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True,
              help="Format of the report echoed to stdout.")
@model_options
@click.pass_context
@handle_errors
def pipeline(ctx, input_path, out, config_path, fraction, seed, models, km_times, fmt, **kw):
    """Load, split, standardize, fit, evaluate and write every artifact.

    Writes report.json, comparison.csv, km_summary.csv, km_curve.csv (the
    Kaplan-Meier fit on the training split), model_<name>.json and, when
    MTLR runs, weight_matrix.csv.
    """
    values = {"input": input_path, "out": out, "split": fraction, "seed": seed, "models": models,
              "km_times": km_times, **kw}
    if config_path:
        params = {p.name: p for p in ctx.command.params}
        alias = {"input": "input_path", "split": "fraction"}
        for key, raw in read_config(config_path).items():
            pname = alias.get(key, key)
            if ctx.get_parameter_source(pname) != click.core.ParameterSource.COMMANDLINE:
                values[key] = _coerce(params[pname], raw)
    if not values["input"] or not values["out"]:
        raise ValidationError("pipeline needs --input and --out (flag or config)")
    if not Path(values["input"]).is_file():
        raise ValidationError(f"{values['input']}: no such file")
    names = _parse_models(values["models"])
    opts = _build_options(values["seed"], {k: values[k] for k in _OPTION_MAP})
    ds = load_csv(values["input"])
    out_dir = Path(values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    train, fitted, scaling, report = _split_and_fit(ds, values["split"], values["seed"], names, opts)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    emit_comparison_plot(report, out_dir / "comparison.csv")
    curve = km_mod.fit_km(train)
    rows = km_mod.summarize_at(curve, _floats(values["km_times"]))
    _write_rows(out_dir / "km_summary.csv",
                ["time", "n_risk", "n_event", "survival", "std_error", "ci_lower", "ci_upper"], _km_rows(rows))
    emit_km_plot(curve, out_dir / "km_curve.csv")
    for name, model in fitted:
        save_model(out_dir / f"model_{name}.json", model, scaling)
        if name == "mtlr":
            weight_matrix(model).to_csv(out_dir / "weight_matrix.csv")
    click.echo(report.to_json() if fmt == "json" else report.to_text())


def main(argv=None):
    cli.main(args=argv, prog_name="survkit")


if __name__ == "__main__":
    main()
