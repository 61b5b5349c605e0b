"""Experiment command line.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure. Every report-writing subcommand renders its figures next to the
delimited output (disable with --no-figures on the relevant commands).
"""
from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import bicluster as bic_mod
from . import distances as dist_mod
from . import fisher as fisher_mod
from . import gmm as gmm_mod
from . import io as io_mod
from . import learners as learn_mod
from . import sessions as sess_mod
from . import simkernel as sk_mod
from .config import ConfigError, load_config
from .experiment import (
    ExperimentError,
    eval_report,
    run_experiment,
    search_modality_weights,
    select_reference_set,
)

_EXIT_CONFIG = 2
_EXIT_DATA = 3
_EXIT_NUMERIC = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map library errors onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(_EXIT_CONFIG, str(exc))
        except ExperimentError as exc:
            codes = {"config": _EXIT_CONFIG, "data": _EXIT_DATA, "numeric": _EXIT_NUMERIC}
            _fail(codes.get(exc.kind, _EXIT_DATA), str(exc))
        except (OSError, ValueError, KeyError) as exc:
            _fail(_EXIT_DATA, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.option("--seed", type=int, default=None, help="Override the random seed.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads for the parallel stages (results are thread-count independent).")
@click.option("--output", type=click.Path(), default="out", show_default=True,
              help="Directory for generated files.")
@click.pass_context
def main(ctx, seed, threads, output):
    """Similarity-kernel experiment toolkit."""
    if threads < 1:
        raise click.UsageError("--threads must be >= 1")
    ctx.obj = {"seed": seed, "threads": threads, "output": output}


def _outdir(ctx) -> str:
    out = ctx.obj["output"]
    os.makedirs(out, exist_ok=True)
    return out


def _seed(ctx, default: int = 0) -> int:
    return ctx.obj["seed"] if ctx.obj["seed"] is not None else default


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


@main.command("gmm-train")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              help="Dense sample CSV with header.")
@click.option("--components", type=int, required=True)
@click.option("--max-iter", type=int, default=200, show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--no-figures", is_flag=True, default=False)
@click.pass_context
@_guard
def gmm_train_cmd(ctx, data_path, components, max_iter, tol, no_figures):
    """Fit a diagonal-covariance Gaussian mixture by EM."""
    X, _ = io_mod.read_dense_csv(data_path)
    try:
        model, trace = gmm_mod.em_fit(X, components, seed=_seed(ctx), max_iter=max_iter, tol=tol)
    except FloatingPointError as exc:
        raise ExperimentError("gmm", "numeric", str(exc))
    out = _outdir(ctx)
    gmm_mod.save_model(model, os.path.join(out, "model.json"))
    io_mod.write_dense_csv(os.path.join(out, "loglik_trace.csv"), trace[:, None], ["loglik"])
    if not no_figures:
        from .plots import plot_trace

        plot_trace(trace, "log-likelihood", os.path.join(out, "figures", "loglik_trace.png"))
    click.echo(f"fitted {components} components in {model.meta['iterations']} iterations; "
               f"final log-likelihood {model.meta['final_loglik']:.6f}")


@main.command("fisher")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              help="Dense sample CSV with header.")
@click.option("--groups", "groups_path", type=click.Path(exists=True), default=None,
              help="Optional newline-separated group id per row; one vector per group.")
@click.option("--normalize", type=click.Choice(["none", "power", "l2", "both"]),
              default="both", show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.pass_context
@_guard
def fisher_cmd(ctx, model_path, data_path, groups_path, normalize, alpha):
    """Compute Fisher vectors of sample groups under a trained mixture."""
    model = gmm_mod.load_model(model_path)
    X, _ = io_mod.read_dense_csv(data_path)
    if groups_path is None:
        groups = [("all", np.arange(X.shape[0]))]
    else:
        with open(groups_path) as fh:
            ids = [line.strip() for line in fh if line.strip()]
        if len(ids) != X.shape[0]:
            raise ValueError("group file must have one id per data row")
        seen = {}
        for row, gid in enumerate(ids):
            seen.setdefault(gid, []).append(row)
        groups = [(gid, np.array(rows)) for gid, rows in seen.items()]
    vectors = [
        fisher_mod.fisher_vector(model, X[rows], normalize=normalize, alpha=alpha)
        for _, rows in groups
    ]
    out = _outdir(ctx)
    fisher_mod.save_fisher_vectors(os.path.join(out, "fisher.csv"), vectors)
    _write_json(os.path.join(out, "fisher_groups.json"), {"groups": [g for g, _ in groups]})
    click.echo(f"wrote {len(vectors)} Fisher vector(s) of length {vectors[0].values.size}")


@main.command("simkernel-features")
@click.option("--train-distances", required=True, type=click.Path(exists=True),
              help="Training distance columns, CSV with header = column ids.")
@click.option("--test-distances", type=click.Path(exists=True), default=None)
@click.pass_context
@_guard
def simkernel_features_cmd(ctx, train_distances, test_distances):
    """Standardize distance columns into similarity-kernel features."""
    D_train, ids = io_mod.read_dense_csv(train_distances)
    stats = sk_mod.fit_standardization(D_train, ids)
    out = _outdir(ctx)
    F_train = sk_mod.SimilarityFeatures(sk_mod.standardize_columns(D_train, stats), ids)
    sk_mod.save_features(os.path.join(out, "features_train.csv"), F_train, stats)
    message = f"standardized {len(ids)} columns; train rows {D_train.shape[0]}"
    if test_distances is not None:
        D_test, ids_test = io_mod.read_dense_csv(test_distances)
        if tuple(ids_test) != tuple(ids):
            raise ValueError("test distance columns do not match the training columns")
        F_test = sk_mod.SimilarityFeatures(sk_mod.standardize_columns(D_test, stats), ids)
        sk_mod.save_features(os.path.join(out, "features_test.csv"), F_test, stats)
        message += f", test rows {D_test.shape[0]}"
    _write_json(
        os.path.join(out, "stats.json"),
        {
            "columns": list(ids),
            "means": stats.means.tolist(),
            "stdevs": stats.stdevs.tolist(),
            "constant": stats.constant.astype(int).tolist(),
            "digest": stats.digest,
        },
    )
    click.echo(message)


def _read_single_label_column(path) -> np.ndarray:
    labels, names = io_mod.read_labels_csv(path)
    if labels.shape[1] != 1:
        raise ValueError(f"{path}: expected exactly one label column, got {names}")
    return labels[:, 0]


@main.command("svm-train")
@click.option("--kernel", "kernel_path", required=True, type=click.Path(exists=True),
              help="Square kernel matrix, headerless CSV.")
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True),
              help="Single-column label CSV with header; 0/1 or -1/+1.")
@click.option("--c-param", "c_param", type=float, default=1.0, show_default=True)
@click.option("--eta", type=float, default=None, help="Learning rate; default 1/max K_ii.")
@click.option("--max-epochs", type=int, default=1000, show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--no-figures", is_flag=True, default=False)
@click.pass_context
@_guard
def svm_train_cmd(ctx, kernel_path, labels_path, c_param, eta, max_epochs, tol, no_figures):
    """Train the 1-norm soft margin SVM on a precomputed kernel."""
    K = io_mod.read_matrix_csv(kernel_path)
    y = _read_single_label_column(labels_path)
    y = np.where(y > 0, 1.0, -1.0)
    try:
        model = learn_mod.svm_train(K, y, C=c_param, eta=eta, max_epochs=max_epochs, tol=tol)
    except FloatingPointError as exc:
        raise ExperimentError("svm", "numeric", str(exc))
    out = _outdir(ctx)
    learn_mod.save_svm(model, os.path.join(out, "svm.json"))
    if not no_figures:
        from .plots import plot_trace

        plot_trace(model.objective_trace, "dual objective",
                   os.path.join(out, "figures", "dual_objective.png"), xlabel="epoch")
    click.echo(f"trained on {model.n_train} rows; {model.support_indices.size} support vectors; "
               f"dual objective {model.objective_trace[-1]:.6f}")


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--kernel", "kernel_path", required=True, type=click.Path(exists=True),
              help="Test-by-train kernel matrix, headerless CSV.")
@click.pass_context
@_guard
def predict_cmd(ctx, model_path, kernel_path):
    """Score instances with a trained SVM."""
    model = learn_mod.load_svm(model_path)
    K_test = io_mod.read_matrix_csv(kernel_path)
    scores = learn_mod.svm_decision(model, K_test)
    if not np.all(np.isfinite(scores)):
        raise ExperimentError("predict", "numeric", "non-finite scores")
    out = _outdir(ctx)
    io_mod.write_dense_csv(os.path.join(out, "scores.csv"), scores[:, None], ["score"])
    click.echo(f"scored {scores.size} instances")


@main.command("eval")
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True),
              help="CSV with header instance,concept,score,label.")
@click.option("--metrics", "metrics_csv", default="auc,ap", show_default=True)
@click.option("--threshold", type=float, default=0.0, show_default=True)
@click.option("--timings", is_flag=True, default=False,
              help="Include wall-clock timings (reports stop being byte-reproducible).")
@click.option("--no-figures", is_flag=True, default=False)
@click.pass_context
@_guard
def eval_cmd(ctx, pred_path, metrics_csv, threshold, timings, no_figures):
    """Evaluate a predictions file into a report."""
    from time import perf_counter

    t0 = perf_counter()
    by_concept = {}
    with open(pred_path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["instance", "concept", "score", "label"]:
            raise ValueError("predictions CSV must have header instance,concept,score,label")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            _, concept, score, label = line.split(",")
            by_concept.setdefault(concept, ([], []))
            by_concept[concept][0].append(float(score))
            by_concept[concept][1].append(float(label))
    if not by_concept:
        raise ValueError("no predictions found")
    metric_list = tuple(m.strip() for m in metrics_csv.split(",") if m.strip())
    per_concept = {}
    try:
        for concept, (scores, labels) in by_concept.items():
            body = eval_report(np.array(scores), np.array(labels), metric_list, threshold)
            per_concept[concept] = body["per_concept"]["concept0"]
    except ValueError as exc:
        raise ExperimentError("metrics", "numeric", str(exc))
    macro = {m: float(np.mean([per_concept[c][m] for c in per_concept])) for m in metric_list}
    report = {
        "config_digest": None,
        "per_concept": per_concept,
        "macro": macro,
        "timings": {"evaluate": round(perf_counter() - t0, 6)} if timings else None,
    }
    out = _outdir(ctx)
    _write_json(os.path.join(out, "report.json"), report)
    if not no_figures:
        from .plots import render_report_figures

        scored = {c: (np.array(v[0]), np.array(v[1])) for c, v in by_concept.items()}
        render_report_figures(out, scored, per_concept, metric_list)
    click.echo(json.dumps(macro, sort_keys=True))


@main.command("bicluster")
@click.option("--matrix", "matrix_path", required=True, type=click.Path(exists=True),
              help="Non-negative contingency matrix, headerless CSV.")
@click.option("--row-clusters", type=int, required=True)
@click.option("--col-clusters", type=int, required=True)
@click.option("--max-iter", type=int, default=50, show_default=True)
@click.option("--blend-weight", type=float, default=0.0, show_default=True)
@click.option("--external-dist", type=click.Path(exists=True), default=None,
              help="Row-by-row distance matrix for the blended update.")
@click.option("--no-figures", is_flag=True, default=False)
@click.pass_context
@_guard
def bicluster_cmd(ctx, matrix_path, row_clusters, col_clusters, max_iter,
                  blend_weight, external_dist, no_figures):
    """Co-cluster a contingency matrix and persist the assignments."""
    M = io_mod.read_matrix_csv(matrix_path)
    ext = io_mod.read_matrix_csv(external_dist) if external_dist else None
    result = bic_mod.cocluster(
        M, row_clusters, col_clusters, seed=_seed(ctx), max_iter=max_iter,
        external_dist=ext, w=blend_weight,
    )
    out = _outdir(ctx)
    bic_mod.save_coclustering(
        result,
        os.path.join(out, "row_clusters.csv"),
        os.path.join(out, "col_clusters.csv"),
        os.path.join(out, "bicluster.json"),
    )
    if not no_figures:
        from .plots import plot_trace

        plot_trace(result.mi_trace, "mutual information",
                   os.path.join(out, "figures", "mi_trace.png"), xlabel="sweep")
    click.echo(f"final mutual information {result.final_mi:.6f} after {result.n_sweeps} sweeps")


@main.command("dtw")
@click.argument("series_a", type=click.Path(exists=True))
@click.argument("series_b", type=click.Path(exists=True))
@_guard
def dtw_cmd(series_a, series_b):
    """Dynamic time warping distance between two series files."""
    a = io_mod.read_series(series_a)
    b = io_mod.read_series(series_b)
    click.echo(f"{dist_mod.dtw(a, b):.17g}")


@main.command("synth-sessions")
@click.option("--drop", "n_drop", type=int, required=True)
@click.option("--normal", "n_normal", type=int, required=True)
@click.option("--min-len", type=int, default=15, show_default=True)
@click.pass_context
@_guard
def synth_sessions_cmd(ctx, n_drop, n_normal, min_len):
    """Generate a labelled synthetic session CSV."""
    sessions = sess_mod.generate_sessions(n_drop, n_normal, min_len=min_len, seed=_seed(ctx))
    out = _outdir(ctx)
    sess_mod.write_sessions_csv(sessions, os.path.join(out, "sessions.csv"))
    click.echo(f"wrote {len(sessions)} sessions ({n_drop} drop, {n_normal} normal)")


@main.command("select-refset")
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True),
              help="Binary label matrix CSV with concept-name header.")
@click.option("--fraction", "-p", type=float, default=0.1, show_default=True)
@click.pass_context
@_guard
def select_refset_cmd(ctx, labels_path, fraction):
    """Select a reference set by concept rarity."""
    labels, _ = io_mod.read_labels_csv(labels_path)
    selected = select_reference_set(labels, fraction)
    out = _outdir(ctx)
    io_mod.write_dense_csv(os.path.join(out, "refset.csv"), selected[:, None], ["index"])
    click.echo(f"selected {selected.size} of {labels.shape[0]} instances")


@main.command("weight-search")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="CSV: per-modality pair distances plus a final 'label' column (1 = same topic).")
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True),
              help="CSV of candidate weight vectors, header = modality names.")
@click.pass_context
@_guard
def weight_search_cmd(ctx, pairs_path, grid_path):
    """Brute-force modality weight search by topic-separation AUC."""
    pairs, names = io_mod.read_dense_csv(pairs_path)
    if names[-1] != "label":
        raise ValueError("the last pairs column must be 'label'")
    grid, grid_names = io_mod.read_dense_csv(grid_path)
    if tuple(grid_names) != tuple(names[:-1]):
        raise ValueError("grid columns must match the pairs' modality columns")
    weights, auc = search_modality_weights(pairs[:, :-1], pairs[:, -1], list(grid))
    out = _outdir(ctx)
    _write_json(
        os.path.join(out, "weights.json"),
        {"modalities": list(grid_names), "weights": weights.tolist(), "auc": auc},
    )
    click.echo(f"best AUC {auc:.6f} with weights {weights.tolist()}")


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--timings", is_flag=True, default=False,
              help="Include wall-clock timings (reports stop being byte-reproducible).")
@click.option("--no-figures", is_flag=True, default=False)
@click.pass_context
@_guard
def run_cmd(ctx, config_path, timings, no_figures):
    """Run a config-driven end-to-end experiment."""
    cfg = load_config(config_path)
    if ctx.obj["seed"] is not None or ctx.obj["threads"] != 1:
        overrides = dict(cfg.raw)
        if ctx.obj["seed"] is not None:
            overrides["seed"] = ctx.obj["seed"]
        overrides["threads"] = ctx.obj["threads"]
        from .config import parse_config

        cfg = parse_config(overrides, base_dir=os.path.dirname(os.path.abspath(config_path)))
    out = ctx.obj["output"] if ctx.obj["output"] != "out" or cfg.output is None else cfg.output
    report = run_experiment(cfg, output_dir=out, with_timings=timings,
                            with_figures=not no_figures)
    click.echo(json.dumps(report["macro"], sort_keys=True))


if __name__ == "__main__":
    main()
