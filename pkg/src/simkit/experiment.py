"""End-to-end experiment pipeline and its supporting selection/search steps.

The pipeline is strictly train-frozen: reference selection, modality weight
search and distance standardization only ever read the training split, so
test rows can be added or relabelled without changing any fitted quantity.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from . import distances as dist_mod
from . import metrics as metrics_mod
from .config import ExperimentConfig
from .learners import logreg_decision, logreg_train, svm_decision, svm_train
from .sessions import read_sessions_csv, session_distance_blocks
from .simkernel import (
    DistanceSpec,
    SampleSet,
    combine_class_columns,
    compute_distance_columns,
    fit_standardization,
    standardize_columns,
    similarity_kernel_matrix,
)

__all__ = [
    "ExperimentError",
    "select_reference_set",
    "search_modality_weights",
    "eval_report",
    "run_experiment",
]


class ExperimentError(RuntimeError):
    """Stage-tagged pipeline failure; ``kind`` is config, data or numeric."""

    def __init__(self, stage: str, kind: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.kind = kind


def select_reference_set(labels, p: float) -> np.ndarray:
    """Rank training instances by concept rarity and cut the shortest prefix
    that covers every concept.

    The rarity score of an instance is the sum of 1/positive-count over its
    positive concepts; ties break by instance index. The prefix must contain
    at least ceil(p * N) positives of every concept, or all of them for
    concepts rarer than that. Returns the selected indices in ranking order.
    """
    Y = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    n, n_concepts = Y.shape
    if n == 0:
        raise ValueError("empty training set")
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    Y = (Y > 0).astype(np.float64)
    counts = Y.sum(axis=0)
    with np.errstate(divide="ignore"):
        inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1e-300), 0.0)
    scores = Y @ inv
    order = np.lexsort((np.arange(n), -scores))
    need = np.minimum(counts, np.ceil(p * n - 1e-9))
    got = np.zeros(n_concepts)
    for cut, idx in enumerate(order, start=1):
        got += Y[idx]
        if np.all(got >= need):
            return order[:cut]
    return order


def search_modality_weights(pair_distances, pair_labels, grid) -> tuple:
    """Brute-force weight search scored by topic-separation AUC.

    ``pair_distances`` holds one row per instance pair and one column per
    modality; ``pair_labels`` is 1 for same-topic pairs. Each candidate
    weight vector is scored by the AUC of ranking pairs by ascending
    weighted distance (closer means same topic). Returns
    (best_weights, best_auc); ties keep the earliest candidate.
    """
    D = np.atleast_2d(np.asarray(pair_distances, dtype=np.float64))
    y = np.asarray(pair_labels)
    grid = [np.asarray(g, dtype=np.float64) for g in grid]
    if not grid:
        raise ValueError("empty weight grid")
    if y.shape != (D.shape[0],):
        raise ValueError("pair labels must align with the distance rows")
    if not (np.any(y > 0) and np.any(y <= 0)):
        raise ValueError("need both same-topic and different-topic pairs")
    best_w, best_auc = None, -1.0
    for w in grid:
        if w.shape != (D.shape[1],):
            raise ValueError("candidate weight length must match the modality count")
        combined = D @ w
        auc = metrics_mod.roc_auc(-combined, y)
        if auc > best_auc:
            best_w, best_auc = w, auc
    return best_w, best_auc


def eval_report(scores, labels, metrics, threshold: float = 0.0, concepts=None) -> dict:
    """Per-concept and macro-averaged metric report.

    ``scores`` and ``labels`` are (n, C) (1-d input is treated as a single
    concept). Binary metrics need binary labels; mae/rmse accept any reals.
    """
    S = np.asarray(scores, dtype=np.float64)
    L = np.asarray(labels, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    if L.ndim == 1:
        L = L[:, None]
    if S.shape != L.shape:
        raise ValueError("scores and labels must be aligned")
    n_concepts = S.shape[1]
    if concepts is None:
        concepts = [f"concept{i}" for i in range(n_concepts)]
    if len(concepts) != n_concepts:
        raise ValueError("concept names must match the label columns")

    per_concept = {}
    for j, name in enumerate(concepts):
        values = {}
        s, y = S[:, j], L[:, j]
        confusion = None
        for m in metrics:
            if m == "auc":
                values[m] = metrics_mod.roc_auc(s, y)
            elif m == "ap":
                values[m] = metrics_mod.average_precision(s, y)
            elif m in ("accuracy", "precision", "recall", "f_measure"):
                if confusion is None:
                    confusion = metrics_mod.confusion_metrics(s, y, threshold)
                values[m] = confusion[m]
            elif m == "mae":
                values[m] = metrics_mod.mae(s, y)
            elif m == "rmse":
                values[m] = metrics_mod.rmse(s, y)
            else:
                raise ValueError(f"unknown metric {m!r}")
        per_concept[str(name)] = values
    macro = {
        m: float(np.mean([per_concept[c][m] for c in per_concept])) for m in metrics
    }
    return {"per_concept": per_concept, "macro": macro}


# --------------------------------------------------------------------------
# pipeline
# --------------------------------------------------------------------------


@dataclass
class _Prepared:
    """Everything the learner stage needs, fully train-frozen."""

    features_train: np.ndarray
    features_test: np.ndarray
    train_labels: np.ndarray  # (n_train, C) binary
    test_labels: np.ndarray
    concepts: tuple
    test_indices: np.ndarray
    column_ids: tuple


def _split_indices(n: int, labels: np.ndarray, split: dict) -> tuple:
    """Seeded train/test split; stratification keys on the first concept."""
    rng = np.random.default_rng(split["seed"])
    test_fraction = split["test_fraction"]
    if split.get("stratify", True) and labels.shape[1] >= 1:
        key = labels[:, 0] > 0
        test = []
        for cls in (False, True):
            idx = np.nonzero(key == cls)[0]
            n_test = int(round(test_fraction * idx.size))
            pick = rng.permutation(idx.size)[:n_test]
            test.append(idx[pick])
        test_idx = np.sort(np.concatenate(test))
    else:
        n_test = int(round(test_fraction * n))
        test_idx = np.sort(rng.permutation(n)[:n_test])
    mask = np.zeros(n, dtype=bool)
    mask[test_idx] = True
    train_idx = np.nonzero(~mask)[0]
    if train_idx.size < 2 or test_idx.size < 1:
        raise ExperimentError("split", "data", "split leaves too few rows on one side")
    return train_idx, test_idx


def _select_references(train_labels: np.ndarray, refs: dict, seed: int) -> np.ndarray:
    """Positions (into the train split) of the reference sample set."""
    n = train_labels.shape[0]
    strategy = refs["strategy"]
    if strategy == "rarity":
        return select_reference_set(train_labels, refs["p"])
    size = min(refs["size"], n)
    if strategy == "first":
        return np.arange(size)
    rng = np.random.default_rng(seed + 1)
    return np.sort(rng.permutation(n)[:size])


def _select_representatives(
    train_labels: np.ndarray, size: int, exclude: np.ndarray, seed: int
) -> np.ndarray:
    """Per-class uniform sample of class representatives, disjoint from S.

    Classes are the binary states of the first concept (the class graph is a
    binary-task construct).
    """
    y = train_labels[:, 0] > 0
    rng = np.random.default_rng(seed + 2)
    taken = set(int(i) for i in exclude)
    picks = []
    per_class = [size - size // 2, size // 2]  # negatives, positives
    for cls, quota in zip((False, True), per_class):
        pool = np.array([i for i in np.nonzero(y == cls)[0] if int(i) not in taken])
        if pool.size < max(quota, 1):
            raise ExperimentError(
                "references", "data", "not enough instances left for class representatives"
            )
        picks.append(pool[rng.permutation(pool.size)[:quota]])
    return np.sort(np.concatenate(picks))


_VECTOR_DISTANCES = {
    "l1": lambda a, b: dist_mod.minkowski(a, b, 1),
    "l2": lambda a, b: dist_mod.minkowski(a, b, 2),
    "js": dist_mod.js_divergence,
    "kl": dist_mod.kl_divergence,
    "fisher_discrete": dist_mod.fisher_distance_discrete,
}
_TERM_DISTANCES = {
    "l1": lambda a, b: dist_mod.sparse_minkowski(a, b, 1),
    "l2": lambda a, b: dist_mod.sparse_minkowski(a, b, 2),
    "js": dist_mod.sparse_js_divergence,
}
_DISTRIBUTION_DISTANCES = ("js", "kl", "fisher_discrete")


def _train_corpus_stats(docs, train_idx) -> dist_mod.CorpusStats:
    """Document frequencies and mean length from the training split only."""
    df = {}
    lengths = []
    for i in train_idx:
        doc = docs[int(i)]
        lengths.append(doc.length)
        for t in doc.term_ids:
            df[t] = df.get(t, 0) + 1
    return dist_mod.CorpusStats(len(train_idx), df, float(np.mean(lengths)))


def _weight_documents(docs, stats, scheme):
    """Apply a train-fitted weighting; test-only terms are dropped first."""
    known = set(stats.doc_frequency)
    out = []
    for doc in docs:
        kept = [(t, f) for t, f in zip(doc.term_ids, doc.frequencies) if t in known]
        if not kept:
            raise ExperimentError(
                "distances", "data", "a document shares no terms with the training corpus"
            )
        trimmed = dist_mod.SparseTermVector(
            tuple(t for t, _ in kept), tuple(f for _, f in kept), doc.length
        )
        out.append(dist_mod.weight_terms(trimmed, stats, scheme))
    return out


def _prepare_vectors(cfg: ExperimentConfig) -> _Prepared:
    from .io import read_dense_csv, read_distributions_csv, read_labels_csv, read_term_vectors

    labels, concepts = read_labels_csv(cfg.dataset["labels"])
    binary = (labels > 0).astype(np.float64)
    train_idx, test_idx = _split_indices(labels.shape[0], binary, cfg.split)
    train_labels = binary[train_idx]
    for j, name in enumerate(concepts):
        if train_labels[:, j].sum() < 1:
            raise ExperimentError("split", "data", f"concept {name!r} has no train positives")

    payloads = {}
    specs = []
    for mod in cfg.dataset["modalities"]:
        name = mod["name"]
        if mod["format"] == "terms":
            docs = read_term_vectors(mod["path"])
            if len(docs) != labels.shape[0]:
                raise ExperimentError(
                    "ingest", "data", f"modality {name!r} rows disagree with the labels"
                )
            if mod["weighting"] != "tf":
                stats = _train_corpus_stats(docs, train_idx)
                docs = _weight_documents(docs, stats, mod["weighting"])
            payloads[name] = docs
            specs.append(DistanceSpec(name, _TERM_DISTANCES[mod["distance"]], mod["scale"]))
        else:
            if mod["distance"] in _DISTRIBUTION_DISTANCES:
                matrix = read_distributions_csv(mod["path"])
            else:
                matrix, _ = read_dense_csv(mod["path"])
            if matrix.shape[0] != labels.shape[0]:
                raise ExperimentError(
                    "ingest", "data", f"modality {name!r} rows disagree with the labels"
                )
            payloads[name] = list(matrix)
            specs.append(DistanceSpec(name, _VECTOR_DISTANCES[mod["distance"]], mod["scale"]))

    instances = [
        {name: payloads[name][i] for name in payloads} for i in range(labels.shape[0])
    ]
    ref_pos = _select_references(train_labels, cfg.references, cfg.seed)
    samples = [instances[train_idx[i]] for i in ref_pos]
    if cfg.graph == "class":
        rep_pos = _select_representatives(
            train_labels, cfg.representatives["size"], ref_pos, cfg.seed
        )
        reps = [instances[train_idx[i]] for i in rep_pos]
        rep_labels = tuple(int(train_labels[i, 0]) for i in rep_pos)
        sample_set = SampleSet(tuple(samples), tuple(reps), rep_labels)
    else:
        sample_set = SampleSet(tuple(samples))

    matrix, ids = compute_distance_columns(instances, sample_set, specs, cfg.graph)
    stats = fit_standardization(matrix[train_idx], ids)
    features = standardize_columns(matrix, stats)
    return _Prepared(
        features_train=features[train_idx],
        features_test=features[test_idx],
        train_labels=train_labels,
        test_labels=binary[test_idx],
        concepts=tuple(str(c) for c in concepts),
        test_indices=test_idx,
        column_ids=ids,
    )


def _prepare_sessions(cfg: ExperimentConfig) -> _Prepared:
    ds = cfg.dataset
    sessions = read_sessions_csv(ds["path"])
    sessions = [s for s in sessions if s.length >= ds["min_length"]]
    if len(sessions) < 4:
        raise ExperimentError("ingest", "data", "too few sessions after the length filter")
    for s in sessions:
        if s.length - ds["truncate_at"] < 2:
            raise ExperimentError(
                "ingest", "data", f"session {s.session_id} too short for truncate_at"
            )
    labels = np.array([[float(s.label)] for s in sessions])

    train_idx, test_idx = _split_indices(len(sessions), labels, cfg.split)
    train_labels = labels[train_idx]
    if train_labels[:, 0].sum() < 1 or (1 - train_labels[:, 0]).sum() < 1:
        raise ExperimentError("split", "data", "train split must contain both classes")

    ref_pos = _select_references(train_labels, cfg.references, cfg.seed)
    sample_sessions = [sessions[train_idx[i]] for i in ref_pos]
    mods = ds["modalities"]

    blocks_s = session_distance_blocks(
        sessions, sample_sessions, ds["truncate_at"], threads=cfg.threads, modalities=mods
    )
    if cfg.graph == "class":
        rep_pos = _select_representatives(
            train_labels, cfg.representatives["size"], ref_pos, cfg.seed
        )
        rep_sessions = [sessions[train_idx[i]] for i in rep_pos]
        blocks_r = session_distance_blocks(
            sessions, rep_sessions, ds["truncate_at"], threads=cfg.threads, modalities=mods
        )
        # combine expects modality-major (n, K, targets)
        matrix = combine_class_columns(
            blocks_s.transpose(0, 2, 1), blocks_r.transpose(0, 2, 1)
        )
        ids = tuple(
            f"{m}|s{i}|r{j}"
            for m in mods
            for i in range(len(sample_sessions))
            for j in range(len(rep_sessions))
        )
    else:
        # sample-major flat layout: per sample the modalities in declared order
        matrix = blocks_s.reshape(len(sessions), -1)
        ids = tuple(f"s{i}|{m}" for i in range(len(sample_sessions)) for m in mods)

    stats = fit_standardization(matrix[train_idx], ids)
    features = standardize_columns(matrix, stats)
    return _Prepared(
        features_train=features[train_idx],
        features_test=features[test_idx],
        train_labels=train_labels,
        test_labels=labels[test_idx],
        concepts=("drop",),
        test_indices=test_idx,
        column_ids=ids,
    )


def _train_and_score(cfg: ExperimentConfig, prep: _Prepared) -> np.ndarray:
    """One-vs-rest training per concept; returns (n_test, C) scores."""
    scores = np.empty((prep.features_test.shape[0], len(prep.concepts)))
    if cfg.learner["kind"] == "svm":
        K_train = similarity_kernel_matrix(prep.features_train)
        K_test = prep.features_test @ prep.features_train.T
        for j in range(len(prep.concepts)):
            y = np.where(prep.train_labels[:, j] > 0, 1.0, -1.0)
            model = svm_train(
                K_train,
                y,
                C=cfg.learner["C"],
                eta=cfg.learner["eta"],
                max_epochs=cfg.learner["max_epochs"],
                tol=cfg.learner["tol"],
                positive_weight=cfg.learner["positive_weight"],
            )
            scores[:, j] = svm_decision(model, K_test)
    else:
        ones = np.ones((prep.features_train.shape[0], 1))
        X_train = np.hstack([prep.features_train, ones])
        X_test = np.hstack(
            [prep.features_test, np.ones((prep.features_test.shape[0], 1))]
        )
        for j in range(len(prep.concepts)):
            model = logreg_train(
                X_train,
                prep.train_labels[:, j],
                eta=cfg.learner["eta"],
                epochs=cfg.learner["epochs"],
                l2=cfg.learner["l2"],
            )
            scores[:, j] = logreg_decision(model, X_test)
    if not np.all(np.isfinite(scores)):
        raise ExperimentError("learner", "numeric", "non-finite decision scores")
    return scores


def config_digest(cfg: ExperimentConfig) -> str:
    # threads and output are execution details, not experiment identity
    doc = {k: v for k, v in cfg.raw.items() if k not in ("threads", "output")}
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def run_experiment(cfg: ExperimentConfig, output_dir=None, with_timings: bool = False,
                   with_figures: bool = True) -> dict:
    """Execute ingest -> distances -> standardization -> kernel -> learner -> metrics.

    Writes report.json, predictions.csv and (by default) figures under the
    output directory, and returns the report dict. Timings are recorded only
    when requested so reports stay byte-identical across runs.
    """
    out = output_dir or cfg.output
    if out is None:
        raise ExperimentError("config", "config", "no output directory given")
    os.makedirs(out, exist_ok=True)

    timings = {}
    t0 = perf_counter()
    try:
        if cfg.dataset["kind"] == "sessions":
            prep = _prepare_sessions(cfg)
        else:
            prep = _prepare_vectors(cfg)
    except ExperimentError:
        raise
    except (OSError, ValueError) as exc:
        raise ExperimentError("ingest", "data", str(exc)) from exc
    timings["prepare"] = perf_counter() - t0

    t0 = perf_counter()
    try:
        scores = _train_and_score(cfg, prep)
    except ExperimentError:
        raise
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ExperimentError("learner", "numeric", str(exc)) from exc
    timings["learn"] = perf_counter() - t0

    t0 = perf_counter()
    try:
        report_body = eval_report(
            scores, prep.test_labels, cfg.metrics, cfg.threshold, prep.concepts
        )
    except ValueError as exc:
        raise ExperimentError("metrics", "numeric", str(exc)) from exc
    timings["evaluate"] = perf_counter() - t0

    report = {
        "config_digest": config_digest(cfg),
        "per_concept": report_body["per_concept"],
        "macro": report_body["macro"],
        "timings": {k: round(v, 6) for k, v in timings.items()} if with_timings else None,
    }
    _write_report(out, report)
    _write_predictions(out, prep, scores)
    if with_figures:
        from .plots import render_report_figures

        scores_by_concept = {
            c: (scores[:, j], prep.test_labels[:, j]) for j, c in enumerate(prep.concepts)
        }
        render_report_figures(out, scores_by_concept, report_body["per_concept"], cfg.metrics)
    return report


def _write_report(out: str, report: dict) -> None:
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_predictions(out: str, prep: _Prepared, scores: np.ndarray) -> None:
    with open(os.path.join(out, "predictions.csv"), "w") as fh:
        fh.write("instance,concept,score,label\n")
        for j, concept in enumerate(prep.concepts):
            for row, idx in enumerate(prep.test_indices):
                fh.write(
                    f"{int(idx)},{concept},{scores[row, j]:.17g},{int(prep.test_labels[row, j])}\n"
                )
