"""Experiment configuration: one strict JSON document.

Unknown keys are rejected everywhere so a typo cannot silently change an
experiment. Path existence is checked at parse time; content problems are
data errors raised later by the pipeline.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config"]

VECTOR_DISTANCES = ("l1", "l2", "js", "kl", "fisher_discrete")
TERM_DISTANCES = ("l1", "l2", "js")
TERM_WEIGHTINGS = ("tf", "tfidf", "bm25")
SESSION_MODALITIES = (
    "cqi_avg",
    "harqnack_dl",
    "harqnack_ul",
    "rlc_dl",
    "rlc_ul",
    "sinr_pusch",
    "descriptor",
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _require_keys(doc: dict, allowed: set, required: set, where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")


def _check_file(path: str, where: str) -> str:
    if not isinstance(path, str) or not path:
        raise ConfigError(f"{where}: path must be a non-empty string")
    if not os.path.isfile(path):
        raise ConfigError(f"{where}: file not found: {path}")
    return path


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    threads: int
    graph: str
    dataset: dict
    split: dict
    references: dict
    representatives: dict
    learner: dict
    metrics: tuple
    threshold: float
    output: str | None
    raw: dict = field(default_factory=dict, repr=False)


_KNOWN_METRICS = ("auc", "ap", "accuracy", "precision", "recall", "f_measure", "mae", "rmse")


def parse_config(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(
        doc,
        allowed={
            "seed",
            "threads",
            "graph",
            "dataset",
            "split",
            "references",
            "representatives",
            "learner",
            "metrics",
            "threshold",
            "output",
        },
        required={"dataset"},
        where="config",
    )
    seed = int(doc.get("seed", 0))
    threads = int(doc.get("threads", 1))
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    graph = doc.get("graph", "pairwise")
    if graph not in ("pairwise", "class"):
        raise ConfigError("graph must be 'pairwise' or 'class'")

    dataset = dict(doc["dataset"])
    kind = dataset.get("kind")
    if kind == "sessions":
        _require_keys(
            dataset,
            allowed={"kind", "path", "truncate_at", "min_length", "modalities"},
            required={"kind", "path"},
            where="dataset",
        )
        dataset["path"] = _check_file(os.path.join(base_dir, dataset["path"]), "dataset.path")
        dataset["truncate_at"] = int(dataset.get("truncate_at", 0))
        dataset["min_length"] = int(dataset.get("min_length", 1))
        if dataset["truncate_at"] < 0 or dataset["min_length"] < 1:
            raise ConfigError("dataset: truncate_at must be >= 0 and min_length >= 1")
        mods = tuple(dataset.get("modalities", SESSION_MODALITIES))
        for m in mods:
            if m not in SESSION_MODALITIES:
                raise ConfigError(f"dataset: unknown session modality {m!r}")
        if not mods:
            raise ConfigError("dataset: at least one modality required")
        dataset["modalities"] = mods
    elif kind == "vectors":
        _require_keys(
            dataset,
            allowed={"kind", "labels", "modalities"},
            required={"kind", "labels", "modalities"},
            where="dataset",
        )
        dataset["labels"] = _check_file(os.path.join(base_dir, dataset["labels"]), "dataset.labels")
        mods = []
        if not dataset["modalities"]:
            raise ConfigError("dataset: at least one modality required")
        for i, mod in enumerate(dataset["modalities"]):
            mod = dict(mod)
            where = f"dataset.modalities[{i}]"
            _require_keys(
                mod,
                allowed={"name", "path", "distance", "scale", "format", "weighting"},
                required={"name", "path", "distance"},
                where=where,
            )
            mod["format"] = mod.get("format", "dense")
            if mod["format"] == "dense":
                if "weighting" in mod:
                    raise ConfigError(f"{where}: weighting only applies to the terms format")
                if mod["distance"] not in VECTOR_DISTANCES:
                    raise ConfigError(f"{where}: distance must be one of {VECTOR_DISTANCES}")
            elif mod["format"] == "terms":
                if mod["distance"] not in TERM_DISTANCES:
                    raise ConfigError(f"{where}: terms distance must be one of {TERM_DISTANCES}")
                mod["weighting"] = mod.get("weighting", "tf")
                if mod["weighting"] not in TERM_WEIGHTINGS:
                    raise ConfigError(f"{where}: weighting must be one of {TERM_WEIGHTINGS}")
                if mod["distance"] == "js" and mod["weighting"] != "tf":
                    raise ConfigError(f"{where}: js works on raw tf distributions only")
            else:
                raise ConfigError(f"{where}: format must be 'dense' or 'terms'")
            mod["path"] = _check_file(os.path.join(base_dir, mod["path"]), f"{where}.path")
            mod["scale"] = float(mod.get("scale", 1.0))
            if mod["scale"] <= 0:
                raise ConfigError(f"{where}: scale must be positive")
            mods.append(mod)
        if len({m["name"] for m in mods}) != len(mods):
            raise ConfigError("dataset: modality names must be unique")
        dataset["modalities"] = mods
    else:
        raise ConfigError("dataset.kind must be 'sessions' or 'vectors'")

    split = dict(doc.get("split", {}))
    _require_keys(split, allowed={"test_fraction", "seed", "stratify"}, required=set(), where="split")
    split["test_fraction"] = float(split.get("test_fraction", 0.5))
    if not 0 < split["test_fraction"] < 1:
        raise ConfigError("split.test_fraction must be in (0, 1)")
    split["seed"] = int(split.get("seed", seed))
    split["stratify"] = bool(split.get("stratify", True))

    references = dict(doc.get("references", {"strategy": "random", "size": 30}))
    _require_keys(references, allowed={"strategy", "size", "p"}, required={"strategy"}, where="references")
    strategy = references["strategy"]
    if strategy in ("random", "first"):
        references["size"] = int(references.get("size", 30))
        if references["size"] < 1:
            raise ConfigError("references.size must be >= 1")
        if "p" in references:
            raise ConfigError("references.p only applies to the rarity strategy")
    elif strategy == "rarity":
        references["p"] = float(references.get("p", 0.1))
        if not 0 < references["p"] <= 1:
            raise ConfigError("references.p must be in (0, 1]")
        if "size" in references:
            raise ConfigError("references.size does not apply to the rarity strategy")
    else:
        raise ConfigError("references.strategy must be random, first or rarity")

    representatives = dict(doc.get("representatives", {"size": 10}))
    _require_keys(representatives, allowed={"size"}, required=set(), where="representatives")
    representatives["size"] = int(representatives.get("size", 10))
    if graph == "class" and representatives["size"] < 2:
        raise ConfigError("class graph needs at least 2 representatives (one per class)")

    learner = dict(doc.get("learner", {"kind": "svm"}))
    kind_l = learner.get("kind", "svm")
    if kind_l == "svm":
        _require_keys(
            learner,
            allowed={"kind", "C", "eta", "max_epochs", "tol", "positive_weight"},
            required=set(),
            where="learner",
        )
        learner["kind"] = "svm"
        learner["C"] = float(learner.get("C", 1.0))
        learner["max_epochs"] = int(learner.get("max_epochs", 300))
        learner["tol"] = float(learner.get("tol", 1e-6))
        learner["eta"] = float(learner["eta"]) if "eta" in learner else None
        learner["positive_weight"] = float(learner.get("positive_weight", 1.0))
        if learner["C"] <= 0 or learner["positive_weight"] <= 0:
            raise ConfigError("learner.C and positive_weight must be positive")
    elif kind_l == "logreg":
        _require_keys(
            learner,
            allowed={"kind", "eta", "epochs", "l2"},
            required=set(),
            where="learner",
        )
        learner["kind"] = "logreg"
        learner["eta"] = float(learner.get("eta", 0.01))
        learner["epochs"] = int(learner.get("epochs", 500))
        learner["l2"] = float(learner.get("l2", 0.0))
    else:
        raise ConfigError("learner.kind must be 'svm' or 'logreg'")

    metrics = tuple(doc.get("metrics", ("auc", "ap")))
    if not metrics:
        raise ConfigError("metrics must be non-empty")
    for m in metrics:
        if m not in _KNOWN_METRICS:
            raise ConfigError(f"unknown metric {m!r}; choose from {_KNOWN_METRICS}")

    threshold = float(doc.get("threshold", 0.0))
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a string path")

    return ExperimentConfig(
        seed=seed,
        threads=threads,
        graph=graph,
        dataset=dataset,
        split=split,
        references=references,
        representatives=representatives,
        learner=learner,
        metrics=metrics,
        threshold=threshold,
        output=output,
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))
