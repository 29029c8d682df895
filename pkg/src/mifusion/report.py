"""Train, calibrate and evaluate the three classifiers and both ensembles, and
render per-class result tables."""

import csv
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig
from .dataset import (
    TRAINABLE_CLASSES, SplitSpec, parse_feature_csv, split, synth_generate, table1_counts,
)
from .ensemble import FusionModel, fit_fusion, majority_vote, predict_weighted
from .errors import ConfigError, MifusionError, StageError
from .metrics import ClassMetrics, class_metrics, confusion
from .mlp import LmConfig, MlpModel, mlp_forward, mlp_init, mlp_train_lm
from .rbf import RbfModel, rbf_build, rbf_forward
from .svm import PolyKernel, SmoConfig, SvmOvaModel, svm_scores, svm_train_ova

log = logging.getLogger(__name__)

CLASSIFIERS = ("mlp", "rbf", "svm")
SYSTEMS = ("mlp", "rbf", "svm", "voting", "weighted")
DISPLAY_NAMES = {
    "mlp": "BP MLP",
    "rbf": "RBF NN",
    "svm": "SVM",
    "voting": "Majority Voting Ensemble",
    "weighted": "Mutual Information Weighted Ensemble",
}
CLASS_NAMES = ("Normal", "PVC", "APB", "RBBB", "LBBB")
CSV_COLUMNS = ("model", "class", "accuracy_pct", "sensitivity_pct", "specificity_pct", "fpr_pct", "fnr_pct")
MODEL_FILES = {"mlp": "mlp.model", "rbf": "rbf.model", "svm": "svm.model", "fusion": "fusion.model"}


@dataclass
class SystemResult:
    """Test-set performance of one classifier or ensemble."""

    name: str
    per_class: dict  # class name -> ClassMetrics
    counts: dict  # class name -> [tp, tn, fp, fn]
    accuracy: float  # multiclass (argmax) accuracy
    macro_sensitivity: float
    macro_specificity: float
    mean_class_accuracy: float


@dataclass
class EvaluationReport:
    systems: dict  # key in SYSTEMS -> SystemResult
    metadata: dict = field(default_factory=dict)

    def to_json(self):
        payload = {
            "metadata": self.metadata,
            "systems": {
                k: {**asdict(v), "per_class": {c: asdict(m) for c, m in v.per_class.items()}}
                for k, v in self.systems.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        systems = {}
        for key, v in payload["systems"].items():
            v = dict(v)
            # keys come back sorted; restore the canonical class order
            order = [c for c in CLASS_NAMES if c in v["per_class"]]
            v["per_class"] = {c: ClassMetrics(**v["per_class"][c]) for c in order}
            v["counts"] = {c: v["counts"][c] for c in order}
            systems[key] = SystemResult(**v)
        ordered = {k: systems[k] for k in SYSTEMS if k in systems}
        return cls(ordered, payload.get("metadata", {}))


@dataclass
class TrainedModels:
    mlp: MlpModel
    rbf: RbfModel
    svm: SvmOvaModel
    fusion: FusionModel

    def texts(self):
        return {
            "mlp": self.mlp.to_text(), "rbf": self.rbf.to_text(),
            "svm": self.svm.to_text(), "fusion": self.fusion.to_text(),
        }

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        for key, text in self.texts().items():
            with open(os.path.join(directory, MODEL_FILES[key]), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)

    @classmethod
    def load(cls, directory):
        def read(key):
            with open(os.path.join(directory, MODEL_FILES[key]), encoding="utf-8") as fh:
                return fh.read()
        return cls(
            MlpModel.from_text(read("mlp")), RbfModel.from_text(read("rbf")),
            SvmOvaModel.from_text(read("svm")), FusionModel.from_text(read("fusion")),
        )

    def outputs(self, X):
        """Stacked classifier scores, shape (n, 3, 5), in :data:`CLASSIFIERS` order."""
        return np.stack([mlp_forward(self.mlp, X), rbf_forward(self.rbf, X), svm_scores(self.svm, X)], axis=1)


def run_stage(name, fn, *args, **kwargs):
    """Call ``fn``, tagging any failure with the pipeline stage ``name``."""
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (MifusionError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def load_dataset(cfg):
    """Dataset named by the ``[data]`` section."""
    cfg.validate()
    if cfg.data.source == "csv":
        return parse_feature_csv(cfg.data.path)
    return synth_generate(table1_counts(cfg.data.synth_total), cfg.seed_for("data"), cfg.data.synth_separation)


def train_models(cfg, train, calibration):
    """Fit the three classifiers on ``train`` and the fusion on ``calibration``.

    Returns
    -------
    models : TrainedModels
    info : dict
        Training diagnostics for the run metadata.
    """
    m = cfg.mlp
    lm = LmConfig(m.lambda_init, m.lambda_up, m.lambda_down, m.max_epochs, m.mse_goal, m.max_lambda,
                  cfg.seed_for("mlp"))
    init = run_stage("mlp", mlp_init, train.features.shape[1], m.hidden_dim, len(TRAINABLE_CLASSES), lm.seed)
    mlp, history = run_stage("mlp", mlp_train_lm, init, train, lm)

    r = cfg.rbf
    rbf = run_stage("rbf", rbf_build, train, r.n_centers, r.spread, cfg.seed_for("rbf"), r.ridge, r.raw_features)

    s = cfg.svm
    svm = run_stage("svm", svm_train_ova, train, PolyKernel(s.b0),
                 SmoConfig(s.C, s.kkt_tolerance, s.max_passes, cfg.seed_for("svm")))

    partial = TrainedModels(mlp, rbf, svm, None)
    cal = calibration if len(calibration) else train
    fusion = run_stage("fusion", lambda: fit_fusion(partial.outputs(cal.features), cal.class_index(),
                                                 cfg.fusion.mi_denominator))
    info = {
        "mlp_epochs": len(history) - 1,
        "mlp_initial_mse": float(history[0]),
        "mlp_final_mse": float(history[-1]),
        "svm_converged": [bool(mm.converged) for mm in svm.machines],
        "svm_iterations": [int(mm.n_iter) for mm in svm.machines],
        "svm_support_vectors": [len(mm.support_vectors) for mm in svm.machines],
        "fusion_fitted_on": "calibration" if len(calibration) else "train",
    }
    return TrainedModels(mlp, rbf, svm, fusion), info


def _system_result(name, bits, labels, truth):
    per_class, counts = {}, {}
    for j, cname in enumerate(CLASS_NAMES):
        c = confusion(bits[:, j], truth == j)
        counts[cname] = [c.tp, c.tn, c.fp, c.fn]
        per_class[cname] = class_metrics(c)
    return SystemResult(
        name=name,
        per_class=per_class,
        counts=counts,
        accuracy=float(np.mean(labels == truth)),
        macro_sensitivity=float(np.mean([m.sensitivity for m in per_class.values()])),
        macro_specificity=float(np.mean([m.specificity for m in per_class.values()])),
        mean_class_accuracy=float(np.mean([m.accuracy for m in per_class.values()])),
    )


def evaluate(models, dataset):
    """Per-class and overall performance of all five systems on ``dataset``.

    Individual classifiers are binarised with the fusion's per-classifier
    vote thresholds; their multiclass label is the argmax score.
    """
    data = dataset.trainable()
    truth = data.class_index()
    A = models.outputs(data.features)
    fusion = models.fusion
    systems = {}
    for i, key in enumerate(CLASSIFIERS):
        bits = (A[:, i, :] >= fusion.vote_thresholds[i]).astype(np.int64)
        systems[key] = _system_result(DISPLAY_NAMES[key], bits, np.argmax(A[:, i, :], axis=1), truth)
    bits, labels = majority_vote(A, fusion)
    systems["voting"] = _system_result(DISPLAY_NAMES["voting"], bits, labels, truth)
    bits, labels = predict_weighted(A, fusion)
    systems["weighted"] = _system_result(DISPLAY_NAMES["weighted"], bits, labels, truth)
    return systems


def _class_counts(ds):
    return {c.code: int(n) for c, n in ds.class_counts.items()}


@dataclass
class PipelineResult:
    report: EvaluationReport
    models: TrainedModels


def run_pipeline(cfg):
    """Split, train, calibrate and evaluate as described by ``cfg``.

    Raises
    ------
    ConfigError
        Missing or invalid configuration.
    StageError
        Any later failure, tagged with the stage it occurred in.
    """
    if not isinstance(cfg, RunConfig):
        raise ConfigError("run_pipeline expects a RunConfig")
    cfg.validate()
    dataset = run_stage("data", load_dataset, cfg)
    spec = SplitSpec(cfg.split.train_fraction, cfg.split.calibration_fraction,
                     cfg.seed_for("split"), cfg.split.stratified)
    train, calibration, test = run_stage("split", split, dataset, spec)
    models, info = train_models(cfg, train, calibration)
    systems = run_stage("evaluate", evaluate, models, test)
    metadata = {
        "package_version": __version__,
        "config": cfg.to_text(),
        "config_digest": cfg.digest(),
        "seeds": {s: cfg.seed_for(s) for s in ("data", "split", "mlp", "rbf", "svm")},
        "split": {
            "mode": "stratified" if spec.stratified else "random",
            "n_total": len(dataset),
            "n_excluded_other": int(len(dataset) - len(dataset.trainable())),
            "train": len(train), "calibration": len(calibration), "test": len(test),
            "train_counts": _class_counts(train),
            "calibration_counts": _class_counts(calibration),
            "test_counts": _class_counts(test),
        },
        "training": info,
        "fusion_weights": models.fusion.weights.tolist(),
    }
    return PipelineResult(EvaluationReport(systems, metadata), models)


def evaluate_saved(models, dataset, source=""):
    """Report for previously trained models scored on a whole dataset."""
    systems = run_stage("evaluate", evaluate, models, dataset)
    metadata = {
        "package_version": __version__,
        "data_source": str(source),
        "n_evaluated": int(len(dataset.trainable())),
        "counts": _class_counts(dataset.trainable()),
        "fusion_weights": models.fusion.weights.tolist(),
    }
    return EvaluationReport(systems, metadata)


# ---------------------------------------------------------------------------
# Rendering


def _pct(x):
    return f"{100.0 * x:.2f}"


def _summary_rows(report):
    keys = list(report.systems)
    return keys, [
        ("Accuracy %", [report.systems[k].accuracy for k in keys]),
        ("Mean Class Accuracy %", [report.systems[k].mean_class_accuracy for k in keys]),
        ("Sensitivity %", [report.systems[k].macro_sensitivity for k in keys]),
        ("Specificity %", [report.systems[k].macro_specificity for k in keys]),
    ]


def render_markdown(report):
    out = []
    for res in report.systems.values():
        out.append(f"### {res.name} Results for Classifying {len(res.per_class)} Classes of Heartbeats")
        out.append("")
        out.append("| Class | Accuracy % | Sensitivity % | Specificity % | False Positive Rate % | False Negative Rate % |")
        out.append("|---|---|---|---|---|---|")
        for cname, m in res.per_class.items():
            cells = [_pct(v) + "%" for v in (m.accuracy, m.sensitivity, m.specificity, m.fpr, m.fnr)]
            out.append(f"| {cname} | " + " | ".join(cells) + " |")
        out.append("")
    keys, rows = _summary_rows(report)
    out.append("### Summary of Performance Results")
    out.append("")
    out.append("| Measure | " + " | ".join(report.systems[k].name for k in keys) + " |")
    out.append("|---" * (len(keys) + 1) + "|")
    for label, values in rows:
        out.append(f"| {label} | " + " | ".join(_pct(v) + "%" for v in values) + " |")
    out.append("")
    return "\n".join(out)


def render_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for key, res in report.systems.items():
        for cname, m in res.per_class.items():
            w.writerow([key, cname] + [_pct(v) for v in (m.accuracy, m.sensitivity, m.specificity, m.fpr, m.fnr)])
        w.writerow([key, "ALL", _pct(res.accuracy), _pct(res.macro_sensitivity), _pct(res.macro_specificity),
                    _pct(1.0 - res.macro_specificity), _pct(1.0 - res.macro_sensitivity)])
    return buf.getvalue()


def render_tables(report, fmt="markdown"):
    """Render per-system tables and a summary table as markdown or CSV.

    The CSV has one row per (system, class) plus an ``ALL`` row per system
    holding overall accuracy and macro-averaged rates.
    """
    if fmt == "markdown":
        return render_markdown(report)
    if fmt == "csv":
        return render_csv(report)
    raise ValueError(f"unknown format {fmt!r}; use 'markdown' or 'csv'")
