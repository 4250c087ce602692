"""Versioned structured-text persistence for models, policies, and reports.

Every document is JSON with a `format_version` and a `kind` tag. Float arrays
round-trip exactly (json emits shortest-repr doubles), and all dumps are
byte-deterministic: sorted keys, fixed separators, trailing newline.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .agents import QTable
from .approx import Mlp
from .evaluation import ComparisonReport
from .forest import DecisionTree, ForestClassifier, ForestParams, ForestRegressor
from .market import JobId
from .models import SalaryModel, StateRepresentation, TransitionModel

__all__ = [
    "FORMAT_VERSION",
    "save_doc",
    "load_doc",
    "forest_to_doc",
    "forest_from_doc",
    "transition_model_to_doc",
    "transition_model_from_doc",
    "salary_model_to_doc",
    "salary_model_from_doc",
    "mlp_to_doc",
    "mlp_from_doc",
    "qtable_to_doc",
    "qtable_from_doc",
    "report_to_doc",
    "report_from_doc",
    "write_report_csv",
    "REPORT_CSV_COLUMNS",
    "file_sha256",
    "build_manifest",
    "write_manifest",
    "verify_manifest",
]

FORMAT_VERSION = 1


def _dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_doc(path, kind: str, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"format_version": FORMAT_VERSION, "kind": kind, **payload}
    path.write_text(_dumps(doc), encoding="utf-8")


def load_doc(path, kind: str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {doc.get('format_version')}")
    if doc.get("kind") != kind:
        raise ValueError(f"{path}: expected kind {kind!r}, found {doc.get('kind')!r}")
    return doc


def _tree_to_lists(tree: DecisionTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from_lists(doc: dict) -> DecisionTree:
    return DecisionTree(
        feature=np.asarray(doc["feature"], dtype=np.int32),
        threshold=np.asarray(doc["threshold"], dtype=np.float64),
        left=np.asarray(doc["left"], dtype=np.int32),
        right=np.asarray(doc["right"], dtype=np.int32),
        value=np.asarray(doc["value"], dtype=np.float64),
    )


def forest_to_doc(model) -> dict:
    kind = "classifier" if isinstance(model, ForestClassifier) else "regressor"
    return {
        "model": kind,
        "params": asdict(model.params),
        "n_features": model.n_features,
        "trees": [_tree_to_lists(t) for t in model.trees],
    }


def forest_from_doc(doc: dict):
    params = ForestParams(**doc["params"])
    trees = [_tree_from_lists(t) for t in doc["trees"]]
    cls = ForestClassifier if doc["model"] == "classifier" else ForestRegressor
    return cls(trees=trees, params=params, n_features=doc["n_features"])


def _jobs_to_lists(jobs) -> list[list[int]]:
    return [[j.occupation_code, j.industry_code] for j in jobs]


def _jobs_from_lists(items) -> tuple[JobId, ...]:
    return tuple(JobId(o, i) for o, i in items)


def transition_model_to_doc(model: TransitionModel) -> dict:
    return {
        "representation": model.representation.value,
        "catalog": _jobs_to_lists(model.catalog),
        "classifier": forest_to_doc(model.classifier),
        "last_job_matrix": None if model.last_job_matrix is None else model.last_job_matrix.tolist(),
    }


def transition_model_from_doc(doc: dict) -> TransitionModel:
    catalog = _jobs_from_lists(doc["catalog"])
    matrix = doc.get("last_job_matrix")
    return TransitionModel(
        representation=StateRepresentation(doc["representation"]),
        classifier=forest_from_doc(doc["classifier"]),
        catalog=catalog,
        job_index={job: i for i, job in enumerate(catalog)},
        last_job_matrix=None if matrix is None else np.asarray(matrix, dtype=np.float64),
    )


def salary_model_to_doc(model: SalaryModel) -> dict:
    return {
        "regressor": forest_to_doc(model.regressor),
        "catalog": _jobs_to_lists(model.catalog),
        "table": [model.table[j] for j in model.catalog],
    }


def salary_model_from_doc(doc: dict) -> SalaryModel:
    catalog = _jobs_from_lists(doc["catalog"])
    return SalaryModel(
        regressor=forest_from_doc(doc["regressor"]),
        catalog=catalog,
        table={job: float(v) for job, v in zip(catalog, doc["table"])},
    )


def mlp_to_doc(net: Mlp) -> dict:
    return {
        "dims": list(net.dims),
        "hidden": net.hidden,
        "output": net.output,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def mlp_from_doc(doc: dict) -> Mlp:
    dims = tuple(doc["dims"])
    weights = [
        np.asarray(flat, dtype=np.float64).reshape(dims[i + 1], dims[i])
        for i, flat in enumerate(doc["weights"])
    ]
    biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    return Mlp(dims=dims, hidden=doc["hidden"], output=doc["output"],
               weights=weights, biases=biases)


def qtable_to_doc(qtable: QTable) -> dict:
    entries = [
        [s, a, float(qtable.values[s, a])]
        for s in range(qtable.n_states)
        for a in range(qtable.n_actions)
        if qtable.values[s, a] != 0.0
    ]
    return {
        "n_states": qtable.n_states,
        "n_actions": qtable.n_actions,
        "entries": entries,
    }


def qtable_from_doc(doc: dict) -> QTable:
    q = QTable.zeros(doc["n_states"], doc["n_actions"])
    for s, a, value in doc["entries"]:
        q.values[s, a] = value
    return q


REPORT_CSV_COLUMNS = (
    "model", "mean_fi_eur", "mean_cfi_eur", "change_pct", "p_value",
    "gainers_pct", "mean_gain_pct", "losers_pct", "mean_loss_pct", "n_paths",
)


def report_to_doc(report: ComparisonReport) -> dict:
    return asdict(report)


def report_from_doc(doc: dict) -> ComparisonReport:
    fields = {k: doc[k] for k in doc if k not in ("format_version", "kind")}
    return ComparisonReport(**fields)


def write_report_csv(reports: dict[str, ComparisonReport], path) -> None:
    """One row per labeled report, in the standard comparison column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(REPORT_CSV_COLUMNS)]
    for label, r in reports.items():
        lines.append(
            f"{label},{r.mean_fi_eur:.2f},{r.mean_cfi_eur:.2f},{r.change_pct:.2f},"
            f"{r.p_value:.4f},{r.gainers_pct:.2f},{r.mean_gain_pct:.2f},"
            f"{r.losers_pct:.2f},{r.mean_loss_pct:.2f},{r.n_paths}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(root, files, meta: dict) -> dict:
    root = Path(root)
    return {
        "meta": meta,
        "artifacts": {str(rel): file_sha256(root / rel) for rel in sorted(map(str, files))},
    }


def write_manifest(root, files, meta: dict) -> Path:
    path = Path(root) / "manifest.json"
    save_doc(path, "manifest", build_manifest(root, files, meta))
    return path


def verify_manifest(root) -> list[str]:
    """Names of artifacts that are missing or whose content hash changed."""
    root = Path(root)
    doc = load_doc(root / "manifest.json", "manifest")
    bad = []
    for rel, digest in doc["artifacts"].items():
        target = root / rel
        if not target.exists() or file_sha256(target) != digest:
            bad.append(rel)
    return bad
