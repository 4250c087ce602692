"""Round-trips for every persisted document plus manifest verification."""

import json

import numpy as np
import pytest

from careersim.agents import QTable
from careersim.approx import flatten_params, forward_batch, init_mlp
from careersim.evaluation import ComparisonReport
from careersim.forest import ForestParams, fit_classifier, fit_regressor, predict_proba_batch, predict_value_batch
from careersim.market import SynthConfig, generate_synthetic, plausible_jobs, preprocess
from careersim.models import StateRepresentation, fit_salary_model, fit_transition_model, transition_probabilities
from careersim.persist import (
    build_manifest,
    file_sha256,
    forest_from_doc,
    forest_to_doc,
    load_doc,
    mlp_from_doc,
    mlp_to_doc,
    qtable_from_doc,
    qtable_to_doc,
    report_from_doc,
    report_to_doc,
    salary_model_from_doc,
    salary_model_to_doc,
    save_doc,
    transition_model_from_doc,
    transition_model_to_doc,
    verify_manifest,
    write_manifest,
    write_report_csv,
)


class TestDocEnvelope:
    def test_version_and_kind_checked(self, tmp_path):
        save_doc(tmp_path / "x.json", "thing", {"a": 1})
        assert load_doc(tmp_path / "x.json", "thing")["a"] == 1
        with pytest.raises(ValueError, match="kind"):
            load_doc(tmp_path / "x.json", "other")
        doc = json.loads((tmp_path / "x.json").read_text())
        doc["format_version"] = 99
        (tmp_path / "x.json").write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="format_version"):
            load_doc(tmp_path / "x.json", "thing")

    def test_dump_is_byte_deterministic(self, tmp_path):
        save_doc(tmp_path / "a.json", "t", {"b": 2, "a": [1.5, 2.25]})
        save_doc(tmp_path / "b.json", "t", {"a": [1.5, 2.25], "b": 2})
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestForestRoundtrip:
    def test_classifier_exact(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(150, 4))
        y = (X[:, 0] > 0).astype(float)
        model = fit_classifier(X, y, ForestParams(n_trees=12, seed=3))
        back = forest_from_doc(forest_to_doc(model))
        probes = rng.normal(size=(60, 4))
        assert np.array_equal(predict_proba_batch(model, probes), predict_proba_batch(back, probes))

    def test_regressor_exact(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(120, 3))
        y = rng.uniform(1.0, 2.0, size=120)
        model = fit_regressor(X, y, ForestParams(n_trees=8, seed=4))
        back = forest_from_doc(forest_to_doc(model))
        probes = rng.normal(size=(40, 3))
        assert np.array_equal(predict_value_batch(model, probes), predict_value_batch(back, probes))


class TestModelRoundtrips:
    def setup_method(self):
        self.ds = preprocess(generate_synthetic(SynthConfig(n_employees=200, seed=5, n_vacancies=1200)))
        self.catalog = tuple(plausible_jobs(self.ds, 10))

    def test_transition_model_exact(self):
        model, _ = fit_transition_model(self.ds, StateRepresentation.LAST_JOB, self.catalog,
                                        ForestParams(n_trees=8, seed=1))
        back = transition_model_from_doc(transition_model_to_doc(model))
        assert back.representation is StateRepresentation.LAST_JOB
        assert back.catalog == model.catalog
        assert np.array_equal(back.last_job_matrix, model.last_job_matrix)
        history = [r for r in self.ds.experiences if r.employee_id == self.ds.experiences[0].employee_id]
        got = transition_probabilities(back, history, self.catalog)
        want = transition_probabilities(model, history, self.catalog)
        assert np.array_equal(got, want)

    def test_salary_model_exact(self):
        model = fit_salary_model(self.ds.vacancies, self.catalog, ForestParams(n_trees=8, seed=2))
        back = salary_model_from_doc(salary_model_to_doc(model))
        assert back.table == model.table


class TestMlpAndQTable:
    def test_mlp_exact(self):
        net = init_mlp((5, 16, 3), hidden="relu", output="softmax", seed=7)
        back = mlp_from_doc(mlp_to_doc(net))
        assert np.array_equal(flatten_params(net), flatten_params(back))
        X = np.random.default_rng(0).normal(size=(10, 5))
        assert np.array_equal(forward_batch(net, X), forward_batch(back, X))

    def test_qtable_sparse_roundtrip(self):
        q = QTable.zeros(6, 4)
        q.values[2, 1] = -3.5
        q.values[5, 0] = 12.25
        doc = qtable_to_doc(q)
        assert len(doc["entries"]) == 2
        back = qtable_from_doc(doc)
        assert np.array_equal(back.values, q.values)


class TestReports:
    def make_report(self):
        return ComparisonReport(
            mean_fi_eur=90283.42, mean_cfi_eur=95077.13, change_pct=5.3,
            p_value=0.01, gainers_pct=27.53, mean_gain_pct=13.81,
            losers_pct=12.56, mean_loss_pct=-7.63, n_paths=2000, n_skipped=3,
        )

    def test_report_roundtrip(self):
        rep = self.make_report()
        assert report_from_doc(report_to_doc(rep)) == rep

    def test_csv_row_column_order(self, tmp_path):
        write_report_csv({"qlearning": self.make_report()}, tmp_path / "report.csv")
        lines = (tmp_path / "report.csv").read_text().strip().splitlines()
        assert lines[0] == ("model,mean_fi_eur,mean_cfi_eur,change_pct,p_value,"
                            "gainers_pct,mean_gain_pct,losers_pct,mean_loss_pct,n_paths")
        assert lines[1] == "qlearning,90283.42,95077.13,5.30,0.0100,27.53,13.81,12.56,-7.63,2000"


class TestManifest:
    def test_verify_detects_tampering(self, tmp_path):
        (tmp_path / "a.txt").write_text("alpha")
        (tmp_path / "b.txt").write_text("beta")
        write_manifest(tmp_path, ["a.txt", "b.txt"], {"seed": 1})
        assert verify_manifest(tmp_path) == []
        (tmp_path / "b.txt").write_text("tampered")
        assert verify_manifest(tmp_path) == ["b.txt"]
        (tmp_path / "a.txt").unlink()
        assert sorted(verify_manifest(tmp_path)) == ["a.txt", "b.txt"]

    def test_manifest_lists_all_files_with_hashes(self, tmp_path):
        (tmp_path / "x.csv").write_text("1,2,3")
        doc = build_manifest(tmp_path, ["x.csv"], {"seed": 0})
        assert doc["artifacts"]["x.csv"] == file_sha256(tmp_path / "x.csv")
