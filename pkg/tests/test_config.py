import json

import numpy as np
import pytest

from sparsebound import config
from sparsebound.config import ExperimentConfig
from sparsebound.errors import ConfigError, UnsupportedConfigurationError
from sparsebound.estimators import HardThresholdEstimator, IdentityEstimator, LMVUEstimator
from sparsebound.mean_functions import HardThresholdMean, UnbiasedMean


@pytest.fixture
def experiment():
    return ExperimentConfig()


def test_default_document(experiment):
    """
    An empty document gives H = I_5, sigma2 = 1, S = 1 and x0 = 2 e_1
    """
    experiment.load_document({})
    assert np.array_equal(experiment.H, np.eye(5))
    assert experiment.sigma2 == 1.0
    assert experiment.S == 1
    assert experiment.x0_list[0].entries.tolist() == [2.0, 0.0, 0.0, 0.0, 0.0]
    assert experiment.model().is_ssnm
    assert experiment.bound_mode == 'exhaustive'
    assert experiment.budget == 10**6
    assert experiment.per_axis_list == [5, 11, 21]
    assert experiment.oracle_cond_limit == 1e12
    assert experiment.oracle_components == [1, 2, 3, 4, 5]


def test_unknown_key_rejected(experiment):
    """
    Keys outside the schema are configuration errors
    """
    with pytest.raises(ConfigError):
        experiment.load_document({"modle": "identity 4"})
    with pytest.raises(ConfigError):
        experiment.load_document({"simulation": {"trials": 1000, "speed": 2}})


def test_schema_ranges(experiment):
    """
    Non-positive sigma2, too few trials and chunk sizes off the block grid are refused
    """
    for document in ({"sigma2": 0}, {"simulation": {"trials": 10}},
                     {"simulation": {"chunk_size": 1000}}, {"estimators": [{"kind": "omp"}]}):
        with pytest.raises(ConfigError):
            experiment.load_document(document)


def test_model_forms():
    """
    identity N, gaussian MxN seed K and inline row-major matrices
    """
    assert np.array_equal(config.parse_model("identity 3"), np.eye(3))
    G = config.parse_model("gaussian 3x6 seed 7")
    assert G.shape == (3, 6)
    assert np.array_equal(G, config.parse_model("Gaussian 3 x 6 seed 7"))
    inline = config.parse_model({"rows": 2, "cols": 3, "entries": [1, 0, 1, 0, 1, 1]})
    assert np.array_equal(inline, [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    with pytest.raises(ConfigError):
        config.parse_model({"rows": 2, "cols": 2, "entries": [1, 0, 1]})
    with pytest.raises(ConfigError):
        config.parse_model("circulant 4")


def test_parameter_cross_checks(experiment):
    """
    Indices beyond N and more nonzeros than S are caught before anything runs
    """
    with pytest.raises(ConfigError):
        experiment.load_document({"x0": {"indices": [6], "values": [1.0]}})
    with pytest.raises(ConfigError):
        experiment.load_document({"x0": {"indices": [1, 2], "values": [1.0, 1.0]}})
    with pytest.raises(ConfigError):
        experiment.load_document({"x0": {"indices": [1, 2], "values": [1.0]}, "S": 2})
    with pytest.raises(ConfigError):
        experiment.load_document({"S": 5})
    with pytest.raises(ConfigError):
        experiment.load_document({"sweep": {"j": 9}})
    with pytest.raises(ConfigError):
        experiment.load_document({"oracle": {"components": [6]}})


def test_several_parameter_vectors(experiment):
    """
    x0 may be a list of sparse vectors
    """
    experiment.load_document({"model": "identity 4", "S": 2,
                              "x0": [{"indices": [1], "values": [1.0]},
                                     {"indices": [2, 4], "values": [-1.0, 0.5]}]})
    assert [x0.support for x0 in experiment.x0_list] == [(1,), (2, 4)]


def test_snr_grid(experiment):
    """
    The default sweep is -30..20 dB in 2 dB steps; explicit lists pass through
    """
    experiment.load_document({})
    grid = experiment.snr_grid
    assert len(grid) == 26
    assert grid[0] == -30.0 and grid[-1] == 20.0
    experiment.load_document({"sweep": {"snr_db": [0, 10]}})
    assert experiment.snr_grid == [0.0, 10.0]


def test_simulation_settings_and_overrides(experiment):
    """
    Command-line values win over the file
    """
    experiment.load_document({"simulation": {"trials": 2000, "seed": 5, "threads": 2}})
    assert (experiment.trials, experiment.seed, experiment.threads) == (2000, 5, 2)
    experiment.override(seed=9, trials=None, threads=4, output='out.csv')
    assert (experiment.trials, experiment.seed, experiment.threads) == (2000, 9, 4)
    assert experiment.output_path == 'out.csv'


def test_output_directory_from_environment(experiment, monkeypatch, tmp_path):
    """
    SPARSEBOUND_OUTPUT_DIR replaces the directory of the output path
    """
    experiment.load_document({"output": "runs/bound.csv"})
    assert experiment.output_path == "runs/bound.csv"
    monkeypatch.setenv(config.OUTPUT_DIR_ENV, str(tmp_path))
    assert experiment.output_path == str(tmp_path / "bound.csv")


def test_load_config_file(experiment, tmp_path):
    """
    Config files are JSON; unreadable or malformed files are configuration errors
    """
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"model": "identity 3", "x0": {"indices": [2], "values": [1.5]}}))
    experiment.load_config(str(path))
    assert experiment.N == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{\"model\": ")
    with pytest.raises(ConfigError):
        experiment.load_config(str(bad))
    with pytest.raises(ConfigError):
        experiment.load_config(str(tmp_path / "missing.json"))


def test_quadrature_settings(experiment):
    """
    Quadrature nodes must be odd; the error surfaces as a configuration error
    """
    experiment.load_document({"quadrature": {"nodes": 501}})
    assert experiment.quadrature.nodes == 501
    with pytest.raises(ConfigError):
        experiment.load_document({"quadrature": {"nodes": 500}})


def test_threshold_required_for_ht(experiment):
    """
    Thresholding needs T, both for estimators and bound means
    """
    with pytest.raises(ConfigError):
        experiment.load_document({"estimators": [{"kind": "ht"}]})
    with pytest.raises(ConfigError):
        experiment.load_document({"bound": {"mean": {"kind": "ht"}}})


def test_estimators_for(experiment):
    """
    Configured estimators are built per parameter vector; identity by default
    """
    experiment.load_document({})
    assert [type(e) for e in experiment.estimators_for(experiment.x0_list[0])] == [IdentityEstimator]
    experiment.load_document({"estimators": [{"kind": "ht", "T": 4}, {"kind": "lmvu_s1"}]})
    built = experiment.estimators_for(experiment.x0_list[0])
    assert isinstance(built[0], HardThresholdEstimator) and built[0].T == 4.0
    assert isinstance(built[1], LMVUEstimator)


def test_estimators_need_identity_matrix(experiment):
    """
    Selection and thresholding estimators are refused for a general H
    """
    experiment.load_document({"model": "gaussian 4x6 seed 2", "x0": {"indices": [1], "values": [1.0]},
                              "estimators": [{"kind": "ml_ssnm"}]})
    with pytest.raises(UnsupportedConfigurationError):
        experiment.estimators_for(experiment.x0_list[0])
    experiment.load_document({"model": "gaussian 4x6 seed 2", "x0": {"indices": [1], "values": [1.0]}})
    with pytest.raises(UnsupportedConfigurationError):
        experiment.estimators_for(experiment.x0_list[0])
    experiment.load_document({"model": "gaussian 4x6 seed 2", "x0": {"indices": [1], "values": [1.0]},
                              "estimators": [{"kind": "ml_slm"}]})
    assert experiment.estimators_for(experiment.x0_list[0])[0].name == 'ml_slm_S1'


def test_mean_functions(experiment):
    """
    The bound mean section selects the mean function family
    """
    experiment.load_document({})
    assert all(isinstance(g, UnbiasedMean) for g in experiment.mean_functions())
    experiment.load_document({"bound": {"mean": {"kind": "ht", "T": 3}}})
    gammas = experiment.mean_functions()
    assert [g.k for g in gammas] == [1, 2, 3, 4, 5]
    assert all(isinstance(g, HardThresholdMean) and g.T == 3.0 for g in gammas)


def test_oracle_condition_limit(experiment):
    """
    cond_limit above 1 is kept; null switches the check off
    """
    experiment.load_document({"oracle": {"cond_limit": 1e8}})
    assert experiment.oracle_cond_limit == 1e8
    experiment.load_document({"oracle": {"cond_limit": None}})
    assert experiment.oracle_cond_limit is None
    with pytest.raises(ConfigError):
        experiment.load_document({"oracle": {"cond_limit": 0.5}})


def test_dependent_columns_are_a_config_error(experiment):
    """
    A model whose S columns can be dependent is refused as configuration
    """
    experiment.load_document({"model": {"rows": 2, "cols": 3, "entries": [1, 0, 1, 0, 1, 0]}, "S": 2})
    with pytest.raises(ConfigError):
        experiment.model()
