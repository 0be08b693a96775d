"""
Class for holding the configuration of one experiment and building the
model, parameter vectors, estimators and mean functions it describes.

Config file format (every key optional, unknown keys rejected):

{"model": "identity 5",                    # or "gaussian 3x5 seed 7", or
                                           # {"rows": 2, "cols": 3, "entries": [...]}
 "sigma2": 1.0,
 "S": 1,
 "x0": {"indices": [1], "values": [2.0]},  # or a list of such objects
 "estimators": [{"kind": "ml_ssnm"}, {"kind": "ht", "T": 4}],
 "bound": {"mode": "exhaustive", "budget": 1000000, "mean": {"kind": "unbiased"}},
 "simulation": {"trials": 1000000, "seed": 0, "chunk_size": 65536, "threads": 1},
 "sweep": {"snr_db": {"start": -30, "stop": 20, "step": 2}, "thresholds": [3, 4, 5],
           "j": 1, "unbiased_reference": false},
 "oracle": {"per_axis": [5, 11, 21], "half_width": 6.0, "components": [1, 2], "cond_limit": 1e12},
 "quadrature": {"half_width": 10, "nodes": 2001, "step": 1e-4},
 "output": "results.csv"
}

The environment variable SPARSEBOUND_OUTPUT_DIR replaces the directory of
the output path.
"""
import json
import logging
import os
import re

import jsonschema
import numpy as np

from sparsebound import estimators
from sparsebound.errors import (ConfigError, SingularMatrixError,
                                UnsupportedConfigurationError)
from sparsebound.mean_functions import QuadratureConfig, UnbiasedMean
from sparsebound.oracle import COND_LIMIT
from sparsebound.model import SparseLinearModel, SparseVector, gaussian_matrix

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = 'SPARSEBOUND_OUTPUT_DIR'

_number = {"type": "number"}
_positive_int = {"type": "integer", "minimum": 1}
_x0_schema = {
    "type": "object",
    "additionalProperties": False,
    "required": ["indices", "values"],
    "properties": {
        "indices": {"type": "array", "items": _positive_int, "uniqueItems": True},
        "values": {"type": "array", "items": _number},
    },
}
_mean_schema = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["unbiased", "ht", "ml"]},
        "T": {"type": "number", "minimum": 0},
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["rows", "cols", "entries"],
                    "properties": {
                        "rows": _positive_int,
                        "cols": _positive_int,
                        "entries": {"type": "array", "items": _number},
                    },
                },
            ]
        },
        "sigma2": {"type": "number", "exclusiveMinimum": 0},
        "S": _positive_int,
        "x0": {"oneOf": [_x0_schema, {"type": "array", "items": _x0_schema, "minItems": 1}]},
        "estimators": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["identity", "ml_ssnm", "ml_slm", "ht", "lmvu_s1"]},
                    "T": {"type": "number", "minimum": 0},
                },
            },
        },
        "bound": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["exhaustive", "greedy"]},
                "budget": _positive_int,
                "mean": _mean_schema,
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trials": {"type": "integer", "minimum": 100},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "chunk_size": {"type": "integer", "minimum": 1024, "multipleOf": 1024},
                "threads": _positive_int,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snr_db": {
                    "oneOf": [
                        {"type": "array", "items": _number, "minItems": 1},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["start", "stop", "step"],
                            "properties": {"start": _number, "stop": _number,
                                           "step": {"type": "number", "exclusiveMinimum": 0}},
                        },
                    ]
                },
                "thresholds": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "j": _positive_int,
                "unbiased_reference": {"type": "boolean"},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "per_axis": {"type": "array", "items": _positive_int, "minItems": 1},
                "half_width": {"type": "number", "exclusiveMinimum": 0},
                "components": {"type": "array", "items": _positive_int, "minItems": 1},
                "cond_limit": {"type": ["number", "null"], "exclusiveMinimum": 1},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "half_width": {"type": "number", "minimum": 6},
                "nodes": {"type": "integer", "minimum": 51},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "mc_trials": {"type": "integer", "minimum": 100},
                "mc_seed": {"type": "integer", "minimum": 0},
            },
        },
        "output": {"type": "string"},
    },
}

DEFAULT_DOCUMENT = {
    "model": "identity 5",
    "sigma2": 1.0,
    "S": 1,
    "x0": {"indices": [1], "values": [2.0]},
}


def parse_model(spec):
    """H from "identity N", "gaussian MxN seed K" or an inline row-major object"""
    if isinstance(spec, dict):
        rows, cols = spec['rows'], spec['cols']
        if len(spec['entries']) != rows * cols:
            raise ConfigError(f"model has {len(spec['entries'])} entries, expected {rows}x{cols}")
        return np.array(spec['entries'], dtype=float).reshape(rows, cols)
    text = spec.strip().lower()
    match = re.fullmatch(r"identity\s+(\d+)", text)
    if match:
        return np.eye(int(match.group(1)))
    match = re.fullmatch(r"gaussian\s+(\d+)\s*x\s*(\d+)\s+seed\s+(\d+)", text)
    if match:
        rows, cols, seed = (int(g) for g in match.groups())
        return gaussian_matrix(rows, cols, seed)
    raise ConfigError(f"cannot parse model {spec!r}")


class ExperimentConfig(object):
    """Validated experiment settings

    Important methods:
    load_config: read and validate a JSON config file
    load_document: validate an already parsed document
    override: apply command-line values on top of the file
    """

    def __init__(self, seed=0, trials=10**6, threads=1, output=None):
        self._document = {}
        self._H = None
        self._sigma2 = 1.0
        self._S = 1
        self._x0_list = []
        self._model = None
        self._seed = seed
        self._trials = trials
        self._threads = threads
        self._chunk_size = 64 * 1024
        self._output = output

    @property
    def H(self):
        return self._H

    @property
    def sigma2(self):
        return self._sigma2

    @property
    def S(self):
        return self._S

    @property
    def N(self):
        return self._H.shape[1]

    @property
    def x0_list(self):
        return list(self._x0_list)

    @property
    def seed(self):
        return self._seed

    @property
    def trials(self):
        return self._trials

    @property
    def threads(self):
        return self._threads

    @property
    def chunk_size(self):
        return self._chunk_size

    @property
    def bound_mode(self):
        return self._section('bound').get('mode', 'exhaustive')

    @property
    def budget(self):
        return self._section('bound').get('budget', 10**6)

    @property
    def mean_spec(self):
        return self._section('bound').get('mean', {'kind': 'unbiased'})

    @property
    def snr_grid(self):
        grid = self._section('sweep').get('snr_db', {'start': -30, 'stop': 20, 'step': 2})
        if isinstance(grid, list):
            return [float(v) for v in grid]
        count = int(np.floor((grid['stop'] - grid['start']) / grid['step'] + 1e-9)) + 1
        return [float(grid['start'] + i * grid['step']) for i in range(count)]

    @property
    def thresholds(self):
        return [float(T) for T in self._section('sweep').get('thresholds', [3, 4, 5])]

    @property
    def sweep_j(self):
        return self._section('sweep').get('j', 1)

    @property
    def unbiased_reference(self):
        return self._section('sweep').get('unbiased_reference', False)

    @property
    def per_axis_list(self):
        return list(self._section('oracle').get('per_axis', [5, 11, 21]))

    @property
    def oracle_half_width(self):
        return float(self._section('oracle').get('half_width', 6.0))

    @property
    def oracle_cond_limit(self):
        """None accepts ill-conditioned grids and reports the truncated solve"""
        return self._section('oracle').get('cond_limit', COND_LIMIT)

    @property
    def oracle_components(self):
        return list(self._section('oracle').get('components', range(1, self.N + 1)))

    @property
    def quadrature(self):
        return QuadratureConfig(**self._section('quadrature'))

    @property
    def output_path(self):
        path = self._output or self._document.get('output')
        directory = os.environ.get(OUTPUT_DIR_ENV)
        if path and directory:
            return os.path.join(directory, os.path.basename(path))
        return path

    def _section(self, name):
        return self._document.get(name, {})

    def load_config(self, path_to_config_file):
        try:
            with open(path_to_config_file) as config_file:
                document = json.load(config_file)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read {path_to_config_file}: {e}")
        self.load_document(document)

    def load_document(self, document):
        try:
            jsonschema.validate(instance=document, schema=CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            location = '/'.join(str(p) for p in e.absolute_path) or '<root>'
            raise ConfigError(f"{location}: {e.message}")
        merged = dict(DEFAULT_DOCUMENT)
        merged.update(document)
        self._document = merged
        self._H = parse_model(merged['model'])
        self._sigma2 = float(merged['sigma2'])
        self._S = int(merged['S'])
        self._model = None
        if not 1 <= self._S < self.N:
            raise ConfigError(f"need 1 <= S < N, got S={self._S}, N={self.N}")
        entries = merged['x0'] if isinstance(merged['x0'], list) else [merged['x0']]
        self._x0_list = [self._parse_x0(entry) for entry in entries]
        simulation = self._section('simulation')
        self._trials = simulation.get('trials', self._trials)
        self._seed = simulation.get('seed', self._seed)
        self._threads = simulation.get('threads', self._threads)
        self._chunk_size = simulation.get('chunk_size', self._chunk_size)
        sweep_j = self.sweep_j
        if sweep_j > self.N:
            raise ConfigError(f"sweep j={sweep_j} outside 1..{self.N}")
        if any(k > self.N for k in self.oracle_components):
            raise ConfigError(f"oracle components {self.oracle_components} outside 1..{self.N}")
        if self.mean_spec['kind'] == 'ht' and 'T' not in self.mean_spec:
            raise ConfigError("bound mean of kind 'ht' needs a threshold T")
        for spec in self._section('estimators'):
            if spec['kind'] == 'ht' and 'T' not in spec:
                raise ConfigError("estimator of kind 'ht' needs a threshold T")
        try:
            self.quadrature
        except ValueError as e:
            raise ConfigError(f"quadrature: {e}")
        logger.debug("loaded config: H %s, sigma2 %g, S %d, %d parameter vectors",
                     self._H.shape, self._sigma2, self._S, len(self._x0_list))

    def _parse_x0(self, entry):
        indices, values = entry['indices'], entry['values']
        if len(indices) != len(values):
            raise ConfigError(f"x0 has {len(indices)} indices but {len(values)} values")
        if any(k > self.N for k in indices):
            raise ConfigError(f"x0 indices {indices} outside 1..{self.N}")
        x0 = SparseVector.from_support(self.N, indices, values)
        if x0.nnz > self._S:
            raise ConfigError(f"x0 has {x0.nnz} nonzeros, sparsity is S={self._S}")
        return x0

    def override(self, seed=None, trials=None, threads=None, output=None):
        if seed is not None:
            self._seed = seed
        if trials is not None:
            self._trials = trials
        if threads is not None:
            self._threads = threads
        if output is not None:
            self._output = output

    def model(self, check_spark=True):
        if not check_spark:
            return SparseLinearModel(self._H, self._sigma2, self._S, check_spark=False)
        if self._model is None:
            try:
                self._model = SparseLinearModel(self._H, self._sigma2, self._S,
                                                spark_budget=self.budget)
            except SingularMatrixError as e:
                raise ConfigError(f"model: {e}")
        return self._model

    def estimators_for(self, x0):
        """Estimator objects for the configured list, identity when none are given"""
        model = self.model()
        specs = self._section('estimators') or [{'kind': 'identity'}]
        built = []
        for spec in specs:
            kind = spec['kind']
            if kind in ('identity', 'ml_ssnm', 'ht', 'lmvu_s1') and not model.is_ssnm:
                raise UnsupportedConfigurationError(f"estimator {kind} needs H = I")
            if kind == 'identity':
                built.append(estimators.IdentityEstimator())
            elif kind == 'ml_ssnm':
                built.append(estimators.MLSSNMEstimator(model.S))
            elif kind == 'ml_slm':
                built.append(estimators.MLSLMEstimator(model, self.budget))
            elif kind == 'ht':
                built.append(estimators.HardThresholdEstimator(spec['T']))
            else:
                built.append(estimators.LMVUEstimator(x0, model.sigma2))
        return built

    def mean_functions(self):
        """gamma_1..gamma_N of the configured bound mean"""
        model = self.model()
        spec = self.mean_spec
        if spec['kind'] == 'unbiased':
            return [UnbiasedMean(k) for k in range(1, model.N + 1)]
        if spec['kind'] == 'ht':
            estimator = estimators.HardThresholdEstimator(spec['T'])
        else:
            estimator = estimators.MLSSNMEstimator(model.S)
        return estimators.mean_functions_for(estimator, model, self.quadrature)
