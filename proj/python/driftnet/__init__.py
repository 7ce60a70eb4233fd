"""Python bindings for the driftnet drift estimation library."""

import json

from ._driftnet import (
    DivergenceError,
    Error,
    ParseError,
    RegressionSet,
    ReluNetwork,
    SampledPath,
    SdeModel,
    Trajectory,
    UnsupportedError,
    ValidationError,
    benchmark_model,
    bound_diagnostic,
    convert_to_unit_weights,
    empirical_loss,
    init_network,
    irreducible_error,
    load_network,
    make_regression_set,
    max_weight,
    save_network,
    simulate_path,
    sparsity,
    subsample,
    sup_bound,
    train,
)
from . import _driftnet


def certify(network):
    return json.loads(_driftnet.certificate_json(network))


def default_config():
    return json.loads(_driftnet.default_config_json())


def run_experiment(config, workers=1):
    """Run a Monte Carlo grid; `config` is a dict in the experiment JSON format."""
    return _driftnet.run_experiment(json.dumps(config), workers)
