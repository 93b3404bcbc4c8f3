"""Model construction by name, for the CLI and the maximization loop."""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from ..core.errors import ConfigurationError
from .brownian import CorrelatedBmParams, CorrelatedBrownianMotion
from .lorenz96 import Lorenz96, Lorenz96Params
from .measles import Demographics, MeaslesMetapop, MeaslesParams, \
    load_demographics_csv
from .sv import StochasticVolatilityToy, SvToyParams

__all__ = ["build_model", "model_family", "parameter_transforms", "MODEL_NAMES"]

MODEL_NAMES = ("bm", "lorenz96", "measles", "sv")


def build_model(name: str, n_units: int, n_times: int, params: dict = None,
                demographics_seed: int = 0, demographics_path=None):
    """Instantiate a named model with parameter overrides.

    The metapopulation model uses synthetic rank-size demographics unless a
    demographics CSV path is supplied.
    """
    params = dict(params or {})
    if name == "bm":
        return CorrelatedBrownianMotion(
            CorrelatedBmParams(n_units=n_units, n_times=n_times, **params))
    if name == "lorenz96":
        return Lorenz96(
            Lorenz96Params(n_units=n_units, n_times=n_times, **params))
    if name == "measles":
        if demographics_path is not None:
            demo = load_demographics_csv(demographics_path)
            if demo.n_cities != n_units:
                raise ConfigurationError(
                    "demographics CSV has %d cities, config says %d"
                    % (demo.n_cities, n_units))
        else:
            demo = Demographics.synthetic(n_units, seed=demographics_seed)
        return MeaslesMetapop(MeaslesParams(**params), demo, n_times=n_times)
    if name == "sv":
        if n_units != 1:
            raise ConfigurationError("the volatility toy is univariate")
        return StochasticVolatilityToy(SvToyParams(n_times=n_times, **params))
    raise ConfigurationError("unknown model %r (know %s)" % (name, MODEL_NAMES))


def model_family(name: str, n_units: int, n_times: int, base_params: dict = None,
                 demographics_seed: int = 0,
                 demographics_path=None) -> Callable[[dict], object]:
    """Return theta -> model, holding dimensions and fixed settings constant."""
    base = dict(base_params or {})

    def make(theta: dict):
        merged = dict(base)
        merged.update(theta)
        return build_model(name, n_units, n_times, merged,
                           demographics_seed=demographics_seed,
                           demographics_path=demographics_path)

    return make


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _expit(x):
    return 1.0 / (1.0 + np.exp(-x))


# Parameter domains per model: positive parameters are perturbed on the log
# scale, unit-interval parameters on the logit scale.
_DOMAINS: Dict[str, Dict[str, str]] = {
    "bm": {"rho": "unit", "tau": "positive"},
    "lorenz96": {"forcing": "positive", "sigma_proc": "positive",
                 "tau": "positive"},
    "sv": {"sigma_x": "positive"},
    "measles": {
        "mean_beta": "positive", "amplitude": "unit", "alpha": "positive",
        "iota": "positive", "sigma_se": "positive", "mu_ei": "positive",
        "mu_ir": "positive", "rho_report": "unit", "psi": "positive",
        "gravity_g": "positive", "s_frac": "unit", "e_frac": "unit",
        "i_frac": "unit",
    },
}

_TRANSFORMS = {
    "positive": (np.log, np.exp),
    "unit": (_logit, _expit),
    "identity": (lambda x: x, lambda x: x),
}


def parameter_transforms(model_name: str, names) -> dict:
    """Per-parameter (to_unconstrained, from_unconstrained) pairs."""
    domains = _DOMAINS.get(model_name, {})
    return {name: _TRANSFORMS[domains.get(name, "identity")] for name in names}
