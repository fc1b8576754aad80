"""Python access to the r2ch spectral simulator and its bound certificates."""

import json as _json

from ._core import (
    ConfigError,
    Grid,
    InvalidArgument,
    PhysParams,
    RunConfig,
    certify as _certify,
    classify_regime,
    constant_C,
    deriv,
    dealias,
    direct_conv_oracle,
    energy,
    eval_f,
    helmholtz_conv,
    helmholtz_conv_dx,
    initial_state,
    k2_bound,
    lemma31_ceiling,
    parse_config,
    rhs,
    selftest,
    simulate as _simulate,
    thm41_T1_bound,
    thm42_T_bound,
    thm42_constant_N,
)


def certify(config):
    """Certificate for the initial data of ``config`` as a dict."""
    return _json.loads(_certify(config))


def simulate(config):
    """Run ``config`` and return a dict with diagnostics, final fields, certificate and verdict.

    ``certificate`` and ``verdict`` are decoded from their JSON form.
    """
    out = _simulate(config)
    out["certificate"] = _json.loads(out["certificate"])
    out["verdict"] = _json.loads(out["verdict"])
    return out


__all__ = [
    "ConfigError",
    "Grid",
    "InvalidArgument",
    "PhysParams",
    "RunConfig",
    "certify",
    "classify_regime",
    "constant_C",
    "deriv",
    "dealias",
    "direct_conv_oracle",
    "energy",
    "eval_f",
    "helmholtz_conv",
    "helmholtz_conv_dx",
    "initial_state",
    "k2_bound",
    "lemma31_ceiling",
    "parse_config",
    "rhs",
    "selftest",
    "simulate",
    "thm41_T1_bound",
    "thm42_T_bound",
    "thm42_constant_N",
]
