"""Metric approximation profiles of finitely generated groups."""

import json

from . import _core
from ._core import CapacityError, VerificationFailure, amplification_power, ball, growth, upper_curve

__all__ = [
    "CapacityError",
    "VerificationFailure",
    "amplification_power",
    "audit",
    "ball",
    "cyclic_z",
    "folner",
    "from_quotient",
    "growth",
    "rf_growth",
    "sofic_oracle",
    "upper_curve",
    "verify",
    "weakly_sofic_exact_z",
]


def cyclic_z(n):
    return json.loads(_core.cyclic_z(n))


def from_quotient(group, n, family="sofic"):
    return json.loads(_core.from_quotient(group, n, family))


def verify(certificate):
    if not isinstance(certificate, str):
        certificate = json.dumps(certificate)
    return json.loads(_core.verify(certificate))


def weakly_sofic_exact_z(n):
    return json.loads(_core.weakly_sofic_exact_z(n))


def sofic_oracle(group, n, k_max=6, budget=50_000_000):
    return json.loads(_core.sofic_oracle(group, n, k_max, budget))


def rf_growth(group, n, quotients="sublattices"):
    return json.loads(_core.rf_growth(group, n, quotients))


def folner(group, n, strategy="boxes", **kwargs):
    return json.loads(_core.folner(group, n, strategy, **kwargs))


def audit(curves):
    """Run the inequality audit over (quantity, csv_text, group) triples."""
    return json.loads(_core.audit(list(curves)))
