"""Capacities of boundary sets of weighted trees and of dyadic Ahlfors-regular spaces."""

from ._captree import (
    ConvergenceError,
    Space,
    Tree,
    ball_capacity_estimate,
    capacity,
    capacity_interior,
    capacity_point,
    carleson_norm,
    check_cmcap,
    check_maximal,
    check_shadow,
    conjugate_exponent,
    d_pi,
    discretize,
    dual_oracle,
    energy,
    equilibrium,
    hardy,
    make_space,
    primal_oracle,
    quadratic_oracle,
    run_cli,
    selftest,
    weight_pi_s,
)

__all__ = [
    "ConvergenceError",
    "Space",
    "Tree",
    "ball_capacity_estimate",
    "capacity",
    "capacity_interior",
    "capacity_point",
    "carleson_norm",
    "check_cmcap",
    "check_maximal",
    "check_shadow",
    "conjugate_exponent",
    "d_pi",
    "discretize",
    "dual_oracle",
    "energy",
    "equilibrium",
    "hardy",
    "make_space",
    "primal_oracle",
    "quadratic_oracle",
    "run_cli",
    "selftest",
    "weight_pi_s",
]
