from .testfunctions import TestFunction, bump, cosine, gaussian_bell, coordinate, constant, product, combine
from .triplet import LevyMeasureRepr, LevyTriplet, generator_apply, drifted_generator_apply
from .cutoff import CutoffFunction, build_cutoff
from .conditions import (
    difference_quotient,
    check_condition_M,
    check_condition_M_prime,
    check_condition_T,
    check_condition_T_prime,
    check_condition_M_star,
    estimate_triplet,
    apriori_bound_check,
    lp_apriori_check,
)
