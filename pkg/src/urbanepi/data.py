"""Shipped default inputs: age distribution, household sizes, mixing matrix.

These are desk-scale stand-ins shaped after Italian census aggregates and
POLYMOD-style contact surveys; experiments can override all of them.
"""

import numpy as np

# P(children), P(young), P(adults), P(elderly)
DEFAULT_AGE_DISTRIBUTION = (0.16, 0.17, 0.44, 0.23)

# household size -> probability
DEFAULT_HOUSEHOLD_SIZES = {1: 0.33, 2: 0.27, 3: 0.19, 4: 0.15, 5: 0.06}

# Symmetric age-mixing propensities (children, young, adults, elderly).
# Strong child-child assortativity and weak elderly mixing, as in
# POLYMOD-style survey matrices; the concentration on school-age contacts
# is what gives the realistic configurations their heavy-tailed contact
# degrees.
DEFAULT_MIXING_MATRIX = np.array([
    [30.0, 3.0, 2.0, 0.3],
    [3.0,  7.0, 2.5, 0.4],
    [2.0,  2.5, 2.0, 0.8],
    [0.3,  0.4, 0.8, 0.8],
])

# calibration targets for a generic influenza-like illness
DEFAULT_R0 = 1.3
DEFAULT_MU = 1.0 / 3.0

# default mean acquaintance degree; with mean household degree ~2 this puts
# the overall mean contact mass per agent near 10
DEFAULT_KAPPA = 8.0
