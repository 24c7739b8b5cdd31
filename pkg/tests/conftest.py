"""Shared fixtures.

The solved r = 2.01 profile is the workhorse input for the solver,
verifier, and acceptance tests; solving takes a fraction of a second but
there is no reason to repeat it per test.
"""

import pytest

from nls_implosion.phase_portrait import ProfileParams
from nls_implosion.profile_solver import solve_profile, to_physical


@pytest.fixture(scope="session")
def params_r201():
    return ProfileParams(r=2.01)


@pytest.fixture(scope="session")
def profile_r201(params_r201):
    """Converged physical profile table at the reference scaling r = 2.01."""
    return to_physical(solve_profile(params_r201))
