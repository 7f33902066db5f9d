import pytest

from slowfast import builtin_reduction
from slowfast.scaling import ScalingAssignment, expand, factorize


def make_case(model_key, categories, tilde):
    """Reduced system -> eps expansion -> branch factorizations."""
    reduced = builtin_reduction(model_key)
    assignment = ScalingAssignment(categories=categories, tilde=tilde)
    eps = expand(reduced, assignment)
    return eps, factorize(eps)


@pytest.fixture(scope="session")
def tqssa_case():
    """gamma small, alpha/beta O(1): the total-QSSA configuration."""
    return make_case(
        "mm-irreversible",
        {"alpha": "one", "beta": "one", "gamma": "small"},
        {"alpha": 0.75, "beta": 1.0, "gamma": 1.0},
    )


@pytest.fixture(scope="session")
def sqssa_case():
    """beta small, alpha O(1), gamma small: slow flow starts at order 2."""
    return make_case(
        "mm-irreversible",
        {"alpha": "one", "beta": "small", "gamma": "small"},
        {"alpha": 1.0, "beta": 1.0, "gamma": 1.0},
    )


@pytest.fixture(scope="session")
def kf_case():
    """Kim-Forger configuration at the published simulation values."""
    eps_val = 5e-6
    tilde = {
        "alpha": 0.004, "beta": 1.0, "gamma": 1e-6 / eps_val,
        "rho1": 1.0, "rho2": 1e-6 / eps_val, "rho3": 1e-5 / eps_val,
        "rho4": 1e-6 / eps_val, "rho5": 1e-6 / eps_val, "rho6": 1e-6 / eps_val,
    }
    categories = {
        "alpha": "one", "beta": "one", "gamma": "small",
        "rho1": "small", "rho2": "small", "rho3": "small",
        "rho4": "small", "rho5": "small", "rho6": "small",
    }
    return make_case("kim-forger", categories, tilde)


@pytest.fixture(scope="session")
def census_irreversible():
    from slowfast.catalogue import enumerate_mm

    return enumerate_mm("irreversible")


@pytest.fixture(scope="session")
def census_reversible():
    from slowfast.catalogue import enumerate_mm

    return enumerate_mm("reversible")
