from .q_estimator import QFunction, crossing_time, inverse, inverse_value_integral
from .stopping import (
    CONTINUE,
    Stop,
    PolicyTrace,
    StoppingPolicy,
    RandomizedThreshold,
    deterministic_stopping,
    randomized_stopping,
    throw_coin,
    classic_ski_rental,
    revised_ski_rental,
    make_policy,
    run_policy,
    POLICIES,
    DETERMINISTIC_POLICIES,
    RANDOMIZED_POLICIES,
)
