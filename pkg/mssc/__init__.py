from .instance import MsscInstance, load_instance, save_instance, validate_instance
from .learners import (
    BUY,
    InvalidActionError,
    LearnerTrace,
    RunResult,
    greedy_time_dependent,
    greedy_buying,
    buying_reduction,
    time_dependent_relaxation,
    run_time_dependent,
    run_buying,
    make_learner,
)
from .oracles import opt_time_dependent, opt_buying, value_tree, StateSpaceTooLarge
from .adversary import adversarial_feedback_td, adversarial_feedback_buying, run_adversary
