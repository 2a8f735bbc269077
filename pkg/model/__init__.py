from .tree import (
    InstanceTree,
    Node,
    PathPrefix,
    TreeBuilder,
    Violation,
    validate_structure,
    validate_supermartingale,
    sample_path,
    perturb_leaves,
    KIND_SUPERMARTINGALE,
    KIND_FEEDBACK,
)
from .transforms import normalize_costs, determinize_signaling, bayes_posterior
from .serialization import serialize, deserialize, load_tree, save_tree, TreeParseError
