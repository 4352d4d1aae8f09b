"""Finite-horizon lab for guessing sequences on the naturals.

Builds perfect splitting trees inside the binary tree, turns their
branches into filter bases with certified intersection witnesses, measures
how much a capacity-bounded guessing sequence can guess (exactly and by
seeded Monte Carlo), runs the anti-threading diagonalization, glues
structures into sums over a pair codec, and extracts selectors for finite
partitions.  Hot sweeps run on a compiled kernel core when available and
on a numpy twin otherwise; see :mod:`guesslab.backend`.
"""

__version__ = "0.1.0"

from .backend import BACKEND
from .errors import (
    CodecError,
    ConstructionError,
    DiagonalError,
    FipError,
    FuncEvalError,
    FuncSyntaxError,
    GuesslabError,
    HorizonError,
    PartitionError,
)
from .funcspec import FiberReport, FuncSpec, eval_func, fiber_census, parse_funcspec
from .guessing import (
    GuessSet,
    GuessingStructure,
    full_powerset_structure,
    guess_levels,
    random_structure,
    restrict_guessing,
    rk_transport,
    trace_census,
)
from .pseudo_tree import (
    BranchSample,
    PseudoTree,
    StageLog,
    StarSweep,
    avoid_level_extension,
    check_stage_conditions,
    construct_splitting_tree,
    frontier_branches,
    prune_thin,
    verify_splitting,
    verify_star,
)
from .filter_lab import (
    FilterBase,
    IsbellFamily,
    base_from_tree,
    check_fip,
    extend_good,
    isbell_family,
    isbell_independence,
    sky_probe,
)
from .probability import (
    BCReport,
    TrialReport,
    bc_partial_sum,
    exact_guess_measure,
    mc_guess_fraction,
    tail_term_sum,
    union_bound,
)
from .diagonal import (
    DiagonalCertificate,
    check_threadable,
    diagonalize,
    sweep_agreements,
    threshold_window,
)
from .fubini import CantorCodec, RowMajorCodec, SumStructure, build_sum, sum_guess_levels
from .selector import (
    FinitePartition,
    SelectorResult,
    extract_selector,
    selector_vs_base,
    square_partition,
)
from .windows import SetWindow
