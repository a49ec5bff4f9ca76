"""niflang: an imperative mini-language whose nif/nwhile guards are smooth
probit decisions, plus Gaussian chain-network learning and a seeded 2-D
parking simulation harness that closes the loop."""

from .cli import data_path
from .gauss import (
    DegenerateVarianceError,
    GaussianParams,
    Interval,
    cdf,
    central_interval,
    erf,
    erfc,
    inv_cdf,
    pdf,
    sample,
)
from .gbn import (
    Gbn,
    GbnNode,
    ImproperPosteriorError,
    LearningState,
    Mgd,
    ModelFormatError,
    MotionDirection,
    MotionType,
    NonChainError,
    chain,
    extract,
    initial_state,
    learn_update,
    load_model,
    load_traces,
    precision_chain,
    precision_recursive,
    sample_commands,
    save_model,
    save_traces,
    state_from_model,
)
from .guards import CmpOp, GuardResult, branch_prob, check, diff
from .lang import (
    Assign,
    BinOp,
    BudgetExhausted,
    Const,
    Env,
    Guard,
    GuardTrace,
    HostCall,
    Nif,
    Nwhile,
    ParseError,
    RunError,
    Seq,
    Skip,
    Stmt,
    UnOp,
    VarRef,
    bind_host,
    eval_expr,
    execute,
    parse,
    run_program,
    to_source,
)
from .rng import RngStream
from .sim import (
    ParkingReport,
    Pose,
    Primitive,
    SimError,
    Spot,
    World,
    WorldConfig,
    dead_reckon,
    gen_expert_traces,
    load_world_config,
    overshoot_metric,
    run_parking,
    step_drive,
    step_turn,
    wrap_angle,
)

__version__ = "0.1.0"
