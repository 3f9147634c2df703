"""Statistical model checking of stochastic timed component models, bundled
with executable blockchain attack scenarios (DNS cache poisoning and two
double-spend races) and a CLI for probability-vs-time experiments."""

from .errors import (
    BadIntervalError,
    BadParameterError,
    ChainSmcError,
    DatasetError,
    DatasetParseError,
    DivisionByZeroError,
    EmptyFileError,
    EmptySupportError,
    ExprTypeError,
    FormulaSyntaxError,
    InconclusiveTraceError,
    ModelValidationError,
    NegativeValueError,
    StepLimitExceededError,
    UnboundNameError,
    UnknownVariableError,
)
from .expr import (
    BOOL,
    NUM,
    BinOp,
    Expr,
    Lit,
    Neg,
    Not,
    Var,
    eval_expr,
    infer_type,
    lit,
    referenced_names,
    var,
)
from .stochastics import (
    Bernoulli,
    Dataset,
    DiscreteFinite,
    Distribution,
    Empirical,
    ReliabilityPolicy,
    RngStream,
    StateBernoulli,
    Uniform,
    ValidationReport,
    load_dataset,
    rng_stream,
    sample,
    validate_dataset,
)
from .kernel import (
    QUIESCENT,
    AtomicComponent,
    CompoundModel,
    Connector,
    ObservationPoint,
    PriorityRule,
    Trace,
    TransitionDef,
    VariableDef,
    build_compound,
    enabled_interactions,
    initial_state,
    read_trace_csv,
    simulate,
    step,
    write_trace_csv,
)
from .monitor import (
    Atom,
    AndF,
    Finally,
    Formula,
    Globally,
    NotF,
    OrF,
    Truth,
    Until,
    Verdict,
    atom_names,
    evaluate,
    parse_formula,
    required_horizon,
)
from .smc import (
    Decision,
    EstimationRequest,
    EstimationResult,
    HypothesisRequest,
    HypothesisResult,
    estimate,
    hypothesis_test,
    run_traces,
    sample_size,
)
from .attacks import (
    AttackModelBundle,
    DnsMitigation,
    DnsParams,
    DoubleSpendParams,
    build_consensus_model,
    build_dns_model,
    build_mempool_model,
    collision_probability,
    negligible_bound,
)

__version__ = "0.1.0"
