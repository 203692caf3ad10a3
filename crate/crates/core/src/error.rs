use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid functions live on different spaces")]
    SpaceMismatch,

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("index {index} outside the available range 1..={available}")]
    IndexOutOfRange { index: usize, available: usize },

    /// No admissible scale below the cap; `violated` is the first coefficient
    /// index whose low-frequency integral stayed too large.
    #[error("no admissible scale s0 <= {s0_max} (lower bound {lower_bound:.3}); last candidate violated n = {violated} with |c_n| = {worst:.3e} >= {bound:.3e}")]
    ScaleSearchExhausted {
        s0_max: usize,
        lower_bound: f64,
        violated: usize,
        worst: f64,
        bound: f64,
    },

    #[error("L2 tail {achieved:.3e} at m = {m_cap} is not below the required {required:.3e}")]
    BandwidthExhausted {
        m_cap: usize,
        achieved: f64,
        required: f64,
    },

    #[error("cell of measure {measure:.3e} cannot be refined further on this grid (needs < {required:.3e})")]
    ResolutionExhausted { measure: f64, required: f64 },

    #[error("no enumeration index <= {budget} meets the greedy bound {target:.3e} at step {step} (best residual {best:.3e})")]
    EnumerationBudgetExhausted {
        step: usize,
        budget: u64,
        target: f64,
        best: f64,
    },

    /// A budget of the form `x / 2^e` is below the smallest positive double.
    #[error("{what}: budget 2^{log2:.1} underflows double precision")]
    BudgetUnderflow { what: String, log2: f64 },

    #[error("universal set of depth {depth} is too shallow at step {step}{}", required_hint(*.required))]
    UniversalSetTooShallow {
        depth: usize,
        step: usize,
        required: Option<u64>,
    },

    #[error("bundle mismatch: {0}")]
    BundleMismatch(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn required_hint(required: Option<u64>) -> String {
    match required {
        Some(k) => format!(" (first admissible index is {k})"),
        None => String::new(),
    }
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with context layers peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
