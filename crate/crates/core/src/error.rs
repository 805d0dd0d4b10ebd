use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite moment `{moment}` at t = {time:e} s")]
    NonFinite { moment: &'static str, time: f64 },

    #[error("divergence: |{moment}| = {value:e} exceeds {limit:e} at t = {time:e} s")]
    Divergence {
        moment: &'static str,
        value: f64,
        limit: f64,
        time: f64,
    },

    #[error("real moment `{moment}` acquired imaginary part {imag:e} at t = {time:e} s")]
    NonRealMoment {
        moment: &'static str,
        imag: f64,
        time: f64,
    },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory record carries no Wiener increments")]
    MissingIncrements,

    #[error("sampling is not uniform at index {index}")]
    NonUniformSampling { index: usize },

    #[error("span {span:e} s is outside the record duration {duration:e} s")]
    InvalidSpan { span: f64, duration: f64 },

    #[error("spectrum has {bins} bins, at least {required} are required")]
    TooFewBins { bins: usize, required: usize },

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error(
        "inferred frequency offset {offset:e} rad/s exceeds the local-oscillator detuning {lo:e} rad/s"
    )]
    FrequencyAmbiguity { offset: f64, lo: f64 },

    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("Fock cutoff {n_max} inadequate (top-level population {population:e}); use n_max >= {required}")]
    CutoffExceeded {
        n_max: usize,
        population: f64,
        required: usize,
    },

    #[error("permutation symmetry broken: atom 1 and atom 2 marginals differ by {deviation:e}")]
    BrokenSymmetry { deviation: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
