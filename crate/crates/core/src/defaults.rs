//! Every tunable default in one place. Config files and CLI flags override these.

/// Sessions whose alignment score falls strictly below this are excluded.
pub const MIN_SESSION_SCORE: f64 = 0.6;
/// Sampling temperature sent to the model.
pub const TEMPERATURE: f64 = 1.0;
/// Nucleus sampling mass sent to the model.
pub const TOP_P: f64 = 0.5;
/// Responses drawn per prompt in self-consistency runs.
pub const SAMPLES_PER_PROMPT: u32 = 3;
/// Maximum requests in flight against a backend.
pub const CONCURRENCY: usize = 4;
/// Attempts per request (first try included) on retryable failures.
pub const RETRY_ATTEMPTS: u32 = 3;
/// First retry delay in milliseconds; doubles on each further retry.
pub const RETRY_BASE_DELAY_MS: u64 = 1000;
/// Per-request timeout for live backends, in seconds.
pub const REQUEST_TIMEOUT_S: u64 = 300;
/// Fraction of synthesized mock responses that deviate from the gold code.
pub const MOCK_FLIP_RATE: f64 = 0.3;
/// Response cache directory, relative to the working directory.
pub const CACHE_DIR: &str = "cache";
