//! Command-line pipeline: generate panels, build coresets, fit, evaluate and
//! run the comparison experiment. Every command writes its artifacts and a
//! manifest of their hashes into an output directory.

use std::fmt;

pub mod args;
pub mod commands;
pub mod formats;

/// Invalid input, configuration or file schema. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Exit code for an error: usage, configuration and input-validation errors
/// give 2, everything else 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<tsc_core::Error>() {
            return match e {
                tsc_core::Error::InvalidArgument(_) | tsc_core::Error::InvalidData(_) | tsc_core::Error::Index(_) => {
                    EXIT_USAGE
                }
                tsc_core::Error::Singular(_) | tsc_core::Error::Numeric(_) => EXIT_RUNTIME,
            };
        }
    }
    EXIT_RUNTIME
}

/// Worker count: `TSC_THREADS` overrides the flag; 0 means automatic.
pub fn resolve_threads(flag: usize, env: Option<&str>) -> Result<usize, UsageError> {
    match env {
        Some(v) if !v.trim().is_empty() => {
            v.trim().parse().map_err(|_| UsageError(format!("TSC_THREADS must be a count, got {v:?}")))
        }
        _ => Ok(flag),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_flag() {
        assert_eq!(resolve_threads(3, None), Ok(3));
        assert_eq!(resolve_threads(3, Some("")), Ok(3));
        assert_eq!(resolve_threads(3, Some("1")), Ok(1));
        assert!(resolve_threads(3, Some("many")).is_err());
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        let usage = anyhow::Error::new(UsageError("x".into())).context("while reading");
        assert_eq!(exit_code(&usage), EXIT_USAGE);
        let index = anyhow::Error::new(tsc_core::Error::Index("dangling".into()));
        assert_eq!(exit_code(&index), EXIT_USAGE);
        let numeric = anyhow::Error::new(tsc_core::Error::Numeric("nan".into()));
        assert_eq!(exit_code(&numeric), EXIT_RUNTIME);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), EXIT_RUNTIME);
    }
}
