pub mod cycles;
pub mod integrals;
pub mod reduce;
pub mod verify;

/// Prints a usage problem and returns the usage exit code.
pub fn usage_error(msg: &str) -> anyhow::Result<u8> {
    eprintln!("usage error: {msg}");
    Ok(2)
}
