//! Command-line front end for the lattice-spectra library.

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    eprintln!("not yet wired");
    1
}
