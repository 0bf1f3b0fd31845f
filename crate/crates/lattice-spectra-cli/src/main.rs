fn main() {
    std::process::exit(lattice_spectra_cli::run());
}
