fn main() {
    // LAPACK symbols (dsyevd_/zheevd_) come from the system OpenBLAS, which
    // bundles the reference LAPACK.  No vendored BLAS build is attempted.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
