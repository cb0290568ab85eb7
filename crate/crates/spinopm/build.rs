fn main() {
    // ndarray's BLAS-backed kernels and ndarray-linalg's LAPACK bindings both
    // resolve against the system OpenBLAS.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
