fn main() {
    std::process::exit(hyperbolic_spectral::cli::main());
}
