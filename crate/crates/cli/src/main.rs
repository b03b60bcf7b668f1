fn main() {
    let code = spectral_transport_cli::main_with(std::env::args().collect());
    std::process::exit(code);
}
