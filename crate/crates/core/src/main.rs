fn main() {
    std::process::exit(recoil_entanglement::cli::main_with_args(std::env::args_os()));
}
