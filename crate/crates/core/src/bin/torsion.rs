fn main() {
    std::process::exit(torsion_core::cli::main_with_args(std::env::args_os()));
}
