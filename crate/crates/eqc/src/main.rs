fn main() {
    std::process::exit(eqc::cli::main_with_args(std::env::args_os()));
}
