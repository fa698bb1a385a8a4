fn main() {
    std::process::exit(ubound::cli::main_with_args(std::env::args_os()));
}
