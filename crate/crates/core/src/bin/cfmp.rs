fn main() {
    std::process::exit(cfmp::cli::main_with_args(std::env::args_os()));
}
