fn main() {
    std::process::exit(freeflow::cli::main_with_args(std::env::args_os()));
}
